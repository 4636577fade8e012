// SPDX-License-Identifier: Apache-2.0
//
// nfisac: near-field ISAC symbol-level precoding and sensing toolkit
// Copyright (C) 2026 The nfisac authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "nfisac/sensing_sim.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace nfisac
{
    EchoBlock generate_echo(const std::vector<Target> &targets, const ArrayConfig &cfg, const CMatrix &X,
                            double noise_variance, std::uint64_t seed)
    {
        cfg.validate();
        if (X.rows() != cfg.n_elements)
            throw DomainError("generate_echo: X must have N rows");
        if (!(noise_variance >= 0.0))
            throw DomainError("generate_echo: noise variance must be >= 0");

        EchoBlock e;
        e.noise_variance = noise_variance;
        e.seed = seed;
        e.samples = CMatrix::Zero(X.rows(), X.cols());
        for (const Target &t : targets)
        {
            const CVector a = steering_vector(t.location, cfg, SteeringKind::receive).entries;
            const CVector v = steering_vector(t.location, cfg, SteeringKind::transmit).entries;
            e.samples.noalias() += t.reflectivity * a * (v.transpose() * X);
        }
        if (noise_variance > 0.0)
        {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> g(0.0, std::sqrt(0.5 * noise_variance));
            for (Eigen::Index s = 0; s < e.samples.cols(); ++s)
                for (Eigen::Index n = 0; n < e.samples.rows(); ++n)
                {
                    const double re = g(rng);
                    const double im = g(rng);
                    e.samples(n, s) += cplx(re, im);
                }
        }
        return e;
    }

    EchoBlock generate_echo(const Scene &scene, const CMatrix &X, std::uint64_t seed)
    {
        return generate_echo(scene.targets, scene.array, X, scene.noise_radar, seed);
    }

    CMatrix sample_covariance(const CMatrix &Y)
    {
        if (Y.cols() < 1)
            throw DomainError("sample_covariance: at least one snapshot is required");
        CMatrix R = Y * Y.adjoint() / double(Y.cols());
        return 0.5 * (R + R.adjoint());
    }

    NoiseSubspace noise_subspace(const CMatrix &R, int n_targets)
    {
        const Eigen::Index N = R.rows();
        if (R.cols() != N)
            throw DomainError("noise_subspace: covariance must be square");
        if (n_targets < 1 || n_targets >= N)
            throw DomainError("noise_subspace: need 1 <= L < N");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (R + R.adjoint()));
        if (es.info() != Eigen::Success)
            throw DomainError("noise_subspace: eigendecomposition failed");

        NoiseSubspace out;
        out.eigenvalues = es.eigenvalues();
        const Eigen::Index dim = N - n_targets;
        out.basis = es.eigenvectors().leftCols(dim);
        const double top = std::max(std::abs(out.eigenvalues(N - 1)), std::abs(out.eigenvalues(0)));
        const double gap = out.eigenvalues(dim) - out.eigenvalues(dim - 1);
        out.degenerate = !(top > 0.0) || gap <= 1e-10 * top;
        return out;
    }

    std::vector<double> linspace(double lo, double hi, int count)
    {
        if (count < 1)
            throw DomainError("linspace: count must be >= 1");
        std::vector<double> v(static_cast<size_t>(count));
        if (count == 1)
        {
            v[0] = lo;
            return v;
        }
        const double step = (hi - lo) / double(count - 1);
        for (int i = 0; i < count; ++i)
            v[static_cast<size_t>(i)] = lo + step * double(i);
        v.back() = hi;
        return v;
    }

    MusicGrid music_spectrum(const CMatrix &Un, const ArrayConfig &cfg, const std::vector<double> &angles,
                             const std::vector<double> &ranges, double cap)
    {
        cfg.validate();
        if (angles.empty() || ranges.empty())
            throw DomainError("music_spectrum: grid must be nonempty");
        if (Un.rows() != cfg.n_elements)
            throw DomainError("music_spectrum: subspace must have N rows");
        if (!std::is_sorted(angles.begin(), angles.end()) || !std::is_sorted(ranges.begin(), ranges.end()))
            throw DomainError("music_spectrum: grid axes must be ascending");

        MusicGrid g;
        g.angles = angles;
        g.ranges = ranges;
        g.spectrum.resize(static_cast<Eigen::Index>(angles.size()), static_cast<Eigen::Index>(ranges.size()));
        const CMatrix UnH = Un.adjoint();
        for (size_t i = 0; i < angles.size(); ++i)
            for (size_t j = 0; j < ranges.size(); ++j)
            {
                const CVector a =
                    steering_vector(PolarPoint{ranges[j], angles[i]}, cfg, SteeringKind::receive).entries;
                const double denom = (UnH * a).squaredNorm();
                g.spectrum(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    denom < 1e-12 ? cap : std::min(1.0 / denom, cap);
            }
        return g;
    }

    PeakList find_peaks(const MusicGrid &g, int count)
    {
        const Eigen::Index na = g.spectrum.rows(), nr = g.spectrum.cols();
        if (count < 1 || na * nr <= count)
            throw DomainError("find_peaks: grid must have more cells than requested peaks");

        std::vector<Peak> cand;
        for (Eigen::Index i = 0; i < na; ++i)
            for (Eigen::Index j = 0; j < nr; ++j)
            {
                const double v = g.spectrum(i, j);
                bool strict = true;
                for (Eigen::Index di = -1; di <= 1 && strict; ++di)
                    for (Eigen::Index dj = -1; dj <= 1 && strict; ++dj)
                    {
                        if (di == 0 && dj == 0)
                            continue;
                        const Eigen::Index ii = i + di, jj = j + dj;
                        if (ii < 0 || jj < 0 || ii >= na || jj >= nr)
                            continue;
                        strict = v > g.spectrum(ii, jj);
                    }
                if (strict)
                    cand.push_back(Peak{static_cast<int>(i), static_cast<int>(j), g.angles[static_cast<size_t>(i)],
                                        g.ranges[static_cast<size_t>(j)], v});
            }
        std::stable_sort(cand.begin(), cand.end(), [](const Peak &a, const Peak &b) { return a.value > b.value; });

        PeakList out;
        out.shortfall = static_cast<int>(cand.size()) < count;
        cand.resize(std::min(cand.size(), static_cast<size_t>(count)));
        out.peaks = std::move(cand);
        return out;
    }

    EstimationError estimation_error(const std::vector<PolarPoint> &estimates, const std::vector<PolarPoint> &truths)
    {
        if (estimates.size() != truths.size())
            throw DomainError("estimation_error: estimate and truth counts differ");
        const int L = static_cast<int>(truths.size());
        if (L > 8)
            throw DomainError("estimation_error: at most 8 targets");

        std::vector<int> perm(static_cast<size_t>(L));
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<int> best = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do
        {
            double cost = 0.0;
            for (int e = 0; e < L; ++e)
            {
                const PolarPoint &est = estimates[static_cast<size_t>(e)];
                const PolarPoint &tru = truths[static_cast<size_t>(perm[static_cast<size_t>(e)])];
                cost += std::abs(est.angle - tru.angle) / kPi + std::abs(est.range - tru.range) / tru.range;
            }
            if (cost < best_cost)
            {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        EstimationError out;
        out.assignment = best;
        out.angle_error = RVector::Zero(L);
        out.range_error = RVector::Zero(L);
        for (int e = 0; e < L; ++e)
        {
            const int t = best[static_cast<size_t>(e)];
            out.angle_error(t) = estimates[static_cast<size_t>(e)].angle - truths[static_cast<size_t>(t)].angle;
            out.range_error(t) = estimates[static_cast<size_t>(e)].range - truths[static_cast<size_t>(t)].range;
        }
        if (L > 0)
        {
            out.rmse_angle = std::sqrt(out.angle_error.squaredNorm() / L);
            out.rmse_range = std::sqrt(out.range_error.squaredNorm() / L);
        }
        return out;
    }

} // namespace nfisac
