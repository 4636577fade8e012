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

#ifndef NFISAC_SENSING_SIM_HPP
#define NFISAC_SENSING_SIM_HPP

#include "nfisac/designer.hpp"

#include <cstdint>
#include <vector>

namespace nfisac
{
    // Radar echo Y = sum_l b_l a_l v_l^T X + Z
    struct EchoBlock
    {
        CMatrix samples; // N x S
        double noise_variance = 0.0;
        std::uint64_t seed = 0;
    };

    EchoBlock generate_echo(const std::vector<Target> &targets, const ArrayConfig &cfg, const CMatrix &X,
                            double noise_variance, std::uint64_t seed);
    EchoBlock generate_echo(const Scene &scene, const CMatrix &X, std::uint64_t seed);

    // (1/S) Y Y^H
    CMatrix sample_covariance(const CMatrix &Y);
    inline CMatrix sample_covariance(const EchoBlock &e) { return sample_covariance(e.samples); }

    struct NoiseSubspace
    {
        CMatrix basis;       // N x (N - L), orthonormal columns
        RVector eigenvalues; // ascending, all N
        bool degenerate = false; // no usable gap between the noise and the signal eigenvalues
    };

    NoiseSubspace noise_subspace(const CMatrix &R, int n_targets);

    struct MusicGrid
    {
        std::vector<double> angles; // ascending [rad]
        std::vector<double> ranges; // ascending [m]
        RMatrix spectrum;           // angles x ranges
    };

    std::vector<double> linspace(double lo, double hi, int count);

    inline constexpr double kSpectrumCap = 1e12;

    // 1 / (a^H Un Un^H a) with the receive steering vector a, clamped to cap
    MusicGrid music_spectrum(const CMatrix &Un, const ArrayConfig &cfg, const std::vector<double> &angles,
                             const std::vector<double> &ranges, double cap = kSpectrumCap);

    struct Peak
    {
        int angle_index = 0;
        int range_index = 0;
        double angle = 0.0;
        double range = 0.0;
        double value = 0.0;
    };

    struct PeakList
    {
        std::vector<Peak> peaks;
        bool shortfall = false; // fewer strict local maxima than requested
    };

    // Strict local maxima over the 8-neighbourhood, strongest first.
    // Equal values keep the lower angle index, then the lower range index.
    PeakList find_peaks(const MusicGrid &g, int count);

    struct EstimationError
    {
        std::vector<int> assignment; // truth index of every estimate
        RVector angle_error;         // estimate - truth [rad], by truth index
        RVector range_error;         // estimate - truth [m], by truth index
        double rmse_angle = 0.0;
        double rmse_range = 0.0;
    };

    // Pairing cost |d theta| / pi + |d d| / d_truth, minimized over all permutations
    EstimationError estimation_error(const std::vector<PolarPoint> &estimates, const std::vector<PolarPoint> &truths);

} // namespace nfisac

#endif
