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

// Acceptance run: one PASS/FAIL line per criterion, followed by the supporting numbers.
// Usage: nfisac_acceptance <path to the nfisac tool> <scratch directory>

#include "nfisac/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

using namespace nfisac;
namespace fs = std::filesystem;

namespace
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

    struct Verdict
    {
        int id;
        bool pass;
        std::string summary;
        std::vector<std::string> details;
    };

    std::string num(double v, int digits = 4)
    {
        std::ostringstream os;
        os << std::setprecision(digits) << v;
        return os.str();
    }

    double seconds_since(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    CMatrix random_matrix(int rows, int cols, std::mt19937_64 &rng)
    {
        std::normal_distribution<double> g;
        CMatrix X(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i)
                X(i, j) = cplx(g(rng), g(rng));
        return X;
    }

    std::vector<Target> random_targets(int L, std::mt19937_64 &rng)
    {
        std::uniform_real_distribution<double> ud(2.0, 50.0), ua(0.15 * kPi, 0.85 * kPi), ub(-1.0, 1.0);
        std::vector<Target> t;
        for (int l = 0; l < L; ++l)
            t.push_back(Target{PolarPoint{ud(rng), ua(rng)}, cplx(ub(rng) + 1.5, ub(rng))});
        return t;
    }

    double worst_residual(const ResidualReport &r) { return std::max({r.primal(), r.dual(), r.gap}); }

    // ------------------------------------------------------------------ 1

    Verdict fim_equivalence()
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(101);
        std::uniform_int_distribution<int> un(2, 16), us(1, 32), ul(1, 3);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial)
        {
            const int N = un(rng), S = us(rng), L = ul(rng);
            const ArrayConfig cfg = ArrayConfig::from_frequency(N, 120e6);
            const auto targets = random_targets(L, rng);
            const CMatrix X = random_matrix(N, S, rng);
            const RMatrix Fd = fim_direct(targets, X, 0.7, cfg).entries;
            const RMatrix Fc = fim_from_covariance(targets, X * X.adjoint() / double(S), S, 0.7, cfg).entries;
            worst = std::max(worst, (Fd - Fc).norm() / Fd.norm());
        }
        const double t = seconds_since(t0);
        return {1, worst < 1e-8 && t < 10.0,
                "worst relative Frobenius error " + num(worst) + " over 50 scenes in " + num(t, 3) + " s",
                {}};
    }

    // ------------------------------------------------------------------ 2

    Verdict derivative_check()
    {
        std::mt19937_64 rng(202);
        std::uniform_real_distribution<double> ud(2.0, 50.0), ua(0.05 * kPi, 0.95 * kPi);
        const ArrayConfig cfg = ArrayConfig::from_frequency(16, 120e6);
        double worst_steer = 0.0;
        for (int i = 0; i < 100; ++i)
        {
            const PolarPoint p{ud(rng), ua(rng)};
            for (Wrt w : {Wrt::angle, Wrt::range})
            {
                const double x = w == Wrt::angle ? p.angle : p.range;
                const double h = w == Wrt::angle ? 1e-6 * x : std::min(1e-6 * x, 1e-4 * cfg.wavelength / (2.0 * kPi));
                PolarPoint lo = p, hi = p;
                (w == Wrt::angle ? lo.angle : lo.range) -= h;
                (w == Wrt::angle ? hi.angle : hi.range) += h;
                const CVector fd = (steering_vector(hi, cfg).entries - steering_vector(lo, cfg).entries) / (2.0 * h);
                const CVector an = steering_derivative(p, cfg, w);
                worst_steer = std::max(worst_steer, (an - fd).norm() / an.norm());
            }
        }

        // mean derivatives of the echo on random two-target scenes
        double worst_mean = 0.0;
        for (int trial = 0; trial < 10; ++trial)
        {
            const auto targets = random_targets(2, rng);
            const CMatrix X = random_matrix(16, 8, rng);
            const MeanDerivatives md = mean_and_derivatives(targets, X, cfg);
            const RVector zeta = ParameterVector::from_targets(targets).stacked();
            auto mean_at = [&](const RVector &z)
            {
                std::vector<Target> t = targets;
                for (int l = 0; l < 2; ++l)
                {
                    t[l].location.angle = z(l);
                    t[l].location.range = z(2 + l);
                    t[l].reflectivity = cplx(z(4 + l), z(6 + l));
                }
                return mean_and_derivatives(t, X, cfg).mean;
            };
            for (int i = 0; i < 8; ++i)
            {
                double h = 1e-6 * std::max(1.0, std::abs(zeta(i)));
                if (i >= 2 && i < 4)
                    h = std::min(h, 1e-4 * cfg.wavelength / (2.0 * kPi));
                RVector zp = zeta, zm = zeta;
                zp(i) += h;
                zm(i) -= h;
                const CMatrix fd = (mean_at(zp) - mean_at(zm)) / (2.0 * h);
                worst_mean = std::max(worst_mean, (md.derivatives[size_t(i)] - fd).norm() / md.derivatives[size_t(i)].norm());
            }
        }
        return {2, worst_steer < 1e-6 && worst_mean < 1e-6,
                "worst relative error: steering " + num(worst_steer) + " (200 derivatives), echo mean " +
                    num(worst_mean) + " (80 derivatives)",
                {}};
    }

    // ------------------------------------------------------------------ 3

    struct MicroResult
    {
        std::string name;
        double value, exact;
    };

    std::vector<MicroResult> micro_sdps()
    {
        const SolverOptions tight{1e-10, 200, false};
        std::vector<MicroResult> out;
        {
            // maximize -x subject to x >= 3
            ProgramBuilder pb;
            const int x = pb.add_variable(-1.0);
            pb.add_nonneg_row(-3.0, {{x, 1.0}});
            const ConicSolution s = solve(pb.build(), tight);
            out.push_back({"x >= 3", s.status == SolveStatus::optimal ? s.dual(x) : kNan, 3.0});
        }
        {
            // largest off-diagonal of a unit-diagonal 2 x 2 PSD matrix
            ProgramBuilder pb;
            const int t = pb.add_variable(1.0);
            const int blk = pb.add_psd_block(2);
            pb.add_psd_constant(blk, 0, 0, 1.0);
            pb.add_psd_constant(blk, 1, 1, 1.0);
            pb.add_psd_coefficient(blk, t, 0, 1, 1.0);
            const ConicSolution s = solve(pb.build(), tight);
            out.push_back({"unit-diagonal correlation", s.status == SolveStatus::optimal ? s.dual(t) : kNan, 1.0});
        }
        {
            // minimum trace of X with X - I PSD, order 3
            const int n = 3;
            ProgramBuilder pb;
            const int blk = pb.add_psd_block(n);
            for (int q = 0; q < n; ++q)
                for (int p = 0; p <= q; ++p)
                    pb.add_psd_coefficient(blk, pb.add_variable(p == q ? -1.0 : 0.0), p, q, 1.0);
            for (int i = 0; i < n; ++i)
                pb.add_psd_constant(blk, i, i, -1.0);
            const ConicSolution s = solve(pb.build(), tight);
            out.push_back({"min tr X, X >= I", s.status == SolveStatus::optimal ? -s.dual_objective : kNan, 3.0});
        }
        return out;
    }

    Verdict certification(const std::vector<TradeoffPoint> &sweep, const std::vector<ResidualReport> &extra)
    {
        double worst = 0.0;
        int count = 0;
        for (const TradeoffPoint &p : sweep)
            for (const ResidualReport &r : p.certificates)
            {
                worst = std::max(worst, worst_residual(r));
                ++count;
            }
        for (const ResidualReport &r : extra)
        {
            worst = std::max(worst, worst_residual(r));
            ++count;
        }
        bool pass = worst < 1e-6;
        Verdict v{3, false, "", {}};
        double micro_worst = 0.0;
        for (const MicroResult &m : micro_sdps())
        {
            const double err = std::abs(m.value - m.exact);
            micro_worst = std::isnan(err) ? kInf : std::max(micro_worst, err);
            v.details.push_back("micro SDP '" + m.name + "': " + num(m.value, 12) + " (exact " + num(m.exact) + ")");
        }
        pass = pass && micro_worst <= 1e-7;
        v.pass = pass;
        v.summary = "worst certified residual " + num(worst) + " over " + std::to_string(count) +
                    " design solves, micro SDP worst error " + num(micro_worst);
        return v;
    }

    // ------------------------------------------------------------------ 4

    Scene endpoint_scene(int N)
    {
        Scene sc;
        sc.array = ArrayConfig::from_frequency(N, 120e6);
        sc.users = {PolarPoint{10.0, deg_to_rad(112.5)}};
        sc.targets = {Target{PolarPoint{5.0, deg_to_rad(90.0)}, cplx(1.0, 0.0)}};
        sc.symbol_count = N == 1 ? 1 : 4;
        sc.constellation.order = 4;
        sc.symbol_phases = Scene::random_phases(1, sc.symbol_count, sc.constellation, 404);
        sc.power_budget = 10.0 / 256.0;
        sc.noise_comm = 2e-5;
        sc.noise_radar = 1.0;
        return sc;
    }

    Verdict analytic_endpoint(std::vector<ResidualReport> &certs)
    {
        Verdict v{4, false, "", {}};
        const Scene s1 = endpoint_scene(1);
        const CVector h1 = s1.user_channels().col(0);
        const double g_exact =
            std::sqrt(s1.power_budget) * h1.norm() * std::sin(s1.constellation.half_angle()) / std::sqrt(s1.noise_comm);
        const SlpDesign slp = design_slp(s1, 0.0, Normalizers{}, DesignOptions{});
        certs.push_back(slp.certificate);
        const double e1 = std::abs(slp.gamma_prime - g_exact) / g_exact;

        const Scene s4 = endpoint_scene(16);
        const CVector h4 = s4.user_channels().col(0);
        const double mrt = s4.power_budget * h4.squaredNorm() / s4.noise_comm;
        const BlpDesign blp = design_blp(s4, 0.0, DesignOptions{});
        const double e2 = std::abs(blp.gamma - mrt) / mrt;
        const double e3 = std::abs(blp.gamma_achieved - mrt) / mrt;

        v.pass = e1 < 1e-5 && e2 < 1e-5 && e3 < 1e-5;
        v.summary = "SLP gamma' relative error " + num(e1) + " (N=1), BLP gamma relative error " + num(e2) +
                    " (relaxed) and " + num(e3) + " (extracted beam), N=16";
        v.details.push_back("SLP gamma' = " + num(slp.gamma_prime, 12) + ", oracle " + num(g_exact, 12));
        v.details.push_back("BLP gamma = " + num(blp.gamma, 12) + ", oracle " + num(mrt, 12));
        return v;
    }

    // ------------------------------------------------------------------ 5, 6

    const TradeoffPoint *find_point(const std::vector<TradeoffPoint> &pts, double rho, Precoder p)
    {
        for (const TradeoffPoint &t : pts)
            if (t.rho == rho && t.precoder == p)
                return &t;
        return nullptr;
    }

    std::vector<std::string> sweep_table(const std::vector<TradeoffPoint> &pts)
    {
        std::vector<std::string> rows{"rho   precoder  SINR [dB]   tr CRB        rCRB angle [deg]  rCRB range [m]"};
        for (const TradeoffPoint &p : pts)
        {
            std::ostringstream os;
            os << std::fixed << std::setprecision(1) << p.rho << "   " << to_string(p.precoder) << "       ";
            if (p.feasible)
                os << std::setw(7) << std::setprecision(3) << linear_to_db(p.sinr) << "    " << std::scientific
                   << std::setprecision(4) << p.trace_crb << "    " << std::fixed << std::setprecision(4)
                   << rad_to_deg(p.rcrb_angle) << "            " << p.rcrb_range;
            else
                os << p.status << ": " << p.message;
            rows.push_back(os.str());
        }
        return rows;
    }

    Verdict dominance(const std::vector<TradeoffPoint> &pts, const std::vector<double> &grid)
    {
        double slp_max = -kInf, blp_max = -kInf;
        for (const TradeoffPoint &p : pts)
            if (p.feasible)
                (p.precoder == Precoder::slp ? slp_max : blp_max) = std::max(
                    p.precoder == Precoder::slp ? slp_max : blp_max, p.sinr);
        int dominated = 0;
        Verdict v{5, false, "", {}};
        for (double rho : grid)
        {
            const TradeoffPoint *s = find_point(pts, rho, Precoder::slp), *b = find_point(pts, rho, Precoder::blp);
            if (!s || !b || !s->feasible || !b->feasible)
                continue;
            const bool dom = b->sinr >= s->sinr && b->trace_crb <= s->trace_crb &&
                             (b->sinr > s->sinr || b->trace_crb < s->trace_crb);
            if (dom)
            {
                ++dominated;
                v.details.push_back("rho " + num(rho, 2) + ": BLP (SINR " + num(b->sinr) + ", tr CRB " +
                                    num(b->trace_crb) + ") dominates SLP (SINR " + num(s->sinr) + ", tr CRB " +
                                    num(s->trace_crb) + ")");
            }
        }
        v.pass = slp_max >= blp_max && dominated == 0;
        v.summary = "max SINR: SLP " + num(linear_to_db(slp_max)) + " dB, BLP " + num(linear_to_db(blp_max)) +
                    " dB; SLP dominated at " + std::to_string(dominated) + " of " + std::to_string(grid.size()) +
                    " rho values";
        return v;
    }

    Verdict monotonicity(const std::vector<TradeoffPoint> &pts, const std::vector<double> &grid)
    {
        Verdict v{6, true, "", {}};
        const double tol = 1e-6;
        int violations = 0;
        for (Precoder pc : {Precoder::slp, Precoder::blp})
        {
            const TradeoffPoint *prev = nullptr;
            for (double rho : grid)
            {
                const TradeoffPoint *p = find_point(pts, rho, pc);
                if (!p || !p->feasible)
                {
                    ++violations;
                    v.details.push_back(to_string(pc) + " rho " + num(rho, 2) + ": no feasible point");
                    prev = nullptr;
                    continue;
                }
                if (prev)
                {
                    if (p->trace_crb > prev->trace_crb * (1.0 + tol) &&
                        std::isfinite(prev->trace_crb))
                    {
                        ++violations;
                        v.details.push_back(to_string(pc) + " tr CRB rises from rho " + num(prev->rho, 2) + " to " +
                                            num(rho, 2) + ": " + num(prev->trace_crb, 8) + " -> " +
                                            num(p->trace_crb, 8));
                    }
                    if (p->sinr > prev->sinr * (1.0 + tol) + tol)
                    {
                        ++violations;
                        v.details.push_back(to_string(pc) + " SINR rises from rho " + num(prev->rho, 2) + " to " +
                                            num(rho, 2) + ": " + num(prev->sinr, 8) + " -> " + num(p->sinr, 8));
                    }
                }
                prev = p;
            }
        }
        v.pass = violations == 0;
        v.summary = std::to_string(violations) + " monotonicity violations over " + std::to_string(grid.size()) +
                    " rho values and both precoders (relative tolerance 1e-6)";
        return v;
    }

    // ------------------------------------------------------------------ 7

    struct FocusReport
    {
        std::vector<Peak> peaks;
        double worst_target_db = 0.0; // min over targets of pattern(target) / global max
    };

    FocusReport focus(const RunConfig &cfg)
    {
        const Scene scene = build_scene(cfg);
        const SlpDesign d = design_slp(scene, 1.0, design_options(cfg));
        const GridAxes axes = pattern_axes(cfg, scene);
        const MusicGrid map = pattern_map(d.covariance, scene.array, axes, PatternKind::gain);
        FocusReport r;
        r.peaks = find_peaks(map, scene.n_targets()).peaks;
        const double top = map.spectrum.maxCoeff();
        std::vector<PolarPoint> pts;
        for (const Target &t : scene.targets)
            pts.push_back(t.location);
        const RVector at = gain_pattern(d.covariance, scene.array, pts);
        r.worst_target_db = linear_to_db(at.minCoeff() / top);
        return r;
    }

    Verdict beamfocusing()
    {
        Verdict v{7, false, "", {}};
        RunConfig nominal;
        nominal.pattern_angle_step_deg = 1.0;
        nominal.pattern_range_step_m = 0.25;
        const FocusReport base = focus(nominal);
        const Scene scene = build_scene(nominal);

        int matched = 0;
        for (const Peak &p : base.peaks)
        {
            bool hit = false;
            for (const Target &t : scene.targets)
                hit = hit || (std::abs(rad_to_deg(p.angle - t.location.angle)) <= 1.0 + 1e-9 &&
                              std::abs(p.range - t.location.range) <= 0.25 + 1e-9);
            matched += hit;
            v.details.push_back("nominal local maximum at " + num(rad_to_deg(p.angle)) + " deg, " + num(p.range) +
                                " m: " + (hit ? "on a target cell" : "off target"));
        }

        const double dfa10 = fraunhofer_distances(scene.array).array / 10.0;
        RunConfig far = nominal;
        far.targets = {{1.5625 * dfa10, 90.0}, {3.125 * dfa10, 90.0}};
        far.pattern_range_max_m = 1.2 * far.targets[1].range_m;
        RunConfig endfire = nominal;
        endfire.targets = {{5.0, 5.0}, {10.0, 5.0}};
        const FocusReport rf = focus(far), re = focus(endfire);
        const double drop_far = base.worst_target_db - rf.worst_target_db;
        const double drop_end = base.worst_target_db - re.worst_target_db;
        v.details.push_back("weakest target relative to the pattern maximum: nominal " + num(base.worst_target_db) +
                            " dB, beyond d_FA/10 (" + num(far.targets[0].range_m) + " m, " +
                            num(far.targets[1].range_m) + " m) " + num(rf.worst_target_db) + " dB, end-fire (5 deg) " +
                            num(re.worst_target_db) + " dB");

        const bool focus_ok = matched == static_cast<int>(base.peaks.size()) && matched == scene.n_targets();
        v.pass = focus_ok && drop_far >= 3.0 && drop_end >= 3.0;
        v.summary = std::to_string(matched) + " of " + std::to_string(scene.n_targets()) +
                    " strongest gain-pattern maxima on a target cell; degradation " + num(drop_far, 3) +
                    " dB beyond d_FA/10, " + num(drop_end, 3) + " dB near end-fire (3 dB required)";
        return v;
    }

    // ------------------------------------------------------------------ 8, 9

    Verdict music_recovery()
    {
        const RunConfig cfg; // desk scene, ASNR 10 dB, 200 x 200 grid, rho 0.5
        const Scene scene = build_scene(cfg);
        const SlpDesign d = design_slp(scene, cfg.rho, design_options(cfg));
        const GridAxes axes = music_axes(cfg, scene);
        int hits = 0, shortfall = 0;
        double ang = 0.0, rng = 0.0;
        for (int t = 0; t < 100; ++t)
        {
            const MusicOutcome m = run_music(scene, d.symbols, axes, cfg.seed + std::uint64_t(t), cfg.spectrum_cap);
            hits += m.success;
            shortfall += m.peaks.shortfall;
            if (!m.peaks.shortfall)
            {
                ang += m.error.rmse_angle * m.error.rmse_angle;
                rng += m.error.rmse_range * m.error.rmse_range;
            }
        }
        const int used = std::max(1, 100 - shortfall);
        Verdict v{8, hits >= 90, std::to_string(hits) + "/100 trials recover both targets (90 required)", {}};
        v.details.push_back("RMSE over trials with two peaks: angle " + num(rad_to_deg(std::sqrt(ang / used))) +
                            " deg, range " + num(std::sqrt(rng / used)) + " m; angle cell " +
                            num(rad_to_deg(axes.angles[1] - axes.angles[0])) + " deg");
        return v;
    }

    Verdict noiseless_music()
    {
        const RunConfig cfg;
        const Scene scene = build_scene(cfg);
        std::mt19937_64 rng(909);
        const CMatrix X = random_matrix(scene.n_elements(), scene.symbol_count, rng);
        const EchoBlock e = generate_echo(scene.targets, scene.array, X, 0.0, 1);
        const NoiseSubspace ns = noise_subspace(sample_covariance(e), scene.n_targets());
        double leak = 0.0;
        for (const Target &t : scene.targets)
        {
            const CVector a = steering_vector(t.location, scene.array, SteeringKind::receive).entries;
            leak = std::max(leak, (ns.basis.adjoint() * a).norm() / a.norm());
        }
        // 0.5 deg x 0.25 m grid through both targets
        std::vector<double> angles, ranges;
        for (int i = 0; i <= 120; ++i)
            angles.push_back(deg_to_rad(60.0 + 0.5 * i));
        for (int j = 0; j <= 73; ++j)
            ranges.push_back(1.0 + 0.25 * j);
        const MusicGrid g = music_spectrum(ns.basis, scene.array, angles, ranges);
        const PeakList pk = find_peaks(g, scene.n_targets());
        int exact = 0;
        for (const Peak &p : pk.peaks)
            for (const Target &t : scene.targets)
                exact += std::abs(p.angle - t.location.angle) < 1e-12 && std::abs(p.range - t.location.range) < 1e-12;
        return {9, leak < 1e-8 && exact == scene.n_targets() && !pk.shortfall,
                "max |Un^H a_l| / |a_l| = " + num(leak) + ", " + std::to_string(exact) + " of " +
                    std::to_string(scene.n_targets()) + " peaks on the true grid points",
                {}};
    }

    // ------------------------------------------------------------------ 10

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    Verdict reproducibility(const std::string &tool, const fs::path &scratch)
    {
        Verdict v{10, true, "", {}};
        fs::remove_all(scratch);
        fs::create_directories(scratch);
        RunConfig small;
        small.elements = 8;
        small.symbols = 8;
        small.trials = 5;
        small.music_angles = 60;
        small.music_ranges = 60;
        small.seed = 31;
        {
            std::ofstream os(scratch / "small.ini");
            os << serialize_config(small);
        }
        const std::string cfg = (scratch / "small.ini").string();
        const std::vector<std::pair<std::string, std::string>> runs = {
            {"design-slp", "design --precoder slp --rho 0.5"},
            {"design-blp", "design --precoder blp --rho 0.5"},
            {"sweep", "sweep --rho-grid 0,0.5,1"},
            {"beampattern", "beampattern --rho 1 --pattern gain"},
            {"music", "music --seed 7"},
            {"mc", "mc --trials 5"}};
        int files = 0;
        for (const auto &[name, args] : runs)
            for (int rep = 0; rep < 2; ++rep)
            {
                const fs::path out = scratch / (name + "-" + std::to_string(rep));
                const std::string cmd = "\"" + tool + "\" " + args + " --config \"" + cfg + "\" --output \"" +
                                        out.string() + "\" > \"" + (scratch / (name + ".log")).string() + "\" 2>&1";
                const int rc = std::system(cmd.c_str());
                if (rc != 0)
                {
                    v.pass = false;
                    v.details.push_back(name + ": tool exited with status " + std::to_string(rc));
                }
            }
        for (const auto &[name, args] : runs)
        {
            const fs::path a = scratch / (name + "-0"), b = scratch / (name + "-1");
            if (!fs::exists(a))
                continue;
            for (const auto &entry : fs::directory_iterator(a))
            {
                if (entry.path().extension() != ".csv")
                    continue;
                ++files;
                const fs::path other = b / entry.path().filename();
                if (!fs::exists(other) || slurp(entry.path()) != slurp(other))
                {
                    v.pass = false;
                    v.details.push_back(name + ": " + entry.path().filename().string() + " differs between runs");
                }
            }
        }
        v.pass = v.pass && files >= 7;
        v.summary = std::to_string(files) + " CSV files from " + std::to_string(runs.size()) +
                    " subcommands compared byte for byte across two runs";
        return v;
    }
}

int main(int argc, char **argv)
{
    if (argc != 3)
    {
        std::cerr << "usage: nfisac_acceptance <nfisac tool> <scratch directory>\n";
        return 2;
    }
    const std::string tool = argv[1];
    const fs::path scratch = argv[2];
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Verdict> verdicts;
    auto guarded = [&](int id, const std::function<Verdict()> &fn)
    {
        const auto t = std::chrono::steady_clock::now();
        try
        {
            verdicts.push_back(fn());
        }
        catch (const std::exception &e)
        {
            verdicts.push_back({id, false, std::string("exception: ") + e.what(), {}});
        }
        verdicts.back().details.push_back("elapsed " + num(seconds_since(t), 3) + " s");
    };

    guarded(1, fim_equivalence);
    guarded(2, derivative_check);

    std::vector<ResidualReport> extra;
    guarded(4, [&] { return analytic_endpoint(extra); });

    const RunConfig desk;
    std::vector<TradeoffPoint> sweep;
    std::string sweep_error;
    const auto ts = std::chrono::steady_clock::now();
    try
    {
        sweep = tradeoff_sweep(build_scene(desk), desk.rho_grid, design_options(desk));
    }
    catch (const std::exception &e)
    {
        sweep_error = e.what();
    }
    const std::string sweep_time = "shared desk sweep took " + num(seconds_since(ts), 3) + " s";
    guarded(3, [&] { return certification(sweep, extra); });
    guarded(5,
            [&]
            {
                if (!sweep_error.empty())
                    throw Error("sweep failed: " + sweep_error);
                Verdict v = dominance(sweep, desk.rho_grid);
                for (const std::string &row : sweep_table(sweep))
                    v.details.push_back(row);
                v.details.push_back(sweep_time);
                return v;
            });
    guarded(6,
            [&]
            {
                if (!sweep_error.empty())
                    throw Error("sweep failed: " + sweep_error);
                return monotonicity(sweep, desk.rho_grid);
            });
    guarded(7, beamfocusing);
    guarded(8, music_recovery);
    guarded(9, noiseless_music);
    guarded(10, [&] { return reproducibility(tool, scratch); });

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict &a, const Verdict &b) { return a.id < b.id; });
    int failed = 0;
    for (const Verdict &v : verdicts)
    {
        std::cout << "criterion " << v.id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.summary << "\n";
        failed += !v.pass;
    }
    std::cout << "\n";
    for (const Verdict &v : verdicts)
        for (const std::string &d : v.details)
            std::cout << "  [" << v.id << "] " << d << "\n";
    std::cout << "\n" << verdicts.size() - size_t(failed) << " of " << verdicts.size() << " criteria pass, "
              << num(seconds_since(t0), 4) << " s\n";
    return failed == 0 ? 0 : 1;
}
