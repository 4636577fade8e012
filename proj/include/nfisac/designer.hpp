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

#ifndef NFISAC_DESIGNER_HPP
#define NFISAC_DESIGNER_HPP

#include "nfisac/conic.hpp"
#include "nfisac/constructive_interference.hpp"
#include "nfisac/fisher.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nfisac
{
    struct Scene
    {
        ArrayConfig array;
        std::vector<PolarPoint> users;    // K
        std::vector<Target> targets;      // L
        RMatrix symbol_phases;            // K x S, phi_ks
        double noise_radar = 1.0;         // sigma_R^2
        double noise_comm = 1.0;          // sigma_C^2
        double power_budget = 1.0;        // P_t
        int symbol_count = 1;             // S
        PskConstellation constellation;

        int n_users() const { return static_cast<int>(users.size()); }
        int n_targets() const { return static_cast<int>(targets.size()); }
        int n_elements() const { return array.n_elements; }
        CMatrix user_channels() const; // N x K, columns h_k
        void validate() const;

        // Phases drawn uniformly from the constellation with a seeded generator
        static RMatrix random_phases(int users, int symbols, const PskConstellation &psk, unsigned long long seed);
    };

    // Achieved communication metric of an SLP block: the largest gamma' with every CI margin <= 0
    double achieved_gamma_prime(const Scene &scene, const CMatrix &X);
    // Minimum over users of |h_k^T w_k|^2 / (sum_{j != k} |h_k^T w_j|^2 + sigma_C^2)
    double min_sinr(const Scene &scene, const CMatrix &W);
    // Same quantity from covariance matrices W_k
    double min_sinr(const Scene &scene, const std::vector<CMatrix> &Wk);

    enum class P1Form
    {
        aggregated, // one block [R, X / sqrt(S); X^H / sqrt(S), I_S]
        per_symbol  // one block [R_s, x_s; x_s^H, 1] per symbol
    };

    struct DesignOptions
    {
        SolverOptions solver{1e-8, 200, false};
        P1Form form = P1Form::aggregated;
        int max_ns = 4096;   // refuse N * S above this
        bool tighten = true; // second stage filling R with X X^H / S
    };

    struct Normalizers
    {
        double sensing = 1.0; // NF_R
        double comm = 1.0;    // NF_C
    };

    // Variable map of an assembled (P1). Design variables live on the dual side of the
    // conic program. Scaled quantities: R = P_t * Rhat, X = sqrt(P_t) * Xhat,
    // gamma' = gamma_scale * g, t_i = crb_scale_i * tau_i.
    struct P1Layout
    {
        int n = 0, s = 0, k = 0, l = 0;
        P1Form form = P1Form::aggregated;
        int r_first = 0;       // N^2 variables (aggregated) or S * N^2 (per symbol)
        int x_first = 0;       // 2 N S variables: Re x_s then Im x_s per symbol
        int gamma_var = -1;    // -1 when gamma' is pinned to 0
        int tau_first = -1;    // 4L variables, -1 when the sensing term is absent
        double gamma_scale = 1.0;
        RVector crb_scale;     // s_i: CRB of the isotropic design P_t I / N
        std::vector<int> schur_cones;
        std::vector<int> covariance_cones;
    };

    struct P1Problem
    {
        ConicProgram program;
        P1Layout layout;
    };

    // Closed-form size of (P1): design variables, linear rows and PSD block orders
    struct P1Census
    {
        int variables = 0;
        int linear_rows = 0;
        std::vector<int> psd_orders; // real orders after Hermitian lifting
    };
    P1Census p1_census(int n, int s, int k, int l, double rho, P1Form form);

    P1Problem assemble_p1(const Scene &scene, double rho, const Normalizers &nf, const DesignOptions &opt = {});

    struct SlpDesign
    {
        CMatrix symbols;                  // X, N x S
        std::vector<CMatrix> covariances; // R_{x_s}
        CMatrix covariance;               // R_x = (1/S) sum R_{x_s}
        double gamma_prime = 0.0;         // relaxation value
        double gamma_prime_achieved = 0.0;
        RVector crb_bounds;               // t_i (empty at rho = 0)
        RVector crb_covariance;           // diag F(R_x)^-1 (empty when singular)
        RVector crb_symbols;              // diag F(X)^-1 from the returned block (empty when singular)
        double objective = 0.0;
        double weight = 0.0;
        Normalizers normalizers;
        double relaxation_gap = 0.0;      // max_s |R_s - x_s x_s^H| / tr R_s before tightening
        double relaxation_gap_final = 0.0;
        double power = 0.0;               // (1/S) |X|_F^2
        ConicSolution solution;
        ResidualReport certificate;
        std::vector<std::string> warnings;

        double sinr() const { return gamma_prime * gamma_prime; }
    };

    Normalizers normalization_factors(const Scene &scene, const DesignOptions &opt = {});
    SlpDesign design_slp(const Scene &scene, double rho, const Normalizers &nf, const DesignOptions &opt = {});
    SlpDesign design_slp(const Scene &scene, double rho, const DesignOptions &opt = {});

    enum class P2Objective
    {
        sinr_margin, // maximize the smallest SINR-row slack (no sensing blocks)
        crb          // minimize the CRB epigraph
    };

    struct P2Layout
    {
        int n = 0, k = 0, l = 0;
        int w_first = 0;    // K * N^2 variables
        int margin_var = -1;
        int tau_first = -1;
        RVector crb_scale;
        std::vector<int> beam_cones;
    };

    struct P2Problem
    {
        ConicProgram program;
        P2Layout layout;
    };

    P2Problem assemble_p2_feasibility(const Scene &scene, double gamma, P2Objective objective,
                                      const DesignOptions &opt = {});

    struct SinrProbe
    {
        double gamma;
        bool feasible;
    };

    // Largest gamma for which the relaxed block-level problem is feasible
    struct BlpCeiling
    {
        double gamma_max = 0.0;
        double upper_bound = 0.0;
        std::vector<CMatrix> beams; // W_k attaining gamma_max
        std::vector<SinrProbe> probes;
    };
    BlpCeiling blp_sinr_ceiling(const Scene &scene, const DesignOptions &opt = {}, double rel_tol = 1e-7);

    struct BlpContext
    {
        BlpCeiling ceiling;
        Normalizers normalizers; // NF_R = minimal trace CRB at gamma = 0, NF_C = gamma_max
    };
    BlpContext blp_context(const Scene &scene, const DesignOptions &opt = {});

    struct BlpDesign
    {
        std::vector<CMatrix> covariances; // W_k
        CMatrix beamformers;              // w_k as columns, N x K
        CMatrix data_matrix;              // D, K x S
        CMatrix symbols;                  // X = W D
        double gamma = 0.0;               // SINR level of the relaxed solution
        double gamma_achieved = 0.0;      // from the extracted w_k
        double gamma_max = 0.0;
        RVector crb_bounds;               // empty at rho = 0
        RVector crb_covariance;           // diag F(sum W_k)^-1 (empty when singular)
        double objective = 0.0;
        double weight = 0.0;
        Normalizers normalizers;
        int randomization_rounds = 0;
        std::vector<SinrProbe> probes;
        std::vector<ResidualReport> certificates; // chosen solve first, then the other line-search solves
        std::vector<std::string> warnings;
    };

    // S-point DFT rows 0..K-1, so that (1/S) D D^H = I_K
    CMatrix orthogonal_data_matrix(int users, int symbols);

    BlpDesign design_blp(const Scene &scene, double rho, const BlpContext &ctx, const DesignOptions &opt = {},
                         unsigned long long seed = 1);
    BlpDesign design_blp(const Scene &scene, double rho, const DesignOptions &opt = {}, unsigned long long seed = 1);

    // v^T(p) R v^*(p) on every grid point, the mean power of v^T x_s
    RVector beampattern(const CMatrix &R, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid);
    RVector beampattern_from_symbols(const CMatrix &X, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid);
    // beampattern divided by beta(p): the array gain without the path loss
    RVector gain_pattern(const CMatrix &R, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid);

    enum class Precoder
    {
        slp,
        blp
    };
    std::string to_string(Precoder p);

    struct TradeoffPoint
    {
        double rho = 0.0;
        Precoder precoder = Precoder::slp;
        bool feasible = false;
        std::string status;
        double sinr = 0.0;            // (gamma')^2 for SLP, gamma for BLP
        double sinr_achieved = 0.0;   // from the returned symbols
        double rcrb_angle = 0.0;      // sqrt(mean_l CRB(theta_l)) at R_x
        double rcrb_range = 0.0;      // sqrt(mean_l CRB(d_l)) at R_x
        double trace_crb = 0.0;       // sum_i CRB_i at R_x
        double trace_crb_achieved = 0.0;
        std::string message;
        std::vector<ResidualReport> certificates; // every solve behind the point
    };

    std::vector<TradeoffPoint> tradeoff_sweep(const Scene &scene, const std::vector<double> &rho_grid,
                                              const DesignOptions &opt = {});

} // namespace nfisac

#endif
