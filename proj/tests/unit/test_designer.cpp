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

#include "nfisac/designer.hpp"
#include "nfisac/fisher.hpp"

#include <doctest.h>

#include <limits>

using namespace nfisac;

namespace
{
    Scene small_scene(int N, int S, int K, double power = 1.0, double comm_noise = 0.5)
    {
        Scene sc;
        sc.array = ArrayConfig::from_frequency(N, 300e6);
        for (int k = 0; k < K; ++k)
            sc.users.push_back(PolarPoint{4.0 + 2.0 * k, deg_to_rad(70.0 + 35.0 * k)});
        sc.targets.push_back(Target{PolarPoint{3.0, deg_to_rad(95.0)}, cplx(1.0, 0.0)});
        sc.symbol_count = S;
        sc.constellation.order = 4;
        sc.symbol_phases = Scene::random_phases(K, S, sc.constellation, 7);
        sc.power_budget = power;
        sc.noise_comm = comm_noise;
        sc.noise_radar = 1e-6;
        return sc;
    }

    int linear_rows(const ConicProgram &p)
    {
        int n = 0;
        for (const Cone &c : p.cones)
            if (c.kind == Cone::Kind::nonnegative)
                n += c.size;
        return n;
    }

    std::vector<int> psd_orders(const ConicProgram &p)
    {
        std::vector<int> v;
        for (const Cone &c : p.cones)
            if (c.kind == Cone::Kind::psd)
                v.push_back(c.size);
        return v;
    }
}

TEST_CASE("P1 census matches the assembled program")
{
    const Scene sc = small_scene(3, 2, 2);
    for (double rho : {0.0, 0.4, 1.0})
        for (P1Form form : {P1Form::aggregated, P1Form::per_symbol})
        {
            DesignOptions opt;
            opt.form = form;
            const P1Problem p = assemble_p1(sc, rho, Normalizers{}, opt);
            const P1Census c = p1_census(3, 2, 2, 1, rho, form);
            CHECK(p.program.n_dual() == c.variables);
            CHECK(linear_rows(p.program) == c.linear_rows);
            CHECK(psd_orders(p.program) == c.psd_orders);
        }
    CHECK(p1_census(16, 24, 2, 2, 0.5, P1Form::aggregated).variables == 256 + 768 + 1 + 8);
    CHECK(p1_census(16, 24, 2, 2, 0.5, P1Form::aggregated).linear_rows == 97);
}

TEST_CASE("single user SLP reaches the matched filter bound")
{
    // One user: the optimum sends every symbol along h^* with full power. The received
    // point sqrt(P) |h| e^{j phi} sits sqrt(P) |h| sin(psi) away from the sector edges.
    for (int N : {1, 4})
    {
        const Scene sc = small_scene(N, 3, 1, 2.0, 0.3);
        const CVector h = sc.user_channels().col(0);
        const double bound =
            std::sqrt(sc.power_budget) * h.norm() * std::sin(kPi / 4.0) / std::sqrt(sc.noise_comm);

        const SlpDesign d = design_slp(sc, 0.0, Normalizers{}, DesignOptions{});
        CHECK(d.gamma_prime == doctest::Approx(bound).epsilon(1e-6));
        CHECK(d.gamma_prime_achieved == doctest::Approx(bound).epsilon(1e-6));
        CHECK(d.power <= sc.power_budget * (1.0 + 1e-7));

        CMatrix X(N, 3);
        for (int s = 0; s < 3; ++s)
            X.col(s) = std::sqrt(sc.power_budget) * h.conjugate() / h.norm() *
                       std::polar(1.0, sc.symbol_phases(0, s));
        CHECK(achieved_gamma_prime(sc, X) == doctest::Approx(bound).epsilon(1e-12));
    }
}

TEST_CASE("single user BLP ceiling is the MRT SINR")
{
    const Scene sc = small_scene(4, 4, 1, 1.5, 0.2);
    const CVector h = sc.user_channels().col(0);
    const double mrt = sc.power_budget * h.squaredNorm() / sc.noise_comm;
    const BlpCeiling c = blp_sinr_ceiling(sc);
    CHECK(c.gamma_max == doctest::Approx(mrt).epsilon(1e-6));
    CHECK(min_sinr(sc, c.beams) == doctest::Approx(mrt).epsilon(1e-5));
}

TEST_CASE("BLP ceiling beams meet the SINR rows")
{
    // Two users: the relaxed beams at gamma_max must satisfy every SINR row,
    // and a probe above the Cauchy-Schwarz bound must be infeasible.
    const Scene sc = small_scene(4, 4, 2);
    const BlpCeiling c = blp_sinr_ceiling(sc);
    REQUIRE(c.gamma_max > 0.0);
    CHECK(min_sinr(sc, c.beams) >= c.gamma_max * (1.0 - 1e-5));
    CHECK(c.gamma_max <= c.upper_bound * (1.0 + 1e-9));
    double cs = std::numeric_limits<double>::infinity();
    const CMatrix H = sc.user_channels();
    for (int k = 0; k < 2; ++k)
        cs = std::min(cs, sc.power_budget * H.col(k).squaredNorm() / sc.noise_comm);
    CHECK(c.gamma_max <= cs * (1.0 + 1e-7));
}

TEST_CASE("sensing-only SLP and BLP share the covariance optimum")
{
    // At rho = 1 the CI rows admit X = 0, so both relaxations minimize tr CRB(R) over tr R <= P.
    Scene sc = small_scene(4, 2, 1, 1.0, 0.5);
    sc.targets.push_back(Target{PolarPoint{6.0, deg_to_rad(60.0)}, cplx(0.5, -0.2)});
    DesignOptions opt;
    opt.tighten = false;
    const SlpDesign slp = design_slp(sc, 1.0, Normalizers{}, opt);
    const BlpContext ctx = blp_context(sc, opt);
    REQUIRE(slp.crb_bounds.size() == 8);
    CHECK(slp.crb_bounds.sum() == doctest::Approx(ctx.normalizers.sensing).epsilon(1e-4));

    // and no design beats the isotropic covariance by increasing the trace CRB
    const RMatrix Fi = FimModel(sc.targets, sc.array, sc.noise_radar, sc.symbol_count)
                           .evaluate(sc.power_budget / 4.0 * CMatrix::Identity(4, 4));
    CHECK(slp.crb_bounds.sum() <= crb_diagonal(Fi).sum() * (1.0 + 1e-6));
}

TEST_CASE("beampattern of the isotropic covariance")
{
    // v^T (P I / N) v^* = P |v|^2 / N = P beta
    const ArrayConfig cfg = ArrayConfig::from_frequency(8, 150e6);
    const double P = 2.5;
    std::vector<PolarPoint> grid{{1.0, 0.3}, {4.0, kPi / 2.0}, {12.0, 2.5}};
    const CMatrix R = (P / 8.0) * CMatrix::Identity(8, 8);
    const RVector abs_p = beampattern(R, cfg, grid);
    const RVector gain = gain_pattern(R, cfg, grid);
    for (size_t i = 0; i < grid.size(); ++i)
    {
        CHECK(abs_p(Eigen::Index(i)) == doctest::Approx(P * path_loss(grid[i], cfg)).epsilon(1e-12));
        CHECK(gain(Eigen::Index(i)) == doctest::Approx(P).epsilon(1e-12));
    }

    // a rank-one covariance focused on p peaks there among grid points
    const CVector v = steering_vector(grid[1], cfg).entries;
    const CMatrix Rf = v.conjugate() * v.transpose() / v.squaredNorm();
    const RVector g = gain_pattern(Rf, cfg, grid);
    CHECK(g(1) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(g(0) < g(1));
    CHECK(g(2) < g(1));
    CHECK_THROWS_AS(beampattern(CMatrix::Identity(3, 3), cfg, grid), DomainError);
}

TEST_CASE("orthogonal data matrix")
{
    const CMatrix D = orthogonal_data_matrix(3, 8);
    CHECK(((D * D.adjoint()) / 8.0 - CMatrix::Identity(3, 3)).norm() < 1e-13);
    for (int s = 0; s < 8; ++s)
        CHECK(std::abs(D(0, s) - cplx(1.0, 0.0)) < 1e-15);
}

TEST_CASE("design input checks")
{
    const Scene sc = small_scene(3, 2, 1);
    CHECK_THROWS_AS(design_slp(sc, -0.1, Normalizers{}), DomainError);
    CHECK_THROWS_AS(design_slp(sc, 1.5, Normalizers{}), DomainError);
    DesignOptions opt;
    opt.max_ns = 4;
    CHECK_THROWS_AS(assemble_p1(sc, 0.5, Normalizers{}, opt), DomainError);
    Scene bad = sc;
    bad.symbol_phases.resize(1, 5);
    CHECK_THROWS_AS(bad.validate(), DomainError);
}
