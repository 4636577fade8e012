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

#include "nfisac/array_channel.hpp"

#include <doctest.h>

#include <random>

using namespace nfisac;

namespace
{
    ArrayConfig small_array(int n) { return ArrayConfig{n, 0.01, 0.005, std::nullopt}; }

    double max_rel_fd_error(const PolarPoint &p, const ArrayConfig &cfg, Wrt wrt)
    {
        const double x = wrt == Wrt::angle ? p.angle : p.range;
        // the range step is bounded by the phase rate 2 pi / lambda to keep truncation error small
        const double h = wrt == Wrt::angle ? 1e-6 * x : std::min(1e-6 * x, 1e-4 * cfg.wavelength / (2.0 * kPi));
        PolarPoint lo = p, hi = p;
        (wrt == Wrt::angle ? lo.angle : lo.range) -= h;
        (wrt == Wrt::angle ? hi.angle : hi.range) += h;
        const CVector fd = (steering_vector(hi, cfg).entries - steering_vector(lo, cfg).entries) / (2.0 * h);
        const CVector an = steering_derivative(p, cfg, wrt);
        return (an - fd).norm() / an.norm();
    }
}

TEST_CASE("element offsets are centred and evenly spaced")
{
    const RVector o3 = element_offsets(small_array(3));
    CHECK(o3(0) == doctest::Approx(-0.005));
    CHECK(o3(1) == doctest::Approx(0.0));
    CHECK(o3(2) == doctest::Approx(0.005));
    CHECK(element_offsets(small_array(1))(0) == 0.0);
    const RVector o4 = element_offsets(small_array(4));
    CHECK(o4(0) == doctest::Approx(-0.0075));
    CHECK(o4(3) == doctest::Approx(0.0075));
}

TEST_CASE("distance profile")
{
    const ArrayConfig cfg = small_array(3);
    const RVector r = distance_profile(PolarPoint{5.0, kPi / 4.0}, cfg);
    for (int n = 0; n < 3; ++n)
    {
        const double dn = (n - 1) * 0.005;
        CHECK(r(n) == doctest::Approx(std::sqrt(25.0 + dn * dn - 2.0 * 5.0 * dn * std::cos(kPi / 4.0))).epsilon(1e-14));
    }
    CHECK(r(1) == doctest::Approx(5.0));
    const RVector rb = distance_profile(PolarPoint{2.0, kPi / 2.0}, cfg);
    CHECK(rb(0) == doctest::Approx(std::sqrt(4.0 + 0.005 * 0.005)));

    SUBCASE("mirror symmetry")
    {
        const ArrayConfig c8 = small_array(8);
        const RVector a = distance_profile(PolarPoint{3.0, 0.7}, c8);
        const RVector b = distance_profile(PolarPoint{3.0, kPi - 0.7}, c8);
        CHECK((a - b.reverse()).norm() < 1e-12);
    }
    SUBCASE("point on an element is rejected")
    {
        CHECK_THROWS_AS(distance_profile(PolarPoint{0.005, 1e-9}, cfg), DomainError);
    }
}

TEST_CASE("path loss")
{
    const ArrayConfig cfg = small_array(4);
    CHECK(path_loss(PolarPoint{10.0, kPi / 2.0}, cfg) == doctest::Approx(1.9894e-8).epsilon(1e-4));
    CHECK(path_loss(PolarPoint{20.0, 1.0}, cfg) == doctest::Approx(path_loss(PolarPoint{10.0, 1.0}, cfg) / 4.0));
    CHECK(path_loss(PolarPoint{10.0, kPi / 2.0}, cfg) > path_loss(PolarPoint{10.0, 1.2}, cfg));
    CHECK_THROWS_AS(path_loss(PolarPoint{10.0, 0.0}, cfg), DomainError);
    CHECK_THROWS_AS(path_loss(PolarPoint{10.0, kPi + 0.1}, cfg), DomainError);
}

TEST_CASE("steering vector magnitude, norm and far-field limit")
{
    const ArrayConfig cfg = small_array(16);
    const PolarPoint p{3.0, 1.1};
    const SteeringVector v = steering_vector(p, cfg);
    const double beta = path_loss(p, cfg);
    for (int n = 0; n < 16; ++n)
        CHECK(std::abs(v.entries(n)) == doctest::Approx(std::sqrt(beta)).epsilon(1e-14));
    CHECK(v.entries.squaredNorm() == doctest::Approx(16 * beta).epsilon(1e-13));

    const ArrayConfig one = small_array(1);
    const cplx s = steering_vector(PolarPoint{2.0, 1.0}, one).entries(0);
    CHECK(std::abs(s - std::sqrt(path_loss(PolarPoint{2.0, 1.0}, one)) * std::polar(1.0, -2.0 * kPi * 2.0 / 0.01)) <
          1e-12);

    // far beyond the array distance the phases follow the planar first-order profile
    const double dfa = fraunhofer_distances(cfg).array;
    const PolarPoint far{150.0 * dfa, 1.0};
    const RVector r = distance_profile(far, cfg);
    const RVector off = element_offsets(cfg);
    double dev = 0.0;
    for (int n = 0; n < 16; ++n)
    {
        const double planar = far.range - off(n) * std::cos(far.angle);
        dev = std::max(dev, std::abs(2.0 * kPi * (r(n) - planar) / cfg.wavelength));
    }
    CHECK(dev < 1e-2);
}

TEST_CASE("steering derivatives match central differences on random points")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(2.0, 50.0), ua(0.1 * kPi, 0.9 * kPi);
    const ArrayConfig cfg = small_array(16);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        const PolarPoint p{ud(rng), ua(rng)};
        worst = std::max({worst, max_rel_fd_error(p, cfg, Wrt::angle), max_rel_fd_error(p, cfg, Wrt::range)});
    }
    CHECK(worst < 1e-6);

    SUBCASE("single element range derivative")
    {
        const ArrayConfig one = small_array(1);
        const double d = 4.0, th = 1.3, lam = 0.01;
        const double sb = std::sqrt(path_loss(PolarPoint{d, th}, one));
        const cplx expected =
            sb * std::polar(1.0, -2.0 * kPi * d / lam) * (-1.0 / d - kJ * 2.0 * kPi / lam);
        CHECK(std::abs(steering_derivative(PolarPoint{d, th}, one, Wrt::range)(0) - expected) < 1e-12 * std::abs(expected));
    }
    SUBCASE("centre element has no phase term in angle at broadside")
    {
        const ArrayConfig c3 = small_array(3);
        const CVector dv = steering_derivative(PolarPoint{5.0, kPi / 2.0}, c3, Wrt::angle);
        CHECK(std::abs(dv(1)) < 1e-12);
    }
}

TEST_CASE("Fraunhofer distances")
{
    const ArrayConfig two{2, 0.01, 0.005, std::nullopt};
    CHECK(fraunhofer_distances(two).classic == doctest::Approx(0.005));
    const ArrayConfig big{201, 0.01, 0.005, std::nullopt};
    CHECK(fraunhofer_distances(big).array == doctest::Approx(1.005 * 1.005 / 0.01));
    const ArrayConfig b2{402, 0.01, 0.005, std::nullopt};
    CHECK(fraunhofer_distances(b2).array / fraunhofer_distances(big).array == doctest::Approx(4.0));
}

TEST_CASE("configuration invariants")
{
    const ArrayConfig cfg = ArrayConfig::from_frequency(8, 30e9);
    CHECK(cfg.spacing == doctest::Approx(cfg.wavelength / 2.0));
    CHECK_NOTHROW(cfg.validate());
    ArrayConfig bad = cfg;
    bad.carrier_frequency = 31e9;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = cfg;
    bad.n_elements = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK_THROWS_AS((Target{PolarPoint{1.0, 1.0}, cplx(0.0, 0.0)}.validate()), DomainError);
}
