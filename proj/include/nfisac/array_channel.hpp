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

#ifndef NFISAC_ARRAY_CHANNEL_HPP
#define NFISAC_ARRAY_CHANNEL_HPP

#include "nfisac/common.hpp"

#include <optional>

namespace nfisac
{
    // Uniform linear array along the x-axis, reference element at the origin.
    // The same geometry is used for the transmit and the receive array.
    struct ArrayConfig
    {
        int n_elements = 1;                      // N
        double wavelength = 0.01;                // lambda [m]
        double spacing = 0.005;                  // Delta [m]
        std::optional<double> carrier_frequency; // f_c [Hz], must agree with wavelength when set

        // Half-wavelength array for a given carrier frequency
        static ArrayConfig from_frequency(int n_elements, double carrier_frequency_hz,
                                          std::optional<double> spacing_m = std::nullopt);

        double frequency() const { return kSpeedOfLight / wavelength; }
        double aperture() const { return n_elements * spacing; } // N * Delta

        // Throws DomainError when an invariant is violated
        void validate() const;
    };

    // Location in the array plane. The angle is measured from the positive array
    // axis, so broadside is pi/2 and the end-fire directions are 0 and pi.
    struct PolarPoint
    {
        double range = 1.0; // d [m]
        double angle = kPi / 2.0; // theta [rad]

        void validate() const;
    };

    struct Target
    {
        PolarPoint location;
        cplx reflectivity{1.0, 0.0}; // b = bR + j bI

        void validate() const;
    };

    enum class SteeringKind
    {
        transmit, // v
        receive,  // a
        user      // h
    };

    struct SteeringVector
    {
        CVector entries;
        SteeringKind kind = SteeringKind::transmit;
    };

    enum class Wrt
    {
        angle,
        range
    };

    struct FraunhoferDistances
    {
        double classic; // 2 D^2 / lambda with D = (N-1) Delta
        double array;   // (N Delta)^2 / lambda
    };

    // Signed element offsets delta_n * Delta, delta_n = n - (N+1)/2
    RVector element_offsets(const ArrayConfig &cfg);

    // Exact distance from every element to the point
    RVector distance_profile(const PolarPoint &p, const ArrayConfig &cfg);

    // beta = lambda^2 sin(theta) / (16 pi d^2)
    double path_loss(const PolarPoint &p, const ArrayConfig &cfg);

    // sqrt(beta) * exp(-j 2 pi r_n / lambda)
    SteeringVector steering_vector(const PolarPoint &p, const ArrayConfig &cfg,
                                   SteeringKind kind = SteeringKind::transmit);

    // Entrywise analytic derivative of the steering vector, amplitude term included
    CVector steering_derivative(const PolarPoint &p, const ArrayConfig &cfg, Wrt wrt);

    FraunhoferDistances fraunhofer_distances(const ArrayConfig &cfg);

} // namespace nfisac

#endif
