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

#ifndef NFISAC_CONSTRUCTIVE_INTERFERENCE_HPP
#define NFISAC_CONSTRUCTIVE_INTERFERENCE_HPP

#include "nfisac/array_channel.hpp"

namespace nfisac
{
    // M-PSK alphabet m * exp(j 2 pi q / M). The amplitude is kept at 1 throughout.
    struct PskConstellation
    {
        int order = 4;        // M_psk, power of two >= 2
        double amplitude = 1.0;

        double half_angle() const { return kPi / order; } // psi
        double phase(int q) const { return 2.0 * kPi * q / order; }
        cplx symbol(int q) const { return std::polar(amplitude, phase(q)); }
        void validate() const;
    };

    // Per (user, symbol) constraint data. gamma_sigma is gamma' * sigma_C.
    struct CiConstraint
    {
        CVector rotated_channel; // h_ks = h_k exp(-j phi_ks)
        double psi = kPi / 4.0;
        double gamma_sigma = 0.0;

        double threshold() const { return gamma_sigma / std::cos(psi); } // infinite for BPSK
        double tan_psi() const { return std::tan(psi); }
    };

    // Two affine rows over [Re(x); Im(x)], each required to satisfy row . x + offset <= 0.
    // The rows are the constraint multiplied by cos(psi), which stays finite for BPSK.
    struct CiRows
    {
        RVector plus;  // +Im term
        RVector minus; // -Im term
        double offset = 0.0;
    };

    CVector rotate_channel(const CVector &h, double symbol_phase);
    inline CVector rotate_channel(const SteeringVector &h, double symbol_phase)
    {
        return rotate_channel(h.entries, symbol_phase);
    }

    // |Im(h~^T x)| - Re(h~^T x) tan(psi) + gamma' sigma_C / cos(psi); satisfied iff <= 0.
    // For BPSK the cos(psi)-scaled form -Re(h~^T x) + gamma' sigma_C is returned.
    double ci_margin(const CiConstraint &c, const CVector &x);

    // Margin multiplied by cos(psi): |Im| cos(psi) - Re sin(psi) + gamma' sigma_C
    double ci_margin_scaled(const CiConstraint &c, const CVector &x);

    // Sector test of the de-rotated received point. The origin counts as inside.
    bool ci_region_contains(cplx received, double symbol_phase, const PskConstellation &psk);

    CiRows linearized_ci_rows(const CiConstraint &c);

} // namespace nfisac

#endif
