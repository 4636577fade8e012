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

#include "nfisac/constructive_interference.hpp"

namespace nfisac
{
    void PskConstellation::validate() const
    {
        if (order < 2 || (order & (order - 1)) != 0)
            throw DomainError("PskConstellation: order must be a power of two >= 2");
        if (!(amplitude > 0.0))
            throw DomainError("PskConstellation: amplitude must be positive");
    }

    CVector rotate_channel(const CVector &h, double symbol_phase)
    {
        return h * std::polar(1.0, -symbol_phase);
    }

    double ci_margin_scaled(const CiConstraint &c, const CVector &x)
    {
        if (x.size() != c.rotated_channel.size())
            throw DomainError("ci_margin: dimension mismatch");
        const cplx y = c.rotated_channel.transpose() * x;
        return std::abs(y.imag()) * std::cos(c.psi) - y.real() * std::sin(c.psi) + c.gamma_sigma;
    }

    double ci_margin(const CiConstraint &c, const CVector &x)
    {
        const double cs = std::cos(c.psi);
        if (cs < 1e-12)
            return ci_margin_scaled(c, x);
        return ci_margin_scaled(c, x) / cs;
    }

    bool ci_region_contains(cplx received, double symbol_phase, const PskConstellation &psk)
    {
        const cplx z = received * std::polar(1.0, -symbol_phase);
        const double psi = psk.half_angle();
        if (z.real() < 0.0)
            return false;
        return std::abs(z.imag()) * std::cos(psi) <= z.real() * std::sin(psi);
    }

    CiRows linearized_ci_rows(const CiConstraint &c)
    {
        const Eigen::Index n = c.rotated_channel.size();
        const RVector hr = c.rotated_channel.real(), hi = c.rotated_channel.imag();
        // Re(h^T x) = hr.xr - hi.xi, Im(h^T x) = hi.xr + hr.xi
        RVector re(2 * n), im(2 * n);
        re << hr, -hi;
        im << hi, hr;
        const double cs = std::cos(c.psi), sn = std::sin(c.psi);
        CiRows rows;
        rows.plus = cs * im - sn * re;
        rows.minus = -cs * im - sn * re;
        rows.offset = c.gamma_sigma;
        return rows;
    }

} // namespace nfisac
