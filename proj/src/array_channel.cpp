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

#include <sstream>

namespace nfisac
{
    ArrayConfig ArrayConfig::from_frequency(int n_elements, double carrier_frequency_hz,
                                            std::optional<double> spacing_m)
    {
        if (!(carrier_frequency_hz > 0.0))
            throw DomainError("ArrayConfig: carrier frequency must be positive");
        ArrayConfig cfg;
        cfg.n_elements = n_elements;
        cfg.wavelength = kSpeedOfLight / carrier_frequency_hz;
        cfg.spacing = spacing_m.value_or(cfg.wavelength / 2.0);
        cfg.carrier_frequency = carrier_frequency_hz;
        cfg.validate();
        return cfg;
    }

    void ArrayConfig::validate() const
    {
        if (n_elements < 1)
            throw DomainError("ArrayConfig: n_elements must be >= 1");
        if (!(wavelength > 0.0) || !std::isfinite(wavelength))
            throw DomainError("ArrayConfig: wavelength must be positive");
        if (!(spacing > 0.0) || !std::isfinite(spacing))
            throw DomainError("ArrayConfig: spacing must be positive");
        if (carrier_frequency)
        {
            double rel = std::abs(wavelength * *carrier_frequency - kSpeedOfLight) / kSpeedOfLight;
            if (rel > 1e-6)
            {
                std::ostringstream msg;
                msg << "ArrayConfig: wavelength " << wavelength << " m and carrier frequency "
                    << *carrier_frequency << " Hz are inconsistent";
                throw DomainError(msg.str());
            }
        }
    }

    void PolarPoint::validate() const
    {
        if (!(range > 0.0) || !std::isfinite(range))
            throw DomainError("PolarPoint: range must be positive");
        if (!(angle > 0.0 && angle < kPi))
            throw DomainError("PolarPoint: angle must lie in (0, pi)");
    }

    void Target::validate() const
    {
        location.validate();
        if (!(std::abs(reflectivity) > 0.0))
            throw DomainError("Target: reflectivity must be nonzero");
    }

    RVector element_offsets(const ArrayConfig &cfg)
    {
        cfg.validate();
        const int n = cfg.n_elements;
        RVector off(n);
        for (int i = 0; i < n; ++i)
            off(i) = (double(i + 1) - double(n + 1) / 2.0) * cfg.spacing;
        return off;
    }

    RVector distance_profile(const PolarPoint &p, const ArrayConfig &cfg)
    {
        p.validate();
        const RVector off = element_offsets(cfg);
        const double c = std::cos(p.angle);
        RVector r(off.size());
        for (Eigen::Index i = 0; i < off.size(); ++i)
        {
            double sq = p.range * p.range + off(i) * off(i) - 2.0 * p.range * off(i) * c;
            double ri = std::sqrt(std::max(sq, 0.0));
            if (ri <= 1e-12 * std::max(p.range, cfg.spacing))
                throw DomainError("distance_profile: point coincides with an array element");
            r(i) = ri;
        }
        return r;
    }

    double path_loss(const PolarPoint &p, const ArrayConfig &cfg)
    {
        p.validate();
        cfg.validate();
        const double lam = cfg.wavelength;
        return lam * lam * std::sin(p.angle) / (16.0 * kPi * p.range * p.range);
    }

    SteeringVector steering_vector(const PolarPoint &p, const ArrayConfig &cfg, SteeringKind kind)
    {
        const RVector r = distance_profile(p, cfg);
        const double amp = std::sqrt(path_loss(p, cfg));
        const double k = 2.0 * kPi / cfg.wavelength;
        SteeringVector sv;
        sv.kind = kind;
        sv.entries.resize(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i)
            sv.entries(i) = amp * std::polar(1.0, -k * r(i));
        return sv;
    }

    CVector steering_derivative(const PolarPoint &p, const ArrayConfig &cfg, Wrt wrt)
    {
        const RVector off = element_offsets(cfg);
        const RVector r = distance_profile(p, cfg);
        const double amp = std::sqrt(path_loss(p, cfg));
        const double k = 2.0 * kPi / cfg.wavelength;
        const double s = std::sin(p.angle), c = std::cos(p.angle);

        // d sqrt(beta) / d(angle) = sqrt(beta) cot(theta) / 2, d sqrt(beta) / d(range) = -sqrt(beta) / d
        const double damp = (wrt == Wrt::angle) ? amp * c / (2.0 * s) : -amp / p.range;

        CVector out(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i)
        {
            double dr = (wrt == Wrt::angle) ? p.range * off(i) * s / r(i)
                                            : (p.range - off(i) * c) / r(i);
            cplx ph = std::polar(1.0, -k * r(i));
            out(i) = (damp + amp * cplx(0.0, -k * dr)) * ph;
        }
        return out;
    }

    FraunhoferDistances fraunhofer_distances(const ArrayConfig &cfg)
    {
        cfg.validate();
        const double d = (cfg.n_elements - 1) * cfg.spacing;
        const double a = cfg.n_elements * cfg.spacing;
        return {2.0 * d * d / cfg.wavelength, a * a / cfg.wavelength};
    }

} // namespace nfisac
