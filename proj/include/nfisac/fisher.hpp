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

#ifndef NFISAC_FISHER_HPP
#define NFISAC_FISHER_HPP

#include "nfisac/array_channel.hpp"

#include <vector>

namespace nfisac
{
    // Parameter order is fixed: [angles, ranges, Re(b), Im(b)], each block of length L.
    enum class ParamKind
    {
        angle = 0,
        range = 1,
        reflect_real = 2,
        reflect_imag = 3
    };

    inline int param_index(ParamKind kind, int target, int n_targets)
    {
        return static_cast<int>(kind) * n_targets + target;
    }

    struct ParameterVector
    {
        RVector angles;
        RVector ranges;
        RVector reflect_real;
        RVector reflect_imag;

        static ParameterVector from_targets(const std::vector<Target> &targets);
        RVector stacked() const; // length 4L
    };

    struct FimMatrix
    {
        RMatrix entries;            // 4L x 4L, symmetric PSD
        double noise_variance = 1.0; // sigma_R^2
        int symbol_count = 1;        // S
    };

    // Stacked per-target response vectors (columns indexed by target)
    struct TargetGeometry
    {
        CMatrix A, A_angle, A_range; // receive vectors and derivatives, N x L
        CMatrix V, V_angle, V_range; // transmit vectors and derivatives, N x L
        CVector b;                   // reflectivities

        static TargetGeometry build(const std::vector<Target> &targets, const ArrayConfig &cfg);
        int n_targets() const { return static_cast<int>(b.size()); }
        int n_elements() const { return static_cast<int>(A.rows()); }
    };

    struct MeanDerivatives
    {
        CMatrix mean;                     // mu, N x S
        std::vector<CMatrix> derivatives; // d mu / d zeta_i, 4L entries, N x S each
    };

    MeanDerivatives mean_and_derivatives(const std::vector<Target> &targets, const CMatrix &X,
                                         const ArrayConfig &cfg);

    // [F]_ij = 2 Re tr(dmu_i^H C^-1 dmu_j) with C = sigma^2 I
    FimMatrix fim_direct(const std::vector<Target> &targets, const CMatrix &X, double noise_variance,
                         const ArrayConfig &cfg);

    // Hadamard block form, linear in the transmit covariance R_x with prefactor S.
    // Throws DomainError if R_x is not Hermitian to 1e-10 (relative).
    FimMatrix fim_from_covariance(const std::vector<Target> &targets, const CMatrix &Rx, int symbol_count,
                                  double noise_variance, const ArrayConfig &cfg);

    // Precomputed geometry for repeated covariance-form evaluations, as needed when
    // the FIM is expanded over a basis of Hermitian matrices.
    class FimModel
    {
    public:
        FimModel(const std::vector<Target> &targets, const ArrayConfig &cfg, double noise_variance,
                 int symbol_count);

        // Linear map R_x -> F (no Hermitian check)
        RMatrix evaluate(const CMatrix &Rx) const;

        int dimension() const { return 4 * geo_.n_targets(); }
        int n_elements() const { return geo_.n_elements(); }
        const TargetGeometry &geometry() const { return geo_; }

    private:
        TargetGeometry geo_;
        double scale_; // 2 S / sigma^2
        // Receive-side Gram matrices, L x L
        CMatrix g_aa_, g_a_at_, g_a_ad_, g_at_a_, g_ad_a_, g_at_at_, g_at_ad_, g_ad_ad_;
    };

    // Default ridge 1e-10 * trace(F) / dim
    double default_ridge(const RMatrix &F);

    // Diagonal of (F + ridge I)^-1. Throws DomainError with the condition number when
    // the regularized matrix is not positive definite.
    RVector crb_diagonal(const RMatrix &F, double ridge = 0.0);
    inline RVector crb_diagonal(const FimMatrix &F, double ridge = 0.0) { return crb_diagonal(F.entries, ridge); }

} // namespace nfisac

#endif
