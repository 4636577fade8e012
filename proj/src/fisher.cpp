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

#include "nfisac/fisher.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace nfisac
{
    ParameterVector ParameterVector::from_targets(const std::vector<Target> &targets)
    {
        const Eigen::Index L = static_cast<Eigen::Index>(targets.size());
        ParameterVector p;
        p.angles.resize(L);
        p.ranges.resize(L);
        p.reflect_real.resize(L);
        p.reflect_imag.resize(L);
        for (Eigen::Index l = 0; l < L; ++l)
        {
            p.angles(l) = targets[l].location.angle;
            p.ranges(l) = targets[l].location.range;
            p.reflect_real(l) = targets[l].reflectivity.real();
            p.reflect_imag(l) = targets[l].reflectivity.imag();
        }
        return p;
    }

    RVector ParameterVector::stacked() const
    {
        const Eigen::Index L = angles.size();
        RVector z(4 * L);
        z << angles, ranges, reflect_real, reflect_imag;
        return z;
    }

    TargetGeometry TargetGeometry::build(const std::vector<Target> &targets, const ArrayConfig &cfg)
    {
        if (targets.empty())
            throw DomainError("TargetGeometry: at least one target is required");
        cfg.validate();
        const Eigen::Index N = cfg.n_elements, L = static_cast<Eigen::Index>(targets.size());
        TargetGeometry g;
        g.A.resize(N, L);
        g.A_angle.resize(N, L);
        g.A_range.resize(N, L);
        g.b.resize(L);
        for (Eigen::Index l = 0; l < L; ++l)
        {
            targets[l].validate();
            const PolarPoint &p = targets[l].location;
            g.A.col(l) = steering_vector(p, cfg, SteeringKind::receive).entries;
            g.A_angle.col(l) = steering_derivative(p, cfg, Wrt::angle);
            g.A_range.col(l) = steering_derivative(p, cfg, Wrt::range);
            g.b(l) = targets[l].reflectivity;
        }
        // Colocated arrays share one geometry, so v and a coincide.
        g.V = g.A;
        g.V_angle = g.A_angle;
        g.V_range = g.A_range;
        return g;
    }

    MeanDerivatives mean_and_derivatives(const std::vector<Target> &targets, const CMatrix &X,
                                         const ArrayConfig &cfg)
    {
        const TargetGeometry g = TargetGeometry::build(targets, cfg);
        if (X.rows() != g.n_elements())
            throw DomainError("mean_and_derivatives: X must have N rows");
        const int L = g.n_targets();
        const Eigen::Index S = X.cols();

        MeanDerivatives md;
        md.mean = CMatrix::Zero(g.n_elements(), S);
        md.derivatives.assign(4 * L, CMatrix::Zero(g.n_elements(), S));
        for (int l = 0; l < L; ++l)
        {
            // Row vectors v^T X and their derivatives
            const Eigen::RowVectorXcd vx = g.V.col(l).transpose() * X;
            const Eigen::RowVectorXcd vtx = g.V_angle.col(l).transpose() * X;
            const Eigen::RowVectorXcd vdx = g.V_range.col(l).transpose() * X;
            const cplx b = g.b(l);

            const CMatrix base = g.A.col(l) * vx;
            md.mean += b * base;
            md.derivatives[param_index(ParamKind::angle, l, L)] =
                b * (g.A_angle.col(l) * vx + g.A.col(l) * vtx);
            md.derivatives[param_index(ParamKind::range, l, L)] =
                b * (g.A_range.col(l) * vx + g.A.col(l) * vdx);
            md.derivatives[param_index(ParamKind::reflect_real, l, L)] = base;
            md.derivatives[param_index(ParamKind::reflect_imag, l, L)] = kJ * base;
        }
        return md;
    }

    FimMatrix fim_direct(const std::vector<Target> &targets, const CMatrix &X, double noise_variance,
                         const ArrayConfig &cfg)
    {
        if (!(noise_variance > 0.0))
            throw DomainError("fim_direct: noise variance must be positive");
        const MeanDerivatives md = mean_and_derivatives(targets, X, cfg);
        const int P = static_cast<int>(md.derivatives.size());
        RMatrix F(P, P);
        for (int i = 0; i < P; ++i)
            for (int j = i; j < P; ++j)
            {
                // Re tr(D_i^H D_j) = Re sum conj(D_i) .* D_j
                double v = 2.0 / noise_variance *
                           (md.derivatives[i].conjugate().cwiseProduct(md.derivatives[j])).sum().real();
                F(i, j) = v;
                F(j, i) = v;
            }
        return {F, noise_variance, static_cast<int>(X.cols())};
    }

    FimModel::FimModel(const std::vector<Target> &targets, const ArrayConfig &cfg, double noise_variance,
                       int symbol_count)
        : geo_(TargetGeometry::build(targets, cfg))
    {
        if (!(noise_variance > 0.0))
            throw DomainError("FimModel: noise variance must be positive");
        if (symbol_count < 1)
            throw DomainError("FimModel: symbol count must be >= 1");
        scale_ = 2.0 * symbol_count / noise_variance;
        const TargetGeometry &g = geo_;
        g_aa_ = g.A.adjoint() * g.A;
        g_a_at_ = g.A.adjoint() * g.A_angle;
        g_a_ad_ = g.A.adjoint() * g.A_range;
        g_at_a_ = g.A_angle.adjoint() * g.A;
        g_ad_a_ = g.A_range.adjoint() * g.A;
        g_at_at_ = g.A_angle.adjoint() * g.A_angle;
        g_at_ad_ = g.A_angle.adjoint() * g.A_range;
        g_ad_ad_ = g.A_range.adjoint() * g.A_range;
    }

    RMatrix FimModel::evaluate(const CMatrix &Rx) const
    {
        const TargetGeometry &g = geo_;
        const int L = g.n_targets();
        if (Rx.rows() != g.n_elements() || Rx.cols() != g.n_elements())
            throw DomainError("FimModel: covariance must be N x N");

        // Transmit-side forms K(Y, X) = Y^H R^T X, entry (l, p) = y_l^H R^T x_p
        const CMatrix Rt = Rx.transpose();
        const CMatrix RtV = Rt * g.V, RtVt = Rt * g.V_angle, RtVd = Rt * g.V_range;
        const CMatrix k_v_v = g.V.adjoint() * RtV;
        const CMatrix k_vt_v = g.V_angle.adjoint() * RtV;
        const CMatrix k_vd_v = g.V_range.adjoint() * RtV;
        const CMatrix k_v_vt = g.V.adjoint() * RtVt;
        const CMatrix k_v_vd = g.V.adjoint() * RtVd;
        const CMatrix k_vt_vt = g.V_angle.adjoint() * RtVt;
        const CMatrix k_vt_vd = g.V_angle.adjoint() * RtVd;
        const CMatrix k_vd_vd = g.V_range.adjoint() * RtVd;

        const auto Bc = g.b.conjugate().asDiagonal();
        const auto B = g.b.asDiagonal();

        // J_{alpha beta} = B^* [ (Adot_a^H Adot_b) o K(V,V) + (A^H Adot_b) o K(Vdot_a,V)
        //                      + (Adot_a^H A) o K(V,Vdot_b) + (A^H A) o K(Vdot_a,Vdot_b) ] B
        auto pair_block = [&](const CMatrix &g_dd, const CMatrix &g_ad, const CMatrix &g_da, const CMatrix &k_da_v,
                              const CMatrix &k_v_db, const CMatrix &k_da_db) -> CMatrix
        {
            CMatrix inner = g_dd.cwiseProduct(k_v_v) + g_ad.cwiseProduct(k_da_v) + g_da.cwiseProduct(k_v_db) +
                            g_aa_.cwiseProduct(k_da_db);
            return Bc * inner * B;
        };
        const CMatrix J_tt = pair_block(g_at_at_, g_a_at_, g_at_a_, k_vt_v, k_v_vt, k_vt_vt);
        const CMatrix J_td = pair_block(g_at_ad_, g_a_ad_, g_at_a_, k_vt_v, k_v_vd, k_vt_vd);
        const CMatrix J_dd = pair_block(g_ad_ad_, g_a_ad_, g_ad_a_, k_vd_v, k_v_vd, k_vd_vd);

        // J_{alpha b} = B^* [ (Adot_a^H A) o K(V,V) + (A^H A) o K(Vdot_a,V) ]
        const CMatrix J_tb = Bc * (g_at_a_.cwiseProduct(k_v_v) + g_aa_.cwiseProduct(k_vt_v));
        const CMatrix J_db = Bc * (g_ad_a_.cwiseProduct(k_v_v) + g_aa_.cwiseProduct(k_vd_v));
        const CMatrix J_bb = g_aa_.cwiseProduct(k_v_v);

        RMatrix F = RMatrix::Zero(4 * L, 4 * L);
        auto put = [&](int bi, int bj, const RMatrix &blk)
        {
            F.block(bi * L, bj * L, L, L) = blk;
            if (bi != bj)
                F.block(bj * L, bi * L, L, L) = blk.transpose();
        };
        put(0, 0, J_tt.real());
        put(0, 1, J_td.real());
        put(1, 1, J_dd.real());
        put(0, 2, J_tb.real());
        put(0, 3, -J_tb.imag());
        put(1, 2, J_db.real());
        put(1, 3, -J_db.imag());
        put(2, 2, J_bb.real());
        put(2, 3, -J_bb.imag());
        put(3, 3, J_bb.real());
        F *= scale_;
        return 0.5 * (F + F.transpose());
    }

    FimMatrix fim_from_covariance(const std::vector<Target> &targets, const CMatrix &Rx, int symbol_count,
                                  double noise_variance, const ArrayConfig &cfg)
    {
        if (Rx.rows() != Rx.cols())
            throw DomainError("fim_from_covariance: covariance must be square");
        const double herm = (Rx - Rx.adjoint()).norm();
        if (herm > 1e-10 * std::max(1.0, Rx.norm()))
            throw DomainError("fim_from_covariance: covariance is not Hermitian");
        FimModel model(targets, cfg, noise_variance, symbol_count);
        return {model.evaluate(Rx), noise_variance, symbol_count};
    }

    double default_ridge(const RMatrix &F)
    {
        if (F.rows() == 0)
            return 0.0;
        return 1e-10 * F.trace() / double(F.rows());
    }

    RVector crb_diagonal(const RMatrix &F, double ridge)
    {
        const Eigen::Index n = F.rows();
        if (F.cols() != n || n == 0)
            throw DomainError("crb_diagonal: FIM must be square and nonempty");

        // Jacobi equilibration keeps the inversion accurate when parameters have very
        // different units (angles vs. reflectivities).
        RMatrix G = F + ridge * RMatrix::Identity(n, n);
        RVector d(n);
        for (Eigen::Index i = 0; i < n; ++i)
            d(i) = G(i, i) > 0.0 ? 1.0 / std::sqrt(G(i, i)) : 0.0;
        bool ok = (d.array() > 0.0).all();
        RMatrix Gs = d.asDiagonal() * G * d.asDiagonal();
        Eigen::LLT<RMatrix> llt;
        if (ok)
        {
            llt.compute(Gs);
            ok = llt.info() == Eigen::Success;
        }
        if (ok)
        {
            // Reject numerically singular matrices as well
            Eigen::SelfAdjointEigenSolver<RMatrix> es(Gs, Eigen::EigenvaluesOnly);
            const RVector ev = es.eigenvalues();
            ok = ev(0) > 1e-14 * ev(n - 1);
        }
        if (!ok)
        {
            Eigen::SelfAdjointEigenSolver<RMatrix> es(G, Eigen::EigenvaluesOnly);
            const RVector ev = es.eigenvalues();
            std::ostringstream msg;
            msg << "crb_diagonal: Fisher information is singular (eigenvalues in [" << ev(0) << ", " << ev(n - 1)
                << "], condition number ";
            if (ev(0) > 0.0)
                msg << ev(n - 1) / ev(0);
            else
                msg << "inf";
            msg << ")";
            throw DomainError(msg.str());
        }
        const RMatrix inv = llt.solve(RMatrix::Identity(n, n));
        RVector out(n);
        for (Eigen::Index i = 0; i < n; ++i)
            out(i) = inv(i, i) * d(i) * d(i);
        return out;
    }

} // namespace nfisac
