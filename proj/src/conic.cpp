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

#include "nfisac/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>

namespace nfisac
{
    namespace
    {
        constexpr double kSqrt2 = 1.41421356237309504880;
        constexpr double kInf = std::numeric_limits<double>::infinity();

        // Matrix value of a constraint row restricted to one PSD block, upper triangle only
        struct SymEntry
        {
            int p, q;
            double v;
        };

        struct BlockRow
        {
            int row;
            std::vector<SymEntry> entries;
            RMatrix dense; // filled when the row is dense in the block
        };

        struct PsdBlock
        {
            int order = 0;
            int offset = 0;
            std::vector<BlockRow> rows;
            int group = -1;           // dense-row group, see DenseGroup
            std::vector<int> dense;   // positions in rows of the group's rows, in group order

            // Per-iteration scaling data
            RMatrix Lx, Lz, G, Ginv, W;
            RVector d;
        };

        double lambda_min_sym(const RMatrix &M)
        {
            if (M.rows() == 0)
                return kInf;
            Eigen::SelfAdjointEigenSolver<RMatrix> es(M, Eigen::EigenvaluesOnly);
            return es.eigenvalues()(0);
        }

        // Smallest eigenvalue of every cone block of v (LP entries count as 1x1 blocks)
        double cone_min(const ConicProgram &p, const RVector &v)
        {
            double m = kInf;
            int off = 0;
            for (const Cone &k : p.cones)
            {
                if (k.kind == Cone::Kind::nonnegative)
                {
                    if (k.size > 0)
                        m = std::min(m, v.segment(off, k.size).minCoeff());
                }
                else
                    m = std::min(m, lambda_min_sym(smat(v.segment(off, k.dim()), k.size)));
                off += k.dim();
            }
            return m;
        }

        // Blocks with identical dense rows (same constraint rows, same row matrices) share one
        // product in the Schur complement: sum_b <A_c, W_b A_a W_b> = vec(A_c) . sum_b vec(W_b A_a W_b)
        struct DenseGroup
        {
            int order;
            std::vector<int> rows; // constraint rows
            RMatrix stacked;       // vec of each full row matrix, one per line
            std::vector<int> blocks;
        };

        class InteriorPoint
        {
        public:
            InteriorPoint(const ConicProgram &p, const SolverOptions &opt) : p_(p), opt_(opt) { setup(); }
            ConicSolution run();

        private:
            void setup();
            void initial_point();
            bool scaling();
            bool schur();
            RVector apply_w(const RVector &u) const;
            void directions(const RVector &rp, const RVector &Rd, const RVector &Rc, RVector &dx, RVector &dy,
                            RVector &dz) const;
            double max_step(const RVector &v, const RVector &dv, bool primal) const;
            RVector corrector_rhs(const RVector &dx, const RVector &dz, double sigma_mu) const;
            Residuals residuals(double &pobj, double &dobj) const;

            const ConicProgram &p_;
            SolverOptions opt_;
            int m_ = 0, n_ = 0;
            double nu_ = 0.0;
            std::vector<PsdBlock> psd_;
            std::vector<DenseGroup> groups_;
            std::vector<int> lp_index_; // positions of all nonnegative entries in x
            RMatrix A_lp_dense_; // rows of A restricted to the nonnegative entries
            Eigen::SparseMatrix<double> At_;
            RVector x_, y_, z_;
            RVector w_lp_;
            RMatrix M_;
            Eigen::LLT<RMatrix> llt_;
            double norm_b_ = 0.0, norm_c_ = 0.0;
        };

        void InteriorPoint::setup()
        {
            p_.validate();
            m_ = p_.n_dual();
            n_ = p_.n_primal();
            At_ = p_.A.transpose();

            std::vector<int> col_block(n_, -1), col_local(n_, -1);
            std::vector<std::pair<int, int>> local_pq;
            int off = 0;
            for (const Cone &k : p_.cones)
            {
                if (k.kind == Cone::Kind::nonnegative)
                {
                    for (int i = 0; i < k.size; ++i)
                    {
                        col_local[off + i] = static_cast<int>(lp_index_.size());
                        lp_index_.push_back(off + i);
                    }
                    nu_ += k.size;
                }
                else
                {
                    const int bi = static_cast<int>(psd_.size());
                    PsdBlock blk;
                    blk.order = k.size;
                    blk.offset = off;
                    psd_.push_back(std::move(blk));
                    for (int q = 0; q < k.size; ++q)
                        for (int pp = 0; pp <= q; ++pp)
                        {
                            col_block[off + svec_index(pp, q)] = bi;
                            col_local[off + svec_index(pp, q)] = pp * k.size + q;
                        }
                    nu_ += k.size;
                }
                off += k.dim();
            }

            // LP part of A as its own sparse matrix
            std::vector<Eigen::Triplet<double>> lp_trip;
            Eigen::SparseMatrix<double, Eigen::RowMajor> Ar = p_.A;
            std::vector<std::vector<int>> block_row_slot(psd_.size());
            for (int i = 0; i < m_; ++i)
            {
                std::vector<int> touched;
                for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, i); it; ++it)
                {
                    const int col = static_cast<int>(it.col());
                    if (it.value() == 0.0)
                        continue;
                    if (col_block[col] < 0)
                    {
                        lp_trip.emplace_back(i, col_local[col], it.value());
                        continue;
                    }
                    PsdBlock &blk = psd_[col_block[col]];
                    const int pp = col_local[col] / blk.order, q = col_local[col] % blk.order;
                    if (blk.rows.empty() || blk.rows.back().row != i)
                        blk.rows.push_back(BlockRow{i, {}, {}});
                    blk.rows.back().entries.push_back({pp, q, pp == q ? it.value() : it.value() / kSqrt2});
                }
            }
            Eigen::SparseMatrix<double> A_lp(m_, static_cast<Eigen::Index>(lp_index_.size()));
            A_lp.setFromTriplets(lp_trip.begin(), lp_trip.end());
            A_lp_dense_ = RMatrix(A_lp);

            for (size_t bi = 0; bi < psd_.size(); ++bi)
            {
                PsdBlock &blk = psd_[bi];
                const int n = blk.order;
                std::vector<int> rows;
                for (size_t a = 0; a < blk.rows.size(); ++a)
                    if (static_cast<int>(blk.rows[a].entries.size()) > n)
                    {
                        BlockRow &r = blk.rows[a];
                        r.dense = RMatrix::Zero(n, n);
                        for (const SymEntry &e : r.entries)
                        {
                            r.dense(e.p, e.q) = e.v;
                            r.dense(e.q, e.p) = e.v;
                        }
                        blk.dense.push_back(static_cast<int>(a));
                        rows.push_back(blk.rows[a].row);
                    }
                if (rows.empty())
                    continue;
                RMatrix stacked(static_cast<Eigen::Index>(rows.size()), n * n);
                for (size_t a = 0; a < blk.dense.size(); ++a)
                    stacked.row(static_cast<Eigen::Index>(a)) =
                        Eigen::Map<const RVector>(blk.rows[blk.dense[a]].dense.data(), n * n).transpose();
                for (size_t g = 0; g < groups_.size() && blk.group < 0; ++g)
                    if (groups_[g].order == n && groups_[g].rows == rows && groups_[g].stacked == stacked)
                        blk.group = static_cast<int>(g);
                if (blk.group < 0)
                {
                    blk.group = static_cast<int>(groups_.size());
                    groups_.push_back(DenseGroup{n, rows, stacked, {}});
                }
                groups_[blk.group].blocks.push_back(static_cast<int>(bi));
            }

            norm_b_ = p_.b.norm();
            norm_c_ = p_.c.norm();
        }

        void InteriorPoint::initial_point()
        {
            x_ = RVector::Zero(n_);
            z_ = RVector::Zero(n_);
            y_ = RVector::Zero(m_);

            // Column norms of A^T per block (norm of A_k restricted to the block)
            auto block_scale = [&](int off, int dim, int order, double &xi, double &eta)
            {
                RVector rn = RVector::Zero(m_);
                for (int col = off; col < off + dim; ++col)
                    for (Eigen::SparseMatrix<double>::InnerIterator it(p_.A, col); it; ++it)
                        rn(it.row()) += it.value() * it.value();
                rn = rn.cwiseSqrt();
                double ratio = 0.0, amax = 0.0;
                for (int k = 0; k < m_; ++k)
                {
                    ratio = std::max(ratio, (1.0 + std::abs(p_.b(k))) / (1.0 + rn(k)));
                    amax = std::max(amax, rn(k));
                }
                const double cn = p_.c.segment(off, dim).norm();
                const double sq = std::sqrt(double(order));
                xi = std::max({10.0, sq, order * ratio});
                eta = std::max({10.0, sq, amax, cn});
            };

            int off = 0;
            for (const Cone &k : p_.cones)
            {
                double xi = 1.0, eta = 1.0;
                if (k.dim() > 0)
                    block_scale(off, k.dim(), k.size, xi, eta);
                if (k.kind == Cone::Kind::nonnegative)
                {
                    x_.segment(off, k.size).setConstant(xi);
                    z_.segment(off, k.size).setConstant(eta);
                }
                else
                {
                    x_.segment(off, k.dim()) = svec(xi * RMatrix::Identity(k.size, k.size));
                    z_.segment(off, k.dim()) = svec(eta * RMatrix::Identity(k.size, k.size));
                }
                off += k.dim();
            }
        }

        bool InteriorPoint::scaling()
        {
            for (PsdBlock &blk : psd_)
            {
                const int n = blk.order;
                const RMatrix X = smat(x_.segment(blk.offset, n * (n + 1) / 2), n);
                const RMatrix Z = smat(z_.segment(blk.offset, n * (n + 1) / 2), n);
                Eigen::LLT<RMatrix> cx(X), cz(Z);
                if (cx.info() != Eigen::Success || cz.info() != Eigen::Success)
                    return false;
                blk.Lx = cx.matrixL();
                blk.Lz = cz.matrixL();
                Eigen::JacobiSVD<RMatrix> svd(blk.Lz.transpose() * blk.Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
                blk.d = svd.singularValues();
                if (blk.d.minCoeff() <= 0.0)
                    return false;
                const RVector isq = blk.d.cwiseSqrt().cwiseInverse();
                blk.G = blk.Lx * svd.matrixV() * isq.asDiagonal();
                // G^-1 = D^{1/2} V^T Lx^-1
                RMatrix VtLinv = blk.Lx.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV()).transpose();
                blk.Ginv = blk.d.cwiseSqrt().asDiagonal() * VtLinv;
                blk.W = blk.G * blk.G.transpose();
            }
            w_lp_.resize(static_cast<Eigen::Index>(lp_index_.size()));
            for (size_t i = 0; i < lp_index_.size(); ++i)
            {
                const double xv = x_(lp_index_[i]), zv = z_(lp_index_[i]);
                if (!(xv > 0.0 && zv > 0.0))
                    return false;
                w_lp_(static_cast<Eigen::Index>(i)) = xv / zv;
            }
            return true;
        }

        bool InteriorPoint::schur()
        {
            M_ = RMatrix::Zero(m_, m_);
            for (const PsdBlock &blk : psd_)
            {
                const int n = blk.order;
                const RMatrix &W = blk.W;
                RMatrix B(n, n);
                // Sparse rows here, dense ones against each other go through groups_
                for (size_t a = 0; a < blk.rows.size(); ++a)
                {
                    const BlockRow &ra = blk.rows[a];
                    if (ra.dense.size() > 0)
                        continue;
                    B.setZero();
                    for (const SymEntry &e : ra.entries)
                    {
                        B.noalias() += e.v * W.col(e.p) * W.row(e.q);
                        if (e.p != e.q)
                            B.noalias() += e.v * W.col(e.q) * W.row(e.p);
                    }
                    for (size_t c = 0; c < blk.rows.size(); ++c)
                    {
                        const BlockRow &rc = blk.rows[c];
                        const bool pair_dense = rc.dense.size() > 0;
                        if (!pair_dense && c < a)
                            continue;
                        double s = 0.0;
                        for (const SymEntry &e : rc.entries)
                            s += e.p == e.q ? e.v * B(e.p, e.p) : e.v * (B(e.p, e.q) + B(e.q, e.p));
                        M_(ra.row, rc.row) += s;
                        if (c != a)
                            M_(rc.row, ra.row) += s;
                    }
                }
            }
            for (const DenseGroup &g : groups_)
            {
                const int n = g.order;
                const Eigen::Index r = g.stacked.rows();
                RMatrix acc = RMatrix::Zero(r, n * n);
                RMatrix B(n, n);
                for (int bi : g.blocks)
                {
                    const PsdBlock &blk = psd_[bi];
                    for (Eigen::Index a = 0; a < r; ++a)
                    {
                        B.noalias() = blk.W * blk.rows[blk.dense[a]].dense * blk.W;
                        acc.row(a) += Eigen::Map<const RVector>(B.data(), n * n).transpose();
                    }
                }
                const RMatrix Mg = acc * g.stacked.transpose();
                for (Eigen::Index a = 0; a < r; ++a)
                    for (Eigen::Index c = 0; c < r; ++c)
                        M_(g.rows[a], g.rows[c]) += Mg(a, c);
            }
            if (A_lp_dense_.cols() > 0)
                M_.noalias() += A_lp_dense_ * w_lp_.asDiagonal() * A_lp_dense_.transpose();
            M_ = 0.5 * (M_ + M_.transpose());

            double shift = 0.0;
            const double dmax = std::max(M_.diagonal().cwiseAbs().maxCoeff(), 1e-300);
            for (int attempt = 0; attempt < 6; ++attempt)
            {
                if (shift > 0.0)
                    llt_.compute(M_ + shift * RMatrix::Identity(m_, m_));
                else
                    llt_.compute(M_);
                if (llt_.info() == Eigen::Success)
                    return true;
                shift = shift == 0.0 ? 1e-14 * dmax : shift * 100.0;
            }
            return false;
        }

        RVector InteriorPoint::apply_w(const RVector &u) const
        {
            RVector out(n_);
            for (size_t i = 0; i < lp_index_.size(); ++i)
                out(lp_index_[i]) = w_lp_(static_cast<Eigen::Index>(i)) * u(lp_index_[i]);
            for (const PsdBlock &blk : psd_)
            {
                const int n = blk.order, dim = n * (n + 1) / 2;
                const RMatrix U = smat(u.segment(blk.offset, dim), n);
                out.segment(blk.offset, dim) = svec(blk.W * U * blk.W);
            }
            return out;
        }

        void InteriorPoint::directions(const RVector &rp, const RVector &Rd, const RVector &Rc, RVector &dx, RVector &dy,
                                       RVector &dz) const
        {
            // A W A^T dy = rp - A Rc + A W(Rd)
            const RVector rhs = rp - p_.A * Rc + p_.A * apply_w(Rd);
            dy = llt_.solve(rhs);
            dz = Rd - At_ * dy;
            dx = Rc - apply_w(dz);
        }

        double InteriorPoint::max_step(const RVector &v, const RVector &dv, bool primal) const
        {
            double amax = kInf;
            for (int idx : lp_index_)
                if (dv(idx) < 0.0)
                    amax = std::min(amax, -v(idx) / dv(idx));
            for (const PsdBlock &blk : psd_)
            {
                const int n = blk.order, dim = n * (n + 1) / 2;
                const RMatrix &L = primal ? blk.Lx : blk.Lz;
                const RMatrix D = smat(dv.segment(blk.offset, dim), n);
                RMatrix T = L.triangularView<Eigen::Lower>().solve(D);
                T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
                const double lmin = lambda_min_sym(0.5 * (T + T.transpose()));
                if (lmin < 0.0)
                    amax = std::min(amax, -1.0 / lmin);
            }
            return amax;
        }

        RVector InteriorPoint::corrector_rhs(const RVector &dx, const RVector &dz, double sigma_mu) const
        {
            RVector Rc(n_);
            for (int idx : lp_index_)
                Rc(idx) = (sigma_mu - x_(idx) * z_(idx) - dx(idx) * dz(idx)) / z_(idx);
            for (const PsdBlock &blk : psd_)
            {
                const int n = blk.order, dim = n * (n + 1) / 2;
                const RMatrix dX = blk.Ginv * smat(dx.segment(blk.offset, dim), n) * blk.Ginv.transpose();
                const RMatrix dZ = blk.G.transpose() * smat(dz.segment(blk.offset, dim), n) * blk.G;
                RMatrix R = -0.5 * (dX * dZ + dZ * dX);
                for (int i = 0; i < n; ++i)
                    R(i, i) += sigma_mu - blk.d(i) * blk.d(i);
                RMatrix H(n, n);
                for (int j = 0; j < n; ++j)
                    for (int i = 0; i < n; ++i)
                        H(i, j) = 2.0 * R(i, j) / (blk.d(i) + blk.d(j));
                Rc.segment(blk.offset, dim) = svec(blk.G * H * blk.G.transpose());
            }
            return Rc;
        }

        Residuals InteriorPoint::residuals(double &pobj, double &dobj) const
        {
            pobj = p_.c.dot(x_);
            dobj = p_.b.dot(y_);
            Residuals r;
            r.primal = (p_.b - p_.A * x_).norm() / (1.0 + norm_b_);
            r.dual = (p_.c - At_ * y_ - z_).norm() / (1.0 + norm_c_);
            r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
            return r;
        }

        ConicSolution InteriorPoint::run()
        {
            ConicSolution best;
            double best_err = kInf;
            initial_point();

            auto snapshot = [&](ConicSolution &s, const Residuals &r, double pobj, double dobj, int it)
            {
                s.primal = x_;
                s.dual = y_;
                s.slack = z_;
                s.objective_value = pobj;
                s.dual_objective = dobj;
                s.residuals = r;
                s.iterations = it;
            };

            int stall = 0;
            int progress_it = 0;
            double progress_err = kInf;
            for (int it = 0; it <= opt_.max_iter; ++it)
            {
                double pobj = 0.0, dobj = 0.0;
                const Residuals r = residuals(pobj, dobj);
                const double err = std::max({r.primal, r.dual, r.gap});
                if (err < best_err)
                {
                    best_err = err;
                    snapshot(best, r, pobj, dobj, it);
                }
                if (best_err < 0.5 * progress_err)
                {
                    progress_err = best_err;
                    progress_it = it;
                }
                if (opt_.verbose)
                    std::cerr << std::setw(4) << it << "  pobj " << std::setw(14) << pobj << "  dobj " << std::setw(14)
                              << dobj << "  pinf " << r.primal << "  dinf " << r.dual << "  gap " << r.gap << "\n";
                if (err < opt_.tol)
                {
                    best.status = SolveStatus::optimal;
                    best.message = "optimal";
                    return best;
                }

                // Infeasibility certificates from diverging iterates
                const RVector Aty_z = At_ * y_ + z_;
                if (dobj > 0.0 && Aty_z.norm() / dobj < 1e-8 && r.gap > opt_.tol)
                {
                    snapshot(best, r, pobj, dobj, it);
                    best.status = SolveStatus::infeasible;
                    std::ostringstream msg;
                    msg << "primal infeasible: y / b^T y gives b^T y = 1 with |A^T y + z| = " << Aty_z.norm() / dobj
                        << " and z in K";
                    best.message = msg.str();
                    return best;
                }
                if (pobj < 0.0 && (p_.A * x_).norm() / (-pobj) < 1e-8 && r.gap > opt_.tol)
                {
                    snapshot(best, r, pobj, dobj, it);
                    best.status = SolveStatus::infeasible;
                    std::ostringstream msg;
                    msg << "dual infeasible: x / (-c^T x) in K gives c^T x = -1 with |A x| = "
                        << (p_.A * x_).norm() / (-pobj);
                    best.message = msg.str();
                    return best;
                }
                if (it == opt_.max_iter)
                    break;
                if (it - progress_it > 20)
                {
                    best.message = "no progress in 20 iterations";
                    break;
                }

                if (!scaling() || !schur())
                {
                    best.message = "numerical breakdown (loss of positive definiteness)";
                    break;
                }

                const double mu = x_.dot(z_) / nu_;
                const RVector rp = p_.b - p_.A * x_;
                const RVector Rd = p_.c - z_ - At_ * y_;

                // Predictor
                RVector dx, dy, dz;
                directions(rp, Rd, -x_, dx, dy, dz);
                const double ap_pred = std::min(1.0, max_step(x_, dx, true));
                const double ad_pred = std::min(1.0, max_step(z_, dz, false));
                const double mu_aff = (x_ + ap_pred * dx).dot(z_ + ad_pred * dz) / nu_;
                double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
                sigma = std::clamp(sigma, 0.0, 1.0);

                // Corrector
                const RVector Rc = corrector_rhs(dx, dz, sigma * mu);
                directions(rp, Rd, Rc, dx, dy, dz);
                const double gamma = 0.9 + 0.09 * std::min(ap_pred, ad_pred);
                const double ap = std::min(1.0, gamma * max_step(x_, dx, true));
                const double ad = std::min(1.0, gamma * max_step(z_, dz, false));

                x_ += ap * dx;
                y_ += ad * dy;
                z_ += ad * dz;

                if (std::max(ap, ad) < 1e-10)
                {
                    if (++stall >= 3)
                    {
                        best.message = "step lengths collapsed";
                        break;
                    }
                }
                else
                    stall = 0;
            }
            best.status = SolveStatus::max_iterations;
            if (best.message.empty())
                best.message = "iteration limit reached";
            return best;
        }

    } // namespace

    std::string to_string(SolveStatus s)
    {
        switch (s)
        {
        case SolveStatus::optimal:
            return "optimal";
        case SolveStatus::infeasible:
            return "infeasible";
        case SolveStatus::max_iterations:
            return "max_iterations";
        }
        return "unknown";
    }

    void ConicProgram::validate() const
    {
        int total = 0;
        for (const Cone &k : cones)
        {
            if (k.size < 0)
                throw DomainError("ConicProgram: negative cone size");
            total += k.dim();
        }
        if (total != c.size())
            throw DomainError("ConicProgram: cone layout does not match the objective length");
        if (A.cols() != c.size() || A.rows() != b.size())
            throw DomainError("ConicProgram: constraint matrix has inconsistent dimensions");
    }

    RVector svec(const RMatrix &M)
    {
        const int n = static_cast<int>(M.rows());
        RVector v(n * (n + 1) / 2);
        for (int q = 0; q < n; ++q)
            for (int p = 0; p <= q; ++p)
                v(svec_index(p, q)) = p == q ? M(p, p) : kSqrt2 * 0.5 * (M(p, q) + M(q, p));
        return v;
    }

    RMatrix smat(const Eigen::Ref<const RVector> &v, int order)
    {
        RMatrix M(order, order);
        for (int q = 0; q < order; ++q)
            for (int p = 0; p <= q; ++p)
            {
                const double e = v(svec_index(p, q));
                if (p == q)
                    M(p, p) = e;
                else
                    M(p, q) = M(q, p) = e / kSqrt2;
            }
        return M;
    }

    RMatrix lift_hermitian(const CMatrix &H)
    {
        const Eigen::Index n = H.rows();
        RMatrix M(2 * n, 2 * n);
        M.topLeftCorner(n, n) = H.real();
        M.bottomRightCorner(n, n) = H.real();
        M.topRightCorner(n, n) = -H.imag();
        M.bottomLeftCorner(n, n) = H.imag();
        return M;
    }

    CMatrix unlift_hermitian(const RMatrix &M)
    {
        const Eigen::Index n = M.rows() / 2;
        // Average the two copies so that symmetric perturbations are projected out
        RMatrix re = 0.5 * (M.topLeftCorner(n, n) + M.bottomRightCorner(n, n));
        RMatrix im = 0.5 * (M.bottomLeftCorner(n, n) - M.topRightCorner(n, n));
        CMatrix H(n, n);
        H.real() = re;
        H.imag() = im;
        return 0.5 * (H + H.adjoint());
    }

    ConicSolution solve(const ConicProgram &p, const SolverOptions &opt)
    {
        InteriorPoint ipm(p, opt);
        return ipm.run();
    }

    ResidualReport certify(const ConicProgram &p, const ConicSolution &s)
    {
        p.validate();
        if (s.primal.size() != p.c.size() || s.dual.size() != p.b.size())
            throw DomainError("certify: solution does not match the program dimensions");
        ResidualReport r;
        const RVector &x = s.primal, &y = s.dual;
        const double nb = p.b.norm(), nc = p.c.norm();
        r.objective_value = p.c.dot(x);
        r.dual_objective = p.b.dot(y);
        r.equality = (p.A * x - p.b).norm() / (1.0 + nb);
        r.primal_cone = std::max(0.0, -cone_min(p, x)) / (1.0 + x.norm());
        const RVector zc = p.c - p.A.transpose() * y;
        r.dual_cone = std::max(0.0, -cone_min(p, zc)) / (1.0 + nc);
        if (s.slack.size() == p.c.size())
            r.dual_equality = (zc - s.slack).norm() / (1.0 + nc);
        r.gap = std::abs(r.objective_value - r.dual_objective) /
                (1.0 + std::abs(r.objective_value) + std::abs(r.dual_objective));
        return r;
    }

    void write_program(std::ostream &os, const ConicProgram &p)
    {
        os << std::setprecision(17);
        os << p.n_dual() << " " << p.n_primal() << " " << p.cones.size() << "\n";
        for (const Cone &k : p.cones)
            os << (k.kind == Cone::Kind::nonnegative ? "l " : "s ") << k.size << "\n";
        os << "c\n";
        for (int i = 0; i < p.c.size(); ++i)
            if (p.c(i) != 0.0)
                os << i << " " << p.c(i) << "\n";
        os << "b\n";
        for (int i = 0; i < p.b.size(); ++i)
            if (p.b(i) != 0.0)
                os << i << " " << p.b(i) << "\n";
        os << "A " << p.A.nonZeros() << "\n";
        for (int col = 0; col < p.A.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, col); it; ++it)
                os << it.row() << " " << it.col() << " " << it.value() << "\n";
    }

    // ---------------------------------------------------------------- builder

    int ProgramBuilder::add_variable(double objective)
    {
        objective_.push_back(objective);
        return static_cast<int>(objective_.size()) - 1;
    }

    int ProgramBuilder::add_variables(int count)
    {
        const int first = static_cast<int>(objective_.size());
        objective_.resize(objective_.size() + count, 0.0);
        return first;
    }

    void ProgramBuilder::set_objective(int var, double coef) { objective_.at(var) = coef; }

    int ProgramBuilder::add_nonneg_row(double constant, const std::vector<std::pair<int, double>> &terms)
    {
        for (const auto &t : terms)
            if (t.first < 0 || t.first >= n_variables())
                throw DomainError("ProgramBuilder: unknown variable in row");
        row_constant_.push_back(constant);
        row_terms_.push_back(terms);
        return static_cast<int>(row_constant_.size()) - 1;
    }

    int ProgramBuilder::add_psd_block(int order)
    {
        blocks_.push_back(Block{order, false, {}});
        return static_cast<int>(blocks_.size()) - 1;
    }

    int ProgramBuilder::add_hermitian_block(int order)
    {
        blocks_.push_back(Block{order, true, {}});
        return static_cast<int>(blocks_.size()) - 1;
    }

    void ProgramBuilder::add_real_entry(int block, int var, int p, int q, double v)
    {
        if (v == 0.0)
            return;
        if (p > q)
            std::swap(p, q);
        blocks_[block].entries.push_back(Entry{var, p, q, v});
    }

    void ProgramBuilder::add_psd_constant(int block, int p, int q, double v)
    {
        if (blocks_.at(block).hermitian)
            throw DomainError("ProgramBuilder: use add_hermitian_constant for Hermitian blocks");
        add_real_entry(block, -1, p, q, v);
    }

    void ProgramBuilder::add_psd_coefficient(int block, int var, int p, int q, double v)
    {
        if (blocks_.at(block).hermitian)
            throw DomainError("ProgramBuilder: use add_hermitian_coefficient for Hermitian blocks");
        if (var < 0 || var >= n_variables())
            throw DomainError("ProgramBuilder: unknown variable");
        add_real_entry(block, var, p, q, v);
    }

    void ProgramBuilder::add_hermitian_coefficient(int block, int var, int p, int q, cplx v)
    {
        Block &blk = blocks_.at(block);
        if (!blk.hermitian)
            throw DomainError("ProgramBuilder: block is not Hermitian");
        if (var >= n_variables())
            throw DomainError("ProgramBuilder: unknown variable");
        const int n = blk.order;
        if (p == q)
        {
            if (v.imag() != 0.0)
                throw DomainError("ProgramBuilder: diagonal of a Hermitian block must be real");
            add_real_entry(block, var, p, p, v.real());
            add_real_entry(block, var, p + n, p + n, v.real());
            return;
        }
        // H(p,q) = a + jb lifts to (p,q) = a, (p+n,q+n) = a, (p+n,q) = b, (p,q+n) = -b;
        // the conjugate entry H(q,p) supplies the symmetric counterparts.
        add_real_entry(block, var, p, q, v.real());
        add_real_entry(block, var, p + n, q + n, v.real());
        add_real_entry(block, var, p + n, q, v.imag());
        add_real_entry(block, var, p, q + n, -v.imag());
    }

    void ProgramBuilder::add_hermitian_constant(int block, int p, int q, cplx v)
    {
        add_hermitian_coefficient(block, -1, p, q, v);
    }

    int ProgramBuilder::cone_index(int block) const { return block + (row_constant_.empty() ? 0 : 1); }

    ConicProgram ProgramBuilder::build() const
    {
        ConicProgram prog;
        const int m = n_variables();
        int n = static_cast<int>(row_constant_.size());
        if (!row_constant_.empty())
            prog.cones.push_back(Cone{Cone::Kind::nonnegative, static_cast<int>(row_constant_.size())});
        std::vector<int> offsets;
        for (const Block &blk : blocks_)
        {
            const int order = blk.hermitian ? 2 * blk.order : blk.order;
            prog.cones.push_back(Cone{Cone::Kind::psd, order});
            offsets.push_back(n);
            n += order * (order + 1) / 2;
        }
        prog.c = RVector::Zero(n);
        prog.b = Eigen::Map<const RVector>(objective_.data(), m);

        std::vector<Eigen::Triplet<double>> trip;
        for (size_t r = 0; r < row_constant_.size(); ++r)
        {
            prog.c(static_cast<Eigen::Index>(r)) = row_constant_[r];
            for (const auto &t : row_terms_[r])
                trip.emplace_back(t.first, static_cast<int>(r), -t.second);
        }
        for (size_t bi = 0; bi < blocks_.size(); ++bi)
            for (const Entry &e : blocks_[bi].entries)
            {
                const int col = offsets[bi] + svec_index(e.p, e.q);
                const double v = e.p == e.q ? e.v : kSqrt2 * e.v;
                if (e.var < 0)
                    prog.c(col) += v;
                else
                    trip.emplace_back(e.var, col, -v);
            }
        prog.A.resize(m, n);
        prog.A.setFromTriplets(trip.begin(), trip.end());
        prog.A.prune(0.0);
        return prog;
    }

    RMatrix psd_slack(const ConicProgram &p, const RVector &y, int cone)
    {
        int off = 0;
        for (int k = 0; k < cone; ++k)
            off += p.cones.at(k).dim();
        const Cone &k = p.cones.at(cone);
        if (k.kind != Cone::Kind::psd)
            throw DomainError("psd_slack: cone is not PSD");
        const RVector z = p.c.segment(off, k.dim()) - p.A.middleCols(off, k.dim()).transpose() * y;
        return smat(z, k.size);
    }

} // namespace nfisac
