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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace nfisac
{
    namespace
    {
        constexpr double kInf = std::numeric_limits<double>::infinity();

        // Real parametrization of an N x N Hermitian matrix: N diagonal entries, then
        // Re and Im of every upper off-diagonal entry.
        struct HermitianBasis
        {
            int p, q;
            cplx value; // entry (p,q); (q,p) receives the conjugate
        };

        std::vector<HermitianBasis> hermitian_basis(int n)
        {
            std::vector<HermitianBasis> b;
            b.reserve(static_cast<size_t>(n) * n);
            for (int p = 0; p < n; ++p)
                b.push_back({p, p, 1.0});
            for (int q = 1; q < n; ++q)
                for (int p = 0; p < q; ++p)
                {
                    b.push_back({p, q, 1.0});
                    b.push_back({p, q, kJ});
                }
            return b;
        }

        CMatrix basis_matrix(const HermitianBasis &e, int n)
        {
            CMatrix E = CMatrix::Zero(n, n);
            E(e.p, e.q) += e.value;
            if (e.p != e.q)
                E(e.q, e.p) += std::conj(e.value);
            return E;
        }

        CMatrix hermitian_from(const RVector &y, int first, const std::vector<HermitianBasis> &basis, int n)
        {
            CMatrix R = CMatrix::Zero(n, n);
            for (size_t v = 0; v < basis.size(); ++v)
            {
                const HermitianBasis &e = basis[v];
                const double c = y(first + static_cast<int>(v));
                R(e.p, e.q) += c * e.value;
                if (e.p != e.q)
                    R(e.q, e.p) += c * std::conj(e.value);
            }
            return R;
        }

        // Re tr(Q E) for a basis element E
        double trace_coefficient(const CMatrix &Q, const HermitianBasis &e)
        {
            if (e.p == e.q)
                return Q(e.p, e.p).real();
            return (Q(e.q, e.p) * e.value + Q(e.p, e.q) * std::conj(e.value)).real();
        }

        // Whitened FIM data shared by the CRB epigraph blocks
        struct SensingBlocks
        {
            RVector crb_scale;           // s_i
            std::vector<RMatrix> coef;   // N * T^T F(E_v) T per basis element
            std::vector<RVector> unit;   // T^T e_i / |T^T e_i|
        };

        SensingBlocks sensing_blocks(const Scene &scene, const std::vector<HermitianBasis> &basis)
        {
            const int N = scene.n_elements();
            const FimModel model(scene.targets, scene.array, scene.noise_radar, scene.symbol_count);
            const RMatrix F1 = model.evaluate(CMatrix::Identity(N, N));
            const int P = static_cast<int>(F1.rows());
            // Jacobi equilibration D F D (unit diagonal) before whitening
            RVector dscale(P);
            for (int i = 0; i < P; ++i)
                dscale(i) = F1(i, i) > 0.0 ? 1.0 / std::sqrt(F1(i, i)) : 1.0;
            const RMatrix G = dscale.asDiagonal() * F1 * dscale.asDiagonal();
            Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (G + G.transpose()));
            const RVector ev = es.eigenvalues();
            if (!(ev(0) > 1e-12 * ev(P - 1)))
            {
                std::ostringstream msg;
                msg << "Fisher information of the isotropic covariance is singular (equilibrated eigenvalues in ["
                    << ev(0) << ", " << ev(P - 1) << "]); the CRB is unbounded for every transmit covariance";
                throw InfeasibleError(msg.str());
            }
            const RMatrix &U = es.eigenvectors();
            // T = D G^-1/2 gives T^T F(I) T = I
            const RMatrix T = dscale.asDiagonal() * (U * ev.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose());
            const RMatrix Ginv = U * ev.cwiseInverse().asDiagonal() * U.transpose();

            SensingBlocks sb;
            sb.crb_scale = N * dscale.cwiseAbs2().cwiseProduct(Ginv.diagonal()) / scene.power_budget;
            const RMatrix Tt = T.transpose();
            for (int i = 0; i < P; ++i)
                sb.unit.push_back(Tt.col(i) / Tt.col(i).norm());
            sb.coef.reserve(basis.size());
            for (const HermitianBasis &e : basis)
            {
                RMatrix C = N * Tt * model.evaluate(basis_matrix(e, N)) * T;
                sb.coef.push_back(0.5 * (C + C.transpose()));
            }
            return sb;
        }

        // Adds the 4L blocks [sum_v y_v coef_v, u_i; u_i^T, tau_i] >= 0.
        // var_of(v) lists (variable, weight) pairs carrying basis element v.
        template <typename VarsOf>
        std::vector<int> add_schur_blocks(ProgramBuilder &pb, const SensingBlocks &sb, int tau_first, VarsOf var_of)
        {
            const int P = static_cast<int>(sb.crb_scale.size());
            std::vector<int> cones;
            for (int i = 0; i < P; ++i)
            {
                const int blk = pb.add_psd_block(P + 1);
                for (size_t v = 0; v < sb.coef.size(); ++v)
                    for (const auto &[var, w] : var_of(static_cast<int>(v)))
                        for (int b = 0; b < P; ++b)
                            for (int a = 0; a <= b; ++a)
                                pb.add_psd_coefficient(blk, var, a, b, w * sb.coef[v](a, b));
                for (int a = 0; a < P; ++a)
                    pb.add_psd_constant(blk, a, P, sb.unit[i](a));
                pb.add_psd_coefficient(blk, tau_first + i, P, P, 1.0);
                cones.push_back(pb.cone_index(blk));
            }
            return cones;
        }

        double channel_reference(const CMatrix &H)
        {
            double r = 0.0;
            for (int k = 0; k < H.cols(); ++k)
                r = std::max(r, H.col(k).norm());
            return r;
        }

        Normalizers unit_normalizers(const Scene &scene)
        {
            Normalizers nf;
            try
            {
                const int N = scene.n_elements();
                const FimModel model(scene.targets, scene.array, scene.noise_radar, scene.symbol_count);
                const RMatrix F1 = model.evaluate(CMatrix::Identity(N, N));
                nf.sensing = N * crb_diagonal(F1).sum() / scene.power_budget;
            }
            catch (const DomainError &)
            {
                nf.sensing = 1.0;
            }
            nf.comm = std::sqrt(scene.power_budget) * channel_reference(scene.user_channels()) /
                      std::sqrt(scene.noise_comm);
            return nf;
        }

        std::optional<RVector> try_crb(const RMatrix &F)
        {
            try
            {
                return crb_diagonal(F);
            }
            catch (const DomainError &)
            {
                return std::nullopt;
            }
        }

        // Solve and accept the point when it is certified, otherwise raise
        ConicSolution solve_certified(const ConicProgram &prog, const SolverOptions &opt, const char *what,
                                      ResidualReport &report, std::vector<std::string> &warnings)
        {
            ConicSolution sol = solve(prog, opt);
            if (sol.status == SolveStatus::infeasible)
                throw InfeasibleError(std::string(what) + ": " + sol.message);
            report = certify(prog, sol);
            if (sol.status != SolveStatus::optimal)
            {
                if (!report.within(1e-6))
                {
                    std::ostringstream msg;
                    msg << what << ": solver stopped (" << sol.message << ") with residuals primal " << report.primal()
                        << ", dual " << report.dual() << ", gap " << report.gap;
                    throw SolverError(msg.str());
                }
                warnings.push_back(std::string(what) + ": solver stopped early (" + sol.message +
                                   ") but residuals are within 1e-6");
            }
            return sol;
        }

        double relaxation_gap(const CMatrix &X, const CMatrix &R)
        {
            const int S = static_cast<int>(X.cols());
            const CMatrix E = R - X * X.adjoint() / double(S);
            const double excess = E.norm(), excess_trace = E.trace().real();
            double gap = 0.0;
            for (int s = 0; s < S; ++s)
            {
                const double tr = X.col(s).squaredNorm() + excess_trace;
                if (tr > 0.0)
                    gap = std::max(gap, excess / tr);
            }
            return gap;
        }

        CMatrix dft_rows(int rows, int cols)
        {
            CMatrix D(rows, cols);
            for (int k = 0; k < rows; ++k)
                for (int s = 0; s < cols; ++s)
                    D(k, s) = std::polar(1.0, -2.0 * kPi * double(k) * double(s) / double(cols));
            return D;
        }

        CMatrix hermitian_sqrt(const CMatrix &R)
        {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (R + R.adjoint()));
            const RVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        }

        // Second stage: keep R fixed and push X X^H / S onto R without losing CI margin
        CMatrix tighten_symbols(const Scene &scene, const CMatrix &Rhat, const CMatrix &Xhat, double g_fixed,
                                double h_ref, const DesignOptions &opt, std::vector<std::string> &warnings)
        {
            const int N = scene.n_elements(), S = scene.symbol_count, K = scene.n_users();
            const CMatrix H = scene.user_channels();
            const double psi = scene.constellation.half_angle();
            ProgramBuilder pb;
            const int x_first = pb.add_variables(2 * N * S);
            const CMatrix C = Xhat + std::sqrt(double(S)) * hermitian_sqrt(Rhat) * dft_rows(N, S) / std::sqrt(double(S));
            for (int s = 0; s < S; ++s)
                for (int n = 0; n < N; ++n)
                {
                    pb.set_objective(x_first + s * 2 * N + n, C(n, s).real());
                    pb.set_objective(x_first + s * 2 * N + N + n, C(n, s).imag());
                }
            for (int k = 0; k < K; ++k)
                for (int s = 0; s < S; ++s)
                {
                    const CiConstraint ci{rotate_channel(CVector(H.col(k) / h_ref), scene.symbol_phases(k, s)), psi, 0.0};
                    const CiRows rows = linearized_ci_rows(ci);
                    for (const RVector *row : {&rows.plus, &rows.minus})
                    {
                        std::vector<std::pair<int, double>> terms;
                        for (int j = 0; j < 2 * N; ++j)
                            if ((*row)(j) != 0.0)
                                terms.emplace_back(x_first + s * 2 * N + j, -(*row)(j));
                        pb.add_nonneg_row(-g_fixed, terms);
                    }
                }
            const int blk = pb.add_hermitian_block(N + S);
            for (int q = 0; q < N; ++q)
                for (int p = 0; p <= q; ++p)
                    pb.add_hermitian_constant(blk, p, q, Rhat(p, q));
            const double is = 1.0 / std::sqrt(double(S));
            for (int s = 0; s < S; ++s)
            {
                pb.add_hermitian_constant(blk, N + s, N + s, 1.0);
                for (int n = 0; n < N; ++n)
                {
                    pb.add_hermitian_coefficient(blk, x_first + s * 2 * N + n, n, N + s, is);
                    pb.add_hermitian_coefficient(blk, x_first + s * 2 * N + N + n, n, N + s, is * kJ);
                }
            }
            const ConicProgram prog = pb.build();
            ConicSolution sol = solve(prog, opt.solver);
            const ResidualReport rep = certify(prog, sol);
            if (sol.status != SolveStatus::optimal && !rep.within(1e-6))
            {
                warnings.push_back("symbol tightening stage failed (" + sol.message + "), keeping the relaxed symbols");
                return Xhat;
            }
            CMatrix X(N, S);
            for (int s = 0; s < S; ++s)
                for (int n = 0; n < N; ++n)
                    X(n, s) = cplx(sol.dual(x_first + s * 2 * N + n), sol.dual(x_first + s * 2 * N + N + n));
            return X;
        }

        struct SlpRaw
        {
            CMatrix Rhat;
            std::vector<CMatrix> Rs_hat; // per-symbol form only
            CMatrix Xhat;
            double g = 0.0;
            RVector tau;
            ConicSolution sol;
            ResidualReport report;
        };

        SlpRaw solve_p1(const Scene &scene, double rho, const Normalizers &nf, const DesignOptions &opt,
                        std::vector<std::string> &warnings, P1Layout &layout)
        {
            P1Problem prob = assemble_p1(scene, rho, nf, opt);
            layout = prob.layout;
            SlpRaw raw;
            raw.sol = solve_certified(prob.program, opt.solver, "(P1)", raw.report, warnings);
            const RVector &y = raw.sol.dual;
            const int N = layout.n, S = layout.s;
            const auto basis = hermitian_basis(N);
            if (layout.form == P1Form::aggregated)
                raw.Rhat = hermitian_from(y, layout.r_first, basis, N);
            else
            {
                raw.Rhat = CMatrix::Zero(N, N);
                for (int s = 0; s < S; ++s)
                {
                    raw.Rs_hat.push_back(hermitian_from(y, layout.r_first + s * N * N, basis, N));
                    raw.Rhat += raw.Rs_hat.back() / double(S);
                }
            }
            raw.Xhat.resize(N, S);
            for (int s = 0; s < S; ++s)
                for (int n = 0; n < N; ++n)
                    raw.Xhat(n, s) = cplx(y(layout.x_first + s * 2 * N + n), y(layout.x_first + s * 2 * N + N + n));
            raw.g = layout.gamma_var >= 0 ? y(layout.gamma_var) : 0.0;
            if (layout.tau_first >= 0)
                raw.tau = y.segment(layout.tau_first, 4 * layout.l);
            return raw;
        }

        void check_rho(double rho)
        {
            if (!(rho >= 0.0 && rho <= 1.0))
                throw DomainError("weight rho must lie in [0, 1]");
        }

        std::vector<CMatrix> split_beams(const RVector &y, int first, int K, int N)
        {
            const auto basis = hermitian_basis(N);
            std::vector<CMatrix> W;
            for (int k = 0; k < K; ++k)
                W.push_back(hermitian_from(y, first + k * N * N, basis, N));
            return W;
        }

        struct P2Result
        {
            std::vector<CMatrix> W; // unscaled
            double value = 0.0;     // margin or sum t_i
            RVector t;
            ResidualReport report;
        };

        P2Result solve_p2(const Scene &scene, double gamma, P2Objective obj, const DesignOptions &opt,
                          std::vector<std::string> &warnings)
        {
            const P2Problem prob = assemble_p2_feasibility(scene, gamma, obj, opt);
            P2Result r;
            const ConicSolution sol = solve_certified(prob.program, opt.solver, "(P2)", r.report, warnings);
            r.W = split_beams(sol.dual, prob.layout.w_first, prob.layout.k, prob.layout.n);
            for (CMatrix &w : r.W)
                w *= scene.power_budget;
            if (obj == P2Objective::sinr_margin)
                r.value = sol.dual(prob.layout.margin_var);
            else
            {
                r.t = prob.layout.crb_scale.cwiseProduct(sol.dual.segment(prob.layout.tau_first, 4 * prob.layout.l));
                r.value = r.t.sum();
            }
            return r;
        }

    } // namespace

    // ------------------------------------------------------------------ scene

    CMatrix Scene::user_channels() const
    {
        CMatrix H(array.n_elements, n_users());
        for (int k = 0; k < n_users(); ++k)
            H.col(k) = steering_vector(users[k], array, SteeringKind::user).entries;
        return H;
    }

    void Scene::validate() const
    {
        array.validate();
        constellation.validate();
        if (users.empty() || targets.empty())
            throw DomainError("Scene: at least one user and one target are required");
        if (symbol_count < 1)
            throw DomainError("Scene: symbol count must be >= 1");
        if (!(noise_radar > 0.0) || !(noise_comm > 0.0) || !(power_budget > 0.0))
            throw DomainError("Scene: noise variances and power budget must be positive");
        for (const PolarPoint &u : users)
            u.validate();
        for (const Target &t : targets)
            t.validate();
        if (symbol_phases.rows() != n_users() || symbol_phases.cols() != symbol_count)
            throw DomainError("Scene: symbol phase schedule must be K x S");
    }

    RMatrix Scene::random_phases(int users, int symbols, const PskConstellation &psk, unsigned long long seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> pick(0, psk.order - 1);
        RMatrix phases(users, symbols);
        for (int s = 0; s < symbols; ++s)
            for (int k = 0; k < users; ++k)
                phases(k, s) = psk.phase(pick(rng));
        return phases;
    }

    double achieved_gamma_prime(const Scene &scene, const CMatrix &X)
    {
        const CMatrix H = scene.user_channels();
        const double psi = scene.constellation.half_angle();
        double g = kInf;
        for (int k = 0; k < scene.n_users(); ++k)
            for (int s = 0; s < X.cols(); ++s)
            {
                const CiConstraint ci{rotate_channel(CVector(H.col(k)), scene.symbol_phases(k, s)), psi, 0.0};
                g = std::min(g, -ci_margin_scaled(ci, X.col(s)));
            }
        return g / std::sqrt(scene.noise_comm);
    }

    double min_sinr(const Scene &scene, const CMatrix &W)
    {
        const CMatrix H = scene.user_channels();
        const CMatrix G = H.transpose() * W; // G(k, j) = h_k^T w_j
        double m = kInf;
        for (int k = 0; k < scene.n_users(); ++k)
        {
            double interference = scene.noise_comm;
            for (int j = 0; j < G.cols(); ++j)
                if (j != k)
                    interference += std::norm(G(k, j));
            m = std::min(m, std::norm(G(k, k)) / interference);
        }
        return m;
    }

    double min_sinr(const Scene &scene, const std::vector<CMatrix> &Wk)
    {
        const CMatrix H = scene.user_channels();
        double m = kInf;
        for (int k = 0; k < scene.n_users(); ++k)
        {
            const CVector hc = H.col(k).conjugate();
            auto power = [&](const CMatrix &W) { return (hc.adjoint() * W * hc)(0, 0).real(); };
            double interference = scene.noise_comm;
            for (int j = 0; j < static_cast<int>(Wk.size()); ++j)
                if (j != k)
                    interference += power(Wk[j]);
            m = std::min(m, power(Wk[k]) / interference);
        }
        return m;
    }

    // ------------------------------------------------------------------ (P1)

    P1Census p1_census(int n, int s, int k, int l, double rho, P1Form form)
    {
        P1Census c;
        const int P = 4 * l;
        c.variables = (form == P1Form::aggregated ? n * n : s * n * n) + 2 * n * s + (rho < 1.0 ? 1 : 0) +
                      (rho > 0.0 ? P : 0);
        c.linear_rows = 2 * k * s + 1;
        if (form == P1Form::aggregated)
            c.psd_orders.push_back(2 * (n + s));
        else
            c.psd_orders.assign(s, 2 * (n + 1));
        if (rho > 0.0)
            c.psd_orders.insert(c.psd_orders.end(), P, P + 1);
        return c;
    }

    P1Problem assemble_p1(const Scene &scene, double rho, const Normalizers &nf, const DesignOptions &opt)
    {
        scene.validate();
        check_rho(rho);
        if (!(nf.sensing > 0.0) || !(nf.comm > 0.0))
            throw DomainError("assemble_p1: normalization factors must be positive");
        const int N = scene.n_elements(), S = scene.symbol_count, K = scene.n_users(), L = scene.n_targets();
        if (static_cast<long long>(N) * S > opt.max_ns)
        {
            std::ostringstream msg;
            msg << "assemble_p1: N * S = " << static_cast<long long>(N) * S << " exceeds the configured cap "
                << opt.max_ns;
            throw DomainError(msg.str());
        }
        const auto basis = hermitian_basis(N);
        const CMatrix H = scene.user_channels();
        const double h_ref = channel_reference(H);
        if (!(h_ref > 0.0))
            throw DomainError("assemble_p1: user channels vanish");
        const double psi = scene.constellation.half_angle();

        P1Problem out;
        P1Layout &lay = out.layout;
        lay.n = N;
        lay.s = S;
        lay.k = K;
        lay.l = L;
        lay.form = opt.form;
        lay.gamma_scale = std::sqrt(scene.power_budget) * h_ref / std::sqrt(scene.noise_comm);

        ProgramBuilder pb;
        const int n_r = opt.form == P1Form::aggregated ? N * N : S * N * N;
        lay.r_first = pb.add_variables(n_r);
        lay.x_first = pb.add_variables(2 * N * S);
        if (rho < 1.0)
            lay.gamma_var = pb.add_variable((1.0 - rho) * lay.gamma_scale / nf.comm);

        SensingBlocks sb;
        if (rho > 0.0)
        {
            sb = sensing_blocks(scene, basis);
            lay.crb_scale = sb.crb_scale;
            lay.tau_first = pb.add_variables(4 * L);
            for (int i = 0; i < 4 * L; ++i)
                pb.set_objective(lay.tau_first + i, -rho * sb.crb_scale(i) / nf.sensing);
        }

        // constant + sum terms >= 0 rows: power first, then CI rows
        {
            std::vector<std::pair<int, double>> terms;
            const double w = opt.form == P1Form::aggregated ? 1.0 : 1.0 / S;
            for (int r = 0; r < (opt.form == P1Form::aggregated ? 1 : S); ++r)
                for (int p = 0; p < N; ++p)
                    terms.emplace_back(lay.r_first + r * N * N + p, -w);
            pb.add_nonneg_row(1.0, terms);
        }
        for (int k = 0; k < K; ++k)
            for (int s = 0; s < S; ++s)
            {
                const CiConstraint ci{rotate_channel(CVector(H.col(k) / h_ref), scene.symbol_phases(k, s)), psi, 0.0};
                const CiRows rows = linearized_ci_rows(ci);
                for (const RVector *row : {&rows.plus, &rows.minus})
                {
                    std::vector<std::pair<int, double>> terms;
                    for (int j = 0; j < 2 * N; ++j)
                        if ((*row)(j) != 0.0)
                            terms.emplace_back(lay.x_first + s * 2 * N + j, -(*row)(j));
                    if (lay.gamma_var >= 0)
                        terms.emplace_back(lay.gamma_var, -1.0);
                    pb.add_nonneg_row(0.0, terms);
                }
            }

        auto add_r_entries = [&](int blk, int first)
        {
            for (size_t v = 0; v < basis.size(); ++v)
                pb.add_hermitian_coefficient(blk, first + static_cast<int>(v), basis[v].p, basis[v].q,
                                             basis[v].value);
        };
        auto add_x_entries = [&](int blk, int s, int col, double scale)
        {
            for (int n = 0; n < N; ++n)
            {
                pb.add_hermitian_coefficient(blk, lay.x_first + s * 2 * N + n, n, col, scale);
                pb.add_hermitian_coefficient(blk, lay.x_first + s * 2 * N + N + n, n, col, scale * kJ);
            }
        };
        if (opt.form == P1Form::aggregated)
        {
            const int blk = pb.add_hermitian_block(N + S);
            add_r_entries(blk, lay.r_first);
            const double is = 1.0 / std::sqrt(double(S));
            for (int s = 0; s < S; ++s)
            {
                add_x_entries(blk, s, N + s, is);
                pb.add_hermitian_constant(blk, N + s, N + s, 1.0);
            }
            lay.covariance_cones.push_back(pb.cone_index(blk));
        }
        else
        {
            for (int s = 0; s < S; ++s)
            {
                const int blk = pb.add_hermitian_block(N + 1);
                add_r_entries(blk, lay.r_first + s * N * N);
                add_x_entries(blk, s, N, 1.0);
                pb.add_hermitian_constant(blk, N, N, 1.0);
                lay.covariance_cones.push_back(pb.cone_index(blk));
            }
        }

        if (rho > 0.0)
        {
            if (opt.form == P1Form::aggregated)
                lay.schur_cones = add_schur_blocks(pb, sb, lay.tau_first, [&](int v)
                                                   { return std::vector<std::pair<int, double>>{{lay.r_first + v, 1.0}}; });
            else
                lay.schur_cones = add_schur_blocks(pb, sb, lay.tau_first,
                                                   [&](int v)
                                                   {
                                                       std::vector<std::pair<int, double>> vars;
                                                       for (int s = 0; s < S; ++s)
                                                           vars.emplace_back(lay.r_first + s * N * N + v, 1.0 / S);
                                                       return vars;
                                                   });
        }
        out.program = pb.build();
        return out;
    }

    Normalizers normalization_factors(const Scene &scene, const DesignOptions &opt)
    {
        scene.validate();
        DesignOptions o = opt;
        o.tighten = false;
        const Normalizers unit = unit_normalizers(scene);
        std::vector<std::string> warnings;
        Normalizers nf;
        P1Layout lay;
        try
        {
            const SlpRaw r1 = solve_p1(scene, 1.0, unit, o, warnings, lay);
            nf.sensing = lay.crb_scale.cwiseProduct(r1.tau).sum();
        }
        catch (const InfeasibleError &e)
        {
            throw InfeasibleError(std::string("normalization at rho = 1 (pure sensing) failed: ") + e.what());
        }
        try
        {
            const SlpRaw r0 = solve_p1(scene, 0.0, unit, o, warnings, lay);
            nf.comm = r0.g * lay.gamma_scale;
        }
        catch (const InfeasibleError &e)
        {
            throw InfeasibleError(std::string("normalization at rho = 0 (pure communication) failed: ") + e.what());
        }
        if (!(nf.sensing > 0.0))
            throw InfeasibleError("normalization at rho = 1 produced a non-positive CRB trace");
        if (!(nf.comm > 0.0))
            throw InfeasibleError("normalization at rho = 0 produced a non-positive gamma'");
        return nf;
    }

    SlpDesign design_slp(const Scene &scene, double rho, const Normalizers &nf, const DesignOptions &opt)
    {
        check_rho(rho);
        SlpDesign d;
        d.weight = rho;
        d.normalizers = nf;
        P1Layout lay;
        SlpRaw raw = solve_p1(scene, rho, nf, opt, d.warnings, lay);
        d.solution = raw.sol;
        d.certificate = raw.report;

        const int S = lay.s;
        const double Pt = scene.power_budget;
        const double h_ref = channel_reference(scene.user_channels());
        d.gamma_prime = raw.g * lay.gamma_scale;
        if (raw.tau.size() > 0)
            d.crb_bounds = lay.crb_scale.cwiseProduct(raw.tau);

        CMatrix Xhat = raw.Xhat;
        if (lay.form == P1Form::aggregated)
            d.relaxation_gap = relaxation_gap(Xhat, raw.Rhat);
        else
            for (int s = 0; s < S; ++s)
            {
                const double tr = raw.Rs_hat[s].trace().real();
                if (tr > 0.0)
                    d.relaxation_gap = std::max(
                        d.relaxation_gap, (raw.Rs_hat[s] - Xhat.col(s) * Xhat.col(s).adjoint()).norm() / tr);
            }

        bool tightened = false;
        if (opt.tighten && d.relaxation_gap > 1e-3)
        {
            const double g_fixed = rho < 1.0 ? raw.g * (1.0 - 1e-4) : 0.0;
            Xhat = tighten_symbols(scene, raw.Rhat, Xhat, std::max(g_fixed, 0.0), h_ref, opt, d.warnings);
            tightened = true;
        }

        d.symbols = std::sqrt(Pt) * Xhat;
        d.covariance = Pt * raw.Rhat;
        d.covariance = 0.5 * (d.covariance + d.covariance.adjoint());
        if (lay.form == P1Form::per_symbol && !tightened)
            for (const CMatrix &R : raw.Rs_hat)
                d.covariances.push_back(Pt * R);
        else
        {
            const CMatrix excess = d.covariance - d.symbols * d.symbols.adjoint() / double(S);
            for (int s = 0; s < S; ++s)
                d.covariances.push_back(d.symbols.col(s) * d.symbols.col(s).adjoint() + excess);
        }
        d.relaxation_gap_final = 0.0;
        for (int s = 0; s < S; ++s)
        {
            const double tr = d.covariances[s].trace().real();
            if (tr > 0.0)
                d.relaxation_gap_final =
                    std::max(d.relaxation_gap_final,
                             (d.covariances[s] - d.symbols.col(s) * d.symbols.col(s).adjoint()).norm() / tr);
        }
        if (d.relaxation_gap_final > 1e-3)
        {
            std::ostringstream msg;
            msg << "relaxation gap " << d.relaxation_gap_final
                << " exceeds 1e-3: the symbol block does not attain the relaxed covariance";
            d.warnings.push_back(msg.str());
        }

        d.power = d.symbols.squaredNorm() / S;
        if (d.covariance.trace().real() > Pt * (1.0 + 1e-6))
            d.warnings.push_back("relaxed covariance exceeds the power budget beyond 1e-6");
        d.gamma_prime_achieved = achieved_gamma_prime(scene, d.symbols);

        const FimModel model(scene.targets, scene.array, scene.noise_radar, S);
        if (auto c = try_crb(model.evaluate(d.covariance)))
            d.crb_covariance = *c;
        if (auto c = try_crb(fim_direct(scene.targets, d.symbols, scene.noise_radar, scene.array).entries))
            d.crb_symbols = *c;
        d.objective = (1.0 - rho) * d.gamma_prime / nf.comm;
        if (d.crb_bounds.size() > 0)
            d.objective -= rho * d.crb_bounds.sum() / nf.sensing;
        return d;
    }

    SlpDesign design_slp(const Scene &scene, double rho, const DesignOptions &opt)
    {
        return design_slp(scene, rho, normalization_factors(scene, opt), opt);
    }

    // ------------------------------------------------------------------ (P2)

    P2Problem assemble_p2_feasibility(const Scene &scene, double gamma, P2Objective objective,
                                      const DesignOptions &opt)
    {
        scene.validate();
        if (!(gamma >= 0.0))
            throw DomainError("assemble_p2_feasibility: gamma must be >= 0");
        const int N = scene.n_elements(), K = scene.n_users(), L = scene.n_targets();
        if (static_cast<long long>(N) * N * K > 64LL * opt.max_ns)
            throw DomainError("assemble_p2_feasibility: problem exceeds the configured size cap");
        const auto basis = hermitian_basis(N);
        const CMatrix H = scene.user_channels();
        const double h_ref = channel_reference(H);
        const double noise = scene.noise_comm / (scene.power_budget * h_ref * h_ref);

        P2Problem out;
        P2Layout &lay = out.layout;
        lay.n = N;
        lay.k = K;
        lay.l = L;
        ProgramBuilder pb;
        lay.w_first = pb.add_variables(K * N * N);
        SensingBlocks sb;
        if (objective == P2Objective::sinr_margin)
            lay.margin_var = pb.add_variable(1.0);
        else
        {
            sb = sensing_blocks(scene, basis);
            lay.crb_scale = sb.crb_scale;
            lay.tau_first = pb.add_variables(4 * L);
            const double total = sb.crb_scale.sum();
            for (int i = 0; i < 4 * L; ++i)
                pb.set_objective(lay.tau_first + i, -sb.crb_scale(i) / total);
        }

        {
            std::vector<std::pair<int, double>> terms;
            for (int k = 0; k < K; ++k)
                for (int p = 0; p < N; ++p)
                    terms.emplace_back(lay.w_first + k * N * N + p, -1.0);
            pb.add_nonneg_row(1.0, terms);
        }
        for (int k = 0; k < K; ++k)
        {
            const CVector hc = H.col(k).conjugate() / h_ref;
            const CMatrix Q = hc * hc.adjoint(); // h^* h^T
            std::vector<std::pair<int, double>> terms;
            for (int j = 0; j < K; ++j)
            {
                const double w = j == k ? 1.0 : -gamma;
                if (w == 0.0)
                    continue;
                for (size_t v = 0; v < basis.size(); ++v)
                {
                    const double c = trace_coefficient(Q, basis[v]);
                    if (c != 0.0)
                        terms.emplace_back(lay.w_first + j * N * N + static_cast<int>(v), w * c);
                }
            }
            if (lay.margin_var >= 0)
                terms.emplace_back(lay.margin_var, -1.0);
            pb.add_nonneg_row(-gamma * noise, terms);
        }
        for (int k = 0; k < K; ++k)
        {
            const int blk = pb.add_hermitian_block(N);
            for (size_t v = 0; v < basis.size(); ++v)
                pb.add_hermitian_coefficient(blk, lay.w_first + k * N * N + static_cast<int>(v), basis[v].p,
                                             basis[v].q, basis[v].value);
            lay.beam_cones.push_back(pb.cone_index(blk));
        }
        if (objective == P2Objective::crb)
            add_schur_blocks(pb, sb, lay.tau_first,
                             [&](int v)
                             {
                                 std::vector<std::pair<int, double>> vars;
                                 for (int k = 0; k < K; ++k)
                                     vars.emplace_back(lay.w_first + k * N * N + v, 1.0);
                                 return vars;
                             });
        out.program = pb.build();
        return out;
    }

    BlpCeiling blp_sinr_ceiling(const Scene &scene, const DesignOptions &opt, double rel_tol)
    {
        scene.validate();
        const CMatrix H = scene.user_channels();
        BlpCeiling c;
        c.upper_bound = kInf;
        for (int k = 0; k < scene.n_users(); ++k)
            c.upper_bound = std::min(c.upper_bound, scene.power_budget * H.col(k).squaredNorm() / scene.noise_comm);
        std::vector<std::string> warnings;
        double lo = 0.0, hi = c.upper_bound;

        auto probe = [&](double gamma)
        {
            const P2Result r = solve_p2(scene, gamma, P2Objective::sinr_margin, opt, warnings);
            const double achieved = min_sinr(scene, r.W);
            const bool feasible = achieved >= gamma * (1.0 - 1e-12);
            c.probes.push_back({gamma, feasible});
            if (feasible || achieved > lo)
            {
                if (achieved > lo)
                {
                    lo = std::min(achieved, hi);
                    c.beams = r.W;
                }
            }
            if (!feasible)
                hi = gamma;
        };

        probe(hi);
        if (c.beams.empty())
        {
            // gamma = 0 always admits the solution found at the first probe
            const P2Result r = solve_p2(scene, 0.0, P2Objective::sinr_margin, opt, warnings);
            c.beams = r.W;
            lo = std::max(lo, min_sinr(scene, r.W));
        }
        for (int it = 0; it < 200 && hi - lo > rel_tol * hi; ++it)
            probe(0.5 * (lo + hi));
        c.gamma_max = lo;
        return c;
    }

    BlpContext blp_context(const Scene &scene, const DesignOptions &opt)
    {
        BlpContext ctx;
        ctx.ceiling = blp_sinr_ceiling(scene, opt);
        ctx.normalizers.comm = ctx.ceiling.gamma_max > 0.0 ? ctx.ceiling.gamma_max : 1.0;
        try
        {
            std::vector<std::string> warnings;
            ctx.normalizers.sensing = solve_p2(scene, 0.0, P2Objective::crb, opt, warnings).value;
        }
        catch (const InfeasibleError &)
        {
            ctx.normalizers.sensing = kInf;
        }
        return ctx;
    }

    CMatrix orthogonal_data_matrix(int users, int symbols)
    {
        if (symbols < users)
            throw DomainError("orthogonal_data_matrix: S must be >= K");
        return dft_rows(users, symbols);
    }

    BlpDesign design_blp(const Scene &scene, double rho, const BlpContext &ctx, const DesignOptions &opt,
                         unsigned long long seed)
    {
        check_rho(rho);
        scene.validate();
        const int N = scene.n_elements(), K = scene.n_users(), S = scene.symbol_count;
        BlpDesign d;
        d.weight = rho;
        d.normalizers = ctx.normalizers;
        d.gamma_max = ctx.ceiling.gamma_max;
        d.probes = ctx.ceiling.probes;
        d.data_matrix = orthogonal_data_matrix(K, S);

        if (rho > 0.0 && !std::isfinite(ctx.normalizers.sensing))
            throw InfeasibleError("(P2): the CRB is unbounded for every covariance of this scene");

        if (rho == 0.0)
        {
            d.gamma = ctx.ceiling.gamma_max;
            d.covariances = ctx.ceiling.beams;
        }
        else
        {
            // J(gamma) = rho T(gamma) / NF_R - (1 - rho) gamma / NF_C, minimized over [0, gamma_max]
            struct Eval
            {
                double gamma, J;
                P2Result r;
            };
            std::vector<Eval> evals;
            auto J = [&](double gamma) -> double
            {
                for (const Eval &e : evals)
                    if (e.gamma == gamma)
                        return e.J;
                try
                {
                    P2Result r = solve_p2(scene, gamma, P2Objective::crb, opt, d.warnings);
                    const double j = rho * r.value / ctx.normalizers.sensing - (1.0 - rho) * gamma / ctx.normalizers.comm;
                    evals.push_back({gamma, j, std::move(r)});
                    return j;
                }
                catch (const InfeasibleError &)
                {
                    return kInf;
                }
                catch (const SolverError &e)
                {
                    // near gamma_max the SINR rows leave no interior and the CRB diverges
                    d.warnings.push_back(std::string("(P2) probe skipped: ") + e.what());
                    return kInf;
                }
            };
            const double gmax = ctx.ceiling.gamma_max;
            if (rho == 1.0 || gmax <= 0.0)
                J(0.0);
            else
            {
                const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
                double a = 0.0, b = gmax;
                J(a);
                J(b);
                double c = b - ratio * (b - a), e = a + ratio * (b - a);
                double fc = J(c), fe = J(e);
                while (b - a > 1e-4 * gmax)
                {
                    if (fc <= fe)
                    {
                        b = e;
                        e = c;
                        fe = fc;
                        c = b - ratio * (b - a);
                        fc = J(c);
                    }
                    else
                    {
                        a = c;
                        c = e;
                        fc = fe;
                        e = a + ratio * (b - a);
                        fe = J(e);
                    }
                }
            }
            if (evals.empty())
                throw InfeasibleError("(P2): no SINR level in [0, gamma_max] admits a feasible sensing design");
            const auto best = std::min_element(evals.begin(), evals.end(),
                                               [](const Eval &x, const Eval &y) { return x.J < y.J; });
            d.gamma = best->gamma;
            d.covariances = best->r.W;
            d.crb_bounds = best->r.t;
            d.certificates.push_back(best->r.report);
            for (const Eval &e : evals)
                if (&e != &*best)
                    d.certificates.push_back(e.r.report);
            d.objective = -best->J;
        }
        if (rho == 0.0)
            d.objective = d.gamma / ctx.normalizers.comm;

        // Rank-one extraction with randomization fallback
        std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig;
        d.beamformers.resize(N, K);
        for (int k = 0; k < K; ++k)
        {
            eig.emplace_back(0.5 * (d.covariances[k] + d.covariances[k].adjoint()));
            const double tr = std::max(d.covariances[k].trace().real(), 0.0);
            d.beamformers.col(k) = eig[k].eigenvectors().col(N - 1) * std::sqrt(tr);
        }
        double achieved = min_sinr(scene, d.beamformers);
        if (achieved < d.gamma * 0.99)
        {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> g(0.0, std::sqrt(0.5));
            CMatrix best = d.beamformers;
            for (int round = 0; round < 50 && achieved < d.gamma * 0.99; ++round)
            {
                ++d.randomization_rounds;
                CMatrix cand(N, K);
                for (int k = 0; k < K; ++k)
                {
                    CVector z(N);
                    for (int n = 0; n < N; ++n)
                        z(n) = cplx(g(rng), g(rng));
                    const RVector sq = eig[k].eigenvalues().cwiseMax(0.0).cwiseSqrt();
                    CVector xi = eig[k].eigenvectors() * (sq.cast<cplx>().asDiagonal() * z);
                    const double tr = std::max(d.covariances[k].trace().real(), 0.0);
                    if (xi.norm() > 0.0)
                        xi *= std::sqrt(tr) / xi.norm();
                    cand.col(k) = xi;
                }
                const double a = min_sinr(scene, cand);
                if (a > achieved)
                {
                    achieved = a;
                    best = cand;
                }
            }
            d.beamformers = best;
            if (achieved < d.gamma * 0.99)
            {
                std::ostringstream msg;
                msg << "rank-one extraction reaches SINR " << achieved << " below the relaxed level " << d.gamma;
                d.warnings.push_back(msg.str());
            }
        }
        d.gamma_achieved = achieved;
        d.symbols = d.beamformers * d.data_matrix;

        CMatrix R = CMatrix::Zero(N, N);
        for (const CMatrix &W : d.covariances)
            R += W;
        const FimModel model(scene.targets, scene.array, scene.noise_radar, S);
        if (auto c = try_crb(model.evaluate(0.5 * (R + R.adjoint()))))
            d.crb_covariance = *c;
        return d;
    }

    BlpDesign design_blp(const Scene &scene, double rho, const DesignOptions &opt, unsigned long long seed)
    {
        return design_blp(scene, rho, blp_context(scene, opt), opt, seed);
    }

    // ------------------------------------------------------------------ patterns and sweeps

    RVector beampattern(const CMatrix &R, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid)
    {
        if (R.rows() != cfg.n_elements || R.cols() != cfg.n_elements)
            throw DomainError("beampattern: covariance must be N x N");
        RVector out(static_cast<Eigen::Index>(grid.size()));
        for (size_t i = 0; i < grid.size(); ++i)
        {
            const CVector v = steering_vector(grid[i], cfg).entries;
            // E |v^T x|^2 = v^T R v^*
            const double p = (v.transpose() * R * v.conjugate())(0, 0).real();
            out(static_cast<Eigen::Index>(i)) = std::max(p, 0.0);
        }
        return out;
    }

    RVector beampattern_from_symbols(const CMatrix &X, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid)
    {
        return beampattern(X * X.adjoint() / double(X.cols()), cfg, grid);
    }

    RVector gain_pattern(const CMatrix &R, const ArrayConfig &cfg, const std::vector<PolarPoint> &grid)
    {
        RVector out = beampattern(R, cfg, grid);
        for (size_t i = 0; i < grid.size(); ++i)
            out(static_cast<Eigen::Index>(i)) /= path_loss(grid[i], cfg);
        return out;
    }

    std::string to_string(Precoder p) { return p == Precoder::slp ? "slp" : "blp"; }

    namespace
    {
        void fill_crb(TradeoffPoint &pt, const RVector &crb, int L)
        {
            if (crb.size() == 0)
            {
                pt.rcrb_angle = pt.rcrb_range = pt.trace_crb = kInf;
                return;
            }
            pt.rcrb_angle = std::sqrt(crb.segment(0, L).mean());
            pt.rcrb_range = std::sqrt(crb.segment(L, L).mean());
            pt.trace_crb = crb.sum();
        }

        double trace_crb_of(const Scene &scene, const CMatrix &X)
        {
            if (auto c = try_crb(fim_direct(scene.targets, X, scene.noise_radar, scene.array).entries))
                return c->sum();
            return kInf;
        }
    }

    std::vector<TradeoffPoint> tradeoff_sweep(const Scene &scene, const std::vector<double> &rho_grid,
                                              const DesignOptions &opt)
    {
        scene.validate();
        if (rho_grid.empty())
            throw DomainError("tradeoff_sweep: empty rho grid");
        for (double r : rho_grid)
            check_rho(r);
        const int L = scene.n_targets();
        std::vector<TradeoffPoint> pts;

        std::optional<Normalizers> nf;
        std::string nf_error;
        try
        {
            nf = normalization_factors(scene, opt);
        }
        catch (const Error &e)
        {
            nf_error = e.what();
        }
        std::optional<BlpContext> ctx;
        std::string ctx_error;
        try
        {
            ctx = blp_context(scene, opt);
        }
        catch (const Error &e)
        {
            ctx_error = e.what();
        }

        auto failure = [](TradeoffPoint &pt, const Error &e)
        {
            pt.feasible = false;
            pt.status = dynamic_cast<const InfeasibleError *>(&e) ? "infeasible" : "solver_failure";
            pt.message = e.what();
        };

        for (double rho : rho_grid)
        {
            TradeoffPoint s;
            s.rho = rho;
            s.precoder = Precoder::slp;
            try
            {
                if (!nf)
                    throw InfeasibleError(nf_error);
                const SlpDesign d = design_slp(scene, rho, *nf, opt);
                s.feasible = true;
                s.status = to_string(d.solution.status);
                s.sinr = d.sinr();
                s.sinr_achieved = std::pow(std::max(d.gamma_prime_achieved, 0.0), 2);
                fill_crb(s, d.crb_covariance, L);
                s.trace_crb_achieved = trace_crb_of(scene, d.symbols);
                s.certificates.push_back(d.certificate);
                for (const std::string &w : d.warnings)
                    s.message += (s.message.empty() ? "" : "; ") + w;
            }
            catch (const Error &e)
            {
                failure(s, e);
            }
            pts.push_back(s);

            TradeoffPoint b;
            b.rho = rho;
            b.precoder = Precoder::blp;
            try
            {
                if (!ctx)
                    throw InfeasibleError(ctx_error);
                const BlpDesign d = design_blp(scene, rho, *ctx, opt);
                b.feasible = true;
                b.status = "optimal";
                b.sinr = d.gamma;
                b.sinr_achieved = d.gamma_achieved;
                fill_crb(b, d.crb_covariance, L);
                b.trace_crb_achieved = trace_crb_of(scene, d.symbols);
                b.certificates = d.certificates;
                for (const std::string &w : d.warnings)
                    b.message += (b.message.empty() ? "" : "; ") + w;
            }
            catch (const Error &e)
            {
                failure(b, e);
            }
            pts.push_back(b);
        }
        return pts;
    }

} // namespace nfisac
