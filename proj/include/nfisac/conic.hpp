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

#ifndef NFISAC_CONIC_HPP
#define NFISAC_CONIC_HPP

#include "nfisac/common.hpp"

#include <Eigen/Sparse>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace nfisac
{
    // Small dense-scale semidefinite programming in standard form
    //
    //   primal:  minimize c^T x   s.t.  A x = b,  x in K
    //   dual:    maximize b^T y   s.t.  z = c - A^T y in K
    //
    // K is a product of nonnegative orthants and PSD cones. A PSD block of order n
    // occupies n(n+1)/2 entries of x in svec layout: upper triangle, column by column,
    // off-diagonal entries scaled by sqrt(2) so that svec(A) . svec(B) = tr(AB).
    //
    // Design problems are usually modelled on the dual side (linear matrix
    // inequalities in free variables y), see ProgramBuilder.

    struct Cone
    {
        enum class Kind
        {
            nonnegative,
            psd
        };
        Kind kind = Kind::nonnegative;
        int size = 0; // number of entries (nonnegative) or matrix order (psd)

        int dim() const { return kind == Kind::nonnegative ? size : size * (size + 1) / 2; }
    };

    struct ConicProgram
    {
        RVector c;
        Eigen::SparseMatrix<double> A; // m x n
        RVector b;
        std::vector<Cone> cones;

        int n_primal() const { return static_cast<int>(c.size()); }
        int n_dual() const { return static_cast<int>(b.size()); }
        void validate() const; // throws DomainError
    };

    enum class SolveStatus
    {
        optimal,
        infeasible,
        max_iterations
    };

    std::string to_string(SolveStatus s);

    struct Residuals
    {
        double primal = 0.0; // relative equality residual and cone violation of x
        double dual = 0.0;   // relative dual residual and cone violation of c - A^T y
        double gap = 0.0;    // relative duality gap
    };

    struct ConicSolution
    {
        RVector primal; // x
        RVector dual;   // y
        RVector slack;  // z
        SolveStatus status = SolveStatus::max_iterations;
        double objective_value = 0.0; // c^T x
        double dual_objective = 0.0;  // b^T y
        Residuals residuals;
        int iterations = 0;
        std::string message; // infeasibility certificate or failure description
    };

    struct SolverOptions
    {
        double tol = 1e-7;
        int max_iter = 200;
        bool verbose = false;
    };

    ConicSolution solve(const ConicProgram &p, const SolverOptions &opt);
    inline ConicSolution solve(const ConicProgram &p, double tol = 1e-7, int max_iter = 200)
    {
        return solve(p, SolverOptions{tol, max_iter, false});
    }

    // Residuals recomputed from scratch out of (x, y, z)
    struct ResidualReport
    {
        double equality = 0.0;      // |Ax - b| / (1 + |b|)
        double primal_cone = 0.0;   // max(0, -lambda_min(x)) / (1 + |x|)
        double dual_equality = 0.0; // |c - A^T y - z| / (1 + |c|)
        double dual_cone = 0.0;     // max(0, -lambda_min(c - A^T y)) / (1 + |c|)
        double gap = 0.0;           // |c^T x - b^T y| / (1 + |c^T x| + |b^T y|)
        double objective_value = 0.0;
        double dual_objective = 0.0;

        double primal() const { return std::max(equality, primal_cone); }
        double dual() const { return std::max(dual_equality, dual_cone); }
        bool within(double tol) const { return primal() < tol && dual() < tol && gap < tol; }
    };

    ResidualReport certify(const ConicProgram &p, const ConicSolution &s);

    // svec / smat helpers for one PSD block
    inline int svec_index(int p, int q) { return p <= q ? q * (q + 1) / 2 + p : p * (p + 1) / 2 + q; }
    RVector svec(const RMatrix &M);
    RMatrix smat(const Eigen::Ref<const RVector> &v, int order);

    // Real symmetric embedding [Re H, -Im H; Im H, Re H] of a Hermitian matrix and its inverse
    RMatrix lift_hermitian(const CMatrix &H);
    CMatrix unlift_hermitian(const RMatrix &M);

    // Text dump: "m n n_cones", cone lines "l k" / "s n", then "c", "b" and "A" sections
    // with one "row col value" triplet per line (zero based).
    void write_program(std::ostream &os, const ConicProgram &p);

    // Modelling helper on the dual side: free variables y, objective maximize sum w_i y_i,
    // constraints  const + sum_i y_i coef_i  in K.
    class ProgramBuilder
    {
    public:
        int add_variable(double objective = 0.0);
        int add_variables(int count);
        void set_objective(int var, double coef);
        int n_variables() const { return static_cast<int>(objective_.size()); }

        // constant + sum coef * y >= 0
        int add_nonneg_row(double constant, const std::vector<std::pair<int, double>> &terms);

        // Real symmetric block, entries (p,q) and (q,p) are set together
        int add_psd_block(int order);
        void add_psd_constant(int block, int p, int q, double v);
        void add_psd_coefficient(int block, int var, int p, int q, double v);

        // Hermitian block of order n, lifted to a real symmetric block of order 2n.
        // Entry (p,q) receives v and (q,p) receives conj(v).
        int add_hermitian_block(int order);
        void add_hermitian_constant(int block, int p, int q, cplx v);
        void add_hermitian_coefficient(int block, int var, int p, int q, cplx v);

        // Index of a block's cone in the built program (nonnegative rows form cone 0 when present)
        int cone_index(int block) const;
        bool has_rows() const { return !row_constant_.empty(); }

        ConicProgram build() const;

    private:
        struct Entry
        {
            int var; // -1 for the constant term
            int p, q;
            double v;
        };
        struct Block
        {
            int order;
            bool hermitian;
            std::vector<Entry> entries;
        };
        void add_real_entry(int block, int var, int p, int q, double v);

        std::vector<double> objective_;
        std::vector<double> row_constant_;
        std::vector<std::vector<std::pair<int, double>>> row_terms_;
        std::vector<Block> blocks_;
    };

    // Value of the constraint slack c - A^T y restricted to one PSD cone, as a matrix
    RMatrix psd_slack(const ConicProgram &p, const RVector &y, int cone);

} // namespace nfisac

#endif
