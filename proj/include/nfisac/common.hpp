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

#ifndef NFISAC_COMMON_HPP
#define NFISAC_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace nfisac
{
    using cplx = std::complex<double>;
    using CVector = Eigen::VectorXcd;
    using CMatrix = Eigen::MatrixXcd;
    using RVector = Eigen::VectorXd;
    using RMatrix = Eigen::MatrixXd;

    inline constexpr double kSpeedOfLight = 299792458.0;
    inline constexpr double kPi = 3.14159265358979323846;
    inline constexpr cplx kJ{0.0, 1.0};

    // Base class of every error raised by the library
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Invalid arguments, violated preconditions, dimension mismatches
    class DomainError : public Error
    {
    public:
        using Error::Error;
    };

    // A design problem has no feasible point
    class InfeasibleError : public Error
    {
    public:
        using Error::Error;
    };

    // The conic solver did not reach a certified optimum
    class SolverError : public Error
    {
    public:
        using Error::Error;
    };

    // Configuration file or command line problems
    class ConfigError : public Error
    {
    public:
        using Error::Error;
    };

    inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
    inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
    inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
    inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

} // namespace nfisac

#endif
