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

#ifndef NFISAC_HARNESS_HPP
#define NFISAC_HARNESS_HPP

#include "nfisac/designer.hpp"
#include "nfisac/sensing_sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nfisac
{
    // Range in meters, angle in degrees from the positive array axis (broadside = 90)
    struct Location
    {
        double range_m = 1.0;
        double angle_deg = 90.0;

        bool operator==(const Location &) const = default;
    };

    enum class Experiment
    {
        design,
        sweep,
        beampattern,
        music,
        mc
    };
    std::string to_string(Experiment e);

    enum class PatternKind
    {
        absolute, // v^T R v^*, path loss included
        gain      // the same divided by beta(p)
    };
    std::string to_string(PatternKind k);

    // Every field has a default; the defaults form the desk scene.
    // Config file layout: [section] headers followed by "key = value" lines, '#' comments.
    struct RunConfig
    {
        // [array]
        int elements = 16;
        double frequency_hz = 120e6;
        std::optional<double> spacing_m; // half wavelength when unset

        // [scene]
        std::vector<Location> users{{10.0, 112.5}, {15.0, 112.5}};
        std::vector<Location> targets{{5.0, 90.0}, {10.0, 90.0}};
        std::vector<cplx> reflectivity; // empty: b_l = 1 / beta_l, so that |b| beta = 1
        int symbols = 24;
        int modulation = 4;
        std::vector<std::vector<int>> symbol_indices; // K x S alphabet indices, empty: drawn with the seed

        // [noise]
        double radar_noise = 1.0;               // sigma_R^2
        std::optional<double> asnr_db = 10.0;   // P_t N^2 / sigma_R^2
        std::optional<double> power_budget;     // P_t, exclusive with asnr_db
        std::optional<double> comm_snr_db = 20.0; // P_t N mean(beta_users) / sigma_C^2
        std::optional<double> comm_noise;       // sigma_C^2, exclusive with comm_snr_db

        // [design]
        double rho = 0.5;
        Precoder precoder = Precoder::slp;
        std::vector<double> rho_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        P1Form form = P1Form::aggregated;
        bool tighten = true;
        double tolerance = 1e-8;
        int max_iterations = 200;

        // [music]
        int music_angles = 200;
        int music_ranges = 200;
        double music_span_deg = 30.0;          // around the mean target angle
        double music_range_min_m = 1.0;
        std::optional<double> music_range_max_m; // 1.2 d_FA / 10 when unset
        int trials = 100;
        double spectrum_cap = kSpectrumCap;

        // [beampattern]
        double pattern_angle_min_deg = 1.0;
        double pattern_angle_max_deg = 179.0;
        double pattern_angle_step_deg = 1.0;
        double pattern_range_min_m = 1.0;
        std::optional<double> pattern_range_max_m; // 1.2 d_FA / 10 when unset
        double pattern_range_step_m = 0.25;
        PatternKind pattern = PatternKind::absolute;

        // [run]
        Experiment experiment = Experiment::design;
        std::uint64_t seed = 1;
        std::string output_dir = "nfisac_out";

        bool operator==(const RunConfig &) const = default;

        void validate() const; // throws ConfigError
    };

    // Parse errors carry the offending line number and text
    RunConfig parse_config(std::istream &in, const std::string &source = "<config>");
    RunConfig load_config(const std::string &path);
    std::string serialize_config(const RunConfig &cfg);

    // "a:step:b" or a comma separated list
    std::vector<double> parse_rho_grid(const std::string &text);

    // P_t = 10^(asnr/10) sigma_R^2 / N^2
    double asnr_to_power(double asnr_db, double radar_noise, int elements);

    Scene build_scene(const RunConfig &cfg);
    DesignOptions design_options(const RunConfig &cfg);

    struct GridAxes
    {
        std::vector<double> angles; // rad
        std::vector<double> ranges; // m
    };
    GridAxes music_axes(const RunConfig &cfg, const Scene &scene);
    GridAxes pattern_axes(const RunConfig &cfg, const Scene &scene);

    // Pattern on the axes, angles x ranges
    MusicGrid pattern_map(const CMatrix &R, const ArrayConfig &array, const GridAxes &axes, PatternKind kind);

    // One MUSIC run on a given symbol block
    struct MusicOutcome
    {
        MusicGrid grid;
        NoiseSubspace subspace;
        PeakList peaks;
        EstimationError error;
        bool success = false; // every target within one angle cell and 5 % range
    };
    MusicOutcome run_music(const Scene &scene, const CMatrix &X, const GridAxes &axes, std::uint64_t seed,
                           double cap = kSpectrumCap);

    // CSV writers, 12 significant digits
    std::string format_number(double v);
    void write_tradeoff_csv(std::ostream &os, const std::vector<TradeoffPoint> &pts);
    void write_pattern_csv(std::ostream &os, const MusicGrid &map);
    void write_spectrum_csv(std::ostream &os, const MusicGrid &g);
    void write_peaks_csv(std::ostream &os, const MusicOutcome &m, const Scene &scene);
    void write_symbols_csv(std::ostream &os, const CMatrix &X);

    // Command line entry point. Exit codes: 0 success, 1 other failure, 2 configuration
    // error, 3 infeasible design, 4 solver failure.
    int cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace nfisac

#endif
