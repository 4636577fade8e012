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

#include "nfisac/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace nfisac
{
    std::string to_string(Experiment e)
    {
        switch (e)
        {
        case Experiment::design:
            return "design";
        case Experiment::sweep:
            return "sweep";
        case Experiment::beampattern:
            return "beampattern";
        case Experiment::music:
            return "music";
        case Experiment::mc:
            return "mc";
        }
        return "design";
    }

    std::string to_string(PatternKind k) { return k == PatternKind::absolute ? "absolute" : "gain"; }

    namespace
    {
        std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        std::vector<std::string> split(const std::string &s, char sep)
        {
            std::vector<std::string> out;
            std::string cur;
            std::istringstream is(s);
            while (std::getline(is, cur, sep))
                out.push_back(trim(cur));
            if (!s.empty() && s.back() == sep)
                out.emplace_back();
            return out;
        }

        double to_double(const std::string &s)
        {
            if (s.empty())
                throw ConfigError("expected a number, got nothing");
            char *end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end != s.c_str() + s.size())
                throw ConfigError("expected a number, got '" + s + "'");
            return v;
        }

        long long to_integer(const std::string &s)
        {
            if (s.empty())
                throw ConfigError("expected an integer, got nothing");
            char *end = nullptr;
            const long long v = std::strtoll(s.c_str(), &end, 10);
            if (end != s.c_str() + s.size())
                throw ConfigError("expected an integer, got '" + s + "'");
            return v;
        }

        bool to_bool(const std::string &s)
        {
            if (s == "true" || s == "yes" || s == "1")
                return true;
            if (s == "false" || s == "no" || s == "0")
                return false;
            throw ConfigError("expected true or false, got '" + s + "'");
        }

        std::optional<double> to_optional(const std::string &s)
        {
            if (s == "auto")
                return std::nullopt;
            return to_double(s);
        }

        std::vector<Location> to_locations(const std::string &s)
        {
            std::vector<Location> out;
            for (const std::string &item : split(s, ','))
            {
                const auto at = item.find('@');
                if (at == std::string::npos)
                    throw ConfigError("expected range@angle, got '" + item + "'");
                out.push_back({to_double(trim(item.substr(0, at))), to_double(trim(item.substr(at + 1)))});
            }
            return out;
        }

        std::vector<cplx> to_complex_list(const std::string &s)
        {
            std::vector<cplx> out;
            if (s == "normalized")
                return out;
            for (const std::string &item : split(s, ','))
            {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("expected re:im, got '" + item + "'");
                out.emplace_back(to_double(trim(item.substr(0, colon))), to_double(trim(item.substr(colon + 1))));
            }
            return out;
        }

        std::vector<std::vector<int>> to_index_rows(const std::string &s)
        {
            std::vector<std::vector<int>> rows;
            if (s == "random")
                return rows;
            for (const std::string &row : split(s, ';'))
            {
                std::vector<int> r;
                std::istringstream is(row);
                std::string tok;
                while (is >> tok)
                    r.push_back(static_cast<int>(to_integer(tok)));
                rows.push_back(std::move(r));
            }
            return rows;
        }

        Precoder to_precoder(const std::string &s)
        {
            if (s == "slp")
                return Precoder::slp;
            if (s == "blp")
                return Precoder::blp;
            throw ConfigError("precoder must be slp or blp, got '" + s + "'");
        }

        P1Form to_form(const std::string &s)
        {
            if (s == "aggregated")
                return P1Form::aggregated;
            if (s == "per_symbol")
                return P1Form::per_symbol;
            throw ConfigError("form must be aggregated or per_symbol, got '" + s + "'");
        }

        Experiment to_experiment(const std::string &s)
        {
            for (Experiment e : {Experiment::design, Experiment::sweep, Experiment::beampattern, Experiment::music,
                                 Experiment::mc})
                if (to_string(e) == s)
                    return e;
            throw ConfigError("unknown experiment '" + s + "'");
        }

        PatternKind to_pattern(const std::string &s)
        {
            if (s == "absolute")
                return PatternKind::absolute;
            if (s == "gain")
                return PatternKind::gain;
            throw ConfigError("pattern must be absolute or gain, got '" + s + "'");
        }

        std::string exact(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }

        std::string exact(const std::optional<double> &v) { return v ? exact(*v) : "auto"; }

        using Setter = std::function<void(RunConfig &, const std::string &)>;

        // Every documented key with its parser
        const std::map<std::string, Setter> &setters()
        {
            static const std::map<std::string, Setter> table = {
                {"array.elements", [](RunConfig &c, const std::string &v) { c.elements = int(to_integer(v)); }},
                {"array.frequency_hz", [](RunConfig &c, const std::string &v) { c.frequency_hz = to_double(v); }},
                {"array.spacing_m", [](RunConfig &c, const std::string &v) { c.spacing_m = to_optional(v); }},
                {"scene.users", [](RunConfig &c, const std::string &v) { c.users = to_locations(v); }},
                {"scene.targets", [](RunConfig &c, const std::string &v) { c.targets = to_locations(v); }},
                {"scene.reflectivity", [](RunConfig &c, const std::string &v) { c.reflectivity = to_complex_list(v); }},
                {"scene.symbols", [](RunConfig &c, const std::string &v) { c.symbols = int(to_integer(v)); }},
                {"scene.modulation", [](RunConfig &c, const std::string &v) { c.modulation = int(to_integer(v)); }},
                {"scene.symbol_indices",
                 [](RunConfig &c, const std::string &v) { c.symbol_indices = to_index_rows(v); }},
                {"noise.radar", [](RunConfig &c, const std::string &v) { c.radar_noise = to_double(v); }},
                {"noise.asnr_db", [](RunConfig &c, const std::string &v) { c.asnr_db = to_optional(v); }},
                {"noise.power_budget", [](RunConfig &c, const std::string &v) { c.power_budget = to_optional(v); }},
                {"noise.comm_snr_db", [](RunConfig &c, const std::string &v) { c.comm_snr_db = to_optional(v); }},
                {"noise.comm", [](RunConfig &c, const std::string &v) { c.comm_noise = to_optional(v); }},
                {"design.rho", [](RunConfig &c, const std::string &v) { c.rho = to_double(v); }},
                {"design.precoder", [](RunConfig &c, const std::string &v) { c.precoder = to_precoder(v); }},
                {"design.rho_grid", [](RunConfig &c, const std::string &v) { c.rho_grid = parse_rho_grid(v); }},
                {"design.form", [](RunConfig &c, const std::string &v) { c.form = to_form(v); }},
                {"design.tighten", [](RunConfig &c, const std::string &v) { c.tighten = to_bool(v); }},
                {"design.tolerance", [](RunConfig &c, const std::string &v) { c.tolerance = to_double(v); }},
                {"design.max_iterations",
                 [](RunConfig &c, const std::string &v) { c.max_iterations = int(to_integer(v)); }},
                {"music.angles", [](RunConfig &c, const std::string &v) { c.music_angles = int(to_integer(v)); }},
                {"music.ranges", [](RunConfig &c, const std::string &v) { c.music_ranges = int(to_integer(v)); }},
                {"music.span_deg", [](RunConfig &c, const std::string &v) { c.music_span_deg = to_double(v); }},
                {"music.range_min_m", [](RunConfig &c, const std::string &v) { c.music_range_min_m = to_double(v); }},
                {"music.range_max_m",
                 [](RunConfig &c, const std::string &v) { c.music_range_max_m = to_optional(v); }},
                {"music.trials", [](RunConfig &c, const std::string &v) { c.trials = int(to_integer(v)); }},
                {"music.cap", [](RunConfig &c, const std::string &v) { c.spectrum_cap = to_double(v); }},
                {"beampattern.angle_min_deg",
                 [](RunConfig &c, const std::string &v) { c.pattern_angle_min_deg = to_double(v); }},
                {"beampattern.angle_max_deg",
                 [](RunConfig &c, const std::string &v) { c.pattern_angle_max_deg = to_double(v); }},
                {"beampattern.angle_step_deg",
                 [](RunConfig &c, const std::string &v) { c.pattern_angle_step_deg = to_double(v); }},
                {"beampattern.range_min_m",
                 [](RunConfig &c, const std::string &v) { c.pattern_range_min_m = to_double(v); }},
                {"beampattern.range_max_m",
                 [](RunConfig &c, const std::string &v) { c.pattern_range_max_m = to_optional(v); }},
                {"beampattern.range_step_m",
                 [](RunConfig &c, const std::string &v) { c.pattern_range_step_m = to_double(v); }},
                {"beampattern.pattern", [](RunConfig &c, const std::string &v) { c.pattern = to_pattern(v); }},
                {"run.experiment", [](RunConfig &c, const std::string &v) { c.experiment = to_experiment(v); }},
                {"run.seed",
                 [](RunConfig &c, const std::string &v)
                 {
                     const long long s = to_integer(v);
                     if (s < 0)
                         throw ConfigError("seed must be >= 0");
                     c.seed = static_cast<std::uint64_t>(s);
                 }},
                {"run.output_dir", [](RunConfig &c, const std::string &v) { c.output_dir = v; }},
            };
            return table;
        }

        std::string join_locations(const std::vector<Location> &v)
        {
            std::string s;
            for (size_t i = 0; i < v.size(); ++i)
                s += (i ? ", " : "") + exact(v[i].range_m) + "@" + exact(v[i].angle_deg);
            return s;
        }
    }

    std::vector<double> parse_rho_grid(const std::string &text)
    {
        const std::string t = trim(text);
        std::vector<double> out;
        if (t.find(':') != std::string::npos)
        {
            const auto parts = split(t, ':');
            if (parts.size() != 3)
                throw ConfigError("rho grid must be start:step:stop, got '" + t + "'");
            const double a = to_double(parts[0]), h = to_double(parts[1]), b = to_double(parts[2]);
            if (!(h > 0.0) || b < a)
                throw ConfigError("rho grid needs a positive step and stop >= start");
            const long long n = static_cast<long long>(std::floor((b - a) / h + 1e-9));
            for (long long i = 0; i <= n; ++i)
                out.push_back(i == n && std::abs(a + h * double(n) - b) < 1e-9 * std::max(1.0, std::abs(b))
                                  ? b
                                  : a + h * double(i));
        }
        else
            for (const std::string &item : split(t, ','))
                out.push_back(to_double(item));
        if (out.empty())
            throw ConfigError("rho grid is empty");
        return out;
    }

    void RunConfig::validate() const
    {
        auto fail = [](const std::string &m) { throw ConfigError(m); };
        if (elements < 1)
            fail("array.elements must be >= 1");
        if (!(frequency_hz > 0.0))
            fail("array.frequency_hz must be > 0");
        if (spacing_m && !(*spacing_m > 0.0))
            fail("array.spacing_m must be > 0");
        if (users.empty() || targets.empty())
            fail("scene.users and scene.targets must be nonempty");
        for (const auto &p : users)
            if (!(p.range_m > 0.0) || !(p.angle_deg > 0.0 && p.angle_deg < 180.0))
                fail("user locations need range > 0 and angle in (0, 180)");
        for (const auto &p : targets)
            if (!(p.range_m > 0.0) || !(p.angle_deg > 0.0 && p.angle_deg < 180.0))
                fail("target locations need range > 0 and angle in (0, 180)");
        if (!reflectivity.empty() && reflectivity.size() != targets.size())
            fail("scene.reflectivity needs one value per target");
        for (const cplx &b : reflectivity)
            if (!(std::abs(b) > 0.0))
                fail("scene.reflectivity values must be nonzero");
        if (symbols < 1)
            fail("scene.symbols must be >= 1");
        if (modulation < 2 || (modulation & (modulation - 1)) != 0)
            fail("scene.modulation must be a power of two >= 2");
        if (!symbol_indices.empty())
        {
            if (symbol_indices.size() != users.size())
                fail("scene.symbol_indices needs one row per user");
            for (const auto &row : symbol_indices)
            {
                if (static_cast<int>(row.size()) != symbols)
                    fail("scene.symbol_indices rows need one entry per symbol");
                for (int q : row)
                    if (q < 0 || q >= modulation)
                        fail("scene.symbol_indices entries must lie in [0, modulation)");
            }
        }
        if (!(radar_noise > 0.0))
            fail("noise.radar must be > 0");
        if (asnr_db.has_value() == power_budget.has_value())
            fail("set exactly one of noise.asnr_db and noise.power_budget");
        if (power_budget && !(*power_budget > 0.0))
            fail("noise.power_budget must be > 0");
        if (comm_snr_db.has_value() == comm_noise.has_value())
            fail("set exactly one of noise.comm_snr_db and noise.comm");
        if (comm_noise && !(*comm_noise > 0.0))
            fail("noise.comm must be > 0");
        if (!(rho >= 0.0 && rho <= 1.0))
            fail("design.rho must lie in [0, 1]");
        if (rho_grid.empty())
            fail("design.rho_grid must be nonempty");
        for (double r : rho_grid)
            if (!(r >= 0.0 && r <= 1.0))
                fail("design.rho_grid values must lie in [0, 1]");
        if (!(tolerance > 0.0) || max_iterations < 1)
            fail("design.tolerance must be > 0 and design.max_iterations >= 1");
        if (music_angles < 2 || music_ranges < 2)
            fail("music grid needs at least 2 x 2 cells");
        if (!(music_span_deg > 0.0) || !(music_range_min_m > 0.0))
            fail("music.span_deg and music.range_min_m must be > 0");
        if (music_range_max_m && !(*music_range_max_m > music_range_min_m))
            fail("music.range_max_m must exceed music.range_min_m");
        if (trials < 1)
            fail("music.trials must be >= 1");
        if (!(spectrum_cap > 0.0))
            fail("music.cap must be > 0");
        if (!(pattern_angle_step_deg > 0.0) || !(pattern_range_step_m > 0.0))
            fail("beampattern steps must be > 0");
        if (!(pattern_angle_min_deg > 0.0) || !(pattern_angle_max_deg < 180.0) ||
            pattern_angle_max_deg < pattern_angle_min_deg)
            fail("beampattern angles must satisfy 0 < min <= max < 180");
        if (!(pattern_range_min_m > 0.0))
            fail("beampattern.range_min_m must be > 0");
        if (pattern_range_max_m && *pattern_range_max_m < pattern_range_min_m)
            fail("beampattern.range_max_m must be >= beampattern.range_min_m");
        if (output_dir.empty())
            fail("run.output_dir must be nonempty");
    }

    RunConfig parse_config(std::istream &in, const std::string &source)
    {
        RunConfig cfg;
        std::string section;
        std::set<std::string> seen;
        std::string line;
        int lineno = 0;
        auto fail = [&](const std::string &msg, const std::string &text)
        {
            std::ostringstream os;
            os << source << ":" << lineno << ": " << msg << "\n    " << text;
            throw ConfigError(os.str());
        };
        while (std::getline(in, line))
        {
            ++lineno;
            const std::string raw = line;
            const auto hash = line.find('#');
            const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
            if (body.empty())
                continue;
            if (body.front() == '[')
            {
                if (body.back() != ']')
                    fail("unterminated section header", raw);
                section = trim(body.substr(1, body.size() - 2));
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                fail("expected 'key = value'", raw);
            const std::string key = section + "." + trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            const auto it = setters().find(key);
            if (it == setters().end())
                fail("unknown key '" + key + "'", raw);
            if (!seen.insert(key).second)
                fail("duplicate key '" + key + "'", raw);
            try
            {
                it->second(cfg, value);
            }
            catch (const ConfigError &e)
            {
                fail(e.what(), raw);
            }
        }
        // An explicit alternative replaces the default of its exclusive partner
        if (seen.count("noise.power_budget") && !seen.count("noise.asnr_db"))
            cfg.asnr_db.reset();
        if (seen.count("noise.comm") && !seen.count("noise.comm_snr_db"))
            cfg.comm_snr_db.reset();
        try
        {
            cfg.validate();
        }
        catch (const ConfigError &e)
        {
            throw ConfigError(source + ": " + e.what());
        }
        return cfg;
    }

    RunConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file '" + path + "'");
        return parse_config(in, path);
    }

    std::string serialize_config(const RunConfig &c)
    {
        std::ostringstream os;
        os << "[array]\n"
           << "elements = " << c.elements << "\n"
           << "frequency_hz = " << exact(c.frequency_hz) << "\n"
           << "spacing_m = " << exact(c.spacing_m) << "\n\n";

        os << "[scene]\n"
           << "users = " << join_locations(c.users) << "\n"
           << "targets = " << join_locations(c.targets) << "\n"
           << "reflectivity = ";
        if (c.reflectivity.empty())
            os << "normalized";
        for (size_t i = 0; i < c.reflectivity.size(); ++i)
            os << (i ? ", " : "") << exact(c.reflectivity[i].real()) << ":" << exact(c.reflectivity[i].imag());
        os << "\n"
           << "symbols = " << c.symbols << "\n"
           << "modulation = " << c.modulation << "\n"
           << "symbol_indices = ";
        if (c.symbol_indices.empty())
            os << "random";
        for (size_t k = 0; k < c.symbol_indices.size(); ++k)
        {
            os << (k ? "; " : "");
            for (size_t s = 0; s < c.symbol_indices[k].size(); ++s)
                os << (s ? " " : "") << c.symbol_indices[k][s];
        }
        os << "\n\n";

        os << "[noise]\n"
           << "radar = " << exact(c.radar_noise) << "\n"
           << "asnr_db = " << exact(c.asnr_db) << "\n"
           << "power_budget = " << exact(c.power_budget) << "\n"
           << "comm_snr_db = " << exact(c.comm_snr_db) << "\n"
           << "comm = " << exact(c.comm_noise) << "\n\n";

        os << "[design]\n"
           << "rho = " << exact(c.rho) << "\n"
           << "precoder = " << to_string(c.precoder) << "\n"
           << "rho_grid = ";
        for (size_t i = 0; i < c.rho_grid.size(); ++i)
            os << (i ? ", " : "") << exact(c.rho_grid[i]);
        os << "\n"
           << "form = " << (c.form == P1Form::aggregated ? "aggregated" : "per_symbol") << "\n"
           << "tighten = " << (c.tighten ? "true" : "false") << "\n"
           << "tolerance = " << exact(c.tolerance) << "\n"
           << "max_iterations = " << c.max_iterations << "\n\n";

        os << "[music]\n"
           << "angles = " << c.music_angles << "\n"
           << "ranges = " << c.music_ranges << "\n"
           << "span_deg = " << exact(c.music_span_deg) << "\n"
           << "range_min_m = " << exact(c.music_range_min_m) << "\n"
           << "range_max_m = " << exact(c.music_range_max_m) << "\n"
           << "trials = " << c.trials << "\n"
           << "cap = " << exact(c.spectrum_cap) << "\n\n";

        os << "[beampattern]\n"
           << "angle_min_deg = " << exact(c.pattern_angle_min_deg) << "\n"
           << "angle_max_deg = " << exact(c.pattern_angle_max_deg) << "\n"
           << "angle_step_deg = " << exact(c.pattern_angle_step_deg) << "\n"
           << "range_min_m = " << exact(c.pattern_range_min_m) << "\n"
           << "range_max_m = " << exact(c.pattern_range_max_m) << "\n"
           << "range_step_m = " << exact(c.pattern_range_step_m) << "\n"
           << "pattern = " << to_string(c.pattern) << "\n\n";

        os << "[run]\n"
           << "experiment = " << to_string(c.experiment) << "\n"
           << "seed = " << c.seed << "\n"
           << "output_dir = " << c.output_dir << "\n";
        return os.str();
    }

    double asnr_to_power(double asnr_db, double radar_noise, int elements)
    {
        return db_to_linear(asnr_db) * radar_noise / (double(elements) * double(elements));
    }

    Scene build_scene(const RunConfig &cfg)
    {
        cfg.validate();
        Scene sc;
        sc.array = ArrayConfig::from_frequency(cfg.elements, cfg.frequency_hz, cfg.spacing_m);
        for (const Location &u : cfg.users)
            sc.users.push_back(PolarPoint{u.range_m, deg_to_rad(u.angle_deg)});
        for (size_t l = 0; l < cfg.targets.size(); ++l)
        {
            const PolarPoint p{cfg.targets[l].range_m, deg_to_rad(cfg.targets[l].angle_deg)};
            const cplx b = cfg.reflectivity.empty() ? cplx(1.0 / path_loss(p, sc.array), 0.0) : cfg.reflectivity[l];
            sc.targets.push_back(Target{p, b});
        }
        sc.symbol_count = cfg.symbols;
        sc.constellation.order = cfg.modulation;
        sc.noise_radar = cfg.radar_noise;
        sc.power_budget = cfg.asnr_db ? asnr_to_power(*cfg.asnr_db, cfg.radar_noise, cfg.elements) : *cfg.power_budget;
        if (cfg.comm_snr_db)
        {
            double beta = 0.0;
            for (const PolarPoint &u : sc.users)
                beta += path_loss(u, sc.array);
            beta /= double(sc.users.size());
            sc.noise_comm = sc.power_budget * cfg.elements * beta / db_to_linear(*cfg.comm_snr_db);
        }
        else
            sc.noise_comm = *cfg.comm_noise;
        if (cfg.symbol_indices.empty())
            sc.symbol_phases = Scene::random_phases(sc.n_users(), cfg.symbols, sc.constellation, cfg.seed);
        else
        {
            sc.symbol_phases.resize(sc.n_users(), cfg.symbols);
            for (int k = 0; k < sc.n_users(); ++k)
                for (int s = 0; s < cfg.symbols; ++s)
                    sc.symbol_phases(k, s) = sc.constellation.phase(cfg.symbol_indices[size_t(k)][size_t(s)]);
        }
        try
        {
            sc.validate();
        }
        catch (const DomainError &e)
        {
            throw ConfigError(e.what());
        }
        return sc;
    }

    DesignOptions design_options(const RunConfig &cfg)
    {
        DesignOptions opt;
        opt.solver.tol = cfg.tolerance;
        opt.solver.max_iter = cfg.max_iterations;
        opt.form = cfg.form;
        opt.tighten = cfg.tighten;
        return opt;
    }

    namespace
    {
        double default_range_max(const Scene &scene) { return 1.2 * fraunhofer_distances(scene.array).array / 10.0; }

        std::vector<double> stepped(double lo, double hi, double step)
        {
            std::vector<double> v;
            const long long n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
            for (long long i = 0; i <= n; ++i)
                v.push_back(lo + step * double(i));
            return v;
        }
    }

    GridAxes music_axes(const RunConfig &cfg, const Scene &scene)
    {
        double centre = 0.0;
        for (const Target &t : scene.targets)
            centre += t.location.angle;
        centre /= double(scene.n_targets());
        const double span = deg_to_rad(cfg.music_span_deg);
        const double lo = std::max(centre - span, 1e-6), hi = std::min(centre + span, kPi - 1e-6);
        const double rmax = cfg.music_range_max_m ? *cfg.music_range_max_m : default_range_max(scene);
        if (!(rmax > cfg.music_range_min_m))
            throw ConfigError("music range interval is empty");
        return {linspace(lo, hi, cfg.music_angles), linspace(cfg.music_range_min_m, rmax, cfg.music_ranges)};
    }

    GridAxes pattern_axes(const RunConfig &cfg, const Scene &scene)
    {
        GridAxes ax;
        for (double a : stepped(cfg.pattern_angle_min_deg, cfg.pattern_angle_max_deg, cfg.pattern_angle_step_deg))
            ax.angles.push_back(deg_to_rad(a));
        const double rmax = cfg.pattern_range_max_m ? *cfg.pattern_range_max_m : default_range_max(scene);
        ax.ranges = stepped(cfg.pattern_range_min_m, std::max(rmax, cfg.pattern_range_min_m), cfg.pattern_range_step_m);
        return ax;
    }

    MusicGrid pattern_map(const CMatrix &R, const ArrayConfig &array, const GridAxes &axes, PatternKind kind)
    {
        MusicGrid g;
        g.angles = axes.angles;
        g.ranges = axes.ranges;
        std::vector<PolarPoint> pts;
        pts.reserve(axes.angles.size() * axes.ranges.size());
        for (double a : axes.angles)
            for (double d : axes.ranges)
                pts.push_back(PolarPoint{d, a});
        const RVector p = kind == PatternKind::absolute ? beampattern(R, array, pts) : gain_pattern(R, array, pts);
        g.spectrum.resize(static_cast<Eigen::Index>(axes.angles.size()), static_cast<Eigen::Index>(axes.ranges.size()));
        for (Eigen::Index i = 0; i < g.spectrum.rows(); ++i)
            for (Eigen::Index j = 0; j < g.spectrum.cols(); ++j)
                g.spectrum(i, j) = p(i * g.spectrum.cols() + j);
        return g;
    }

    MusicOutcome run_music(const Scene &scene, const CMatrix &X, const GridAxes &axes, std::uint64_t seed, double cap)
    {
        MusicOutcome m;
        const EchoBlock echo = generate_echo(scene, X, seed);
        m.subspace = noise_subspace(sample_covariance(echo), scene.n_targets());
        m.grid = music_spectrum(m.subspace.basis, scene.array, axes.angles, axes.ranges, cap);
        m.peaks = find_peaks(m.grid, scene.n_targets());
        if (m.peaks.shortfall)
            return m;
        std::vector<PolarPoint> est, truth;
        for (const Peak &p : m.peaks.peaks)
            est.push_back(PolarPoint{p.range, p.angle});
        for (const Target &t : scene.targets)
            truth.push_back(t.location);
        m.error = estimation_error(est, truth);
        const double cell = axes.angles.size() > 1 ? axes.angles[1] - axes.angles[0] : kPi;
        m.success = true;
        for (int l = 0; l < scene.n_targets(); ++l)
            m.success = m.success && std::abs(m.error.angle_error(l)) <= cell * (1.0 + 1e-9) &&
                        std::abs(m.error.range_error(l)) <= 0.05 * truth[size_t(l)].range;
        return m;
    }

    std::string format_number(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        std::ostringstream os;
        os << std::setprecision(12) << v;
        return os.str();
    }

    void write_tradeoff_csv(std::ostream &os, const std::vector<TradeoffPoint> &pts)
    {
        if (pts.empty())
            throw DomainError("write_tradeoff_csv: empty sweep");
        os << "rho,precoder,sinr_db,rcrb_angle_rad,rcrb_range_m,feasible,solver_status\n";
        for (const TradeoffPoint &p : pts)
        {
            os << format_number(p.rho) << "," << to_string(p.precoder) << ",";
            if (p.feasible)
                os << format_number(linear_to_db(p.sinr)) << "," << format_number(p.rcrb_angle) << ","
                   << format_number(p.rcrb_range);
            else
                os << ",,";
            os << "," << (p.feasible ? "true" : "false") << "," << p.status << "\n";
        }
    }

    void write_pattern_csv(std::ostream &os, const MusicGrid &map)
    {
        const double peak = map.spectrum.maxCoeff();
        os << "theta_deg,range_m,power_db\n";
        for (Eigen::Index i = 0; i < map.spectrum.rows(); ++i)
            for (Eigen::Index j = 0; j < map.spectrum.cols(); ++j)
                os << format_number(rad_to_deg(map.angles[size_t(i)])) << "," << format_number(map.ranges[size_t(j)])
                   << ","
                   << format_number(peak > 0.0 ? linear_to_db(map.spectrum(i, j) / peak) : -std::numeric_limits<double>::infinity())
                   << "\n";
    }

    void write_spectrum_csv(std::ostream &os, const MusicGrid &g)
    {
        os << "angle_deg,range_m,value\n";
        for (Eigen::Index i = 0; i < g.spectrum.rows(); ++i)
            for (Eigen::Index j = 0; j < g.spectrum.cols(); ++j)
                os << format_number(rad_to_deg(g.angles[size_t(i)])) << "," << format_number(g.ranges[size_t(j)]) << ","
                   << format_number(g.spectrum(i, j)) << "\n";
    }

    void write_peaks_csv(std::ostream &os, const MusicOutcome &m, const Scene &scene)
    {
        os << "rank,angle_deg,range_m,value,truth_angle_deg,truth_range_m,angle_error_rad,range_error_m\n";
        for (size_t r = 0; r < m.peaks.peaks.size(); ++r)
        {
            const Peak &p = m.peaks.peaks[r];
            os << r + 1 << "," << format_number(rad_to_deg(p.angle)) << "," << format_number(p.range) << ","
               << format_number(p.value);
            if (!m.peaks.shortfall)
            {
                const int t = m.error.assignment[r];
                const PolarPoint &tr = scene.targets[size_t(t)].location;
                os << "," << format_number(rad_to_deg(tr.angle)) << "," << format_number(tr.range) << ","
                   << format_number(m.error.angle_error(t)) << "," << format_number(m.error.range_error(t));
            }
            else
                os << ",,,,";
            os << "\n";
        }
    }

    void write_symbols_csv(std::ostream &os, const CMatrix &X)
    {
        os << "symbol,element,re,im\n";
        for (Eigen::Index s = 0; s < X.cols(); ++s)
            for (Eigen::Index n = 0; n < X.rows(); ++n)
                os << s << "," << n << "," << format_number(X(n, s).real()) << "," << format_number(X(n, s).imag())
                   << "\n";
    }

    // ------------------------------------------------------------------ experiments

    namespace
    {
        using nlohmann::json;

        json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

        json vector_json(const RVector &v)
        {
            json a = json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                a.push_back(finite(v(i)));
            return a;
        }

        json residual_json(const ResidualReport &r)
        {
            return {{"primal", r.primal()}, {"dual", r.dual()}, {"gap", r.gap}};
        }

        struct Output
        {
            std::filesystem::path dir;

            std::filesystem::path path(const std::string &name) const { return dir / name; }

            void write(const std::string &name, const std::function<void(std::ostream &)> &fn) const
            {
                std::filesystem::create_directories(dir);
                std::ofstream os(path(name), std::ios::binary | std::ios::trunc);
                if (!os)
                    throw Error("cannot open '" + path(name).string() + "' for writing");
                fn(os);
                os.flush();
                if (!os)
                    throw Error("write failed on '" + path(name).string() + "'");
            }

            void append_record(const json &rec) const
            {
                std::filesystem::create_directories(dir);
                std::ofstream os(path("results.jsonl"), std::ios::app);
                if (!os)
                    throw Error("cannot append to '" + path("results.jsonl").string() + "'");
                os << rec.dump() << "\n";
                if (!os)
                    throw Error("write failed on results.jsonl");
            }
        };

        json base_record(const RunConfig &cfg, Experiment e)
        {
            return {{"schema", "nfisac.result/1"}, {"experiment", to_string(e)}, {"inputs", serialize_config(cfg)}};
        }

        void add_crb(json &m, const RVector &crb, int L)
        {
            if (crb.size() == 0)
            {
                m["trace_crb"] = nullptr;
                return;
            }
            m["trace_crb"] = crb.sum();
            m["rcrb_angle_rad"] = std::sqrt(crb.segment(0, L).mean());
            m["rcrb_range_m"] = std::sqrt(crb.segment(L, L).mean());
            m["crb_diagonal"] = vector_json(crb);
        }

        // The transmitted block of the configured design, with its metrics
        CMatrix designed_block(const RunConfig &cfg, const Scene &scene, json &metrics)
        {
            const DesignOptions opt = design_options(cfg);
            const int L = scene.n_targets();
            if (cfg.precoder == Precoder::slp)
            {
                const SlpDesign d = design_slp(scene, cfg.rho, opt);
                metrics["precoder"] = "slp";
                metrics["rho"] = cfg.rho;
                metrics["gamma_prime"] = d.gamma_prime;
                metrics["gamma_prime_achieved"] = d.gamma_prime_achieved;
                metrics["sinr"] = d.sinr();
                metrics["sinr_db"] = finite(linear_to_db(d.sinr()));
                metrics["sum_t"] = d.crb_bounds.size() ? finite(d.crb_bounds.sum()) : json(nullptr);
                add_crb(metrics, d.crb_covariance, L);
                metrics["trace_crb_symbols"] = d.crb_symbols.size() ? finite(d.crb_symbols.sum()) : json(nullptr);
                metrics["relaxation_gap"] = d.relaxation_gap;
                metrics["relaxation_gap_final"] = d.relaxation_gap_final;
                metrics["power"] = d.power;
                metrics["normalizers"] = {{"sensing", finite(d.normalizers.sensing)},
                                          {"comm", finite(d.normalizers.comm)}};
                metrics["residuals"] = residual_json(d.certificate);
                metrics["iterations"] = d.solution.iterations;
                metrics["warnings"] = d.warnings;
                return d.symbols;
            }
            const BlpDesign d = design_blp(scene, cfg.rho, opt, cfg.seed);
            metrics["precoder"] = "blp";
            metrics["rho"] = cfg.rho;
            metrics["gamma"] = d.gamma;
            metrics["gamma_achieved"] = d.gamma_achieved;
            metrics["gamma_max"] = d.gamma_max;
            metrics["sinr"] = d.gamma;
            metrics["sinr_db"] = finite(linear_to_db(d.gamma));
            metrics["sum_t"] = d.crb_bounds.size() ? finite(d.crb_bounds.sum()) : json(nullptr);
            add_crb(metrics, d.crb_covariance, L);
            metrics["randomization_rounds"] = d.randomization_rounds;
            metrics["normalizers"] = {{"sensing", finite(d.normalizers.sensing)}, {"comm", finite(d.normalizers.comm)}};
            json res = json::array();
            for (const ResidualReport &r : d.certificates)
                res.push_back(residual_json(r));
            metrics["residuals"] = res;
            metrics["warnings"] = d.warnings;
            return d.symbols;
        }

        json peaks_json(const PeakList &pk)
        {
            json a = json::array();
            for (const Peak &p : pk.peaks)
                a.push_back({{"angle_deg", rad_to_deg(p.angle)}, {"range_m", p.range}, {"value", p.value}});
            return a;
        }

        void run_experiment(const RunConfig &cfg, const Output &out, std::ostream &log)
        {
            const auto t0 = std::chrono::steady_clock::now();
            const Scene scene = build_scene(cfg);
            json rec = base_record(cfg, cfg.experiment);
            json &m = rec["metrics"];

            switch (cfg.experiment)
            {
            case Experiment::design:
            {
                const CMatrix X = designed_block(cfg, scene, m);
                const std::string name = "design_" + to_string(cfg.precoder) + ".csv";
                out.write(name, [&](std::ostream &os) { write_symbols_csv(os, X); });
                log << "design " << to_string(cfg.precoder) << " rho=" << cfg.rho << " sinr_db=" << m["sinr_db"]
                    << " -> " << out.path(name).string() << "\n";
                break;
            }
            case Experiment::sweep:
            {
                const auto pts = tradeoff_sweep(scene, cfg.rho_grid, design_options(cfg));
                out.write("tradeoff.csv", [&](std::ostream &os) { write_tradeoff_csv(os, pts); });
                json rows = json::array();
                for (const TradeoffPoint &p : pts)
                    rows.push_back({{"rho", p.rho},
                                    {"precoder", to_string(p.precoder)},
                                    {"feasible", p.feasible},
                                    {"status", p.status},
                                    {"sinr", finite(p.sinr)},
                                    {"sinr_achieved", finite(p.sinr_achieved)},
                                    {"rcrb_angle_rad", finite(p.rcrb_angle)},
                                    {"rcrb_range_m", finite(p.rcrb_range)},
                                    {"trace_crb", finite(p.trace_crb)},
                                    {"trace_crb_achieved", finite(p.trace_crb_achieved)},
                                    {"message", p.message}});
                m["points"] = rows;
                log << "sweep " << pts.size() << " points -> " << out.path("tradeoff.csv").string() << "\n";
                break;
            }
            case Experiment::beampattern:
            {
                const CMatrix X = designed_block(cfg, scene, m);
                const CMatrix R = X * X.adjoint() / double(X.cols());
                const MusicGrid map = pattern_map(R, scene.array, pattern_axes(cfg, scene), cfg.pattern);
                out.write("beampattern.csv", [&](std::ostream &os) { write_pattern_csv(os, map); });
                PeakList pk = find_peaks(map, std::min<int>(scene.n_targets(), int(map.spectrum.size()) - 1));
                m["pattern"] = to_string(cfg.pattern);
                m["local_maxima"] = peaks_json(pk);
                log << "beampattern " << map.spectrum.rows() << "x" << map.spectrum.cols() << " -> "
                    << out.path("beampattern.csv").string() << "\n";
                break;
            }
            case Experiment::music:
            {
                const CMatrix X = designed_block(cfg, scene, m);
                const MusicOutcome r = run_music(scene, X, music_axes(cfg, scene), cfg.seed, cfg.spectrum_cap);
                out.write("spectrum.csv", [&](std::ostream &os) { write_spectrum_csv(os, r.grid); });
                out.write("peaks.csv", [&](std::ostream &os) { write_peaks_csv(os, r, scene); });
                m["peaks"] = peaks_json(r.peaks);
                m["shortfall"] = r.peaks.shortfall;
                m["degenerate_subspace"] = r.subspace.degenerate;
                m["success"] = r.success;
                if (!r.peaks.shortfall)
                {
                    m["rmse_angle_rad"] = r.error.rmse_angle;
                    m["rmse_range_m"] = r.error.rmse_range;
                }
                log << "music seed=" << cfg.seed << " success=" << (r.success ? "yes" : "no") << " -> "
                    << out.path("peaks.csv").string() << "\n";
                break;
            }
            case Experiment::mc:
            {
                const CMatrix X = designed_block(cfg, scene, m);
                const GridAxes axes = music_axes(cfg, scene);
                int hits = 0;
                out.write("mc.csv",
                          [&](std::ostream &os)
                          {
                              os << "trial,seed,success,shortfall,degenerate,rmse_angle_rad,rmse_range_m\n";
                              for (int t = 0; t < cfg.trials; ++t)
                              {
                                  const std::uint64_t seed = cfg.seed + std::uint64_t(t);
                                  const MusicOutcome r = run_music(scene, X, axes, seed, cfg.spectrum_cap);
                                  hits += r.success;
                                  os << t << "," << seed << "," << (r.success ? "true" : "false") << ","
                                     << (r.peaks.shortfall ? "true" : "false") << ","
                                     << (r.subspace.degenerate ? "true" : "false") << ",";
                                  if (r.peaks.shortfall)
                                      os << ",\n";
                                  else
                                      os << format_number(r.error.rmse_angle) << ","
                                         << format_number(r.error.rmse_range) << "\n";
                              }
                          });
                m["trials"] = cfg.trials;
                m["successes"] = hits;
                m["success_rate"] = double(hits) / double(cfg.trials);
                log << "mc " << hits << "/" << cfg.trials << " successful -> " << out.path("mc.csv").string() << "\n";
                break;
            }
            }
            rec["timing_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.append_record(rec);
        }
    }

    int cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Near-field ISAC symbol-level precoding: designs, trade-off sweeps, beampatterns and MUSIC runs"};
        app.require_subcommand(1);

        struct Flags
        {
            std::string config, output, precoder, rho_grid, pattern;
            std::optional<double> rho;
            std::optional<std::uint64_t> seed;
            std::optional<int> trials;
        };
        Flags f;

        auto common = [&](CLI::App *sub)
        {
            sub->add_option("-c,--config", f.config, "Config file ([section] key = value)");
            sub->add_option("-o,--output", f.output, "Output directory (overrides NFISAC_OUTPUT_DIR and the config)");
            sub->add_option("--seed", f.seed, "Run seed");
        };
        auto designed = [&](CLI::App *sub)
        {
            sub->add_option("--rho", f.rho, "Sensing weight in [0, 1]");
            sub->add_option("--precoder", f.precoder, "slp or blp")->check(CLI::IsMember({"slp", "blp"}));
        };

        CLI::App *design = app.add_subcommand("design", "Solve one design and write the symbol block");
        common(design);
        designed(design);
        CLI::App *sweep = app.add_subcommand("sweep", "Trade-off curve for both precoders");
        common(sweep);
        sweep->add_option("--rho-grid", f.rho_grid, "start:step:stop or a comma separated list");
        CLI::App *pattern = app.add_subcommand("beampattern", "Transmit power map of a design");
        common(pattern);
        designed(pattern);
        pattern->add_option("--pattern", f.pattern, "absolute or gain")->check(CLI::IsMember({"absolute", "gain"}));
        CLI::App *music = app.add_subcommand("music", "Echo simulation and 2D MUSIC estimation");
        common(music);
        designed(music);
        CLI::App *mc = app.add_subcommand("mc", "Repeated MUSIC runs with consecutive seeds");
        common(mc);
        designed(mc);
        mc->add_option("--trials", f.trials, "Number of trials");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &e)
        {
            out << app.help();
            return 0;
        }
        catch (const CLI::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return 2;
        }

        try
        {
            RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
            CLI::App *sub = app.get_subcommands().front();
            cfg.experiment = sub == design  ? Experiment::design
                             : sub == sweep ? Experiment::sweep
                             : sub == pattern ? Experiment::beampattern
                             : sub == music   ? Experiment::music
                                              : Experiment::mc;
            if (f.rho)
                cfg.rho = *f.rho;
            if (!f.precoder.empty())
                cfg.precoder = f.precoder == "slp" ? Precoder::slp : Precoder::blp;
            if (!f.rho_grid.empty())
                cfg.rho_grid = parse_rho_grid(f.rho_grid);
            if (!f.pattern.empty())
                cfg.pattern = f.pattern == "absolute" ? PatternKind::absolute : PatternKind::gain;
            if (f.seed)
                cfg.seed = *f.seed;
            if (f.trials)
                cfg.trials = *f.trials;
            if (const char *env = std::getenv("NFISAC_OUTPUT_DIR"); env && *env)
                cfg.output_dir = env;
            if (!f.output.empty())
                cfg.output_dir = f.output;
            cfg.validate();
            run_experiment(cfg, Output{cfg.output_dir}, out);
            return 0;
        }
        catch (const ConfigError &e)
        {
            err << "configuration error: " << e.what() << "\n";
            return 2;
        }
        catch (const InfeasibleError &e)
        {
            err << "infeasible: " << e.what() << "\n";
            return 3;
        }
        catch (const SolverError &e)
        {
            err << "solver failure: " << e.what() << "\n";
            return 4;
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << "\n";
            return 1;
        }
    }

} // namespace nfisac
