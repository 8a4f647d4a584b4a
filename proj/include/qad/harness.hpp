// Copyright 2026 The qad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "qad/acoustics.hpp"
#include "qad/dynamics.hpp"
#include "qad/fft.hpp"
#include "qad/populations.hpp"
#include "qad/tomography.hpp"

namespace qad::harness {

using json = nlohmann::json;

inline constexpr const char* version = "0.1.0";

// ---------------------------------------------------------------------------------------
// Configuration

namespace detail {

/// Typed view of one JSON object that remembers which keys were read, so unknown keys
/// can be reported with their full path.
class Section {
public:
    Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ != nullptr && !j_->is_object()) throw ConfigError(where("") + "expected an object");
    }

    bool has(const std::string& key) const { return j_ != nullptr && j_->contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_number()) throw ConfigError(where(key) + "expected a number");
        return v->get<double>();
    }

    int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
        return v->get<int>();
    }

    bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_boolean()) throw ConfigError(where(key) + "expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_string()) throw ConfigError(where(key) + "expected a string");
        return v->get<std::string>();
    }

    std::optional<std::string> optional_string(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return string(key);
    }

    std::string choice(const std::string& key, const std::vector<std::string>& allowed,
                       std::optional<std::string> fallback = std::nullopt) const {
        const std::string s = string(key, std::move(fallback));
        if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(where(key) + "'" + s + "' is not one of {" + list + "}");
        }
        return s;
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_array()) throw ConfigError(where(key) + "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) throw ConfigError(where(key) + "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt) const {
        const json* v = lookup(key, fallback.has_value());
        if (v == nullptr) return *fallback;
        if (!v->is_array()) throw ConfigError(where(key) + "expected an array of integers");
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer()) throw ConfigError(where(key) + "expected an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    Section child(const std::string& key) const {
        if (!has(key)) return Section(nullptr, join(key));
        used_.insert(key);
        return Section(&j_->at(key), join(key));
    }

    /// Rejects keys that were never read.
    void finish() const {
        if (j_ == nullptr) return;
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!used_.count(it.key())) throw ConfigError(where(it.key()) + "unknown field");
        }
    }

    std::string where(const std::string& key) const {
        const std::string p = key.empty() ? path_ : join(key);
        return (p.empty() ? std::string("config") : p) + ": ";
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* lookup(const std::string& key, bool optional) const {
        used_.insert(key);
        if (!has(key)) {
            if (optional) return nullptr;
            throw ConfigError(where(key) + "required field missing");
        }
        return &j_->at(key);
    }

    const json* j_;
    std::string path_;
    mutable std::set<std::string> used_;
};

inline void require(bool ok, const Section& s, const std::string& key, const std::string& msg) {
    if (!ok) throw ValidationError(s.where(key) + msg);
}

}  // namespace detail

struct ProbeSettings {
    double t_max = 6e-6;
    int intervals = 600;
    std::vector<double> grid() const { return uniform_grid(t_max, static_cast<std::size_t>(intervals)); }
};

struct ChevronSettings {
    double detuning_min = -2e6;  ///< Hz
    double detuning_max = 2e6;
    int detuning_points = 41;
    double t_max = 3e-6;
    int intervals = 150;
    int phonon_dim = 4;
};

struct RabiBasisSettings {
    int n_max = 7;
    int phonon_dim = 20;
};

struct LadderSettings {
    std::vector<int> n_values{1, 2, 3, 4, 5, 6, 7};
    int n_max = 14;
    int phonon_dim = 20;
    double delta_g = two_pi * 5e3;  ///< rad/s; 0 disables error bars
};

struct CalibrationSettings {
    std::vector<double> drive_amplitudes{20e3, 40e3, 60e3, 80e3, 100e3, 120e3};  ///< peak drive rate, Hz
    int n_max = 14;
    int phonon_dim = 32;
};

struct WignerSettings {
    std::string preparation = "fock1";
    int grid_points = 21;
    double extent = 2.0;
    std::string displacement = "pulsed";
    int phonon_dim = 32;
    int n_max = 14;
};

struct ReconstructSettings {
    std::optional<std::string> input_csv;  ///< wigner.csv from an earlier run; otherwise scanned here
    int dim = 10;
    bool use_uncertainties = false;
    int cut_points = 81;
};

struct ModesSettings {
    double band_min = 6.28e9;
    double band_max = 6.30e9;
    int max_order = 4;
    std::string electrode = "flat_top";
    double electrode_edge_width = 1e-6;
    int grid_points = 400;
    bool roundtrip = false;
    int n_roundtrips = 2000;
    int roundtrip_grid_points = 512;
    std::optional<std::string> surface_profile;
    double surface_profile_unit = 1e-6;
    double surface_fit_radius = 40e-6;
};

struct ExperimentConfig {
    std::string experiment;
    std::string output_dir = "out";
    std::optional<std::uint64_t> seed;
    int workers = 1;
    double noise_sigma = 0.0;
    SystemParams system;
    std::optional<acoustics::AcousticGeometry> geometry;
    std::optional<acoustics::MaterialParams> material;
    ProbeSettings probe;
    ChevronSettings chevron;
    RabiBasisSettings rabi_basis;
    LadderSettings ladder;
    CalibrationSettings calibration;
    WignerSettings wigner;
    ReconstructSettings reconstruct;
    ModesSettings modes;
    json raw;

    static inline const std::vector<std::string> experiments{
        "chevron", "rabi_basis", "ladder", "displacement_calibration", "wigner", "reconstruct", "modes"};

    bool stochastic() const { return noise_sigma > 0.0 || experiment == "reconstruct"; }

    static ExperimentConfig from_json(const json& j);

    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw FormatError(path + ": " + e.what());
        }
        return from_json(j);
    }

    /// Echo with overrides applied, as stored in the manifest.
    json echo() const {
        json j = raw;
        j["output_dir"] = output_dir;
        if (seed) j["seed"] = *seed;
        j["workers"] = workers;
        return j;
    }
};

inline Preparation preparation_from_name(const std::string& name) {
    if (name == "vacuum" || name == "fock0") return Preparation::vacuum();
    if (name == "superposition01") return Preparation::superposition01();
    if (name.rfind("fock", 0) == 0 && name.size() > 4) {
        const std::string digits = name.substr(4);
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return Preparation::fock(std::stoi(digits));
        }
    }
    throw ConfigError("unknown preparation '" + name + "' (vacuum, fockN, superposition01)");
}

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    using detail::require;
    ExperimentConfig c;
    c.raw = j;
    const detail::Section root(&j, "");
    c.experiment = root.choice("experiment", experiments);
    c.output_dir = root.string("output_dir", "out");
    if (root.has("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw ConfigError(root.where("seed") + "expected a non-negative integer");
        }
        c.seed = s.get<std::uint64_t>();
    }
    root.number("seed", 0.0);  // mark as read
    c.workers = root.integer("workers", 1);
    require(c.workers >= 1, root, "workers", "must be at least 1");

    {
        const auto s = root.child("system");
        SystemParams& p = c.system;
        p.g0 = two_pi * 1e3 * s.number("g0_khz", p.g0 / two_pi / 1e3);
        p.qubit_t1 = 1e-6 * s.number("qubit_t1_us", p.qubit_t1 * 1e6);
        p.qubit_t2 = 1e-6 * s.number("qubit_t2_us", p.qubit_t2 * 1e6);
        p.phonon_t1 = 1e-6 * s.number("phonon_t1_us", p.phonon_t1 * 1e6);
        p.phonon_t2_ramsey = 1e-6 * s.number("phonon_t2_ramsey_us", p.phonon_t2_ramsey * 1e6);
        p.qubit_thermal_pop = s.number("qubit_thermal_pop", p.qubit_thermal_pop);
        p.qubit_reset_pop = s.number("qubit_reset_pop", p.qubit_reset_pop);
        p.nu0_detuning = 1e6 * s.number("nu0_detuning_mhz", p.nu0_detuning / 1e6);
        if (s.boolean("decoherence", true) == false) p = p.without_decoherence();
        s.finish();
        try {
            p.validate();
        } catch (const Error& e) {
            throw ValidationError(std::string("system: ") + e.what());
        }
    }
    if (root.has("geometry")) {
        const auto s = root.child("geometry");
        acoustics::AcousticGeometry g;
        g.substrate_thickness = 1e-6 * s.number("substrate_thickness_um", g.substrate_thickness * 1e6);
        g.aln_thickness = 1e-6 * s.number("aln_thickness_um", g.aln_thickness * 1e6);
        g.curvature_radius = 1e-3 * s.number("curvature_radius_mm", g.curvature_radius * 1e3);
        g.electrode_diameter = 1e-6 * s.number("electrode_diameter_um", g.electrode_diameter * 1e6);
        g.convex_diameter = 1e-6 * s.number("convex_diameter_um", g.convex_diameter * 1e6);
        g.chip_gap = 1e-6 * s.number("chip_gap_um", g.chip_gap * 1e6);
        s.finish();
        try {
            g.validate();
        } catch (const Error& e) {
            throw ValidationError(std::string("geometry: ") + e.what());
        }
        c.geometry = g;
    }
    if (root.has("material")) {
        const auto s = root.child("material");
        acoustics::MaterialParams m;
        m.v_l = s.number("v_l_m_per_s", m.v_l);
        m.v_t = s.number("v_t_m_per_s", m.v_t);
        m.piezo_coupling = s.number("piezo_coupling", m.piezo_coupling);
        s.finish();
        try {
            m.validate();
        } catch (const Error& e) {
            throw ValidationError(std::string("material: ") + e.what());
        }
        c.material = m;
    }
    {
        const auto s = root.child("noise");
        c.noise_sigma = s.number("sigma_pe", 0.0);
        require(c.noise_sigma >= 0.0, s, "sigma_pe", "must be non-negative");
        s.finish();
    }
    {
        const auto s = root.child("probe");
        c.probe.t_max = 1e-6 * s.number("t_max_us", c.probe.t_max * 1e6);
        c.probe.intervals = s.integer("intervals", c.probe.intervals);
        require(c.probe.t_max > 0.0, s, "t_max_us", "must be positive");
        require(c.probe.intervals >= 2, s, "intervals", "must be at least 2");
        s.finish();
    }
    {
        const auto s = root.child("chevron");
        auto& x = c.chevron;
        x.detuning_min = 1e6 * s.number("detuning_min_mhz", x.detuning_min / 1e6);
        x.detuning_max = 1e6 * s.number("detuning_max_mhz", x.detuning_max / 1e6);
        x.detuning_points = s.integer("detuning_points", x.detuning_points);
        x.t_max = 1e-6 * s.number("t_max_us", x.t_max * 1e6);
        x.intervals = s.integer("intervals", x.intervals);
        x.phonon_dim = s.integer("phonon_dim", x.phonon_dim);
        require(x.detuning_points >= 1, s, "detuning_points", "grid must be non-empty");
        require(x.detuning_max >= x.detuning_min, s, "detuning_max_mhz", "must not be below detuning_min_mhz");
        require(x.t_max > 0.0, s, "t_max_us", "must be positive");
        require(x.intervals >= 1, s, "intervals", "must be at least 1");
        require(x.phonon_dim >= 2, s, "phonon_dim", "must be at least 2");
        s.finish();
    }
    {
        const auto s = root.child("rabi_basis");
        auto& x = c.rabi_basis;
        x.n_max = s.integer("n_max", x.n_max);
        x.phonon_dim = s.integer("phonon_dim", x.phonon_dim);
        require(x.n_max >= 1, s, "n_max", "must be at least 1");
        s.finish();
    }
    {
        const auto s = root.child("ladder");
        auto& x = c.ladder;
        x.n_values = s.integers("n_values", x.n_values);
        x.n_max = s.integer("n_max", x.n_max);
        x.phonon_dim = s.integer("phonon_dim", x.phonon_dim);
        x.delta_g = two_pi * 1e3 * s.number("delta_g_khz", x.delta_g / two_pi / 1e3);
        require(!x.n_values.empty(), s, "n_values", "must be non-empty");
        for (int n : x.n_values) require(n >= 0 && n <= x.n_max, s, "n_values", "entries must lie in [0, n_max]");
        require(x.n_max >= 1, s, "n_max", "must be at least 1");
        require(x.delta_g >= 0.0, s, "delta_g_khz", "must be non-negative");
        s.finish();
    }
    {
        const auto s = root.child("displacement_calibration");
        auto& x = c.calibration;
        std::vector<double> khz;
        for (double a : x.drive_amplitudes) khz.push_back(a / 1e3);
        khz = s.numbers("drive_amplitudes_khz", khz);
        x.drive_amplitudes.clear();
        for (double a : khz) x.drive_amplitudes.push_back(1e3 * a);
        x.n_max = s.integer("n_max", x.n_max);
        x.phonon_dim = s.integer("phonon_dim", x.phonon_dim);
        require(x.drive_amplitudes.size() >= 3, s, "drive_amplitudes_khz", "need at least 3 amplitudes");
        s.finish();
    }
    {
        const auto s = root.child("wigner");
        auto& x = c.wigner;
        x.preparation = s.string("preparation", x.preparation);
        preparation_from_name(x.preparation);
        x.grid_points = s.integer("grid_points", x.grid_points);
        x.extent = s.number("extent", x.extent);
        x.displacement = s.choice("displacement", {"pulsed", "ideal"}, x.displacement);
        x.phonon_dim = s.integer("phonon_dim", x.phonon_dim);
        x.n_max = s.integer("n_max", x.n_max);
        require(x.grid_points >= 1, s, "grid_points", "grid must be non-empty");
        require(x.extent >= 0.0, s, "extent", "must be non-negative");
        s.finish();
    }
    {
        const auto s = root.child("reconstruct");
        auto& x = c.reconstruct;
        x.input_csv = s.optional_string("input_csv");
        x.dim = s.integer("dim", x.dim);
        x.use_uncertainties = s.boolean("use_uncertainties", x.use_uncertainties);
        x.cut_points = s.integer("cut_points", x.cut_points);
        require(x.dim >= 2, s, "dim", "must be at least 2");
        require(x.cut_points >= 2, s, "cut_points", "must be at least 2");
        s.finish();
    }
    {
        const auto s = root.child("modes");
        auto& x = c.modes;
        x.band_min = 1e9 * s.number("band_min_ghz", x.band_min / 1e9);
        x.band_max = 1e9 * s.number("band_max_ghz", x.band_max / 1e9);
        x.max_order = s.integer("max_order", x.max_order);
        x.electrode = s.choice("electrode", {"flat_top", "gaussian"}, x.electrode);
        x.electrode_edge_width = 1e-6 * s.number("electrode_edge_width_um", x.electrode_edge_width * 1e6);
        x.grid_points = s.integer("grid_points", x.grid_points);
        x.roundtrip = s.boolean("roundtrip", x.roundtrip);
        x.n_roundtrips = s.integer("n_roundtrips", x.n_roundtrips);
        x.roundtrip_grid_points = s.integer("roundtrip_grid_points", x.roundtrip_grid_points);
        x.surface_profile = s.optional_string("surface_profile");
        x.surface_profile_unit = 1e-6 * s.number("surface_profile_unit_um", x.surface_profile_unit * 1e6);
        x.surface_fit_radius = 1e-6 * s.number("surface_fit_radius_um", x.surface_fit_radius * 1e6);
        require(x.band_max > x.band_min && x.band_min > 0.0, s, "band_max_ghz", "band must satisfy 0 < min < max");
        require(x.max_order >= 0, s, "max_order", "must be non-negative");
        require(x.grid_points >= 16, s, "grid_points", "must be at least 16");
        s.finish();
    }
    root.finish();
    if (c.stochastic() && !c.seed) {
        throw ConfigError("seed: required field missing (the " + c.experiment + " pipeline is stochastic)");
    }
    return c;
}

// ---------------------------------------------------------------------------------------
// Results

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  ///< column-major

    Table() = default;
    explicit Table(std::string n) : name(std::move(n)) {}

    Table& add(std::string column, std::vector<double> values) {
        if (!data.empty() && values.size() != data.front().size()) {
            throw ContractError("Table " + name + ": column " + column + " length mismatch");
        }
        columns.push_back(std::move(column));
        data.push_back(std::move(values));
        return *this;
    }

    std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }

    const std::vector<double>& column(const std::string& c) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == c) return data[i];
        }
        throw ContractError("Table " + name + ": no column " + c);
    }
};

struct ResultBundle {
    json manifest;
    std::vector<Table> tables;
    json summary = json::object();
    std::vector<std::string> warnings;

    const Table& table(const std::string& name) const {
        for (const auto& t : tables) {
            if (t.name == name) return t;
        }
        throw ContractError("ResultBundle: no table " + name);
    }
};

/// %.17g round-trips doubles exactly and formats identically on every run.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const Table& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << format_number(t.data[c][r]);
        out << '\n';
    }
}

/// Writes <name>.csv per table and manifest.json; returns the written paths.
inline std::vector<std::filesystem::path> export_bundle(const ResultBundle& bundle, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    for (const Table& t : bundle.tables) {
        const auto path = dir / (t.name + ".csv");
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_csv(out, t);
        if (!out) throw IoError("write failed: " + path.string());
        written.push_back(path);
    }
    json m = bundle.manifest;
    m["summary"] = bundle.summary;
    m["warnings"] = bundle.warnings;
    json files = json::array();
    for (const auto& t : bundle.tables) files.push_back(t.name + ".csv");
    m["tables"] = files;
    const auto path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << m.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
    written.push_back(path);
    return written;
}

// ---------------------------------------------------------------------------------------
// Trace import

struct TraceFormat {
    bool resample = false;  ///< interpolate a non-uniform time column onto a uniform grid
};

struct ImportedTraces {
    std::vector<std::string> names;
    std::vector<TimeTrace> traces;
};

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& cell, const std::string& source, int line, std::size_t col) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw FormatError(source + ":" + std::to_string(line) + ":" + std::to_string(col + 1) + ": cannot parse '" +
                          cell + "' as a number");
    }
    return v;
}

inline std::vector<double> interpolate(const std::vector<double>& t, const std::vector<double>& y,
                                       const std::vector<double>& tq) {
    std::vector<double> out;
    out.reserve(tq.size());
    std::size_t k = 0;
    for (double x : tq) {
        while (k + 2 < t.size() && t[k + 1] < x) ++k;
        const double w = (x - t[k]) / (t[k + 1] - t[k]);
        out.push_back(y[k] + std::clamp(w, 0.0, 1.0) * (y[k + 1] - y[k]));
    }
    return out;
}
}  // namespace detail

/// CSV with a header: a time column named t (seconds) or t_us, then one column per trace.
inline ImportedTraces parse_trace_csv(std::istream& in, const TraceFormat& fmt = {},
                                      const std::string& source = "input") {
    std::string line;
    int lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_csv(line);
        break;
    }
    if (header.size() < 2) throw FormatError(source + ":" + std::to_string(lineno) + ": header needs a time column and at least one trace");
    double time_unit = 0.0;
    if (header[0] == "t" || header[0] == "t_s") time_unit = 1.0;
    if (header[0] == "t_us") time_unit = 1e-6;
    if (time_unit == 0.0) throw FormatError(source + ":" + std::to_string(lineno) + ":1: first column must be t or t_us");
    std::vector<double> t;
    std::vector<std::vector<double>> cols(header.size() - 1);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != header.size()) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                              " columns, found " + std::to_string(cells.size()));
        }
        const double tv = time_unit * detail::parse_cell(cells[0], source, lineno, 0);
        if (!t.empty() && !(tv > t.back())) {
            throw FormatError(source + ":" + std::to_string(lineno) + ":1: time column not strictly increasing");
        }
        t.push_back(tv);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const double v = detail::parse_cell(cells[c], source, lineno, c);
            if (v < -TimeTrace::bound_slack || v > 1.0 + TimeTrace::bound_slack) {
                throw FormatError(source + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1) +
                                  ": probability outside [0, 1]");
            }
            cols[c - 1].push_back(v);
        }
    }
    if (t.size() < 2) throw FormatError(source + ": need at least two samples");
    std::vector<double> grid = t;
    bool uniform = true;
    try {
        validate_time_grid(t);
    } catch (const Error&) {
        uniform = false;
    }
    if (!uniform) {
        if (!fmt.resample) throw FormatError(source + ": time column is not uniformly sampled (enable resampling)");
        const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
        for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = t.front() + step * static_cast<double>(k);
        grid.back() = t.back();
    }
    ImportedTraces out;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        TimeTrace tr;
        tr.times = grid;
        tr.pe = uniform ? cols[c] : detail::interpolate(t, cols[c], grid);
        tr.validate();
        out.names.push_back(header[c + 1]);
        out.traces.push_back(std::move(tr));
    }
    return out;
}

inline ImportedTraces import_trace_data(const std::string& path, const TraceFormat& fmt = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    return parse_trace_csv(in, fmt, path);
}

// ---------------------------------------------------------------------------------------
// Pipelines

namespace detail {

/// Runs fn(i) for i in [0, count) on up to `workers` threads; results must go to
/// per-index slots so the output does not depend on scheduling.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nthreads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Re-raises module errors with the pipeline stage prepended, keeping the category.
template <class F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.category(), name + ": " + e.what());
    }
}

/// Additive Gaussian readout noise, clamped to [0, 1].
inline void add_noise(TimeTrace& tr, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& p : tr.pe) p = std::clamp(p + normal(rng), 0.0, 1.0);
}

inline std::vector<double> trace_frequencies(const TimeTrace& tr) {
    const auto sp = fft::padded_trace_spectrum(tr.pe, tr.times[1] - tr.times[0]);
    return sp.frequency;
}

inline std::string trace_column(int n) { return "pe_N" + std::to_string(n); }

inline json population_json(const PopulationDistribution& d) {
    return std::vector<double>(d.p.data(), d.p.data() + d.p.size());
}

/// Table of traces sharing one grid plus the padded FFT magnitudes and peak list.
inline void add_trace_tables(ResultBundle& b, const std::string& prefix, const std::vector<int>& labels,
                             const std::vector<TimeTrace>& traces) {
    Table tt(prefix + "_traces");
    tt.add("t", traces.front().times);
    Table ft(prefix + "_fft");
    Table pk(prefix + "_fft_peaks");
    std::vector<double> pk_n, pk_f;
    const double dt = traces.front().times[1] - traces.front().times[0];
    for (std::size_t i = 0; i < traces.size(); ++i) {
        tt.add(trace_column(labels[i]), traces[i].pe);
        const auto sp = fft::padded_trace_spectrum(traces[i].pe, dt);
        if (i == 0) ft.add("frequency_hz", sp.frequency);
        ft.add("mag_N" + std::to_string(labels[i]), sp.magnitude);
        pk_n.push_back(labels[i]);
        pk_f.push_back(fft::dominant_frequency(traces[i].pe, dt));
    }
    pk.add("N", pk_n).add("peak_hz", pk_f);
    b.tables.push_back(std::move(tt));
    b.tables.push_back(std::move(ft));
    b.tables.push_back(std::move(pk));
}

}  // namespace detail

inline ResultBundle run_chevron(const ExperimentConfig& c, std::mt19937_64& rng) {
    const auto& x = c.chevron;
    std::vector<double> det;
    for (int i = 0; i < x.detuning_points; ++i) {
        det.push_back(x.detuning_points == 1
                          ? x.detuning_min
                          : x.detuning_min + (x.detuning_max - x.detuning_min) * i / (x.detuning_points - 1));
    }
    const auto grid = uniform_grid(x.t_max, static_cast<std::size_t>(x.intervals));
    RMatrix pe(static_cast<Eigen::Index>(det.size()), static_cast<Eigen::Index>(grid.size()));
    detail::stage("chevron/simulate", [&] {
        detail::parallel_for(det.size(), c.workers, [&](std::size_t i) {
            const RMatrix row = simulate_chevron(c.system, std::span<const double>(&det[i], 1), grid, x.phonon_dim);
            pe.row(static_cast<Eigen::Index>(i)) = row.row(0);
        });
    });
    ResultBundle b;
    Table t("chevron");
    std::vector<double> cd, ct, cp;
    std::normal_distribution<double> normal(0.0, c.noise_sigma > 0 ? c.noise_sigma : 1.0);
    for (Eigen::Index i = 0; i < pe.rows(); ++i) {
        for (Eigen::Index k = 0; k < pe.cols(); ++k) {
            double v = pe(i, k);
            if (c.noise_sigma > 0.0) v = std::clamp(v + normal(rng), 0.0, 1.0);
            cd.push_back(det[static_cast<std::size_t>(i)]);
            ct.push_back(grid[static_cast<std::size_t>(k)]);
            cp.push_back(v);
        }
    }
    t.add("detuning_hz", cd).add("t", ct).add("pe", cp);
    b.tables.push_back(std::move(t));
    // Resonant vacuum Rabi frequency from the row closest to zero detuning.
    std::size_t zero = 0;
    for (std::size_t i = 1; i < det.size(); ++i) {
        if (std::abs(det[i]) < std::abs(det[zero])) zero = i;
    }
    std::vector<double> row(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) row[k] = pe(static_cast<Eigen::Index>(zero), static_cast<Eigen::Index>(k));
    b.summary["resonant_row_detuning_hz"] = det[zero];
    if (grid.size() >= 8) b.summary["resonant_rabi_hz"] = fft::dominant_frequency(row, grid[1] - grid[0]);
    b.summary["expected_rabi_hz"] = 2.0 * c.system.g0 / two_pi;
    return b;
}

inline ResultBundle run_rabi_basis(const ExperimentConfig& c, std::mt19937_64& rng) {
    const auto& x = c.rabi_basis;
    const auto grid = c.probe.grid();
    std::vector<TimeTrace> traces = detail::stage("rabi_basis/simulate", [&] {
        return simulate_basis_traces(c.system, x.n_max, grid, std::max(x.phonon_dim, x.n_max + 6));
    });
    for (auto& tr : traces) detail::add_noise(tr, c.noise_sigma, rng);
    ResultBundle b;
    std::vector<int> labels;
    for (int n = 1; n <= x.n_max; ++n) labels.push_back(n);
    detail::add_trace_tables(b, "rabi_basis", labels, traces);
    const auto& peaks = b.tables.back().column("peak_hz");
    json rel = json::array();
    double worst = 0.0;
    for (int n = 1; n <= x.n_max; ++n) {
        const double expect = std::sqrt(static_cast<double>(n)) * 2.0 * c.system.g0 / two_pi;
        const double e = peaks[static_cast<std::size_t>(n - 1)] / expect - 1.0;
        rel.push_back(e);
        worst = std::max(worst, std::abs(e));
    }
    b.summary["peak_relative_error"] = rel;
    b.summary["max_abs_peak_relative_error"] = worst;
    return b;
}

inline ResultBundle run_ladder(const ExperimentConfig& c, std::mt19937_64& rng) {
    const auto& x = c.ladder;
    const auto grid = c.probe.grid();
    const Eigen::Index dim = std::max<Eigen::Index>(x.phonon_dim, x.n_max + 6);
    const ProbeKernel kernel = detail::stage("ladder/probe_kernel", [&] { return ProbeKernel(c.system, dim, grid); });
    std::vector<TimeTrace> basis;
    for (int n = 1; n <= x.n_max; ++n) basis.push_back(kernel.basis_trace(n));

    std::vector<TimeTrace> traces(x.n_values.size());
    detail::stage("ladder/prepare", [&] {
        detail::parallel_for(x.n_values.size(), c.workers, [&](std::size_t i) {
            traces[i] = kernel.trace(simulate_fock_preparation(c.system, x.n_values[i], dim));
        });
    });
    for (auto& tr : traces) detail::add_noise(tr, c.noise_sigma, rng);

    std::vector<PopulationDistribution> pops(traces.size());
    std::vector<std::pair<PopulationDistribution, PopulationDistribution>> bars(traces.size());
    detail::stage("ladder/extract", [&] {
        for (std::size_t i = 0; i < traces.size(); ++i) pops[i] = extract_populations(traces[i], basis, x.n_max);
        if (x.delta_g > 0.0) {
            detail::parallel_for(traces.size(), c.workers, [&](std::size_t i) {
                bars[i] = population_error_bars(traces[i], c.system, x.delta_g, x.n_max, dim);
            });
        }
    });

    ResultBundle b;
    detail::add_trace_tables(b, "ladder", x.n_values, traces);
    Table pt("ladder_populations");
    Table lo("ladder_populations_lo");
    Table hi("ladder_populations_hi");
    std::vector<double> ns(x.n_values.begin(), x.n_values.end());
    pt.add("N", ns);
    lo.add("N", ns);
    hi.add("N", ns);
    for (int n = 0; n <= x.n_max; ++n) {
        std::vector<double> col, cl, ch;
        for (std::size_t i = 0; i < pops.size(); ++i) {
            col.push_back(pops[i].p(n));
            if (x.delta_g > 0.0) {
                const auto [l, h] = envelope(bars[i].first, bars[i].second);
                cl.push_back(std::min(l(n), pops[i].p(n)));
                ch.push_back(std::max(h(n), pops[i].p(n)));
            }
        }
        pt.add("p" + std::to_string(n), col);
        if (x.delta_g > 0.0) {
            lo.add("p" + std::to_string(n), cl);
            hi.add("p" + std::to_string(n), ch);
        }
    }
    b.tables.push_back(std::move(pt));
    if (x.delta_g > 0.0) {
        b.tables.push_back(std::move(lo));
        b.tables.push_back(std::move(hi));
    }
    json diag = json::array(), argmax = json::array();
    for (std::size_t i = 0; i < pops.size(); ++i) {
        Eigen::Index am = 0;
        pops[i].p.maxCoeff(&am);
        diag.push_back(pops[i].p(x.n_values[i]));
        argmax.push_back(am);
    }
    b.summary["p_NN"] = diag;
    b.summary["argmax"] = argmax;
    b.summary["fft_peak_hz"] = b.table("ladder_fft_peaks").column("peak_hz");
    return b;
}

inline ResultBundle run_displacement_calibration(const ExperimentConfig& c, std::mt19937_64& rng) {
    const auto& x = c.calibration;
    const Eigen::Index dim = std::max<Eigen::Index>(x.phonon_dim, x.n_max + 6);
    const auto grid = c.probe.grid();
    const ProbeKernel kernel = detail::stage("calibration/probe_kernel", [&] { return ProbeKernel(c.system, dim, grid); });
    std::vector<TimeTrace> basis;
    for (int n = 1; n <= x.n_max; ++n) basis.push_back(kernel.basis_trace(n));
    const JointState start = detail::stage("calibration/prepare",
                                           [&] { return prepare(c.system, Preparation::vacuum(), dim); });
    const double frame = dressed_phonon_shift(c.system) / two_pi;
    std::vector<TimeTrace> traces(x.drive_amplitudes.size());
    detail::stage("calibration/drive", [&] {
        detail::parallel_for(traces.size(), c.workers, [&](std::size_t i) {
            const auto seg = PulseSegment::displacement(cplx(two_pi * x.drive_amplitudes[i], 0.0), 4e-6, 1e-6, frame);
            const JointState s = evolve(start, c.system, seg);
            check_truncation(s, "displacement_calibration");
            traces[i] = kernel.trace(s);
        });
    });
    for (auto& tr : traces) detail::add_noise(tr, c.noise_sigma, rng);
    std::vector<PopulationDistribution> pops;
    detail::stage("calibration/extract", [&] {
        for (const auto& tr : traces) pops.push_back(extract_populations(tr, basis, x.n_max));
    });
    const CalibrationResult cal = detail::stage("calibration/fit", [&] {
        return calibrate_displacement(x.drive_amplitudes, pops);
    });

    ResultBundle b;
    Table pt("calibration_populations");
    Table pp("calibration_poisson");
    std::vector<double> amps, alphas;
    for (double a : x.drive_amplitudes) {
        amps.push_back(a);
        alphas.push_back(cal.scale * a);
    }
    pt.add("drive_hz", amps).add("alpha", alphas);
    pp.add("drive_hz", amps).add("alpha", alphas);
    for (int n = 0; n <= x.n_max; ++n) {
        std::vector<double> m, q;
        for (std::size_t i = 0; i < pops.size(); ++i) {
            m.push_back(pops[i].p(n));
            q.push_back(poisson_populations(alphas[i] * alphas[i], x.n_max)(n));
        }
        pt.add("p" + std::to_string(n), m);
        pp.add("p" + std::to_string(n), q);
    }
    pt.add("total_variation", cal.total_variation);
    b.tables.push_back(std::move(pt));
    b.tables.push_back(std::move(pp));
    b.summary["scale_per_hz"] = cal.scale;
    b.summary["residual"] = cal.residual;
    b.summary["total_variation"] = cal.total_variation;
    b.summary["max_total_variation"] = *std::max_element(cal.total_variation.begin(), cal.total_variation.end());
    return b;
}

namespace detail {

inline Table wigner_table(const WignerGrid& g) {
    Table t("wigner");
    std::vector<double> re, im, w;
    for (std::size_t i = 0; i < g.size(); ++i) {
        re.push_back(g.alphas[i].real());
        im.push_back(g.alphas[i].imag());
        w.push_back(wigner_from_parity(g.parities[i]));
    }
    t.add("alpha_re", re).add("alpha_im", im).add("parity", g.parities).add("wigner", w);
    if (g.uncertainties) t.add("sigma", *g.uncertainties);
    return t;
}

inline WignerGrid measured_wigner(const ExperimentConfig& c, std::mt19937_64& rng, std::vector<std::string>& warnings) {
    const auto& x = c.wigner;
    ParityMeasurementOptions opt;
    opt.phonon_dim = std::max<Eigen::Index>(x.phonon_dim, x.n_max + 6);
    opt.n_max = x.n_max;
    opt.displacement = x.displacement == "ideal" ? DisplacementOptions::Mode::ideal : DisplacementOptions::Mode::pulsed;
    opt.calibrated_range = std::max(opt.calibrated_range, std::sqrt(2.0) * x.extent);
    opt.probe_grid = c.probe.grid();
    const auto alphas = square_alpha_grid(x.grid_points, x.extent);
    const DisplacedParityMeasurement m = stage("wigner/setup", [&] { return DisplacedParityMeasurement(c.system, opt); });
    const JointState prepared = stage("wigner/prepare", [&] { return m.prepare(preparation_from_name(x.preparation)); });
    std::vector<TimeTrace> traces(alphas.size());
    std::vector<std::vector<std::string>> warn(alphas.size());
    stage("wigner/displace", [&] {
        parallel_for(alphas.size(), c.workers, [&](std::size_t i) {
            traces[i] = m.kernel().trace(m.displaced(prepared, alphas[i], &warn[i]));
        });
    });
    for (const auto& w : warn) warnings.insert(warnings.end(), w.begin(), w.end());
    WignerGrid g;
    g.alphas = alphas;
    stage("wigner/extract", [&] {
        for (auto& tr : traces) {
            add_noise(tr, c.noise_sigma, rng);
            g.parities.push_back(parity_from_populations(extract_populations(tr, m.basis(), x.n_max)));
        }
    });
    return g;
}

inline WignerGrid read_wigner_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open Wigner data: " + path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    const auto header = split_csv(line);
    auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    const auto cre = col("alpha_re"), cim = col("alpha_im"), cp = col("parity"), cs = col("sigma");
    if (!cre || !cim || !cp) throw FormatError(path + ":1: need columns alpha_re, alpha_im, parity");
    WignerGrid g;
    std::vector<double> sig;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) throw FormatError(path + ":" + std::to_string(lineno) + ": column count mismatch");
        g.alphas.emplace_back(parse_cell(cells[*cre], path, lineno, *cre), parse_cell(cells[*cim], path, lineno, *cim));
        g.parities.push_back(parse_cell(cells[*cp], path, lineno, *cp));
        if (cs) sig.push_back(parse_cell(cells[*cs], path, lineno, *cs));
    }
    if (cs) g.uncertainties = sig;
    g.validate();
    return g;
}

}  // namespace detail

inline ResultBundle run_wigner(const ExperimentConfig& c, std::mt19937_64& rng) {
    ResultBundle b;
    const WignerGrid g = detail::measured_wigner(c, rng, b.warnings);
    b.tables.push_back(detail::wigner_table(g));
    std::vector<double> cut_x, cut_p;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.alphas[i].imag() == 0.0) {
            cut_x.push_back(g.alphas[i].real());
            cut_p.push_back(g.parities[i]);
        }
    }
    if (!cut_x.empty()) {
        Table cut("wigner_cut");
        cut.add("alpha_re", cut_x).add("parity", cut_p);
        b.tables.push_back(std::move(cut));
    }
    const auto mn = std::min_element(g.parities.begin(), g.parities.end());
    b.summary["min_parity"] = *mn;
    b.summary["points"] = g.size();
    return b;
}

inline ResultBundle run_reconstruct(const ExperimentConfig& c, std::mt19937_64& rng) {
    const auto& x = c.reconstruct;
    ResultBundle b;
    const WignerGrid g = x.input_csv ? detail::stage("reconstruct/read", [&] { return detail::read_wigner_csv(*x.input_csv); })
                                     : detail::measured_wigner(c, rng, b.warnings);
    MleOptions mo;
    mo.seed = *c.seed;
    mo.use_uncertainties = x.use_uncertainties;
    const MleResult res = detail::stage("reconstruct/mle", [&] { return mle_reconstruct_detailed(g, x.dim, mo); });
    b.warnings.insert(b.warnings.end(), res.warnings.begin(), res.warnings.end());
    const Preparation prep = preparation_from_name(c.wigner.preparation);
    const StateVector target = prep.target(x.dim);
    const auto cut = default_cut(x.cut_points, std::max(c.wigner.extent, 1e-9));
    const ReconstructionReport rep = reconstruction_report(res.rho, target, g.alphas, cut);

    b.tables.push_back(detail::wigner_table(g));
    Table rho("rho");
    std::vector<double> rr, rc, re, ri;
    for (Eigen::Index i = 0; i < res.rho.dim(); ++i) {
        for (Eigen::Index j = 0; j < res.rho.dim(); ++j) {
            rr.push_back(static_cast<double>(i));
            rc.push_back(static_cast<double>(j));
            re.push_back(res.rho.matrix()(i, j).real());
            ri.push_back(res.rho.matrix()(i, j).imag());
        }
    }
    rho.add("row", rr).add("col", rc).add("re", re).add("im", ri);
    b.tables.push_back(std::move(rho));
    Table pred("reconstructed_wigner");
    std::vector<double> pre, pim, pw;
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
        pre.push_back(rep.grid[i].real());
        pim.push_back(rep.grid[i].imag());
        pw.push_back(rep.wigner[i]);
    }
    pred.add("alpha_re", pre).add("alpha_im", pim).add("parity", rep.parity).add("wigner", pw);
    b.tables.push_back(std::move(pred));
    Table ct("reconstruct_cut");
    const DensityMatrix ideal = DensityMatrix::pure(target);
    std::vector<double> ip;
    for (double a : cut) ip.push_back(displaced_parity(ideal, cplx(a, 0.0)));
    ct.add("alpha_re", rep.cut_re).add("ideal_parity", ip).add("reconstructed_parity", rep.cut_parity);
    b.tables.push_back(std::move(ct));
    std::vector<double> dx, dp;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.alphas[i].imag() == 0.0) {
            dx.push_back(g.alphas[i].real());
            dp.push_back(g.parities[i]);
        }
    }
    if (!dx.empty()) {
        Table dt("reconstruct_cut_data");
        dt.add("alpha_re", dx).add("parity", dp);
        b.tables.push_back(std::move(dt));
    }
    b.summary["fidelity"] = rep.fidelity;
    b.summary["target"] = prep.name();
    b.summary["min_parity"] = rep.min_parity;
    b.summary["min_wigner"] = rep.min_wigner;
    b.summary["center_parity"] = displaced_parity(res.rho, 0.0);
    b.summary["mle_iterations"] = res.iterations;
    b.summary["mle_gradient_norm"] = res.gradient_norm;
    b.summary["mle_objective"] = res.objective;
    return b;
}

inline ResultBundle run_modes(const ExperimentConfig& c) {
    const auto& x = c.modes;
    acoustics::AcousticGeometry geom = c.geometry.value_or(acoustics::AcousticGeometry{});
    const acoustics::MaterialParams mat = c.material.value_or(acoustics::MaterialParams{});
    ResultBundle b;
    std::optional<acoustics::SurfaceProfile> surface;
    if (x.surface_profile) {
        surface = detail::stage("modes/surface", [&] { return acoustics::load_surface_profile(*x.surface_profile, x.surface_profile_unit); });
        geom.curvature_radius = detail::stage("modes/surface", [&] {
            return acoustics::fit_curvature_radius(*surface, x.surface_fit_radius);
        });
        b.summary["fitted_curvature_radius_m"] = geom.curvature_radius;
    }
    geom.validate(&b.warnings);
    const acoustics::FrequencyBand band{x.band_min, x.band_max};
    auto modes = detail::stage("modes/analytic", [&] {
        return acoustics::analytic_mode_spectrum(geom, mat, band, x.max_order, &b.warnings);
    });
    if (modes.empty()) throw ValidationError("modes: no modes in band");
    const double extent = 4.0 * geom.convex_diameter;
    const auto electrode =
        x.electrode == "gaussian"
            ? acoustics::gaussian_electrode_profile(x.grid_points, extent, 0.5 * geom.electrode_diameter)
            : acoustics::electrode_profile(x.grid_points, extent, geom.electrode_diameter, x.electrode_edge_width);
    modes = detail::stage("modes/coupling", [&] {
        return acoustics::coupling_rates(geom, mat, electrode, modes, c.system.g0);
    });
    Table mt("modes");
    std::vector<double> l, m, n, f, w, g;
    double fund = 0.0, other = 0.0;
    for (const auto& r : modes) {
        l.push_back(r.l);
        m.push_back(r.m);
        n.push_back(r.n);
        f.push_back(r.frequency);
        w.push_back(r.waist);
        g.push_back(r.coupling / two_pi);
        double& slot = (r.m == 0 && r.n == 0) ? fund : other;
        slot = std::max(slot, r.coupling);
    }
    mt.add("l", l).add("m", m).add("n", n).add("frequency_hz", f).add("waist_m", w).add("coupling_hz", g);
    b.tables.push_back(std::move(mt));
    b.summary["fsr_hz"] = acoustics::free_spectral_range(geom, mat);
    b.summary["transverse_spacing_hz"] = acoustics::transverse_spacing(geom, mat);
    b.summary["waist_m"] = acoustics::mode_waist(geom, mat, 0.5 * (x.band_min + x.band_max));
    b.summary["selectivity"] = other > 0.0 ? fund / other : std::numeric_limits<double>::infinity();
    if (x.roundtrip) {
        acoustics::RoundtripOptions ro;
        ro.surface = surface;
        const double w0 = acoustics::mode_waist(geom, mat, 0.5 * (x.band_min + x.band_max));
        const auto exc = acoustics::hermite_gauss_field(x.roundtrip_grid_points, extent, 0, 0, w0, 0.4 * w0, 0.3 * w0)
                             .normalize();
        const auto sp = detail::stage("modes/roundtrip", [&] {
            return acoustics::roundtrip_spectrum(geom, mat, band, x.n_roundtrips, exc, ro);
        });
        Table st("roundtrip_spectrum");
        st.add("frequency_hz", sp.frequency).add("intensity", sp.intensity);
        b.tables.push_back(std::move(st));
        Table pk("roundtrip_peaks");
        std::vector<double> pf, pi_, pl;
        for (const auto& p : sp.peaks) {
            pf.push_back(p.frequency);
            pi_.push_back(p.intensity);
            pl.push_back(p.linewidth);
        }
        pk.add("frequency_hz", pf).add("intensity", pi_).add("linewidth_hz", pl);
        b.tables.push_back(std::move(pk));
        b.summary["roundtrip_absorbed_fraction"] = sp.absorbed_fraction;
    }
    return b;
}

/// Extracts populations from imported traces with basis traces simulated on the file's
/// time grid for the configured system.
inline ResultBundle run_import(const ExperimentConfig& c, const std::string& path, const TraceFormat& fmt = {}) {
    const ImportedTraces in = detail::stage("import/read", [&] { return import_trace_data(path, fmt); });
    const int n_max = c.ladder.n_max;
    const auto& grid = in.traces.front().times;
    const auto basis = detail::stage("import/basis", [&] {
        return simulate_basis_traces(c.system, n_max, grid, std::max(c.ladder.phonon_dim, n_max + 6));
    });
    ResultBundle b;
    Table tt("imported_traces");
    tt.add("t", grid);
    Table pt("imported_populations");
    std::vector<double> idx;
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n_max) + 1);
    json parity = json::array();
    for (std::size_t i = 0; i < in.traces.size(); ++i) {
        tt.add(in.names[i], in.traces[i].pe);
        const auto d = detail::stage("import/extract", [&] { return extract_populations(in.traces[i], basis, n_max); });
        idx.push_back(static_cast<double>(i));
        for (int n = 0; n <= n_max; ++n) cols[static_cast<std::size_t>(n)].push_back(d.p(n));
        parity.push_back(parity_from_populations(d));
    }
    pt.add("trace", idx);
    for (int n = 0; n <= n_max; ++n) pt.add("p" + std::to_string(n), cols[static_cast<std::size_t>(n)]);
    b.tables.push_back(std::move(tt));
    b.tables.push_back(std::move(pt));
    b.summary["trace_names"] = in.names;
    b.summary["parity"] = parity;
    b.manifest["experiment"] = "import";
    b.manifest["input"] = path;
    b.manifest["config"] = c.echo();
    b.manifest["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    return b;
}

/// Runs the configured pipeline. The manifest echoes the config, seed and versions.
inline ResultBundle run_experiment(const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(c.seed.value_or(0));
    ResultBundle b;
    if (c.experiment == "chevron") b = run_chevron(c, rng);
    else if (c.experiment == "rabi_basis") b = run_rabi_basis(c, rng);
    else if (c.experiment == "ladder") b = run_ladder(c, rng);
    else if (c.experiment == "displacement_calibration") b = run_displacement_calibration(c, rng);
    else if (c.experiment == "wigner") b = run_wigner(c, rng);
    else if (c.experiment == "reconstruct") b = run_reconstruct(c, rng);
    else if (c.experiment == "modes") b = run_modes(c);
    else throw ConfigError("experiment: unknown pipeline '" + c.experiment + "'");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    b.manifest["experiment"] = c.experiment;
    b.manifest["config"] = c.echo();
    b.manifest["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    json versions;
    versions["qad"] = version;
    versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    versions["fftw"] = std::string(fftw_version);
    versions["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    b.manifest["versions"] = versions;
    b.manifest["wall_time_s"] = wall;
    return b;
}

}  // namespace qad::harness
