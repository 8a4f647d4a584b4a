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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "qad/harness.hpp"

namespace {

using qad::harness::json;

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

json load_config_json(const Common& c, const std::string& experiment) {
    json j = json::object();
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) throw qad::IoError("cannot open config: " + c.config_path);
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw qad::FormatError(c.config_path + ": " + e.what());
        }
        if (!j.is_object()) throw qad::ConfigError("config: top level must be an object");
    }
    if (j.contains("experiment") && j["experiment"] != experiment) {
        throw qad::ConfigError("experiment: config names '" + j["experiment"].dump() + "' but subcommand runs '" +
                               experiment + "'");
    }
    j["experiment"] = experiment;
    if (!c.out.empty()) j["output_dir"] = c.out;
    if (c.seed) j["seed"] = *c.seed;
    if (c.workers) j["workers"] = *c.workers;
    return j;
}

void report(const qad::harness::ResultBundle& b, const std::string& dir) {
    const auto files = qad::harness::export_bundle(b, dir);
    std::cout << "wrote " << files.size() << " files to " << dir << '\n';
    std::cout << b.summary.dump(2) << '\n';
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << '\n';
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", c.out, "output directory (overrides output_dir)");
    sub->add_option("-s,--seed", c.seed, "random seed (overrides seed)");
    sub->add_option("-w,--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Qubit-phonon simulation and analysis runner"};
    app.require_subcommand(1);
    Common common;
    std::string import_path;
    bool resample = false;

    const std::vector<std::pair<std::string, std::string>> pipelines{
        {"chevron", "chevron"},
        {"rabi-basis", "rabi_basis"},
        {"ladder", "ladder"},
        {"calibrate-displacement", "displacement_calibration"},
        {"wigner", "wigner"},
        {"reconstruct", "reconstruct"},
        {"modes", "modes"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [cmd, exp] : pipelines) {
        auto* sub = app.add_subcommand(cmd, "run the " + exp + " pipeline");
        add_common(sub, common);
        subs.push_back(sub);
    }
    auto* imp = app.add_subcommand("import", "extract populations from a measured trace CSV");
    add_common(imp, common);
    imp->add_option("input", import_path, "CSV with a t or t_us column and one column per trace")
        ->required()
        ->check(CLI::ExistingFile);
    imp->add_flag("--resample", resample, "interpolate a non-uniform time column onto a uniform grid");

    CLI11_PARSE(app, argc, argv);

    try {
        if (imp->parsed()) {
            json j = load_config_json(common, "ladder");
            const auto cfg = qad::harness::ExperimentConfig::from_json(j);
            qad::harness::TraceFormat fmt;
            fmt.resample = resample;
            report(qad::harness::run_import(cfg, import_path, fmt), cfg.output_dir);
            return 0;
        }
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const auto cfg = qad::harness::ExperimentConfig::from_json(load_config_json(common, pipelines[i].second));
            report(qad::harness::run_experiment(cfg), cfg.output_dir);
            return 0;
        }
    } catch (const qad::Error& e) {
        json line;
        line["category"] = qad::category_name(e.category());
        line["code"] = static_cast<int>(e.category());
        line["message"] = e.what();
        std::cerr << "error " << line.dump() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        json line;
        line["category"] = "internal";
        line["code"] = 1;
        line["message"] = e.what();
        std::cerr << "error " << line.dump() << '\n';
        return 1;
    }
    return 0;
}
