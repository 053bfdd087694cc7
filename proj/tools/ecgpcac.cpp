// Command-line driver: run a scenario file or a named preset and write the log.
//
//   ecgpcac run scenario.cfg [--out log.csv] [--set key=value ...]
//   ecgpcac preset exp_unstable [--steps N] [--out log.csv] [--set key=value ...]
//   ecgpcac list-presets
//   ecgpcac list-keys
//
// Exit status: 0 success, 1 other failure, 2 configuration error, 3 divergence.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgpcac/config.hpp"
#include "ecgpcac/log_io.hpp"
#include "ecgpcac/scenario.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_diverged = 3;

int run_and_report(const ecgpcac::ScenarioConfig& cfg, const std::string& out) {
    const ecgpcac::SimLog log = ecgpcac::run_scenario(cfg);
    if (!out.empty()) {
        ecgpcac::write_log(log, out);
        std::cerr << "wrote " << out << " and " << ecgpcac::summary_path(out).string() << '\n';
    }
    std::cout << ecgpcac::summary_json(log).dump(2) << '\n';
    if (log.diverged) {
        std::cerr << "diverged: " << log.message << '\n';
        return exit_diverged;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extremum-seeking command generation with predictive cost adaptive control"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset_name;
    std::string out_path;
    long long steps = 0;
    std::vector<std::string> overrides;

    auto* run = app.add_subcommand("run", "Run a scenario described by a config file");
    run->add_option("config", config_path, "Scenario file (key = value lines)")->required();
    run->add_option("--out,-o", out_path, "CSV log path; a .summary.json is written beside it");
    run->add_option("--set", overrides, "Override a config key, e.g. --set pcac.ell=20");

    auto* preset = app.add_subcommand("preset", "Run a built-in benchmark scenario");
    preset->add_option("name", preset_name, "Preset name (see list-presets)")->required();
    preset->add_option("--steps", steps, "Number of steps (default: preset length)")->check(CLI::PositiveNumber);
    preset->add_option("--out,-o", out_path, "CSV log path; a .summary.json is written beside it");
    preset->add_option("--set", overrides, "Override a config key, e.g. --set ecg.b_es=0.3");

    auto* list = app.add_subcommand("list-presets", "Print the built-in scenario names");
    auto* keys = app.add_subcommand("list-keys", "Print every recognized config key");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_config;
    }

    try {
        if (list->parsed()) {
            for (const auto& name : ecgpcac::preset_names())
                std::cout << name << '\n';
            return 0;
        }
        if (keys->parsed()) {
            for (const auto& key : ecgpcac::config_keys())
                std::cout << key << '\n';
            return 0;
        }

        ecgpcac::ScenarioConfig cfg;
        if (run->parsed()) {
            cfg = ecgpcac::load_config(config_path, overrides);
        } else {
            auto base = ecgpcac::find_preset(preset_name);
            if (!base)
                throw ecgpcac::ConfigError("plant.preset", "unknown preset '" + preset_name + "'");
            cfg = std::move(*base);
            for (const auto& o : overrides) {
                auto [k, v] = ecgpcac::split_assignment(o);
                ecgpcac::apply_setting(cfg, k, v);
            }
            if (steps > 0)
                cfg.n_steps = steps;
            ecgpcac::validate_config(cfg);
        }
        return run_and_report(cfg, out_path);
    } catch (const ecgpcac::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
