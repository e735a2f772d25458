// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Command-line front end for the Monte Carlo sweeps and the bound curves.
// Settings are layered: built-in defaults, then --paper, then --config, then flags.

#include "beamcfo/harness/config.hpp"
#include "beamcfo/harness/manifest.hpp"
#include "beamcfo/harness/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#ifndef BEAMCFO_GIT_REVISION
#define BEAMCFO_GIT_REVISION "unknown"
#endif

namespace {

using namespace beamcfo;
using namespace beamcfo::harness;

struct CommonFlags {
    std::string config_path;
    bool paper = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::optional<int> trials;
    std::vector<double> snr;
    std::optional<std::string> estimator;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("-c,--config", f.config_path, "INI file applied on top of the defaults")->check(CLI::ExistingFile);
    sub->add_flag("--paper", f.paper, "start from the published simulation setup");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("-o,--out", f.out, "output directory");
    sub->add_option("-j,--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("-n,--trials", f.trials, "Monte Carlo trials per SNR point")->check(CLI::PositiveNumber);
    sub->add_option("--snr", f.snr, "SNR points in dB, replaces the configured list")->delimiter(',');
    sub->add_option("--estimator", f.estimator, "nocobp, cobp or both");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig c = f.paper ? paper_preset() : ExperimentConfig{};
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw ConfigError("cannot open config file " + f.config_path);
        c = apply_ini(std::move(c), in);
    }
    if (f.seed) c.seed = *f.seed;
    if (f.out) c.output = *f.out;
    if (f.workers) c.workers = *f.workers;
    if (f.trials) c.trials = *f.trials;
    if (!f.snr.empty()) c.snr_db = f.snr;
    if (f.estimator) c.estimator = config_detail::parse_estimator(*f.estimator);
    c.validate();
    return c;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

int run(const std::string& command, const ExperimentConfig& c) {
    MetricTable table;
    if (command == "mse") table = run_mse_sweep(c);
    else if (command == "ser") table = run_ser_sweep(c);
    else if (command == "crb") table = run_crb(c);
    else if (command == "analytic") table = run_analytic(c);
    else if (command == "bounds") table = run_bounds(c);
    else if (command == "zeta") table = run_zeta(c);
    const std::filesystem::path dir(c.output);
    std::filesystem::create_directories(dir);
    const std::string csv_name = command + ".csv";
    write_file(dir / csv_name, table.to_csv());
    write_file(dir / (command + ".manifest.json"),
               make_manifest(command, c, BEAMCFO_GIT_REVISION, {csv_name}).dump(2) + "\n");
    std::cout << "wrote " << table.rows.size() << " rows to " << (dir / csv_name).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offset estimation sweeps for beamspace OFDM receivers"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string("beamcfo ") + BEAMCFO_GIT_REVISION);

    const std::vector<std::pair<std::string, std::string>> commands{
        {"mse", "MSE of the Doppler and oscillator offset estimates versus SNR"},
        {"ser", "symbol error rate of both receivers and the known-offset benchmark"},
        {"crb", "Cramer-Rao bound averaged over offset, mismatch and pilot draws"},
        {"analytic", "closed-form MSE approximation and its high-SNR asymptote"},
        {"bounds", "crb and analytic on the same SNR grid"},
        {"zeta", "spectral constants by quadrature and in closed form"},
    };
    CommonFlags flags;
    std::string chosen;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, flags);
        sub->callback([&chosen, name = name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        return run(chosen, resolve(flags));
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const SizeError& e) {
        std::cerr << "problem too large: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
