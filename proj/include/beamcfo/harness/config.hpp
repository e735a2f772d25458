// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Experiment configuration and its INI representation.

#pragma once

#include "beamcfo/estimator_cobp.hpp"
#include "beamcfo/harness/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace beamcfo::harness {

enum class EstimatorChoice { NoCobp, Cobp, Both };

struct ExperimentConfig {
    Scenario scenario;
    std::string pdp_shape = "uniform";  // uniform | exponential
    double pdp_decay = 2.0;             // taps, exponential profile only
    std::vector<double> snr_db{0.0, 10.0, 20.0, 30.0};
    int trials = 200;
    std::uint64_t seed = 1;
    EstimatorChoice estimator = EstimatorChoice::Both;
    int workers = 1;
    std::string output = "results";
    NewtonOptions newton;
    CobpOptions cobp;
    int crb_draws = 100;
    int analytic_draws = 20;  // mismatch draws averaged by the analytic MSE
    int zeta_k_max = 3;

    void validate() const {
        scenario.validate();
        if (trials < 1) throw ConfigError("config: trials must be at least 1");
        if (workers < 1) throw ConfigError("config: workers must be at least 1");
        if (snr_db.empty()) throw ConfigError("config: snr_db needs at least one value");
        for (double s : snr_db)
            if (!std::isfinite(s)) throw ConfigError("config: snr_db values must be finite");
        if (crb_draws < 1) throw ConfigError("config: crb_draws must be at least 1");
        if (analytic_draws < 1) throw ConfigError("config: analytic_draws must be at least 1");
        if (zeta_k_max < 1) throw ConfigError("config: zeta_k_max must be at least 1");
        if (newton.max_iters < 1) throw ConfigError("config: newton max_iters must be at least 1");
    }
};

/// Published simulation setup: 64 antennas in 4 subarrays at 0.45 wavelengths,
/// 64 subcarriers with a 16-sample prefix, 4-block frames, 8 uniform taps,
/// fd = 0.4, oscillator offset uniform on [-0.1, 0.1], mismatch magnitudes
/// uniform on [0.8, 1.1875].
inline ExperimentConfig paper_preset() {
    ExperimentConfig c;
    c.scenario = Scenario{};
    c.scenario.geom = ArrayGeometry(64, 4, 0.45);
    c.scenario.ofdm = OfdmConfig{64, 16, 4};
    c.scenario.pdp = PowerDelayProfile::uniform(8);
    c.scenario.fd = 0.4;
    c.scenario.xi_min = -0.1;
    c.scenario.xi_max = 0.1;
    c.scenario.mismatch_sigma = kDefaultMismatchSigma;
    c.pdp_shape = "uniform";
    c.snr_db = {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
    c.trials = 1000;
    return c;
}

namespace config_detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || first == last)
        throw ConfigError("config: cannot parse '" + text + "' for " + key);
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("config: expected true or false for " + key + ", got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, item));
    return out;
}

inline std::string estimator_name(EstimatorChoice e) {
    switch (e) {
        case EstimatorChoice::NoCobp: return "nocobp";
        case EstimatorChoice::Cobp: return "cobp";
        case EstimatorChoice::Both: return "both";
    }
    return "both";
}

inline EstimatorChoice parse_estimator(const std::string& text) {
    if (text == "nocobp") return EstimatorChoice::NoCobp;
    if (text == "cobp") return EstimatorChoice::Cobp;
    if (text == "both") return EstimatorChoice::Both;
    throw ConfigError("config: estimator must be nocobp, cobp or both, got '" + text + "'");
}

/// Section -> allowed keys.
inline const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"array", {"M", "K", "d_tilde", "mismatch_sigma", "calibrated"}},
        {"ofdm", {"N", "Ncp", "Nb"}},
        {"channel", {"L", "pdp", "pdp_decay", "subpaths", "aoa"}},
        {"mobility", {"fd", "xi_min", "xi_max"}},
        {"run", {"snr_db", "trials", "seed", "estimator", "workers", "output"}},
        {"estimator", {"newton_max_iters", "newton_tol", "newton_max_halvings", "cobp_refine_iters", "cobp_max_update"}},
        {"bounds", {"crb_draws", "analytic_draws", "zeta_k_max"}},
    };
    return s;
}

}  // namespace config_detail

/// Overrides fields of `base` with the entries of an INI document.
/// Unknown sections and keys are errors.
inline ExperimentConfig apply_ini(ExperimentConfig base, std::istream& in) {
    namespace pt = boost::property_tree;
    using namespace config_detail;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        const auto it = schema().find(section);
        if (it == schema().end()) {
            if (body.empty()) throw ConfigError("config: keys must live in a section, found '" + section + "'");
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, value] : body)
            if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }

    const auto get = [&](const char* section, const char* key) -> std::optional<std::string> {
        const auto node = tree.get_child_optional(pt::ptree::path_type(std::string(section) + "/" + key, '/'));
        if (!node) return std::nullopt;
        return node->data();
    };
    auto& sc = base.scenario;
    int M = sc.geom.M, K = sc.geom.K;
    double d = sc.geom.d_tilde;
    if (auto v = get("array", "M")) M = parse_number<int>("array.M", *v);
    if (auto v = get("array", "K")) K = parse_number<int>("array.K", *v);
    if (auto v = get("array", "d_tilde")) d = parse_number<double>("array.d_tilde", *v);
    if (auto v = get("array", "mismatch_sigma")) sc.mismatch_sigma = parse_number<double>("array.mismatch_sigma", *v);
    if (auto v = get("array", "calibrated")) sc.calibrated = parse_bool("array.calibrated", *v);
    if (auto v = get("ofdm", "N")) sc.ofdm.N = parse_number<int>("ofdm.N", *v);
    if (auto v = get("ofdm", "Ncp")) sc.ofdm.Ncp = parse_number<int>("ofdm.Ncp", *v);
    if (auto v = get("ofdm", "Nb")) sc.ofdm.Nb = parse_number<int>("ofdm.Nb", *v);
    int L = sc.pdp.L();
    if (auto v = get("channel", "L")) L = parse_number<int>("channel.L", *v);
    if (auto v = get("channel", "pdp")) base.pdp_shape = *v;
    if (auto v = get("channel", "pdp_decay")) base.pdp_decay = parse_number<double>("channel.pdp_decay", *v);
    if (auto v = get("channel", "subpaths")) sc.subpaths = parse_number<int>("channel.subpaths", *v);
    if (auto v = get("channel", "aoa")) {
        if (*v == "random") sc.aoa = AoaMode::UniformRandom;
        else if (*v == "grid") sc.aoa = AoaMode::UniformGrid;
        else throw ConfigError("config: channel.aoa must be random or grid");
    }
    if (auto v = get("mobility", "fd")) sc.fd = parse_number<double>("mobility.fd", *v);
    if (auto v = get("mobility", "xi_min")) sc.xi_min = parse_number<double>("mobility.xi_min", *v);
    if (auto v = get("mobility", "xi_max")) sc.xi_max = parse_number<double>("mobility.xi_max", *v);
    if (auto v = get("run", "snr_db")) base.snr_db = parse_list("run.snr_db", *v);
    if (auto v = get("run", "trials")) base.trials = parse_number<int>("run.trials", *v);
    if (auto v = get("run", "seed")) base.seed = parse_number<std::uint64_t>("run.seed", *v);
    if (auto v = get("run", "estimator")) base.estimator = parse_estimator(*v);
    if (auto v = get("run", "workers")) base.workers = parse_number<int>("run.workers", *v);
    if (auto v = get("run", "output")) base.output = *v;
    if (auto v = get("estimator", "newton_max_iters")) base.newton.max_iters = parse_number<int>("estimator.newton_max_iters", *v);
    if (auto v = get("estimator", "newton_tol")) base.newton.tol = parse_number<double>("estimator.newton_tol", *v);
    if (auto v = get("estimator", "newton_max_halvings"))
        base.newton.max_halvings = parse_number<int>("estimator.newton_max_halvings", *v);
    if (auto v = get("estimator", "cobp_refine_iters"))
        base.cobp.refine_iters = parse_number<int>("estimator.cobp_refine_iters", *v);
    if (auto v = get("estimator", "cobp_max_update"))
        base.cobp.max_update = parse_number<double>("estimator.cobp_max_update", *v);
    if (auto v = get("bounds", "crb_draws")) base.crb_draws = parse_number<int>("bounds.crb_draws", *v);
    if (auto v = get("bounds", "analytic_draws")) base.analytic_draws = parse_number<int>("bounds.analytic_draws", *v);
    if (auto v = get("bounds", "zeta_k_max")) base.zeta_k_max = parse_number<int>("bounds.zeta_k_max", *v);

    try {
        sc.geom = ArrayGeometry(M, K, d);
        if (base.pdp_shape == "uniform") sc.pdp = PowerDelayProfile::uniform(L);
        else if (base.pdp_shape == "exponential") sc.pdp = PowerDelayProfile::exponential(L, base.pdp_decay);
        else throw ConfigError("config: channel.pdp must be uniform or exponential");
        base.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return base;
}

inline ExperimentConfig apply_ini_text(ExperimentConfig base, const std::string& text) {
    std::istringstream in(text);
    return apply_ini(std::move(base), in);
}

/// Full INI rendering; parsing it back yields an identical configuration.
/// Without `runtime` the keys that cannot change results (workers, output) are left out.
inline std::string to_ini(const ExperimentConfig& c, bool runtime = true) {
    using config_detail::format_double;
    const auto& sc = c.scenario;
    std::ostringstream o;
    o << "[array]\n"
      << "M = " << sc.geom.M << "\n"
      << "K = " << sc.geom.K << "\n"
      << "d_tilde = " << format_double(sc.geom.d_tilde) << "\n"
      << "mismatch_sigma = " << format_double(sc.mismatch_sigma) << "\n"
      << "calibrated = " << (sc.calibrated ? "true" : "false") << "\n\n"
      << "[ofdm]\n"
      << "N = " << sc.ofdm.N << "\nNcp = " << sc.ofdm.Ncp << "\nNb = " << sc.ofdm.Nb << "\n\n"
      << "[channel]\n"
      << "L = " << sc.pdp.L() << "\n"
      << "pdp = " << c.pdp_shape << "\n"
      << "pdp_decay = " << format_double(c.pdp_decay) << "\n"
      << "subpaths = " << sc.subpaths << "\n"
      << "aoa = " << (sc.aoa == AoaMode::UniformGrid ? "grid" : "random") << "\n\n"
      << "[mobility]\n"
      << "fd = " << format_double(sc.fd) << "\n"
      << "xi_min = " << format_double(sc.xi_min) << "\n"
      << "xi_max = " << format_double(sc.xi_max) << "\n\n"
      << "[run]\n"
      << "snr_db = ";
    for (std::size_t i = 0; i < c.snr_db.size(); ++i) o << (i ? ", " : "") << format_double(c.snr_db[i]);
    o << "\n"
      << "trials = " << c.trials << "\n"
      << "seed = " << c.seed << "\n"
      << "estimator = " << config_detail::estimator_name(c.estimator) << "\n";
    if (runtime) o << "workers = " << c.workers << "\n" << "output = " << c.output << "\n";
    o << "\n"
      << "[estimator]\n"
      << "newton_max_iters = " << c.newton.max_iters << "\n"
      << "newton_tol = " << format_double(c.newton.tol) << "\n"
      << "newton_max_halvings = " << c.newton.max_halvings << "\n"
      << "cobp_refine_iters = " << c.cobp.refine_iters << "\n"
      << "cobp_max_update = " << format_double(c.cobp.max_update) << "\n\n"
      << "[bounds]\n"
      << "crb_draws = " << c.crb_draws << "\n"
      << "analytic_draws = " << c.analytic_draws << "\n"
      << "zeta_k_max = " << c.zeta_k_max << "\n";
    return o.str();
}

}  // namespace beamcfo::harness
