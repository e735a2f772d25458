// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Acceptance checks. `acceptance N` runs criterion N, no argument runs all.
// Each criterion prints one PASS/FAIL line; the exit status is nonzero if any failed.

#include "beamcfo/analysis.hpp"
#include "beamcfo/harness/config.hpp"
#include "beamcfo/harness/runner.hpp"
#include "naive_oracles.hpp"
#include "search_oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#ifndef BEAMCFO_CLI_PATH
#define BEAMCFO_CLI_PATH "beamcfo_cli"
#endif

using namespace beamcfo;
using namespace beamcfo::harness;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double value_of(const MetricTable& t, const std::string& estimator, const std::string& metric, double snr) {
    const MetricRow* r = t.find(estimator, metric, snr);
    if (!r) throw std::runtime_error("missing row " + estimator + "/" + metric);
    return r->value;
}

bool within_rel(double value, double target, double tol) { return std::abs(value - target) <= tol * std::abs(target); }

// Published spectral constants at d = 0.45, M = 64, K = 4.
Verdict spectral_constants() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, double>> golden{
        {"zeta21_0", 55.85}, {"zeta23_0", 111.7}, {"im zeta22_1", 1.65}, {"im zeta22_2", 0.165}, {"im zeta22_3", 0.047}};
    const auto pick = [](const analysis::ZetaValues& z) {
        return std::vector<double>{z.zeta21_0, z.zeta23_0, z.zeta22_at(1).imag(), z.zeta22_at(2).imag(),
                                   z.zeta22_at(3).imag()};
    };
    const auto table = analysis::zeta_table(ArrayGeometry(64, 4, 0.45), 3);
    const auto closed = pick(table.closed_form);
    const auto quad = pick(table.quadrature);
    bool pass = true;
    std::ostringstream d;
    for (std::size_t i = 0; i < golden.size(); ++i) {
        const bool c_ok = within_rel(closed[i], golden[i].second, 0.01);
        const bool q_ok = within_rel(quad[i], golden[i].second, 0.03);
        pass = pass && c_ok && q_ok;
        d << golden[i].first << " closed " << fmt(closed[i]) << (c_ok ? "" : "(off)") << " quad " << fmt(quad[i])
          << (q_ok ? "" : "(off)") << "; ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    pass = pass && secs < 30.0;
    d << "target " << "closed 1%, quadrature 3%";
    return {pass, d.str()};
}

// Fully calibrated large array at 20 dB: Doppler/offset MSE ratio and the asymptote.
Verdict calibrated_asymptote() {
    ExperimentConfig c;
    c.scenario.geom = ArrayGeometry(256, 1, 0.45);
    c.scenario.ofdm = OfdmConfig{64, 16, 1};
    c.scenario.pdp = PowerDelayProfile::uniform(8);
    c.scenario.fd = 0.1;
    c.snr_db = {20.0};
    c.trials = 500;
    c.estimator = EstimatorChoice::NoCobp;
    c.workers = workers();
    const auto t = run_mse_sweep(c);
    const double fd = value_of(t, "nocobp", "mse_fd", 20.0);
    const double xi = value_of(t, "nocobp", "mse_xi", 20.0);
    const auto asym = analysis::asymptotic_mse(256, 64, snr_db_to_noise_power(20.0));
    const double ratio = fd / xi;
    const auto near = [](double v, double ref) { return v <= 3.0 * ref && v >= ref / 3.0; };
    const bool pass = ratio >= 1.6 && ratio <= 2.4 && near(fd, asym.fd) && near(xi, asym.xi) &&
                      t.find("nocobp", "mse_fd", 20.0)->samples >= 500;
    return {pass, "ratio " + fmt(ratio) + " (1.6..2.4), fd/asymptote " + fmt(fd / asym.fd) + ", xi/asymptote " +
                      fmt(xi / asym.xi) + " (within 3x), 500 trials"};
}

// Floor separation at 30 dB on the published setup.
Verdict floor_separation() {
    ExperimentConfig c = paper_preset();
    c.snr_db = {30.0};
    c.trials = 500;
    c.workers = workers();
    const auto k4 = run_mse_sweep(c);
    c.scenario.geom = ArrayGeometry(64, 1, 0.45);
    c.estimator = EstimatorChoice::Cobp;
    const auto k1 = run_mse_sweep(c);
    const double nocobp = value_of(k4, "nocobp", "mse_fd", 30.0);
    const double cobp4 = value_of(k4, "cobp", "mse_fd", 30.0);
    const double cobp1 = value_of(k1, "cobp", "mse_fd", 30.0);
    const double separation = nocobp / cobp4;
    const double spread = std::max(cobp1, cobp4) / std::min(cobp1, cobp4);
    const bool pass = separation >= 10.0 && spread <= 3.0;
    return {pass, "nocobp/cobp " + fmt(separation) + " (>= 10), cobp K=1 vs K=4 " + fmt(spread) +
                      " (<= 3); mse_fd nocobp " + fmt(nocobp) + " cobp " + fmt(cobp4) + " cobp K=1 " + fmt(cobp1)};
}

// Simulated partly calibrated MSE against the averaged bound, plus derivative checks.
Verdict bound_validity() {
    ExperimentConfig c;
    c.scenario.geom = ArrayGeometry(16, 4, 0.45);
    c.scenario.ofdm = OfdmConfig{16, 4, 1};
    c.scenario.pdp = PowerDelayProfile::uniform(4);
    c.scenario.fd = 0.4;
    c.snr_db = {5.0, 15.0, 25.0};
    c.trials = 500;
    c.estimator = EstimatorChoice::Cobp;
    c.crb_draws = 100;
    c.workers = workers();
    const auto mse = run_mse_sweep(c);
    const auto bound = run_crb(c);
    bool pass = true;
    std::ostringstream d;
    for (double snr : c.snr_db) {
        for (const char* p : {"fd", "xi"}) {
            const MetricRow* m = mse.find("cobp", std::string("mse_") + p, snr);
            const double b = value_of(bound, "crb", std::string("crb_") + p, snr);
            const bool ok = m && m->ci_high >= b;
            pass = pass && ok;
            d << fmt(snr) << "dB " << p << " mse " << fmt(m ? m->value : NAN) << " crb " << fmt(b) << (ok ? "" : "(below)")
              << "; ";
        }
    }
    // Derivatives of the covariance at the criterion size.
    Rng rng(2024);
    double worst = 0.0;
    const double h = 1e-5;
    for (bool calibrated : {false, true}) {
        const ArrayGeometry geom(16, 4, 0.45);
        const int K = geom.K;
        const CMat B = build_B(random_symbols(OfdmConfig{16, 4, 1}, rng).block(0), 4);
        const auto pdp = PowerDelayProfile::uniform(4);
        const CVec alpha = calibrated ? CVec(CVec::Ones(K)) : sample_mismatch(K, kDefaultMismatchSigma, rng);
        const double fd = 0.4, xi = rng.uniform(-0.1, 0.1), noise = 0.1;
        const auto names = analysis::crb_parameter_names(K, calibrated);
        for (int k = 0; k < static_cast<int>(names.size()); ++k) {
            const auto eval = [&](double e) {
                double f = fd, x = xi, n = noise;
                CVec a = alpha;
                const std::string& name = names[static_cast<std::size_t>(k)];
                if (name == "fd") f += e;
                else if (name == "xi") x += e;
                else if (name == "noise_power") n += e;
                else if (k < 2 + K) a(k - 2) += e;
                else a(k - 2 - K) += cd(0.0, e);
                return analysis::covariance_blocks(f, x, a, pdp, B, geom, n).total;
            };
            const CMat numeric = (eval(h) - eval(-h)) / (2.0 * h);
            const CMat analytic = analysis::covariance_derivative(k, fd, xi, alpha, pdp, B, geom, calibrated);
            worst = std::max(worst, (numeric - analytic).norm() / analytic.norm());
        }
    }
    pass = pass && worst <= 1e-4;
    d << "worst derivative error " << fmt(worst) << " (<= 1e-4)";
    return {pass, d.str()};
}

// Iterative estimators against exhaustive searches.
Verdict oracle_equivalence() {
    Scenario sc;
    sc.geom = ArrayGeometry(32, 1, 0.45);
    sc.ofdm = OfdmConfig{32, 8, 1};
    sc.pdp = PowerDelayProfile::uniform(4);
    sc.fd = 0.4;
    const double noise = snr_db_to_noise_power(15.0);
    int newton_ok = 0;
    double newton_worst = -INFINITY;
    const auto grid = ifft_directions(sc.geom);
    for (int s = 0; s < 50; ++s) {
        Rng rng(stream_seed(5, static_cast<std::uint64_t>(s)));
        const Trial t = draw_trial(sc, noise, rng);
        const auto cache = build_projection(build_B(t.symbols.block(0), sc.L()));
        const auto br = beamform_plain(t.frames[0], grid, sc.geom);
        const auto est = newton_estimate(br, cache);
        // Full grid at 1e-3 over fd in [0, 0.5] and xi in [-0.15, 0.15].
        const auto g = oracle::grid_minimum(oracle::nocobp_cost_fn(br, cache), 0.25, 0.0, 0.25, 0.15, 1e-3);
        const double excess = cost(est.fd_hat, est.xi_hat, br, cache) - g.value;
        newton_worst = std::max(newton_worst, excess);
        if (excess <= 1e-6) ++newton_ok;
    }
    sc.geom = ArrayGeometry(32, 4, 0.45);
    const auto grid4 = ifft_directions(sc.geom);
    int refine_ok = 0, converged_ok = 0;
    double refine_worst = -INFINITY;
    CobpOptions two_steps;
    two_steps.refine_iters = 2;
    for (int s = 0; s < 20; ++s) {
        Rng rng(stream_seed(6, static_cast<std::uint64_t>(s)));
        const Trial t = draw_trial(sc, noise, rng);
        const auto cache = build_projection(build_B(t.symbols.block(0), sc.L()));
        const auto coarse = newton_estimate(beamform_plain(t.frames[0], grid4, sc.geom), cache);
        const auto sb = make_subarray_branches(t.frames[0], grid4, sc.geom);
        const auto est = taylor_refine(sb, cache, coarse);
        const auto g = oracle::grid_minimum(oracle::lambda_min_fn(sb, cache), est.fd_hat, est.xi_hat, 0.02, 0.02, 1e-3);
        const double excess = est.lambda_final - g.value;
        refine_worst = std::max(refine_worst, excess);
        if (excess <= 1e-6) ++refine_ok;
        // Diagnostic only: a second adjustment, outside the single-step design.
        const auto more = taylor_refine(sb, cache, coarse, two_steps);
        const auto g2 = oracle::grid_minimum(oracle::lambda_min_fn(sb, cache), more.fd_hat, more.xi_hat, 0.02, 0.02, 1e-3);
        if (more.lambda_final - g2.value <= 1e-6) ++converged_ok;
    }
    return {newton_ok == 50 && refine_ok == 20,
            "newton " + std::to_string(newton_ok) + "/50 at or below grid minimum (worst excess " + fmt(newton_worst) +
                "), refinement " + std::to_string(refine_ok) + "/20 (worst excess " + fmt(refine_worst) +
                "; with two adjustments " + std::to_string(converged_ok) + "/20)"};
}

/// SNR at which a decreasing curve first crosses `level`, interpolating log10(SER) linearly.
std::optional<double> crossing(const MetricTable& t, const std::string& estimator, const std::vector<double>& snrs,
                               double level) {
    for (std::size_t i = 1; i < snrs.size(); ++i) {
        const double a = value_of(t, estimator, "ser", snrs[i - 1]);
        const double b = value_of(t, estimator, "ser", snrs[i]);
        if (a > level && b <= level) {
            if (b <= 0.0) return snrs[i];
            const double w = (std::log10(a) - std::log10(level)) / (std::log10(a) - std::log10(b));
            return snrs[i - 1] + w * (snrs[i] - snrs[i - 1]);
        }
    }
    return std::nullopt;
}

// Partly calibrated receiver against the known-offset benchmark on the published setup.
Verdict symbol_error_gap() {
    ExperimentConfig c = paper_preset();
    c.snr_db = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0};
    const int per_frame = (c.scenario.ofdm.Nb - 1) * c.scenario.ofdm.N;
    c.trials = (100000 + per_frame - 1) / per_frame;
    c.estimator = EstimatorChoice::Cobp;
    c.workers = workers();
    const auto t = run_ser_sweep(c);
    const auto cobp = crossing(t, "cobp", c.snr_db, 1e-2);
    const auto ideal = crossing(t, "ideal", c.snr_db, 1e-2);
    const auto deep = crossing(t, "cobp", c.snr_db, 1e-3);
    double fewest = INFINITY;
    for (double snr : c.snr_db) fewest = std::min(fewest, value_of(t, "cobp", "symbols", snr));
    const double gap = cobp && ideal ? *cobp - *ideal : NAN;
    const bool pass = cobp && ideal && deep && gap <= 3.0 && fewest >= 1e5;
    return {pass, "SER 1e-2 at " + (cobp ? fmt(*cobp) : std::string("never")) + " dB vs ideal " +
                      (ideal ? fmt(*ideal) : std::string("never")) + " dB, gap " + fmt(gap) + " (<= 3); SER 1e-3 at " +
                      (deep ? fmt(*deep) + " dB" : std::string("never")) + "; " + fmt(fewest) + " symbols per point"};
}

// Frame synthesis and the pilot matrix against scalar reference loops.
Verdict synthesis_oracles() {
    Rng rng(77);
    double synth_worst = 0.0, conv_worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int K = 1 + static_cast<int>(rng.below(3));
        const int J = 1 + static_cast<int>(rng.below(3));
        const ArrayGeometry geom(K * J, K, rng.uniform(0.3, 0.5));
        const int N = 8 << rng.below(2);
        const int L = 1 + static_cast<int>(rng.below(4));
        const OfdmConfig cfg{N, L + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(3))};
        const auto chan = sample_channel(PowerDelayProfile::exponential(L, 1.5), 1 + static_cast<int>(rng.below(6)),
                                         AoaMode::UniformRandom, rng);
        const CVec alpha = sample_mismatch(K, 0.1, rng);
        const auto sym = random_symbols(cfg, rng);
        const double fd = rng.uniform(0.0, 0.5), xi = rng.uniform(-0.1, 0.1);
        Rng silent(0);
        const auto frames = synthesize_frame(geom, alpha, chan, fd, xi, sym, 0.0, cfg, silent);
        for (int m = 0; m < cfg.Nb; ++m) {
            const CMat ref = oracle::naive_received_block(geom, alpha, chan, fd, xi, sym.block(m), m, cfg);
            synth_worst = std::max(synth_worst, (frames[static_cast<std::size_t>(m)] - ref).cwiseAbs().maxCoeff());
        }
        CVec taps(L);
        for (auto& v : taps) v = rng.complex_normal(1.0);
        const CVec x = sym.block(0);
        conv_worst = std::max(
            conv_worst, (build_B(x, L) * taps - oracle::circular_convolution(oracle::inverse_dft_unitary(x), taps))
                            .cwiseAbs()
                            .maxCoeff());
    }
    return {synth_worst <= 1e-10 && conv_worst <= 1e-10,
            "synthesis max error " + fmt(synth_worst) + ", pilot convolution max error " + fmt(conv_worst) +
                " (<= 1e-10, 20 instances)"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Repeated CLI runs at several worker counts give byte-identical CSV.
Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / ("beamcfo_determinism_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "run.ini";
    std::ofstream(cfg) << "[array]\nM = 16\nK = 2\n[ofdm]\nN = 16\nNcp = 4\nNb = 2\n[channel]\nL = 2\nsubpaths = 20\n"
                          "[run]\nsnr_db = 0, 15, 30\ntrials = 40\nseed = 99\n[bounds]\ncrb_draws = 4\n";
    bool pass = true;
    std::ostringstream d;
    for (const std::string cmd : {"mse", "ser", "crb"}) {
        std::vector<std::string> csv;
        for (const auto& [run, jobs] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 3}, {"d", 4}}) {
            const fs::path out = root / (cmd + run);
            const std::string line = std::string("\"") + BEAMCFO_CLI_PATH + "\" " + cmd + " -c \"" + cfg.string() +
                                     "\" -j " + std::to_string(jobs) + " -o \"" + out.string() + "\" > /dev/null";
            if (std::system(line.c_str()) != 0) {
                pass = false;
                d << cmd << " run failed; ";
                continue;
            }
            csv.push_back(slurp(out / (cmd + ".csv")) + slurp(out / (cmd + ".manifest.json")));
        }
        bool same = csv.size() == 4;
        for (const auto& s : csv) same = same && s == csv.front() && !s.empty();
        pass = pass && same;
        d << cmd << (same ? " identical" : " differs") << " over workers 1,1,3,4; ";
    }
    fs::remove_all(root);
    return {pass, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<std::string, std::function<Verdict()>>> criteria{
        {1, {"spectral constants", spectral_constants}},
        {2, {"calibrated asymptote", calibrated_asymptote}},
        {3, {"floor separation", floor_separation}},
        {4, {"bound validity", bound_validity}},
        {5, {"oracle equivalence", oracle_equivalence}},
        {6, {"symbol error gap", symbol_error_gap}},
        {7, {"synthesis oracles", synthesis_oracles}},
        {8, {"determinism", determinism}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (const auto& [id, _] : criteria) selected.push_back(id);
    bool all = true;
    for (int id : selected) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = it->second.second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << id << " (" << it->second.first << "): " << (v.pass ? "PASS" : "FAIL") << " - "
                  << v.detail << " [" << fmt(secs) << " s]" << std::endl;
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
