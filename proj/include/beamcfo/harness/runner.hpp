// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Monte Carlo sweeps. Every trial draws from its own generator keyed by
// (seed, grid point, trial), and results are reduced in trial order, so the
// output does not depend on the number of workers.

#pragma once

#include "beamcfo/analysis.hpp"
#include "beamcfo/estimator_cobp.hpp"
#include "beamcfo/harness/config.hpp"
#include "beamcfo/harness/metrics.hpp"
#include "beamcfo/harness/scenario.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace beamcfo::harness {

/// Evaluates f(0..count-1) on up to `workers` threads; results are indexed by i.
template <class F>
auto run_indexed(int count, int workers, F&& f) -> std::vector<decltype(f(0))> {
    using T = decltype(f(0));
    std::vector<T> out(static_cast<std::size_t>(std::max(count, 0)));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto body = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                out[static_cast<std::size_t>(i)] = f(i);
            } catch (...) {
                const std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    const int n = std::clamp(workers, 1, std::max(count, 1));
    if (n == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

/// Squared errors of one estimator on one trial; failed estimates carry no error.
struct EstimateOutcome {
    bool ok = false;
    double sq_fd = 0.0;
    double sq_xi = 0.0;
};

/// Data-symbol errors of one receiver on one frame.
struct DetectionOutcome {
    bool ok = false;
    int errors = 0;
    int symbols = 0;
};

inline bool partly_calibrated(const Scenario& sc) { return sc.geom.K > 1 && !sc.calibrated; }

inline bool runs_nocobp(const ExperimentConfig& c) { return c.estimator != EstimatorChoice::Cobp; }
inline bool runs_cobp(const ExperimentConfig& c) { return c.estimator != EstimatorChoice::NoCobp; }

namespace runner_detail {

inline MetricRow base_row(const ExperimentConfig& c, const std::string& experiment, const std::string& estimator,
                          std::optional<double> snr) {
    MetricRow r;
    r.experiment = experiment;
    r.estimator = estimator;
    r.snr_db = snr;
    r.M = c.scenario.geom.M;
    r.K = c.scenario.geom.K;
    r.d_tilde = c.scenario.geom.d_tilde;
    r.fd = c.scenario.fd;
    return r;
}

inline void add_mse_rows(MetricTable& table, const ExperimentConfig& c, const std::string& estimator, double snr,
                         const std::vector<EstimateOutcome>& outcomes) {
    std::vector<double> fd, xi;
    long failures = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++failures;
            continue;
        }
        fd.push_back(o.sq_fd);
        xi.push_back(o.sq_xi);
    }
    for (const auto& [metric, values] : {std::pair{"mse_fd", &fd}, std::pair{"mse_xi", &xi}}) {
        const MeanCi s = mean_ci(*values);
        MetricRow r = base_row(c, "mse", estimator, snr);
        r.metric = metric;
        r.value = s.mean;
        r.ci_low = std::isnan(s.low) ? s.low : std::max(0.0, s.low);
        r.ci_high = s.high;
        r.samples = s.n;
        r.failures = failures;
        table.add(r);
    }
}

inline void add_ser_rows(MetricTable& table, const ExperimentConfig& c, const std::string& estimator, double snr,
                         const std::vector<DetectionOutcome>& outcomes) {
    std::vector<double> rates;
    long errors = 0, symbols = 0, failures = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) ++failures;
        errors += o.errors;
        symbols += o.symbols;
        rates.push_back(o.symbols > 0 ? static_cast<double>(o.errors) / o.symbols : 0.0);
    }
    const MeanCi s = mean_ci(rates);
    MetricRow r = base_row(c, "ser", estimator, snr);
    r.metric = "ser";
    r.value = symbols > 0 ? static_cast<double>(errors) / static_cast<double>(symbols) : NAN;
    r.ci_low = std::isnan(s.low) ? s.low : std::clamp(s.low, 0.0, 1.0);
    r.ci_high = std::isnan(s.high) ? s.high : std::clamp(s.high, 0.0, 1.0);
    r.samples = static_cast<long>(outcomes.size()) - failures;
    r.failures = failures;
    table.add(r);
    MetricRow count = base_row(c, "ser", estimator, snr);
    count.metric = "symbols";
    count.value = static_cast<double>(symbols);
    count.samples = r.samples;
    count.failures = failures;
    table.add(count);
}

}  // namespace runner_detail

/// Per-trial estimation outcomes for one SNR point.
struct MseTrial {
    EstimateOutcome nocobp;
    EstimateOutcome cobp;
};

inline MseTrial mse_trial(const ExperimentConfig& c, const DirectionGrid& grid, double noise, int point, int trial) {
    const Scenario& sc = c.scenario;
    Rng rng(stream_seed(c.seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial)));
    const Trial t = draw_trial(sc, noise, rng, 1);
    MseTrial out;
    const auto record = [&](EstimateOutcome& o, double fd_hat, double xi_hat) {
        o.ok = std::isfinite(fd_hat) && std::isfinite(xi_hat);
        o.sq_fd = (fd_hat - sc.fd) * (fd_hat - sc.fd);
        o.sq_xi = (xi_hat - t.xi) * (xi_hat - t.xi);
    };
    CfoEstimate coarse;
    try {
        const ProjectionCache cache = build_projection(build_B(t.symbols.block(0), sc.L()));
        coarse = newton_estimate(beamform_plain(t.frames[0], grid, sc.geom), cache, c.newton);
        if (runs_nocobp(c)) record(out.nocobp, coarse.fd_hat, coarse.xi_hat);
        if (runs_cobp(c)) {
            const SubarrayBranches sb = make_subarray_branches(t.frames[0], grid, sc.geom);
            const CobpEstimate e = taylor_refine(sb, cache, coarse, c.cobp);
            record(out.cobp, e.fd_hat, e.xi_hat);
        }
    } catch (const Error&) {
        // Counted as failures through ok == false.
    }
    return out;
}

inline MetricTable run_mse_sweep(const ExperimentConfig& c) {
    c.validate();
    const DirectionGrid grid = ifft_directions(c.scenario.geom);
    MetricTable table;
    for (std::size_t g = 0; g < c.snr_db.size(); ++g) {
        const double snr = c.snr_db[g];
        const double noise = snr_db_to_noise_power(snr);
        const auto trials =
            run_indexed(c.trials, c.workers, [&](int t) { return mse_trial(c, grid, noise, static_cast<int>(g), t); });
        std::vector<EstimateOutcome> a, b;
        for (const auto& t : trials) {
            a.push_back(t.nocobp);
            b.push_back(t.cobp);
        }
        if (runs_nocobp(c)) runner_detail::add_mse_rows(table, c, "nocobp", snr, a);
        if (runs_cobp(c)) runner_detail::add_mse_rows(table, c, "cobp", snr, b);
    }
    table.sort();
    return table;
}

struct SerTrial {
    DetectionOutcome nocobp;
    DetectionOutcome cobp;
    DetectionOutcome ideal;
};

/// A failed receiver counts every data symbol of the frame as an error.
inline SerTrial ser_trial(const ExperimentConfig& c, const DirectionGrid& grid, double noise, int point, int trial) {
    const Scenario& sc = c.scenario;
    Rng rng(stream_seed(c.seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial)));
    const Trial t = draw_trial(sc, noise, rng);
    const int data_symbols = (sc.ofdm.Nb - 1) * sc.ofdm.N;
    const auto guarded = [&](auto&& run) {
        DetectionOutcome o;
        try {
            const PipelineOutput p = run();
            o = {true, p.symbol_errors, p.symbols};
        } catch (const Error&) {
            o = {false, data_symbols, data_symbols};
        }
        return o;
    };
    SerTrial out;
    if (runs_nocobp(c))
        out.nocobp = guarded([&] { return nocobp_pipeline(t.frames, t.symbols, sc.geom, grid, sc.ofdm, sc.L(), c.newton); });
    if (runs_cobp(c))
        out.cobp = guarded(
            [&] { return cobp_pipeline(t.frames, t.symbols, sc.geom, grid, sc.ofdm, sc.L(), c.newton, c.cobp).result; });
    const std::pair<double, double> truth{sc.fd, t.xi};
    out.ideal = guarded([&] {
        if (partly_calibrated(sc))
            return cobp_pipeline(t.frames, t.symbols, sc.geom, grid, sc.ofdm, sc.L(), c.newton, c.cobp, truth).result;
        return nocobp_pipeline(t.frames, t.symbols, sc.geom, grid, sc.ofdm, sc.L(), c.newton, truth);
    });
    return out;
}

inline MetricTable run_ser_sweep(const ExperimentConfig& c) {
    c.validate();
    if (c.scenario.ofdm.Nb < 2) throw ConfigError("ser sweep: frames need at least one data block (Nb >= 2)");
    const DirectionGrid grid = ifft_directions(c.scenario.geom);
    MetricTable table;
    for (std::size_t g = 0; g < c.snr_db.size(); ++g) {
        const double snr = c.snr_db[g];
        const double noise = snr_db_to_noise_power(snr);
        const auto trials =
            run_indexed(c.trials, c.workers, [&](int t) { return ser_trial(c, grid, noise, static_cast<int>(g), t); });
        std::vector<DetectionOutcome> a, b, ideal;
        for (const auto& t : trials) {
            a.push_back(t.nocobp);
            b.push_back(t.cobp);
            ideal.push_back(t.ideal);
        }
        if (runs_nocobp(c)) runner_detail::add_ser_rows(table, c, "nocobp", snr, a);
        if (runs_cobp(c)) runner_detail::add_ser_rows(table, c, "cobp", snr, b);
        runner_detail::add_ser_rows(table, c, "ideal", snr, ideal);
    }
    table.sort();
    return table;
}

/// Averaged CRB per SNR point over draws of the oscillator offset, the
/// mismatch and the pilot. Throws SizeError for instances beyond the budget.
inline MetricTable run_crb(const ExperimentConfig& c, const analysis::CrbOptions& base = {}) {
    c.validate();
    const Scenario& sc = c.scenario;
    analysis::CrbOptions opts = base;
    opts.fully_calibrated = !partly_calibrated(sc);
    MetricTable table;
    for (std::size_t g = 0; g < c.snr_db.size(); ++g) {
        const double snr = c.snr_db[g];
        const double noise = snr_db_to_noise_power(snr);
        const auto results = run_indexed(c.crb_draws, c.workers, [&](int d) {
            Rng rng(stream_seed(c.seed ^ 0x43524221ULL, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(d)));
            const double xi = rng.uniform(sc.xi_min, sc.xi_max);
            const CVec alpha = partly_calibrated(sc) ? sample_mismatch(sc.geom.K, sc.mismatch_sigma, rng)
                                                     : CVec(CVec::Ones(sc.geom.K));
            const CMat B = build_B(random_symbols(sc.ofdm, rng).block(0), sc.L());
            return analysis::crb(sc.fd, xi, alpha, sc.pdp, B, sc.geom, noise, opts);
        });
        std::vector<double> fd, xi;
        long degenerate = 0;
        for (const auto& r : results) {
            fd.push_back(r.fd);
            xi.push_back(r.xi);
            if (r.degenerate) ++degenerate;
        }
        for (const auto& [metric, values] : {std::pair{"crb_fd", &fd}, std::pair{"crb_xi", &xi}}) {
            const MeanCi s = mean_ci(*values);
            MetricRow r = runner_detail::base_row(c, "crb", "crb", snr);
            r.metric = metric;
            r.value = s.mean;
            r.ci_low = s.low;
            r.ci_high = s.high;
            r.samples = s.n;
            table.add(r);
        }
        MetricRow deg = runner_detail::base_row(c, "crb", "crb", snr);
        deg.metric = "degenerate_draws";
        deg.value = static_cast<double>(degenerate);
        deg.samples = static_cast<long>(results.size());
        table.add(deg);
    }
    table.sort();
    return table;
}

/// Analytic MSE (averaged over mismatch draws when partly calibrated) and the
/// fully calibrated asymptote per SNR point. The interference term is a lower
/// bound on the actual floor, hence its metric name.
inline MetricTable run_analytic(const ExperimentConfig& c, const analysis::QuadratureOptions& quad = {}) {
    c.validate();
    const Scenario& sc = c.scenario;
    const int draws = partly_calibrated(sc) ? c.analytic_draws : 1;
    // Noise terms are linear in the noise power, so evaluate once at unit power.
    const auto unit = run_indexed(draws, c.workers, [&](int d) {
        Rng rng(stream_seed(c.seed ^ 0x414e41ULL, 0, static_cast<std::uint64_t>(d)));
        const CVec alpha = partly_calibrated(sc) ? sample_mismatch(sc.geom.K, sc.mismatch_sigma, rng)
                                                 : CVec(CVec::Ones(sc.geom.K));
        return analysis::mse_terms(sc.fd, 1.0, sc.geom, alpha, sc.ofdm.N, quad);
    });
    double mse0_fd = 0.0, mse0_xi = 0.0, msen_fd = 0.0, msen_xi = 0.0;
    for (const auto& u : unit) {
        mse0_fd += u.mse0_fd / draws;
        mse0_xi += u.mse0_xi / draws;
        msen_fd += u.msen_fd / draws;
        msen_xi += u.msen_xi / draws;
    }
    MetricTable table;
    for (double snr : c.snr_db) {
        const double noise = snr_db_to_noise_power(snr);
        const auto add = [&](const std::string& estimator, const std::string& metric, double value) {
            MetricRow r = runner_detail::base_row(c, "analytic", estimator, snr);
            r.metric = metric;
            r.value = value;
            r.samples = estimator == "analytic" ? draws : 1;
            table.add(r);
        };
        add("analytic", "mse0_lower_bound_fd", mse0_fd);
        add("analytic", "mse0_lower_bound_xi", mse0_xi);
        add("analytic", "msen_fd", msen_fd * noise);
        add("analytic", "msen_xi", msen_xi * noise);
        add("analytic", "analytic_mse_fd", mse0_fd + msen_fd * noise);
        add("analytic", "analytic_mse_xi", mse0_xi + msen_xi * noise);
        const auto asym = analysis::asymptotic_mse(sc.geom.M, sc.ofdm.N, noise);
        add("asymptotic", "asymptotic_mse_fd", asym.fd);
        add("asymptotic", "asymptotic_mse_xi", asym.xi);
    }
    table.sort();
    return table;
}

/// CRB and analytic curves on the same SNR grid.
inline MetricTable run_bounds(const ExperimentConfig& c) {
    MetricTable t = run_crb(c);
    for (auto& r : run_analytic(c).rows) t.add(std::move(r));
    t.sort();
    return t;
}

inline MetricTable run_zeta(const ExperimentConfig& c, const analysis::QuadratureOptions& quad = {}) {
    c.validate();
    const auto z = analysis::zeta_table(c.scenario.geom, c.zeta_k_max, quad);
    MetricTable table;
    const auto emit = [&](const std::string& estimator, const analysis::ZetaValues& v) {
        const auto add = [&](const std::string& metric, double value) {
            MetricRow r = runner_detail::base_row(c, "zeta", estimator, std::nullopt);
            r.metric = metric;
            r.value = value;
            r.samples = 1;
            table.add(r);
        };
        add("zeta21_0", v.zeta21_0);
        add("zeta23_0", v.zeta23_0);
        for (int k = 0; k <= c.zeta_k_max; ++k) {
            add("zeta22_" + std::to_string(k) + "_re", v.zeta22_at(k).real());
            add("zeta22_" + std::to_string(k) + "_im", v.zeta22_at(k).imag());
        }
    };
    emit("closed_form", z.closed_form);
    emit("quadrature", z.quadrature);
    table.sort();
    return table;
}

}  // namespace beamcfo::harness
