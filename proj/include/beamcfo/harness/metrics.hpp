// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Long-format result rows and their CSV encoding.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace beamcfo::harness {

struct MetricRow {
    std::string experiment;  // mse, ser, crb, analytic, zeta
    std::string estimator;   // nocobp, cobp, ideal, crb, analytic, asymptotic, closed_form, quadrature
    std::optional<double> snr_db;
    int M = 0;
    int K = 0;
    double d_tilde = 0.0;
    double fd = 0.0;
    std::string metric;
    double value = 0.0;
    double ci_low = NAN;
    double ci_high = NAN;
    long samples = 0;
    long failures = 0;
};

/// Sample mean with a normal-approximation 95% confidence interval.
struct MeanCi {
    double mean = NAN;
    double low = NAN;
    double high = NAN;
    long n = 0;
};

inline MeanCi mean_ci(const std::vector<double>& v) {
    MeanCi r;
    r.n = static_cast<long>(v.size());
    if (v.empty()) return r;
    double sum = 0.0;
    for (double x : v) sum += x;
    r.mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    const double half = 1.96 * std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    r.low = r.mean - half;
    r.high = r.mean + half;
    return r;
}

inline const char* csv_header() {
    return "experiment,estimator,snr_db,M,K,d_tilde,fd,metric,value,ci_low,ci_high,samples,failures\n";
}

/// Shortest decimal that round-trips; "nan" and "inf" for non-finite values.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct MetricTable {
    std::vector<MetricRow> rows;

    void add(MetricRow row) { rows.push_back(std::move(row)); }

    /// Deterministic order: by SNR (missing first), then estimator, then metric.
    void sort() {
        std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
            const double sa = a.snr_db.value_or(-INFINITY), sb = b.snr_db.value_or(-INFINITY);
            return std::tie(a.experiment, sa, a.estimator, a.metric) < std::tie(b.experiment, sb, b.estimator, b.metric);
        });
    }

    std::string to_csv() const {
        std::string out = csv_header();
        for (const auto& r : rows) {
            out += r.experiment + ',' + r.estimator + ',' + (r.snr_db ? format_number(*r.snr_db) : std::string()) +
                   ',' + std::to_string(r.M) + ',' + std::to_string(r.K) + ',' + format_number(r.d_tilde) + ',' +
                   format_number(r.fd) + ',' + r.metric + ',' + format_number(r.value) + ',' +
                   format_number(r.ci_low) + ',' + format_number(r.ci_high) + ',' + std::to_string(r.samples) +
                   ',' + std::to_string(r.failures) + '\n';
        }
        return out;
    }

    const MetricRow* find(const std::string& estimator, const std::string& metric,
                          std::optional<double> snr = std::nullopt) const {
        for (const auto& r : rows)
            if (r.estimator == estimator && r.metric == metric && (!snr || (r.snr_db && *r.snr_db == *snr)))
                return &r;
        return nullptr;
    }
};

}  // namespace beamcfo::harness
