// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Composite Gauss-Legendre quadrature on rectangles with panel doubling.

#pragma once

#include "beamcfo/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace beamcfo::analysis {

struct GaussRule {
    std::vector<double> nodes;  // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule via Newton iteration on the three-term recurrence.
inline GaussRule gauss_legendre(int n) {
    detail::require(n >= 1, "gauss_legendre: need at least one node");
    GaussRule rule{std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
        rule.nodes[lo] = -x;
        rule.nodes[hi] = x;
        rule.weights[lo] = rule.weights[hi] = w;
    }
    return rule;
}

struct QuadratureOptions {
    int nodes = 201;          // Gauss points per panel and axis
    double rel_tol = 5e-3;    // successive-estimate agreement
    int max_level = 5;        // panels per axis double up to 2^max_level
};

struct QuadratureResult {
    RVec values;
    int level = 0;
    double rel_change = 0.0;  // worst component at the final level
};

namespace quad_detail {

/// Nodes and weights of the composite rule with `panels` equal panels on [lo, hi].
inline void composite_rule(const GaussRule& rule, int panels, double lo, double hi, std::vector<double>& x,
                           std::vector<double>& w) {
    const double width = (hi - lo) / panels;
    x.clear();
    w.clear();
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * width;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            x.push_back(mid + 0.5 * width * rule.nodes[i]);
            w.push_back(0.5 * width * rule.weights[i]);
        }
    }
}

}  // namespace quad_detail

/// Integrates a vector-valued f over [lo, hi]^2, doubling the panel count per
/// axis until every component changes by at most rel_tol * max(|value|, scale).
/// f(x, y, out) must overwrite out[0..dim).
/// Throws AccuracyError carrying the first component if max_level is exhausted.
template <class F>
QuadratureResult integrate_square(F&& f, int dim, double lo, double hi, const RVec& scales,
                                  const QuadratureOptions& opts = {}) {
    detail::require(dim >= 1 && scales.size() == dim, "integrate_square: scales must have dim entries");
    detail::require(opts.nodes >= 2 && opts.max_level >= 1 && opts.rel_tol > 0.0,
                             "integrate_square: invalid options");
    const GaussRule rule = gauss_legendre(opts.nodes);
    std::vector<double> x, w;
    RVec previous, out(dim), sum(dim);
    QuadratureResult result;
    for (int level = 0; level <= opts.max_level; ++level) {
        quad_detail::composite_rule(rule, 1 << level, lo, hi, x, w);
        sum.setZero();
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < x.size(); ++j) {
                f(x[i], x[j], out.data());
                sum += (w[i] * w[j]) * out;
            }
        }
        if (level > 0) {
            double worst = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double denom = std::max(std::abs(sum(c)), scales(c));
                const double change = denom > 0.0 ? std::abs(sum(c) - previous(c)) / denom : 0.0;
                worst = std::max(worst, change);
            }
            result = {sum, level, worst};
            if (worst <= opts.rel_tol) return result;
        }
        previous = sum;
    }
    throw AccuracyError("integrate_square: no convergence after " + std::to_string(opts.max_level) + " refinements",
                        result.values(0), result.rel_change);
}

}  // namespace beamcfo::analysis
