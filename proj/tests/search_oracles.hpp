// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Exhaustive grid searches used to confirm the iterative estimators.

#pragma once

#include "beamcfo/estimator_cobp.hpp"
#include "beamcfo/estimator_nocobp.hpp"

#include <functional>
#include <limits>

namespace oracle {

using namespace beamcfo;

struct GridMinimum {
    double fd = 0.0;
    double xi = 0.0;
    double value = std::numeric_limits<double>::infinity();
};

/// Minimum of f over the rectangle centred at (fd0, xi0), half-widths (hf, hx), spacing step.
inline GridMinimum grid_minimum(const std::function<double(double, double)>& f, double fd0, double xi0, double hf,
                                double hx, double step) {
    GridMinimum best;
    const int nf = static_cast<int>(std::lround(hf / step));
    const int nx = static_cast<int>(std::lround(hx / step));
    for (int i = -nf; i <= nf; ++i) {
        for (int j = -nx; j <= nx; ++j) {
            const double fd = fd0 + i * step, xi = xi0 + j * step;
            const double v = f(fd, xi);
            if (v < best.value) best = {fd, xi, v};
        }
    }
    return best;
}

/// Coarse global search over fd in [0, fd_max], xi in [xi_lo, xi_hi], then a
/// fine search around the coarse winner.
inline GridMinimum two_stage_minimum(const std::function<double(double, double)>& f, double fd_max, double xi_lo,
                                     double xi_hi, double coarse_step, double fine_half_width, double fine_step) {
    GridMinimum coarse;
    for (double fd = 0.0; fd <= fd_max + 1e-12; fd += coarse_step)
        for (double xi = xi_lo; xi <= xi_hi + 1e-12; xi += coarse_step) {
            const double v = f(fd, xi);
            if (v < coarse.value) coarse = {fd, xi, v};
        }
    return grid_minimum(f, coarse.fd, coarse.xi, fine_half_width, fine_half_width, fine_step);
}

inline std::function<double(double, double)> nocobp_cost_fn(const BranchSignals& b, const ProjectionCache& c) {
    return [&b, &c](double fd, double xi) { return cost(fd, xi, b, c); };
}

inline std::function<double(double, double)> lambda_min_fn(const SubarrayBranches& sb, const ProjectionCache& c) {
    return [&sb, &c](double fd, double xi) { return min_eig(cost_matrix(sb, c, fd, xi)).lambda; };
}

}  // namespace oracle
