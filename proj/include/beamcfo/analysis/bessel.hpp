// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/types.hpp"

#include <cmath>

namespace beamcfo::analysis {

/// Bessel function of the first kind for orders -1, 0 and 1, real argument.
inline double bessel_j(int order, double x) {
    if (order < -1 || order > 1) throw ParameterError("bessel_j: only orders -1, 0 and 1 are supported");
    if (order == 0) return std::cyl_bessel_j(0.0, std::abs(x));
    // J_1 is odd and J_{-1} = -J_1.
    const double mag = std::cyl_bessel_j(1.0, std::abs(x));
    const double j1 = x < 0.0 ? -mag : mag;
    return order == 1 ? j1 : -j1;
}

/// d/dx J_0(x) = -(J_1(x) - J_{-1}(x)) / 2 = -J_1(x).
inline double bessel_j0_derivative(double x) { return -0.5 * (bessel_j(1, x) - bessel_j(-1, x)); }

}  // namespace beamcfo::analysis
