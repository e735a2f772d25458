// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/rng.hpp"
#include "beamcfo/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace beamcfo {

/// Uniform linear array split into K contiguous subarrays of J = M/K antennas.
/// Antenna spacing is given in wavelengths.
struct ArrayGeometry {
    int M = 64;
    int K = 1;
    double d_tilde = 0.45;

    ArrayGeometry() = default;
    ArrayGeometry(int m, int k, double spacing) : M(m), K(k), d_tilde(spacing) { validate(); }

    int J() const { return M / K; }
    double chi() const { return kPi * d_tilde; }

    /// Zero-based subarray index of zero-based antenna r.
    int owner(int r) const { return r / J(); }

    void validate() const {
        if (M < 1 || K < 1) throw ParameterError("array: M and K must be positive");
        if (M % K != 0) throw ParameterError("array: K must divide M");
        if (!(d_tilde > 0.0 && d_tilde <= 0.5)) throw ParameterError("array: spacing must lie in (0, 0.5]");
    }
};

/// Beamforming directions. `bins` holds the zero-based inverse-DFT index of
/// each direction when the grid came from ifft_directions, enabling the FFT
/// beamformer; it is empty for arbitrary grids.
struct DirectionGrid {
    RVec thetas;
    std::vector<int> bins;

    Eigen::Index size() const { return thetas.size(); }
    RVec cosines() const { return thetas.array().cos().matrix(); }
};

/// a(theta): element r is exp(j 2 chi r cos(theta)), r = 0..M-1.
inline CVec ideal_steering(const ArrayGeometry& geom, double theta) {
    CVec a(geom.M);
    const double step = 2.0 * geom.chi() * std::cos(theta);
    for (int r = 0; r < geom.M; ++r) a(r) = std::polar(1.0, step * r);
    return a;
}

/// Steering vector including per-subarray gain/phase mismatch.
inline CVec actual_steering(const ArrayGeometry& geom, double theta, const CVec& alpha) {
    detail::require_dims(alpha.size() == geom.K, "actual_steering: mismatch length must equal K");
    CVec a = ideal_steering(geom, theta);
    for (int r = 0; r < geom.M; ++r) a(r) *= alpha(geom.owner(r));
    return a;
}

/// Block-diagonal M x K matrix V(theta) with V * alpha == actual_steering.
inline CMat block_response(const ArrayGeometry& geom, double theta) {
    const CVec a = ideal_steering(geom, theta);
    CMat v = CMat::Zero(geom.M, geom.K);
    for (int r = 0; r < geom.M; ++r) v(r, geom.owner(r)) = a(r);
    return v;
}

/// Mismatch magnitudes are uniform with mean-square one and standard
/// deviation sigma_alpha; phases are uniform on [0, 2 pi).
inline CVec sample_mismatch(int K, double sigma_alpha, Rng& rng) {
    if (K < 1) throw ParameterError("sample_mismatch: K must be positive");
    if (!(sigma_alpha >= 0.0 && sigma_alpha < 1.0))
        throw ParameterError("sample_mismatch: sigma_alpha must lie in [0, 1)");
    const double centre = std::sqrt(1.0 - sigma_alpha * sigma_alpha);
    const double half = std::sqrt(3.0) * sigma_alpha;
    if (centre - half < 0.0) throw ParameterError("sample_mismatch: magnitude range would go negative");
    CVec alpha(K);
    for (int k = 0; k < K; ++k) {
        const double mag = rng.uniform(centre - half, centre + half);
        const double phase = rng.uniform(0.0, kTwoPi);
        alpha(k) = std::polar(mag, phase);
    }
    return alpha;
}

/// sigma_alpha whose magnitude range has the given half-width.
inline double mismatch_sigma_for_halfwidth(double half_width) { return half_width / std::sqrt(3.0); }

/// Default mismatch spread: magnitudes uniform on roughly [0.8, 1.1875].
inline const double kDefaultMismatchSigma = mismatch_sigma_for_halfwidth((1.1875 - 0.8) / 2.0);

/// Directions whose normalized beamformers are columns of the inverse DFT
/// matrix, restricted to the indices that map to a real angle. Returned in
/// ascending cos(theta). Both endpoints of the admissible range are kept.
inline DirectionGrid ifft_directions(const ArrayGeometry& geom) {
    geom.validate();
    DirectionGrid grid;
    std::vector<double> thetas;
    const double limit = geom.d_tilde * geom.M * (1.0 + 1e-12);
    for (int r = 0; r < geom.M; ++r) {
        const double offset = static_cast<double>(r) - 0.5 * geom.M;
        if (std::abs(offset) > limit) continue;
        const double arg = std::clamp(offset / (geom.M * geom.d_tilde), -1.0, 1.0);
        thetas.push_back(std::acos(arg));
        grid.bins.push_back(r);
    }
    grid.thetas = Eigen::Map<const RVec>(thetas.data(), static_cast<Eigen::Index>(thetas.size()));
    return grid;
}

/// Grid from explicit angles (no FFT shortcut).
inline DirectionGrid custom_directions(const std::vector<double>& thetas) {
    DirectionGrid grid;
    grid.thetas = Eigen::Map<const RVec>(thetas.data(), static_cast<Eigen::Index>(thetas.size()));
    return grid;
}

}  // namespace beamcfo
