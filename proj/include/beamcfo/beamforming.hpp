// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/array_model.hpp"
#include "beamcfo/fft.hpp"
#include "beamcfo/types.hpp"

#include <cmath>
#include <vector>

namespace beamcfo {

/// Per-branch time-domain signals. Column q of `z` (N x Q) is the output of
/// the beamformer pointed at grid.thetas(q).
struct BranchSignals {
    CMat z;
    DirectionGrid grid;

    Eigen::Index branches() const { return z.cols(); }
};

namespace detail {

inline void check_rows(const CMat& Y, const ArrayGeometry& geom) {
    require_dims(Y.cols() == geom.M, "beamform: Y must have M columns");
}

}  // namespace detail

/// Reference beamformer: z(theta_q) = Y conj(a(theta_q)) / M by explicit product.
inline BranchSignals beamform_direct(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom) {
    detail::check_rows(Y, geom);
    CMat W(geom.M, grid.size());
    for (Eigen::Index q = 0; q < grid.size(); ++q) W.col(q) = ideal_steering(geom, grid.thetas(q)).conjugate();
    return {Y * W / static_cast<double>(geom.M), grid};
}

/// Plain 1/M steering beamformer. On an inverse-DFT grid every row of Y is
/// transformed with one M-point FFT; otherwise the explicit product is used.
inline BranchSignals beamform_plain(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom) {
    detail::check_rows(Y, geom);
    if (grid.bins.empty() || static_cast<Eigen::Index>(grid.bins.size()) != grid.size())
        return beamform_direct(Y, grid, geom);
    // exp(-j 2 chi r cos(theta_q)) = (-1)^r exp(-j 2 pi r bin_q / M) on this grid.
    const auto N = Y.rows();
    const double inv_m = 1.0 / geom.M;
    CMat z(N, grid.size());
    CVec row(geom.M);
    for (Eigen::Index n = 0; n < N; ++n) {
        for (int r = 0; r < geom.M; ++r) row(r) = (r % 2 == 0) ? Y(n, r) : -Y(n, r);
        const CVec spec = dft(row);
        for (Eigen::Index q = 0; q < grid.size(); ++q) z(n, q) = spec(grid.bins[static_cast<std::size_t>(q)]) * inv_m;
    }
    return {std::move(z), grid};
}

/// Per-branch N x K matrices G_q = Y conj(V(theta_q)); column k is subarray k's
/// unnormalized beam output. Any COBP branch output is G_q conj(beta).
inline std::vector<CMat> subarray_outputs(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom) {
    detail::check_rows(Y, geom);
    const int J = geom.J();
    std::vector<CMat> out;
    out.reserve(static_cast<std::size_t>(grid.size()));
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
        const CVec a = ideal_steering(geom, grid.thetas(q)).conjugate();
        CMat G(Y.rows(), geom.K);
        for (int k = 0; k < geom.K; ++k) G.col(k) = Y.middleCols(k * J, J) * a.segment(k * J, J);
        out.push_back(std::move(G));
    }
    return out;
}

/// Calibration-oriented beamformer z(theta_q) = Y conj(V(theta_q) beta), beta unit norm.
inline BranchSignals beamform_cobp(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom,
                                   const CVec& beta) {
    detail::check_rows(Y, geom);
    detail::require_dims(beta.size() == geom.K, "beamform_cobp: beta length must equal K");
    if (std::abs(beta.norm() - 1.0) > 1e-8) throw ParameterError("beamform_cobp: beta must have unit norm");
    CMat W(geom.M, grid.size());
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
        const CVec a = ideal_steering(geom, grid.thetas(q));
        for (int r = 0; r < geom.M; ++r) W(r, q) = std::conj(a(r) * beta(geom.owner(r)));
    }
    return {Y * W, grid};
}

}  // namespace beamcfo
