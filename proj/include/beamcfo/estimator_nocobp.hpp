// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/array_model.hpp"
#include "beamcfo/beamforming.hpp"
#include "beamcfo/fft.hpp"
#include "beamcfo/ofdm.hpp"
#include "beamcfo/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

namespace beamcfo {

/// Pilot-subspace projector and the in-block phase derivative operator.
/// Immutable after construction and safe to share between threads.
struct ProjectionCache {
    CMat B;       // N x L
    CMat B_pinv;  // L x N
    CMat P_perp;  // N x N, I - B B^+
    RVec ramp;    // D = j * diag(ramp), ramp(n) = 2 pi n / N

    int N() const { return static_cast<int>(B.rows()); }
    int L() const { return static_cast<int>(B.cols()); }

    /// P_perp * v without forming the N x N product.
    template <typename Derived>
    typename Derived::PlainObject project(const Eigen::MatrixBase<Derived>& v) const {
        return v - B * (B_pinv * v);
    }

    /// D * v for a vector or matrix.
    template <typename Derived>
    typename Derived::PlainObject apply_D(const Eigen::MatrixBase<Derived>& v) const {
        return (kJ * ramp.cast<cd>()).asDiagonal() * v;
    }
};

inline ProjectionCache build_projection(const CMat& B) {
    const auto N = B.rows();
    const auto L = B.cols();
    if (L < 1 || L > N) throw DimensionError("build_projection: B must be tall");
    Eigen::JacobiSVD<CMat> svd(B);
    const RVec& sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(L - 1) <= 1e-10 * sv(0))
        throw NumericError("build_projection: B is numerically rank deficient");
    ProjectionCache cache;
    cache.B = B;
    const CMat gram = B.adjoint() * B;
    cache.B_pinv = gram.ldlt().solve(B.adjoint());
    cache.P_perp = CMat::Identity(N, N) - B * cache.B_pinv;
    cache.ramp = RVec::LinSpaced(N, 0.0, static_cast<double>(N - 1)) * (kTwoPi / static_cast<double>(N));
    return cache;
}

struct CfoEstimate {
    double fd_hat = 0.0;
    double xi_hat = 0.0;
    RVec per_branch_phi;
    int iterations_run = 0;
    int damped_steps = 0;       // iterations that fell back to a damped step
    bool step_limited = false;  // no step could lower the cost
};

struct NewtonOptions {
    int max_iters = 10;
    double tol = 1e-6;
    int max_halvings = 5;
    bool damped_fallback = true;  // Levenberg-Marquardt step when the Newton step cannot descend
    double init_fd = 0.0;
    double init_xi = 0.0;
};

/// Second-order expansion coefficients of the summed branch cost around a point:
/// cost(fd + a, xi + b) ~ cost + t11 a + t12 b + t21 a^2 + t22 a b + t23 b^2.
struct TaylorCoefficients {
    double t11 = 0.0, t12 = 0.0, t21 = 0.0, t22 = 0.0, t23 = 0.0;
};

inline RVec branch_phis(double fd, double xi, const DirectionGrid& grid) {
    return (fd * grid.cosines().array() + xi).matrix();
}

/// Exact summed residual energy sum_q ||P_perp E^H(phi_q) z_q||^2.
inline double cost(double fd, double xi, const BranchSignals& branches, const ProjectionCache& cache) {
    const auto N = cache.N();
    detail::require_dims(branches.z.rows() == N, "cost: branch length must equal N");
    const RVec phi = branch_phis(fd, xi, branches.grid);
    double total = 0.0;
    for (Eigen::Index q = 0; q < branches.branches(); ++q) {
        const CVec zh = phase_rotation(phi(q), N).conjugate().cwiseProduct(branches.z.col(q));
        total += cache.project(zh).squaredNorm();
    }
    return total;
}

inline TaylorCoefficients taylor_coefficients(double fd, double xi, const BranchSignals& branches,
                                              const ProjectionCache& cache) {
    const auto N = cache.N();
    detail::require_dims(branches.z.rows() == N, "taylor: branch length must equal N");
    const RVec c = branches.grid.cosines();
    const RVec phi = branch_phis(fd, xi, branches.grid);
    TaylorCoefficients t;
    for (Eigen::Index q = 0; q < branches.branches(); ++q) {
        const CVec zh = phase_rotation(phi(q), N).conjugate().cwiseProduct(branches.z.col(q));
        const CVec r = cache.project(zh);
        const CVec Dr = cache.apply_D(r);
        const double T1 = 2.0 * zh.dot(Dr).real();
        // D^H zh = -D zh, and the sign vanishes under the norm.
        const double T2 = zh.dot(cache.apply_D(Dr)).real() + cache.project(cache.apply_D(zh)).squaredNorm();
        t.t11 += c(q) * T1;
        t.t12 += T1;
        t.t21 += c(q) * c(q) * T2;
        t.t22 += 2.0 * c(q) * T2;
        t.t23 += T2;
    }
    return t;
}

/// Stationary point of the quadratic model: returns (delta_fd, delta_xi).
inline std::pair<double, double> solve_taylor_step(const TaylorCoefficients& t) {
    const double a = 2.0 * t.t21, b = t.t22, d = 2.0 * t.t23;
    const double det = a * d - b * b;
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(d)});
    if (!std::isfinite(det)) throw NumericError("taylor step: non-finite coefficients");
    if (scale == 0.0 || std::abs(det) <= 1e-12 * scale * scale)
        throw DegenerateGeometryError("taylor step: singular system, branch directions cannot separate Doppler from offset");
    const double dfd = -(d * t.t11 - b * t.t12) / det;
    const double dxi = -(-b * t.t11 + a * t.t12) / det;
    return {dfd, dxi};
}

namespace detail {

/// Step -(H + mu I)^{-1} g with mu raised until the cost drops; the shift keeps
/// the system positive definite where the Hessian is not, so the step always
/// has a descent component and shrinks towards a gradient step.
template <typename CostFn>
std::optional<std::pair<double, double>> damped_step(const TaylorCoefficients& t, double current, CostFn&& cost_at,
                                                      double& trial) {
    const Eigen::Matrix2d H{{2.0 * t.t21, t.t22}, {t.t22, 2.0 * t.t23}};
    const Eigen::Vector2d g(t.t11, t.t12);
    const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(H, Eigen::EigenvaluesOnly).eigenvalues();
    const double span = eig.cwiseAbs().maxCoeff();
    if (!(span > 0.0) || !g.allFinite()) return std::nullopt;
    double mu = std::max(1e-3 * span, 1.01 * std::max(0.0, -eig(0)));
    for (int k = 0; k < 40; ++k, mu *= 4.0) {
        const Eigen::Vector2d step = -(H + mu * Eigen::Matrix2d::Identity()).ldlt().solve(g);
        trial = cost_at(step(0), step(1));
        if (trial <= current) return std::pair{step(0), step(1)};
    }
    return std::nullopt;
}

}  // namespace detail

/// Newton iterations on the summed branch cost from (init_fd, init_xi). Steps are
/// halved until the cost drops; if that fails (typically an indefinite Hessian
/// far from the optimum) a damped step is taken instead.
inline CfoEstimate newton_estimate(const BranchSignals& branches, const ProjectionCache& cache,
                                   const NewtonOptions& opts = {}) {
    double fd = opts.init_fd;
    double xi = opts.init_xi;
    double current = cost(fd, xi, branches, cache);
    if (!std::isfinite(current)) throw NumericError("newton: non-finite cost");
    const auto cost_at = [&](double dfd, double dxi) { return cost(fd + dfd, xi + dxi, branches, cache); };
    CfoEstimate est;
    for (int it = 0; it < opts.max_iters; ++it) {
        const auto t = taylor_coefficients(fd, xi, branches, cache);
        // A singular system means the branches cannot separate the offsets at
        // all, which damping would only hide.
        auto [dfd, dxi] = solve_taylor_step(t);
        double trial = cost_at(dfd, dxi);
        for (int halvings = 0; !(trial <= current) && halvings < opts.max_halvings; ++halvings) {
            dfd *= 0.5;
            dxi *= 0.5;
            trial = cost_at(dfd, dxi);
        }
        est.iterations_run = it + 1;
        if (!(trial <= current) && opts.damped_fallback) {
            if (const auto step = detail::damped_step(t, current, cost_at, trial)) {
                std::tie(dfd, dxi) = *step;
                ++est.damped_steps;
            }
        }
        if (!(trial <= current)) {
            if (std::isnan(trial)) throw NumericError("newton: non-finite cost");
            est.step_limited = true;
            break;
        }
        fd += dfd;
        xi += dxi;
        current = trial;
        if (std::abs(dfd) < opts.tol && std::abs(dxi) < opts.tol) break;
    }
    est.fd_hat = fd;
    est.xi_hat = xi;
    est.per_branch_phi = branch_phis(fd, xi, branches.grid);
    return est;
}

/// Estimate record for externally known offsets (ideal benchmark).
inline CfoEstimate known_cfo(double fd, double xi, const DirectionGrid& grid) {
    CfoEstimate est;
    est.fd_hat = fd;
    est.xi_hat = xi;
    est.per_branch_phi = branch_phis(fd, xi, grid);
    return est;
}

/// Least-squares equivalent channel per branch; column q is h_hat(theta_q), L x Q.
inline CMat ml_channel(const BranchSignals& branches, const ProjectionCache& cache, const CfoEstimate& est) {
    detail::require_dims(est.per_branch_phi.size() == branches.branches(), "ml_channel: phi count must equal Q");
    const auto N = cache.N();
    CMat h(cache.L(), branches.branches());
    for (Eigen::Index q = 0; q < branches.branches(); ++q) {
        const CVec zh = phase_rotation(est.per_branch_phi(q), N).conjugate().cwiseProduct(branches.z.col(q));
        h.col(q) = cache.B_pinv * zh;
    }
    return h;
}

/// Removes the block-start phase and the in-block rotation of each branch.
inline CMat compensate(const CMat& z, const RVec& phis, int m, const OfdmConfig& cfg) {
    detail::require_dims(phis.size() == z.cols(), "compensate: phi count must equal branch count");
    CMat out(z.rows(), z.cols());
    for (Eigen::Index q = 0; q < z.cols(); ++q) {
        const cd undo = std::conj(block_phase(phis(q), m, cfg));
        out.col(q) = undo * phase_rotation(phis(q), static_cast<int>(z.rows())).conjugate().cwiseProduct(z.col(q));
    }
    return out;
}

struct Detection {
    Eigen::VectorXi indices;  // -1 marks an erasure
    CVec soft;
    int erasures = 0;
};

/// Frequency response of each branch channel, scaled so that diag(H_q) x = F (B h_q).
inline CMat branch_frequency_response(const CMat& h, int N) {
    CMat H(N, h.cols());
    CVec padded = CVec::Zero(N);
    for (Eigen::Index q = 0; q < h.cols(); ++q) {
        padded.setZero();
        padded.head(h.rows()) = h.col(q);
        H.col(q) = dft(padded);
    }
    return H;
}

/// Per-subcarrier maximum-ratio combining over branches followed by 16-QAM slicing.
inline Detection mrc_detect(const CMat& compensated, const CMat& h) {
    detail::require_dims(compensated.cols() == h.cols(), "mrc_detect: branch counts differ");
    const auto N = static_cast<int>(compensated.rows());
    const CMat H = branch_frequency_response(h, N);
    CMat Z(N, compensated.cols());
    for (Eigen::Index q = 0; q < compensated.cols(); ++q) Z.col(q) = unitary_dft(compensated.col(q));
    Detection det{Eigen::VectorXi(N), CVec(N), 0};
    for (int k = 0; k < N; ++k) {
        const cd num = H.row(k).conjugate().cwiseProduct(Z.row(k)).sum();
        const double den = H.row(k).squaredNorm();
        if (!(den > 0.0) || !std::isfinite(den)) {
            det.indices(k) = -1;
            det.soft(k) = cd(std::numeric_limits<double>::quiet_NaN(), 0.0);
            ++det.erasures;
            continue;
        }
        det.soft(k) = num / den;
        det.indices(k) = qam16::decide(det.soft(k));
    }
    return det;
}

inline int count_symbol_errors(const Eigen::VectorXi& detected, const Eigen::VectorXi& truth) {
    detail::require_dims(detected.size() == truth.size(), "symbol error count: length mismatch");
    int errors = 0;
    for (Eigen::Index k = 0; k < truth.size(); ++k) errors += (detected(k) != truth(k)) ? 1 : 0;
    return errors;
}

struct PipelineOutput {
    CfoEstimate estimate;
    CMat channels;                    // L x Q
    std::vector<Detection> detected;  // data blocks 1..Nb-1
    int symbol_errors = 0;
    int symbols = 0;
};

/// Detects data blocks given the branch beamformer, estimated offsets and channels.
template <typename Beamformer>
void detect_data_blocks(PipelineOutput& out, const std::vector<CMat>& frames, const FrameSymbols& symbols,
                        const OfdmConfig& cfg, Beamformer&& beamform) {
    for (std::size_t m = 1; m < frames.size(); ++m) {
        const CMat z = beamform(frames[m]);
        const CMat comp = compensate(z, out.estimate.per_branch_phi, static_cast<int>(m), cfg);
        Detection det = mrc_detect(comp, out.channels);
        out.symbol_errors += count_symbol_errors(det.indices, symbols.indices.row(static_cast<Eigen::Index>(m)).transpose());
        out.symbols += cfg.N;
        out.detected.push_back(std::move(det));
    }
}

/// Fully calibrated receiver: plain beamforming, Newton offset estimation on the
/// pilot block, least-squares branch channels, compensation and MRC for the data
/// blocks. Passing `known` replaces the estimate with the given (fd, xi).
inline PipelineOutput nocobp_pipeline(const std::vector<CMat>& frames, const FrameSymbols& symbols,
                                      const ArrayGeometry& geom, const DirectionGrid& grid, const OfdmConfig& cfg,
                                      int L, const NewtonOptions& opts = {},
                                      std::optional<std::pair<double, double>> known = std::nullopt) {
    if (frames.empty()) throw DimensionError("pipeline: no pilot block");
    const ProjectionCache cache = build_projection(build_B(symbols.block(0), L));
    const BranchSignals pilot = beamform_plain(frames[0], grid, geom);
    PipelineOutput out;
    out.estimate = known ? known_cfo(known->first, known->second, grid) : newton_estimate(pilot, cache, opts);
    out.channels = ml_channel(pilot, cache, out.estimate);
    detect_data_blocks(out, frames, symbols, cfg, [&](const CMat& Y) { return beamform_plain(Y, grid, geom).z; });
    return out;
}

}  // namespace beamcfo
