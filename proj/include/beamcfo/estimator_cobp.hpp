// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/array_model.hpp"
#include "beamcfo/beamforming.hpp"
#include "beamcfo/estimator_nocobp.hpp"
#include "beamcfo/ofdm.hpp"
#include "beamcfo/types.hpp"

#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

namespace beamcfo {

struct MinEigen {
    double lambda = 0.0;
    CVec v;
    bool near_tie = false;  // second eigenvalue within 1e-9 relative
};

/// Phase convention: the first component with non-negligible magnitude is real positive.
inline void canonicalize_phase(CVec& v) {
    const double ref = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-12 * ref) {
            v *= std::conj(v(i)) / std::abs(v(i));
            v(i) = std::abs(v(i));
            return;
        }
    }
}

inline MinEigen min_eig(const CMat& C) {
    detail::require_dims(C.rows() == C.cols() && C.rows() > 0, "min_eig: matrix must be square");
    const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
    if ((C - C.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NumericError("min_eig: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMat> es(C);
    if (es.info() != Eigen::Success) throw NumericError("min_eig: eigensolver failed");
    MinEigen out;
    out.lambda = es.eigenvalues()(0);
    out.v = es.eigenvectors().col(0);
    out.v.normalize();
    canonicalize_phase(out.v);
    if (C.rows() > 1) {
        const double gap = es.eigenvalues()(1) - es.eigenvalues()(0);
        out.near_tie = gap <= 1e-9 * std::max(std::abs(es.eigenvalues()(1)), std::abs(es.eigenvalues()(0)));
    }
    return out;
}

/// Pilot-block data for the partly calibrated estimator: per branch the N x K
/// subarray outputs G_q, reused for every trial offset.
struct SubarrayBranches {
    std::vector<CMat> G;
    DirectionGrid grid;
};

inline SubarrayBranches make_subarray_branches(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom) {
    return {subarray_outputs(Y, grid, geom), grid};
}

/// K x K matrix whose quadratic form beta^H C beta is the projected residual
/// energy sum_q ||P_perp E^H(phi_q) Y conj(V(theta_q) beta)||^2.
inline CMat cost_matrix(const SubarrayBranches& sb, const ProjectionCache& cache, double fd, double xi) {
    const auto N = cache.N();
    const RVec phi = branch_phis(fd, xi, sb.grid);
    const auto K = sb.G.empty() ? 0 : sb.G.front().cols();
    CMat C = CMat::Zero(K, K);
    for (std::size_t q = 0; q < sb.G.size(); ++q) {
        const CMat w = phase_rotation(phi(static_cast<Eigen::Index>(q)), N).conjugate().asDiagonal() * sb.G[q];
        const CMat r = cache.project(w);
        C += (r.adjoint() * r).conjugate();
    }
    return 0.5 * (C + C.adjoint());
}

inline CMat build_cost_matrix(const CMat& Y, const DirectionGrid& grid, const ArrayGeometry& geom,
                              const ProjectionCache& cache, double fd, double xi) {
    return cost_matrix(make_subarray_branches(Y, grid, geom), cache, fd, xi);
}

/// Matrix-valued expansion terms summed over branches with the weights needed
/// for the 2x2 update (cos, 1 for first order; cos^2, 2 cos, 1 for second order).
struct MatrixTaylorTerms {
    CMat upsilon;  // zeroth order, equals the cost matrix at the expansion point
    CMat first_c, first_1;
    CMat second_cc, second_2c, second_1;
};

inline MatrixTaylorTerms matrix_taylor_terms(const SubarrayBranches& sb, const ProjectionCache& cache, double fd,
                                             double xi) {
    const auto N = cache.N();
    const RVec phi = branch_phis(fd, xi, sb.grid);
    const RVec c = sb.grid.cosines();
    const auto K = sb.G.front().cols();
    MatrixTaylorTerms t{CMat::Zero(K, K), CMat::Zero(K, K), CMat::Zero(K, K),
                        CMat::Zero(K, K), CMat::Zero(K, K), CMat::Zero(K, K)};
    for (std::size_t q = 0; q < sb.G.size(); ++q) {
        const auto qi = static_cast<Eigen::Index>(q);
        const CMat w = phase_rotation(phi(qi), N).conjugate().asDiagonal() * sb.G[q];
        const CMat r = cache.project(w);
        const CMat Dr = cache.apply_D(r);
        const CMat X = w.adjoint() * Dr;
        const CMat Y2 = w.adjoint() * cache.apply_D(Dr);
        const CMat pu = cache.project(cache.apply_D(w));
        const CMat T0 = (r.adjoint() * r).conjugate();
        const CMat T1 = (X + X.adjoint()).conjugate();
        const CMat T2 = (pu.adjoint() * pu + 0.5 * (Y2 + Y2.adjoint())).conjugate();
        t.upsilon += T0;
        t.first_c += c(qi) * T1;
        t.first_1 += T1;
        t.second_cc += c(qi) * c(qi) * T2;
        t.second_2c += 2.0 * c(qi) * T2;
        t.second_1 += T2;
    }
    return t;
}

inline TaylorCoefficients project_taylor_terms(const MatrixTaylorTerms& t, const CVec& v) {
    auto form = [&](const CMat& A) { return v.dot(A * v).real(); };
    return {form(t.first_c), form(t.first_1), form(t.second_cc), form(t.second_2c), form(t.second_1)};
}

struct CobpOptions {
    int refine_iters = 1;            // Taylor adjustments after the coarse estimate
    double max_update = 0.5;         // larger updates are rejected
    bool fallback_on_failure = true; // otherwise a singular system throws
};

struct CobpEstimate {
    double fd_hat = 0.0;
    double xi_hat = 0.0;
    CVec beta_hat;
    CfoEstimate coarse;
    RVec per_branch_phi;
    double lambda_coarse = 0.0;
    double lambda_final = 0.0;
    bool fell_back = false;
    bool beta_near_tie = false;
};

/// One (or more) Taylor adjustments of the coarse offsets on the minimum
/// eigenvalue of the cost matrix, then the beamforming parameter at the result.
inline CobpEstimate taylor_refine(const SubarrayBranches& sb, const ProjectionCache& cache, const CfoEstimate& coarse,
                                  const CobpOptions& opts = {}) {
    if (!std::isfinite(coarse.fd_hat) || !std::isfinite(coarse.xi_hat))
        throw NumericError("taylor_refine: coarse estimate is not finite");
    CobpEstimate est;
    est.coarse = coarse;
    double fd = coarse.fd_hat;
    double xi = coarse.xi_hat;
    double lambda = min_eig(cost_matrix(sb, cache, fd, xi)).lambda;
    est.lambda_coarse = lambda;
    for (int it = 0; it < opts.refine_iters; ++it) {
        const MatrixTaylorTerms terms = matrix_taylor_terms(sb, cache, fd, xi);
        const CVec v = min_eig(terms.upsilon).v;
        double dfd = 0.0, dxi = 0.0;
        try {
            std::tie(dfd, dxi) = solve_taylor_step(project_taylor_terms(terms, v));
        } catch (const DegenerateGeometryError&) {
            if (!opts.fallback_on_failure) throw;
            est.fell_back = true;
            break;
        }
        if (!(std::abs(dfd) <= opts.max_update && std::abs(dxi) <= opts.max_update)) {
            est.fell_back = true;
            break;
        }
        const double next = min_eig(cost_matrix(sb, cache, fd + dfd, xi + dxi)).lambda;
        if (!(next <= lambda)) {
            est.fell_back = true;
            break;
        }
        fd += dfd;
        xi += dxi;
        lambda = next;
    }
    const MinEigen final_eig = min_eig(cost_matrix(sb, cache, fd, xi));
    est.fd_hat = fd;
    est.xi_hat = xi;
    est.beta_hat = final_eig.v;
    est.beta_near_tie = final_eig.near_tie;
    est.lambda_final = final_eig.lambda;
    est.per_branch_phi = branch_phis(fd, xi, sb.grid);
    return est;
}

/// Equivalent branch channels for the calibrated beamformer, L x Q.
inline CMat cobp_channel(const SubarrayBranches& sb, const ProjectionCache& cache, const RVec& phis,
                         const CVec& beta) {
    const auto N = cache.N();
    CMat h(cache.L(), static_cast<Eigen::Index>(sb.G.size()));
    for (std::size_t q = 0; q < sb.G.size(); ++q) {
        const auto qi = static_cast<Eigen::Index>(q);
        const CVec z = sb.G[q] * beta.conjugate();
        h.col(qi) = cache.B_pinv * phase_rotation(phis(qi), N).conjugate().cwiseProduct(z);
    }
    return h;
}

struct CobpPipelineOutput {
    PipelineOutput result;  // result.estimate carries the refined offsets
    CobpEstimate cobp;
};

/// Partly calibrated receiver: coarse Newton estimate from the plain beamformer,
/// Taylor adjustment on the cost-matrix eigenvalue, beamforming parameter, branch
/// channels, then compensation and MRC with the calibrated beamformer.
/// Passing `known` fixes the offsets and only derives the beamforming parameter.
inline CobpPipelineOutput cobp_pipeline(const std::vector<CMat>& frames, const FrameSymbols& symbols,
                                        const ArrayGeometry& geom, const DirectionGrid& grid, const OfdmConfig& cfg,
                                        int L, const NewtonOptions& newton = {}, const CobpOptions& opts = {},
                                        std::optional<std::pair<double, double>> known = std::nullopt) {
    if (frames.empty()) throw DimensionError("pipeline: no pilot block");
    const ProjectionCache cache = build_projection(build_B(symbols.block(0), L));
    const SubarrayBranches sb = make_subarray_branches(frames[0], grid, geom);
    CobpPipelineOutput out;
    if (known) {
        const MinEigen e = min_eig(cost_matrix(sb, cache, known->first, known->second));
        out.cobp.coarse = known_cfo(known->first, known->second, grid);
        out.cobp.fd_hat = known->first;
        out.cobp.xi_hat = known->second;
        out.cobp.beta_hat = e.v;
        out.cobp.lambda_coarse = out.cobp.lambda_final = e.lambda;
        out.cobp.per_branch_phi = out.cobp.coarse.per_branch_phi;
    } else {
        const CfoEstimate coarse = newton_estimate(beamform_plain(frames[0], grid, geom), cache, newton);
        out.cobp = taylor_refine(sb, cache, coarse, opts);
    }
    out.result.estimate = known_cfo(out.cobp.fd_hat, out.cobp.xi_hat, grid);
    out.result.estimate.iterations_run = out.cobp.coarse.iterations_run;
    out.result.channels = cobp_channel(sb, cache, out.cobp.per_branch_phi, out.cobp.beta_hat);
    const CVec beta = out.cobp.beta_hat;
    detect_data_blocks(out.result, frames, symbols, cfg,
                       [&](const CMat& Y) { return beamform_cobp(Y, grid, geom, beta).z; });
    return out;
}

}  // namespace beamcfo
