// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Stochastic CRB for (fd, xi) from the covariance of vec(Y), where the
// received N x M block is stacked antenna by antenna and subpath angles are
// averaged out under uniform scattering.

#pragma once

#include "beamcfo/analysis/bessel.hpp"
#include "beamcfo/array_model.hpp"
#include "beamcfo/channel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace beamcfo::analysis {

struct CrbOptions {
    bool fully_calibrated = false;                 // drop the mismatch parameters
    std::size_t memory_budget_bytes = std::size_t{4} << 30;
    double rank_tol = 1e-9;                        // relative, on the scaled Fisher matrix
};

/// Element-wise factors of the covariance: total = r1 .* r2 .* r3 .* r4 + sigma^2 I.
struct CovarianceBlocks {
    RMat r1;  // J0 of the combined angle/Doppler offsets
    CMat r2;  // oscillator offset rotation
    CMat r3;  // subarray mismatch outer product
    CMat r4;  // pilot convolution B Lambda B^H, tiled over antenna pairs
    CMat total;
};

namespace crb_detail {

inline void check_budget(std::size_t n, std::size_t matrices, const CrbOptions& opts, const char* who) {
    const std::size_t need = matrices * n * n * sizeof(cd);
    if (need > opts.memory_budget_bytes)
        throw SizeError(std::string(who) + ": needs about " + std::to_string(need >> 20) + " MiB for MN = " +
                        std::to_string(n) + "; reduce M or N (16 x 16 is the tested size) or raise the memory budget");
}

inline void check_inputs(const CVec& alpha, const PowerDelayProfile& pdp, const CMat& B, const ArrayGeometry& geom,
                         double sigma_n2) {
    geom.validate();
    pdp.validate();
    detail::require_dims(alpha.size() == geom.K, "crb: mismatch length must equal K");
    detail::require_dims(B.cols() == pdp.L(), "crb: B must have one column per tap");
    detail::require(sigma_n2 >= 0.0, "crb: noise power must be nonnegative");
}

/// Shared per-offset tables so each Bessel value is computed once.
struct OffsetTables {
    int M = 0, N = 0;
    RMat j0, j1;  // indexed [dm + M - 1, dp + N - 1]
    CVec rot;     // exp(j 2 pi xi dp / N), indexed dp + N - 1
    CMat pilot;   // B Lambda B^H
    CVec alpha_of_antenna;

    OffsetTables(double fd, double xi, const CVec& alpha, const PowerDelayProfile& pdp, const CMat& B,
                 const ArrayGeometry& geom)
        : M(geom.M), N(static_cast<int>(B.rows())) {
        const double chi = geom.chi();
        j0.resize(2 * M - 1, 2 * N - 1);
        j1.resize(2 * M - 1, 2 * N - 1);
        for (int dm = -(M - 1); dm <= M - 1; ++dm)
            for (int dp = -(N - 1); dp <= N - 1; ++dp) {
                const double u = 2.0 * chi * dm + kTwoPi * fd * dp / N;
                j0(dm + M - 1, dp + N - 1) = bessel_j(0, u);
                j1(dm + M - 1, dp + N - 1) = bessel_j(1, u);
            }
        rot.resize(2 * N - 1);
        for (int dp = -(N - 1); dp <= N - 1; ++dp) rot(dp + N - 1) = std::polar(1.0, kTwoPi * xi * dp / N);
        pilot = B * pdp.sigma2.asDiagonal() * B.adjoint();
        alpha_of_antenna.resize(M);
        for (int r = 0; r < M; ++r) alpha_of_antenna(r) = alpha(geom.owner(r));
    }
};

}  // namespace crb_detail

inline CovarianceBlocks covariance_blocks(double fd, double xi, const CVec& alpha, const PowerDelayProfile& pdp,
                                          const CMat& B, const ArrayGeometry& geom, double sigma_n2,
                                          const CrbOptions& opts = {}) {
    crb_detail::check_inputs(alpha, pdp, B, geom, sigma_n2);
    const int M = geom.M, N = static_cast<int>(B.rows());
    const auto n = static_cast<std::size_t>(M) * static_cast<std::size_t>(N);
    crb_detail::check_budget(n, 5, opts, "covariance_blocks");
    const crb_detail::OffsetTables t(fd, xi, alpha, pdp, B, geom);

    const auto dim = static_cast<Eigen::Index>(n);
    CovarianceBlocks out{RMat(dim, dim), CMat(dim, dim), CMat(dim, dim), CMat(dim, dim), CMat(dim, dim)};
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < M; ++k) {
            const cd mismatch = t.alpha_of_antenna(m) * std::conj(t.alpha_of_antenna(k));
            for (int p = 0; p < N; ++p)
                for (int q = 0; q < N; ++q) {
                    const Eigen::Index i = m * N + p, j = k * N + q;
                    out.r1(i, j) = t.j0(m - k + M - 1, p - q + N - 1);
                    out.r2(i, j) = t.rot(p - q + N - 1);
                    out.r3(i, j) = mismatch;
                    out.r4(i, j) = t.pilot(p, q);
                    out.total(i, j) = out.r1(i, j) * out.r2(i, j) * mismatch * out.r4(i, j);
                }
        }
    out.total.diagonal().array() += sigma_n2;
    return out;
}

/// Parameter order: fd, xi, Re(alpha_k)..., Im(alpha_k)..., sigma^2.
/// The mismatch entries are omitted when fully_calibrated is set.
inline std::vector<std::string> crb_parameter_names(int K, bool fully_calibrated) {
    std::vector<std::string> names{"fd", "xi"};
    if (!fully_calibrated) {
        for (int k = 0; k < K; ++k) names.push_back("re_alpha" + std::to_string(k));
        for (int k = 0; k < K; ++k) names.push_back("im_alpha" + std::to_string(k));
    }
    names.emplace_back("noise_power");
    return names;
}

/// Analytic derivative of the covariance with respect to parameter `index`
/// (see crb_parameter_names).
inline CMat covariance_derivative(int index, double fd, double xi, const CVec& alpha, const PowerDelayProfile& pdp,
                                  const CMat& B, const ArrayGeometry& geom, bool fully_calibrated) {
    crb_detail::check_inputs(alpha, pdp, B, geom, 0.0);
    const int M = geom.M, N = static_cast<int>(B.rows()), K = geom.K;
    const int count = static_cast<int>(crb_parameter_names(K, fully_calibrated).size());
    detail::require(index >= 0 && index < count, "covariance_derivative: parameter index out of range");
    const Eigen::Index dim = static_cast<Eigen::Index>(M) * N;
    if (index == count - 1) return CMat::Identity(dim, dim);

    const crb_detail::OffsetTables t(fd, xi, alpha, pdp, B, geom);
    const bool is_re = !fully_calibrated && index >= 2 && index < 2 + K;
    const bool is_im = !fully_calibrated && index >= 2 + K && index < 2 + 2 * K;
    const int which = is_re ? index - 2 : (is_im ? index - 2 - K : -1);

    CMat d(dim, dim);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < M; ++k) {
            const cd am = t.alpha_of_antenna(m), ak = t.alpha_of_antenna(k);
            cd mismatch = am * std::conj(ak);
            if (which >= 0) {
                const double in_m = geom.owner(m) == which ? 1.0 : 0.0;
                const double in_k = geom.owner(k) == which ? 1.0 : 0.0;
                mismatch = is_re ? in_m * std::conj(ak) + am * in_k : kJ * in_m * std::conj(ak) - kJ * am * in_k;
            }
            for (int p = 0; p < N; ++p)
                for (int q = 0; q < N; ++q) {
                    const int dm = m - k + M - 1, dp = p - q + N - 1;
                    const double offset = kTwoPi * (p - q) / N;
                    double bessel = t.j0(dm, dp);
                    cd rot = t.rot(dp);
                    if (index == 0) bessel = -t.j1(dm, dp) * offset;
                    if (index == 1) rot *= kJ * offset;
                    d(m * N + p, k * N + q) = bessel * rot * mismatch * t.pilot(p, q);
                }
        }
    return d;
}

struct CrbResult {
    double fd = 0.0;
    double xi = 0.0;
    RMat fisher;
    RMat inverse;       // inverse or pseudo-inverse of fisher
    bool degenerate = false;
    int rank = 0;
    std::vector<std::string> parameters;
};

/// Fisher entries Re tr(R^-1 dR_k R^-1 dR_l); inverted through a Jacobi-scaled
/// eigendecomposition. Rank-deficient matrices (the common mismatch phase is
/// never identifiable) are pseudo-inverted and flagged.
inline CrbResult crb(double fd, double xi, const CVec& alpha, const PowerDelayProfile& pdp, const CMat& B,
                     const ArrayGeometry& geom, double sigma_n2, const CrbOptions& opts = {}) {
    crb_detail::check_inputs(alpha, pdp, B, geom, sigma_n2);
    detail::require(sigma_n2 > 0.0, "crb: noise power must be positive");
    CrbResult res;
    res.parameters = crb_parameter_names(geom.K, opts.fully_calibrated);
    const int count = static_cast<int>(res.parameters.size());
    const auto n = static_cast<std::size_t>(geom.M) * static_cast<std::size_t>(B.rows());
    crb_detail::check_budget(n, static_cast<std::size_t>(count) + 8, opts, "crb");

    const CMat R = covariance_blocks(fd, xi, alpha, pdp, B, geom, sigma_n2, opts).total;
    const Eigen::LLT<CMat> llt(R);
    if (llt.info() != Eigen::Success) throw NumericError("crb: covariance is not positive definite");

    std::vector<CMat> whitened;
    whitened.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        whitened.push_back(llt.solve(covariance_derivative(k, fd, xi, alpha, pdp, B, geom, opts.fully_calibrated)));

    res.fisher.resize(count, count);
    for (int k = 0; k < count; ++k)
        for (int l = k; l < count; ++l) {
            const auto& a = whitened[static_cast<std::size_t>(k)];
            const auto& b = whitened[static_cast<std::size_t>(l)];
            res.fisher(k, l) = res.fisher(l, k) = a.cwiseProduct(b.transpose()).sum().real();
        }

    const RVec diag = res.fisher.diagonal();
    if ((diag.array() <= 0.0).any()) throw NumericError("crb: Fisher matrix has a nonpositive diagonal");
    const RVec s = diag.cwiseSqrt().cwiseInverse();
    const RMat scaled = s.asDiagonal() * res.fisher * s.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<RMat> eig(scaled);
    const RVec& ev = eig.eigenvalues();
    const double cut = opts.rank_tol * ev.cwiseAbs().maxCoeff();
    RVec inv_ev = RVec::Zero(count);
    for (int i = 0; i < count; ++i)
        if (ev(i) > cut) {
            inv_ev(i) = 1.0 / ev(i);
            ++res.rank;
        }
    res.degenerate = res.rank < count;
    res.inverse = s.asDiagonal() * (eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose()) *
                  s.asDiagonal();
    res.fd = res.inverse(0, 0);
    res.xi = res.inverse(1, 1);
    return res;
}

/// One realization of the nuisance quantities the bound depends on.
struct CrbDraw {
    double xi = 0.0;
    CVec alpha;
    CMat B;
};

struct AveragedCrb {
    double fd = 0.0;
    double xi = 0.0;
    int draws = 0;
    int degenerate_draws = 0;
};

/// Mean CRB over draws produced by `draw(i)`, i = 0..draws-1.
inline AveragedCrb crb_average(double fd, const PowerDelayProfile& pdp, const ArrayGeometry& geom, double sigma_n2,
                               int draws, const std::function<CrbDraw(int)>& draw, const CrbOptions& opts = {}) {
    detail::require(draws >= 1, "crb_average: need at least one draw");
    AveragedCrb avg;
    for (int i = 0; i < draws; ++i) {
        const CrbDraw d = draw(i);
        const CrbResult r = crb(fd, d.xi, d.alpha, pdp, d.B, geom, sigma_n2, opts);
        avg.fd += r.fd;
        avg.xi += r.xi;
        if (r.degenerate) ++avg.degenerate_draws;
    }
    avg.fd /= draws;
    avg.xi /= draws;
    avg.draws = draws;
    return avg;
}

}  // namespace beamcfo::analysis
