// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors
//
// Large-sample MSE of the joint Newton estimator under subarray mismatch,
// evaluated by 2-D quadrature over (beam direction, path direction).

#pragma once

#include "beamcfo/analysis/quadrature.hpp"
#include "beamcfo/array_model.hpp"

#include <cmath>
#include <vector>

namespace beamcfo::analysis {

/// sin^2(chi J x) / sin^2(chi x), with the limit J^2 wherever sin(chi x) = 0.
inline double fejer_ratio(double x, int J, double chi) {
    const double y = chi * x;
    const double e = y - kPi * std::nearbyint(y / kPi);
    if (std::abs(e) < 1e-9) return static_cast<double>(J) * J;
    const double r = std::sin(J * y) / std::sin(y);
    return r * r;
}

/// K x K kernel with entries F_J(x) exp(j 2 chi J x (q - p)), x = cos(beam) - cos(path).
inline CMat ab_kernel(double theta_tilde, double theta_p, const ArrayGeometry& geom) {
    geom.validate();
    const double x = std::cos(theta_tilde) - std::cos(theta_p);
    const int J = geom.J();
    const double f = fejer_ratio(x, J, geom.chi());
    CMat A(geom.K, geom.K);
    for (int p = 0; p < geom.K; ++p)
        for (int q = 0; q < geom.K; ++q) A(p, q) = f * std::polar(1.0, 2.0 * geom.chi() * J * x * (q - p));
    return A;
}

/// alpha^T A_b conj(alpha) without forming A_b: F_J(x) |sum_k alpha_k e^{-j 2 chi J x k}|^2.
inline double ab_quadratic_form(double x, const CVec& alpha, const ArrayGeometry& geom) {
    const int J = geom.J();
    const double step = -2.0 * geom.chi() * J * x;
    cd acc = 0.0;
    for (Eigen::Index k = 0; k < alpha.size(); ++k) acc += alpha(k) * std::polar(1.0, step * static_cast<double>(k));
    return fejer_ratio(x, J, geom.chi()) * std::norm(acc);
}

struct MseBreakdown {
    double mse0_fd = 0.0;
    double msen_fd = 0.0;
    double mse0_xi = 0.0;
    double msen_xi = 0.0;
    // Expected gradient and Hessian terms the MSEs are assembled from.
    double a11_0 = 0.0, a12_0 = 0.0, a11_n = 0.0, a12_n = 0.0;
    double a21 = 0.0, a22 = 0.0, a23 = 0.0;
    int quadrature_level = 0;

    double mse_fd() const { return mse0_fd + msen_fd; }
    double mse_xi() const { return mse0_xi + msen_xi; }
};

/// Evaluates the interference (subscript 0) and noise (subscript n) parts of
/// the Newton estimator MSE. mse0 terms are lower bounds on the actual floor.
inline MseBreakdown mse_terms(double fd, double sigma_n2, const ArrayGeometry& geom, const CVec& alpha, int N,
                              const QuadratureOptions& opts = {}) {
    geom.validate();
    detail::require_dims(alpha.size() == geom.K, "mse_terms: mismatch length must equal K");
    detail::require(fd >= 0.0, "mse_terms: fd must be nonnegative");
    detail::require(sigma_n2 >= 0.0, "mse_terms: noise power must be nonnegative");
    detail::require(N >= 1, "mse_terms: N must be positive");

    // Components: int c^2 w, int w, int 2c w, int g 2c w, int g w, where
    // w = sin(beam) alpha^T A_b conj(alpha), c = cos(beam) and g is the
    // truncated odd Doppler kernel.
    const auto integrand = [&](double beam, double path, double* out) {
        const double c = std::cos(beam);
        const double x = c - std::cos(path);
        const double w = std::sin(beam) * ab_quadratic_form(x, alpha, geom);
        const double u = kPi * fd * x;
        const double g = (1.0 / 3.0 - u * u / 30.0) * std::sin(u);
        out[0] = c * c * w;
        out[1] = w;
        out[2] = 2.0 * c * w;
        out[3] = g * 2.0 * c * w;
        out[4] = g * w;
    };
    const double scale = 1e-4 * kPi * geom.J() * alpha.squaredNorm() / geom.d_tilde;
    RVec scales(5);
    scales << 0.0, 0.0, scale, scale, scale;
    const auto q = integrate_square(integrand, 5, 0.0, kPi, scales, opts);

    MseBreakdown r;
    const double hess = kTwoPi * N / 3.0;
    const double noise = hess * sigma_n2 / geom.d_tilde;
    r.a21 = hess * q.values(0);
    r.a23 = hess * q.values(1);
    r.a22 = hess * q.values(2);
    r.a11_0 = N * q.values(3);
    r.a12_0 = 2.0 * N * q.values(4);
    r.a11_n = noise * q.values(0);
    r.a12_n = noise * q.values(1);
    r.mse0_fd = r.a11_0 * r.a11_0 / (r.a21 * r.a21);
    r.msen_fd = r.a11_n / (r.a21 * r.a21);
    r.mse0_xi = r.a12_0 * r.a12_0 / (r.a23 * r.a23);
    r.msen_xi = r.a12_n / (r.a23 * r.a23);
    r.quadrature_level = q.level;
    return r;
}

struct AsymptoticMse {
    double fd = 0.0;
    double xi = 0.0;
};

/// Fully calibrated large-M limit: 3 sigma^2 / (pi^2 M N) for fd and half that for xi.
inline AsymptoticMse asymptotic_mse(int M, int N, double sigma_n2) {
    detail::require(M >= 1 && N >= 1, "asymptotic_mse: M and N must be positive");
    const double fd = 3.0 * sigma_n2 / (kPi * kPi * M * N);
    return {fd, fd / 2.0};
}

/// Integrals of sin(beam) F_J(x) e^{j 2 chi J x k} weighted by cos^2(beam) (zeta21),
/// 2 cos(beam) (zeta22) and 1 (zeta23). zeta22 is stored for k = 0..k_max;
/// negative k follows from conjugate symmetry.
struct ZetaValues {
    double zeta21_0 = 0.0;
    double zeta23_0 = 0.0;
    std::vector<cd> zeta22;

    cd zeta22_at(int k) const {
        const cd v = zeta22.at(static_cast<std::size_t>(std::abs(k)));
        return k < 0 ? std::conj(v) : v;
    }
};

struct ZetaTable {
    ZetaValues closed_form;
    ZetaValues quadrature;
    int quadrature_level = 0;
};

inline ZetaValues zeta_closed_form(const ArrayGeometry& geom, int k_max) {
    const double d = geom.d_tilde;
    const double J = geom.J();
    ZetaValues z;
    z.zeta21_0 = kPi * J / (2.0 * d);
    z.zeta23_0 = kPi * J / d;
    z.zeta22.assign(static_cast<std::size_t>(k_max) + 1, cd(0.0, 0.0));
    for (int k = 1; k <= k_max; ++k)
        z.zeta22[static_cast<std::size_t>(k)] = cd(0.0, 1.0 / (d * d * k * (4.0 * k * k - 1.0)));
    return z;
}

inline ZetaTable zeta_table(const ArrayGeometry& geom, int k_max, const QuadratureOptions& opts = {}) {
    geom.validate();
    detail::require(k_max >= 1, "zeta_table: k_max must be at least 1");
    ZetaTable table;
    table.closed_form = zeta_closed_form(geom, k_max);

    const int J = geom.J();
    const double chi = geom.chi();
    const int dim = 2 + 2 * (k_max + 1);
    const auto integrand = [&](double beam, double path, double* out) {
        const double c = std::cos(beam);
        const double x = c - std::cos(path);
        const double f = std::sin(beam) * fejer_ratio(x, J, chi);
        out[0] = c * c * f;
        out[1] = f;
        for (int k = 0; k <= k_max; ++k) {
            const double ph = 2.0 * chi * J * x * k;
            out[2 + 2 * k] = 2.0 * c * f * std::cos(ph);
            out[3 + 2 * k] = 2.0 * c * f * std::sin(ph);
        }
    };
    RVec scales = RVec::Constant(dim, 1e-4 * table.closed_form.zeta23_0);
    scales(0) = scales(1) = 0.0;
    const auto q = integrate_square(integrand, dim, 0.0, kPi, scales, opts);

    table.quadrature.zeta21_0 = q.values(0);
    table.quadrature.zeta23_0 = q.values(1);
    table.quadrature.zeta22.resize(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k)
        table.quadrature.zeta22[static_cast<std::size_t>(k)] = cd(q.values(2 + 2 * k), q.values(3 + 2 * k));
    table.quadrature_level = q.level;
    return table;
}

}  // namespace beamcfo::analysis
