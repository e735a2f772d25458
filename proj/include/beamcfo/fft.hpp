// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/types.hpp"

#include <unsupported/Eigen/FFT>

namespace beamcfo {

namespace detail {

// Eigen::FFT caches twiddle plans per instance and is not safe to share
// between threads, so each thread keeps its own.
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;
    return engine;
}

}  // namespace detail

/// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
inline CVec dft(const CVec& x) {
    CVec out(x.size());
    detail::fft_engine().fwd(out, x);
    return out;
}

/// Inverse DFT with 1/N scaling, so idft(dft(x)) == x.
inline CVec idft(const CVec& x) {
    CVec out(x.size());
    detail::fft_engine().inv(out, x);
    return out;
}

/// Unitary DFT, F x.
inline CVec unitary_dft(const CVec& x) {
    return dft(x) / std::sqrt(static_cast<double>(x.size()));
}

/// Unitary inverse DFT, F^H x.
inline CVec unitary_idft(const CVec& x) {
    return idft(x) * std::sqrt(static_cast<double>(x.size()));
}

/// Dense unitary DFT matrix with entry (k, n) = exp(-j 2 pi k n / N) / sqrt(N).
inline CMat unitary_dft_matrix(Eigen::Index n) {
    CMat f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            f(k, i) = std::polar(scale, -kTwoPi * static_cast<double>((k * i) % n) / static_cast<double>(n));
    return f;
}

}  // namespace beamcfo
