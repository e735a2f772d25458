// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/array_model.hpp"
#include "beamcfo/channel.hpp"
#include "beamcfo/fft.hpp"
#include "beamcfo/rng.hpp"
#include "beamcfo/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace beamcfo {

struct OfdmConfig {
    int N = 64;
    int Ncp = 16;
    int Nb = 4;  // block 0 is the pilot

    void validate(int L) const {
        if (N < 1 || (N & (N - 1)) != 0) throw ParameterError("ofdm: N must be a power of two");
        if (Nb < 1) throw ParameterError("ofdm: need at least one block");
        if (Ncp < L - 1) throw ParameterError("ofdm: cyclic prefix shorter than channel memory");
        if (L > N) throw ParameterError("ofdm: more taps than subcarriers");
    }
};

// ---------------------------------------------------------------------------
// 16-QAM with Gray labelling per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
// A symbol index packs (b0 b1) for the in-phase axis and (b2 b3) for quadrature,
// b0 being the most significant bit.

namespace qam16 {

inline const double kScale = 1.0 / std::sqrt(10.0);

inline constexpr std::array<int, 4> kLevelOfBits = {-3, -1, 3, 1};  // index = 2*b0 + b1

inline int level_to_bits(int level) {
    switch (level) {
        case -3: return 0b00;
        case -1: return 0b01;
        case 1: return 0b11;
        default: return 0b10;
    }
}

inline cd symbol(int index) {
    const int i_bits = (index >> 2) & 3;
    const int q_bits = index & 3;
    return cd(kLevelOfBits[i_bits], kLevelOfBits[q_bits]) * kScale;
}

inline int nearest_level(double v) {
    const double u = v / kScale;
    if (u < -2.0) return -3;
    if (u < 0.0) return -1;
    if (u < 2.0) return 1;
    return 3;
}

/// Minimum-distance decision.
inline int decide(cd y) {
    return (level_to_bits(nearest_level(y.real())) << 2) | level_to_bits(nearest_level(y.imag()));
}

inline double min_distance() { return 2.0 * kScale; }

}  // namespace qam16

/// Bits (0/1 bytes) to unit-energy 16-QAM symbols.
inline CVec qam_map(const std::vector<std::uint8_t>& bits) {
    if (bits.size() % 4 != 0) throw ParameterError("qam_map: bit count must be a multiple of 4");
    CVec out(static_cast<Eigen::Index>(bits.size() / 4));
    for (Eigen::Index s = 0; s < out.size(); ++s) {
        int index = 0;
        for (int b = 0; b < 4; ++b) index = (index << 1) | (bits[static_cast<std::size_t>(4 * s + b)] & 1);
        out(s) = qam16::symbol(index);
    }
    return out;
}

inline std::vector<std::uint8_t> qam_demap(const CVec& symbols) {
    std::vector<std::uint8_t> bits;
    bits.reserve(static_cast<std::size_t>(symbols.size()) * 4);
    for (Eigen::Index s = 0; s < symbols.size(); ++s) {
        const int index = qam16::decide(symbols(s));
        for (int b = 3; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((index >> b) & 1));
    }
    return bits;
}

/// Frequency-domain symbols for one frame; row m is block m.
struct FrameSymbols {
    Eigen::MatrixXi indices;  // Nb x N, 16-QAM symbol indices
    CMat x;                   // Nb x N

    CVec block(int m) const { return x.row(m).transpose(); }
};

inline FrameSymbols random_symbols(const OfdmConfig& cfg, Rng& rng) {
    FrameSymbols fs{Eigen::MatrixXi(cfg.Nb, cfg.N), CMat(cfg.Nb, cfg.N)};
    for (int m = 0; m < cfg.Nb; ++m) {
        for (int k = 0; k < cfg.N; ++k) {
            const int idx = static_cast<int>(rng.below(16));
            fs.indices(m, k) = idx;
            fs.x(m, k) = qam16::symbol(idx);
        }
    }
    return fs;
}

/// Pilot convolution matrix B = sqrt(N) F^H diag(x) F_L, which is circulant:
/// B(n, l) = s((n - l) mod N) with s = F^H x.
inline CMat build_B(const CVec& x, int L) {
    const auto N = x.size();
    if (L < 1 || L > N) throw ParameterError("build_B: need 1 <= L <= N");
    const CVec s = unitary_idft(x);
    CMat B(N, L);
    for (int l = 0; l < L; ++l)
        for (Eigen::Index n = 0; n < N; ++n) B(n, l) = s((n - l + N) % N);
    return B;
}

/// Diagonal of E(phi): exp(j 2 pi phi n / N), n = 0..N-1.
inline CVec phase_rotation(double phi, int N) {
    CVec e(N);
    for (int n = 0; n < N; ++n) e(n) = std::polar(1.0, kTwoPi * phi * n / N);
    return e;
}

/// Phase accumulated by the start of block m (zero-based) including cyclic prefixes.
inline cd block_phase(double phi, int m, const OfdmConfig& cfg) {
    if (m < 0) throw ParameterError("block_phase: negative block index");
    return std::polar(1.0, kTwoPi * phi * m * (cfg.N + cfg.Ncp) / cfg.N);
}

/// Received N x M matrix of block m (CP removed), noiseless.
inline CMat synthesize_block_clean(const ArrayGeometry& geom, const CVec& alpha, const ChannelRealization& chan,
                                   double fd, double xi, const CVec& x_m, int m, const OfdmConfig& cfg) {
    detail::require_dims(alpha.size() == geom.K, "synthesize: mismatch length must equal K");
    detail::require_dims(x_m.size() == cfg.N, "synthesize: symbol block length must equal N");
    const int L = chan.L();
    const int P = chan.P();
    const CMat B = build_B(x_m, L);
    // Y = sum over subpaths of (time-domain column) * (steering row), done as one product.
    CMat time_part(cfg.N, L * P);
    CMat space_part(geom.M, L * P);
    for (int l = 0; l < L; ++l) {
        for (int p = 0; p < P; ++p) {
            const int c = l * P + p;
            const double theta = chan.aoas(l, p);
            const double phi = subpath_cfo(fd, xi, theta);
            const cd scale = chan.gains(l, p) * block_phase(phi, m, cfg);
            time_part.col(c) = scale * phase_rotation(phi, cfg.N).cwiseProduct(B.col(l));
            space_part.col(c) = actual_steering(geom, theta, alpha);
        }
    }
    return time_part * space_part.transpose();
}

inline void add_noise(CMat& Y, double noise_power, Rng& rng) {
    if (noise_power < 0.0) throw ParameterError("noise power must be nonnegative");
    if (noise_power == 0.0) return;
    for (Eigen::Index c = 0; c < Y.cols(); ++c)
        for (Eigen::Index r = 0; r < Y.rows(); ++r) Y(r, c) += rng.complex_normal(noise_power);
}

/// Received matrices for the first `blocks` blocks of a frame (all blocks when negative).
inline std::vector<CMat> synthesize_frame(const ArrayGeometry& geom, const CVec& alpha, const ChannelRealization& chan,
                                          double fd, double xi, const FrameSymbols& symbols, double noise_power,
                                          const OfdmConfig& cfg, Rng& rng, int blocks = -1) {
    detail::require_dims(symbols.x.rows() == cfg.Nb && symbols.x.cols() == cfg.N,
                         "synthesize: symbol matrix must be Nb x N");
    const int count = blocks < 0 ? cfg.Nb : std::min(blocks, cfg.Nb);
    std::vector<CMat> frames;
    frames.reserve(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        CMat Y = synthesize_block_clean(geom, alpha, chan, fd, xi, symbols.block(m), m, cfg);
        add_noise(Y, noise_power, rng);
        frames.push_back(std::move(Y));
    }
    return frames;
}

inline double snr_db_to_noise_power(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace beamcfo
