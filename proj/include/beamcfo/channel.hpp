// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/rng.hpp"
#include "beamcfo/types.hpp"

#include <cmath>

namespace beamcfo {

/// Per-tap average powers, summing to one.
struct PowerDelayProfile {
    RVec sigma2;

    int L() const { return static_cast<int>(sigma2.size()); }

    static PowerDelayProfile uniform(int L) {
        if (L < 1) throw ParameterError("pdp: L must be positive");
        return {RVec::Constant(L, 1.0 / L)};
    }

    /// sigma_l^2 proportional to exp(-l / decay), l = 0..L-1.
    static PowerDelayProfile exponential(int L, double decay) {
        if (L < 1 || !(decay > 0.0)) throw ParameterError("pdp: need L >= 1 and positive decay");
        RVec p(L);
        for (int l = 0; l < L; ++l) p(l) = std::exp(-l / decay);
        return {p / p.sum()};
    }

    void validate() const {
        if (sigma2.size() < 1) throw ParameterError("pdp: empty profile");
        if ((sigma2.array() < 0.0).any()) throw ParameterError("pdp: negative tap power");
        if (std::abs(sigma2.sum() - 1.0) > 1e-12) throw ParameterError("pdp: tap powers must sum to one");
    }
};

enum class AoaMode { UniformRandom, UniformGrid };

/// L x P subpath gains and angles of arrival for one frame.
struct ChannelRealization {
    CMat gains;
    RMat aoas;

    int L() const { return static_cast<int>(gains.rows()); }
    int P() const { return static_cast<int>(gains.cols()); }
};

inline ChannelRealization sample_channel(const PowerDelayProfile& pdp, int P, AoaMode mode, Rng& rng) {
    if (P < 1) throw ParameterError("sample_channel: P must be positive");
    pdp.validate();
    const int L = pdp.L();
    ChannelRealization ch{CMat(L, P), RMat(L, P)};
    for (int l = 0; l < L; ++l) {
        for (int p = 0; p < P; ++p) {
            ch.gains(l, p) = rng.complex_normal(pdp.sigma2(l) / P);
            ch.aoas(l, p) = mode == AoaMode::UniformGrid ? kTwoPi * (p + 1) / P : rng.uniform(0.0, kTwoPi);
        }
    }
    return ch;
}

/// Normalized CFO seen on a subpath arriving from theta.
inline double subpath_cfo(double fd, double xi, double theta) { return fd * std::cos(theta) + xi; }

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Maximum Doppler normalized by the subcarrier spacing 1 / block_duration.
inline double normalized_doppler(double speed_kmh, double carrier_hz, double block_duration_s) {
    return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight * block_duration_s;
}

}  // namespace beamcfo
