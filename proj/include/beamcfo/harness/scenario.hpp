// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/array_model.hpp"
#include "beamcfo/channel.hpp"
#include "beamcfo/ofdm.hpp"
#include "beamcfo/rng.hpp"

#include <vector>

namespace beamcfo::harness {

/// Physical and link parameters shared by every trial of an experiment.
struct Scenario {
    ArrayGeometry geom{64, 4, 0.45};
    OfdmConfig ofdm{64, 16, 4};
    PowerDelayProfile pdp = PowerDelayProfile::uniform(8);
    int subpaths = 100;
    AoaMode aoa = AoaMode::UniformRandom;
    double fd = 0.4;
    double xi_min = -0.1;
    double xi_max = 0.1;
    double mismatch_sigma = kDefaultMismatchSigma;
    bool calibrated = false;  // force alpha = 1 even when K > 1

    int L() const { return pdp.L(); }

    void validate() const {
        geom.validate();
        pdp.validate();
        ofdm.validate(pdp.L());
        if (subpaths < 1) throw ParameterError("scenario: subpaths must be positive");
        if (!(xi_min <= xi_max)) throw ParameterError("scenario: empty offset range");
        if (!(fd >= 0.0)) throw ParameterError("scenario: fd must be nonnegative");
    }
};

/// Everything drawn for one Monte Carlo trial.
struct Trial {
    double xi = 0.0;
    CVec alpha;
    ChannelRealization channel;
    FrameSymbols symbols;
    std::vector<CMat> frames;
};

/// Draw order is fixed (offset, mismatch, channel, symbols, noise) so a trial
/// is a pure function of the generator state.
inline Trial draw_trial(const Scenario& sc, double noise_power, Rng& rng, int blocks = -1) {
    Trial t;
    t.xi = rng.uniform(sc.xi_min, sc.xi_max);
    t.alpha = (sc.geom.K == 1 || sc.calibrated) ? CVec(CVec::Ones(sc.geom.K))
                                                 : sample_mismatch(sc.geom.K, sc.mismatch_sigma, rng);
    t.channel = sample_channel(sc.pdp, sc.subpaths, sc.aoa, rng);
    t.symbols = random_symbols(sc.ofdm, rng);
    t.frames = synthesize_frame(sc.geom, t.alpha, t.channel, sc.fd, t.xi, t.symbols, noise_power, sc.ofdm, rng, blocks);
    return t;
}

}  // namespace beamcfo::harness
