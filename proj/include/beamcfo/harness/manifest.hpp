// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/harness/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace beamcfo::harness {

/// 64-bit FNV-1a, used to fingerprint the effective configuration.
inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Run record written next to the CSV. It holds no timestamps, host data or
/// worker count, so reruns with any number of workers produce identical bytes.
inline nlohmann::ordered_json make_manifest(const std::string& command, const ExperimentConfig& cfg,
                                            const std::string& git_revision, const std::vector<std::string>& outputs) {
    const std::string ini = to_ini(cfg, false);
    nlohmann::ordered_json j;
    j["command"] = command;
    j["git_revision"] = git_revision;
    j["seed"] = cfg.seed;
    j["config_hash"] = hex64(fnv1a64(ini));
    j["config"] = ini;
    j["outputs"] = outputs;
    return j;
}

}  // namespace beamcfo::harness
