// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "stereolab/params.hpp"

namespace stereolab {

/// Named-array archive: a JSON manifest (names, shapes, config hash, seed,
/// version) followed by raw little-endian float64 blobs in manifest order.
/// Serialization is byte-deterministic: identical contents produce identical
/// files.
struct Checkpoint {
    ParamSet arrays;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    std::map<std::string, std::string> meta;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace stereolab
