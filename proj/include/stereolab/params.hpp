// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "stereolab/tensor.hpp"

namespace stereolab {

/// Named parameter tensors. std::map keeps iteration order deterministic,
/// which the reproducibility contract relies on.
using ParamSet = std::map<std::string, Tensor>;

inline ParamSet filter_prefix(const ParamSet& params, const std::string& prefix) {
    ParamSet out;
    for (const auto& [name, t] : params)
        if (name.rfind(prefix, 0) == 0) out.emplace(name, t);
    return out;
}

} // namespace stereolab
