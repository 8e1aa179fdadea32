// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace stereolab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace stereolab
