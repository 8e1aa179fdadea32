// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "stereolab/stereo_data.hpp"
#include "stereolab/tensor.hpp"

namespace stereolab {

/// One row of the cost-volume-construction comparison.
struct BaselineResult {
    std::string variant; // rgb-volume | feature-volume | wta-sad
    double in_style_err = 0.0;
    double shifted_style_err = 0.0;
    double degradation() const { return shifted_style_err - in_style_err; }
};

/// Learning-free winner-take-all matcher over window SAD costs; the
/// independent classical oracle. Ties break toward the smaller disparity.
/// Border windows use the mean over in-bounds pixels.
Tensor wta_sad_match(const StereoSample& sample, int window, int max_disp);

} // namespace stereolab
