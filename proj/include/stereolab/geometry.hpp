// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stereolab/tensor.hpp"

namespace stereolab {

/// Per-pixel reprojection error of the left-right consistency check.
/// valid is false where the reprojected coordinate leaves the image or the
/// ground truth is invalid (NaN).
struct ReprojectionField {
    Tensor R;       // HxW, >= 0 where valid
    BoolGrid valid; // HxW
};

/// Matching-region mask: M[u,v] = valid && R < delta (strict).
struct MatchMask {
    BoolGrid M;
    double delta = 3.0;
};

struct PixelPair {
    int query_u = 0; // feature-stride column in the left view
    int query_v = 0;
    int key_u = 0; // feature-stride column in the right view
    int key_v = 0;
};

struct PositivePairSet {
    std::vector<PixelPair> pairs;
    int stride = 1;
};

/// Which full-resolution pixels decide whether a stride cell is masked in.
enum class CellRule { center, all, any };

/// Horizontal reprojection along the rectified row; nullopt when u-d < 0.
std::optional<std::pair<double, int>> reproject(int u, int v, double disparity, int width);

/// R[u,v] = |d_left[u,v] - d_right[u - round(d_left), v]|. The lookup column
/// is rounded: this check is a validity gate, not a measurement, and rounding
/// keeps it exact on integer-disparity scenes. Optional validity masks mark
/// invalid GT (entries also invalid where either disparity is NaN).
ReprojectionField reprojection_error(const Tensor& disparity_left, const Tensor& disparity_right,
                                     const BoolGrid* valid_left = nullptr, const BoolGrid* valid_right = nullptr);

MatchMask matching_mask(const ReprojectionField& field, double delta);

/// Positive pixel pairs at feature stride. A cell is admitted per `rule`
/// (default: its center pixel must be masked in); the key column is
/// query_u - round(d/stride) using the disparity at the cell's center pixel.
/// Pairs are dropped when the key leaves the grid or when
/// |d/stride - round(d/stride)| exceeds round_tolerance.
PositivePairSet collect_positive_pairs(const Tensor& disparity_left, const MatchMask& mask, int stride,
                                       CellRule rule = CellRule::center, double round_tolerance = 0.5);

/// Fallback validity check when no right disparity exists (e.g. loaded KITTI
/// samples): a pixel is invalid if another pixel in its row maps to the same
/// right column with larger disparity. Non-paper behavior; callers must flag
/// results accordingly.
BoolGrid uniqueness_mask(const Tensor& disparity_left, const BoolGrid* valid_left = nullptr);

} // namespace stereolab
