// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "stereolab/geometry.hpp"
#include "stereolab/scf.hpp"
#include "stereolab/stereo_data.hpp"
#include "stereolab/tensor.hpp"

namespace stereolab {

struct MetricsReport {
    double mean_cosine = 0.0;
    double mean_cosine_unmasked = 0.0;
    std::vector<double> per_channel_abs_diff;
    double err_gt_1px = 0.0; // percentages
    double err_gt_2px = 0.0;
    double err_gt_3px = 0.0;
    double d1_all = 0.0;
    long pixel_count = 0;
    long pair_count = 0;
    std::string sample_id;
    std::string style_tag;
};

/// Mean cosine similarity over the positive pairs. Pure and order-independent.
double cosine_consistency(const FeatureMap& left, const FeatureMap& right, const PositivePairSet& pairs);

/// Mean per-channel |phi_l - phi_r| over pairs; when normalize is set, vectors
/// are unit-normalized first (the training-time similarity convention).
std::vector<double> per_channel_inconsistency(const FeatureMap& left, const FeatureMap& right,
                                              const PositivePairSet& pairs, bool normalize);

/// 100 * |{valid: |pred - gt| > t}| / |valid|.
double threshold_error_rate(const Tensor& pred, const Tensor& gt, const BoolGrid& valid, double t);

/// KITTI D1 convention: error > 3 px AND error > 5% of the ground truth.
double d1(const Tensor& pred, const Tensor& gt, const BoolGrid& valid);

long count_valid(const Tensor& gt, const BoolGrid& valid);

struct ConsistencyResult {
    double masked = 0.0;   // cosine over matching-mask-filtered pairs
    double unmasked = 0.0; // cosine over all pairs with a valid reprojection
    std::vector<double> per_channel;
    long pair_count = 0; // masked pairs; 0 means the metrics are undefined
};

/// Feature consistency of one sample from already-extracted maps. Positive
/// pairs follow the training-time definition (reprojection check at image
/// resolution, threshold delta, center-pixel stride rule).
ConsistencyResult stereo_consistency(const FeatureMap& left, const FeatureMap& right, const StereoSample& sample,
                                     double delta, bool normalize);

} // namespace stereolab
