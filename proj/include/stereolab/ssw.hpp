// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "stereolab/tensor.hpp"

namespace stereolab {

/// Instance-normalized feature matrix (per-channel zero mean, unit variance
/// over spatial positions).
struct NormalizedFeature {
    Tensor x_hat; // C x HW
    int layer_index = 0;
};

struct SswConfig {
    double epsilon = 1e-5;
    std::vector<int> layers = {0, 1}; // encoder stages that receive IN + the whitening penalty
    int cluster_count = 3;
    int warmup_steps = 64;  // V accumulation steps before the first mask
    int mask_refresh = 256; // steps between mask recomputations afterwards
};

/// Per-channel standardization with population variance and the epsilon
/// guard inside the square root. Constant rows map to zeros.
NormalizedFeature instance_normalize(const Tensor& x, double epsilon, int layer_index = 0);

/// Channel covariance Sigma = X_hat X_hat^T / HW (symmetric by construction).
Tensor covariance(const NormalizedFeature& f);

/// Elementwise variance of the covariances across the two views:
///   V = (1/2N) sum_n [(Sigma_n^l - mu_n)^2 + (Sigma_n^r - mu_n)^2],
/// mu_n = (Sigma_n^l + Sigma_n^r)/2.
Tensor variance_matrix(const std::vector<Tensor>& cov_left_list, const std::vector<Tensor>& cov_right_list);

/// Channel-pair selection: exact 1-D k-means (dynamic programming over the
/// sorted strict-upper-triangle values) picks the cluster with the highest
/// centroid; the mask is mirrored to the lower triangle, diagonal excluded.
/// Equal values always receive equal decisions. With all values equal the
/// degenerate rule (entries > mean + 2*std) yields an empty mask.
BoolGrid select_mask(const Tensor& V, int clusters);

/// Exact 1-D k-means partition of `values` into `k` contiguous groups in
/// sorted order (minimum within-cluster sum of squares). Returns the group
/// index per input value, groups ordered by increasing centroid.
std::vector<int> kmeans_1d(const std::vector<double>& values, int k);

/// Running Eq.-style variance accumulator plus the frozen selective mask for
/// one layer.
class CovarianceStats {
public:
    CovarianceStats() = default;
    CovarianceStats(int channels, int cluster_count);

    /// Adds one sample's left/right covariance pair to the running mean.
    void accumulate(const Tensor& cov_left, const Tensor& cov_right);

    /// Recomputes the selective mask from the current running V.
    void refresh_mask();

    const Tensor& variance() const { return v_mean_; }
    const BoolGrid& mask() const { return mask_; }
    bool mask_ready() const { return mask_ready_; }
    long sample_count() const { return count_; }
    int channels() const { return channels_; }

private:
    int channels_ = 0;
    int cluster_count_ = 3;
    Tensor v_mean_;
    BoolGrid mask_;
    bool mask_ready_ = false;
    long count_ = 0;
};

struct SswLossResult {
    double value = 0.0;
    bool ready = false; // false when called before the first mask exists
};

/// Masked whitening penalty (1/Gamma) sum_gamma ||Sigma_gamma ⊙ M ⊙ upper||_1
/// over the left features only. Non-differentiable evaluation; the training
/// path re-derives it on the tape.
SswLossResult ssw_loss(const std::vector<NormalizedFeature>& normalized_left,
                       const std::vector<CovarianceStats>& stats);

} // namespace stereolab
