// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <vector>

#include "stereolab/autodiff.hpp"
#include "stereolab/geometry.hpp"
#include "stereolab/params.hpp"
#include "stereolab/rng.hpp"
#include "stereolab/tensor.hpp"

namespace stereolab {

enum class View { left, right };

/// Encoder output grid at a known stride relative to the image.
struct FeatureMap {
    Tensor values; // C x H x W
    int stride = 1;
    View view = View::left;

    int channels() const { return values.dim(0); }
    int height() const { return values.dim(1); }
    int width() const { return values.dim(2); }
};

/// Query/key encoder parameters with the key tracking the query as an
/// exponential moving average.
struct MomentumEncoderPair {
    ParamSet query_params; // theta
    ParamSet key_params;   // eta; equals theta at t = 0
    double momentum = 0.9999;
    long iteration = 0;
};

MomentumEncoderPair make_momentum_pair(const ParamSet& query, double momentum);

/// eta_t = m * eta_{t-1} + (1 - m) * theta_t, elementwise; theta untouched.
void momentum_update(MomentumEncoderPair& pair);

/// Fixed-capacity FIFO of key feature vectors (the cross-pair dictionary).
class NegativeQueue {
public:
    NegativeQueue() = default;
    NegativeQueue(int capacity, int dim);

    void push(const std::vector<std::vector<double>>& keys);
    int size() const { return static_cast<int>(entries_.size()); }
    int capacity() const { return capacity_; }
    int dim() const { return dim_; }
    /// i = 0 is the oldest entry.
    const std::vector<double>& entry(int i) const { return entries_[static_cast<size_t>(i)]; }

private:
    int capacity_ = 0;
    int dim_ = 0;
    std::deque<std::vector<double>> entries_;
};

enum class InfoNceDenominator {
    standard,     // positive included in the denominator (loss >= 0)
    paper_literal // negatives only
};

enum class NegativeCenter { match, query };

struct ScfConfig {
    int negatives_per_query = 60; // N
    double window = 50.0;         // local window side
    bool window_is_pixels = true; // false: window measured in feature cells
    int queue_capacity = 6000;    // K
    double tau = 0.07;
    bool normalize = true;
    int queue_push_per_step = 256;
    int exclusion_radius = 1; // horizontal cells around the match excluded from negatives
    NegativeCenter center = NegativeCenter::match;
    InfoNceDenominator denominator = InfoNceDenominator::standard;

    void validate() const;
};

struct NegativeSample {
    std::vector<std::pair<int, int>> coords; // (u, v) at feature stride
    bool with_replacement = false;           // fewer candidates than N existed
};

/// N negatives drawn uniformly without replacement from the window centered
/// on `center_coord`, excluding the match cell and its horizontal neighbors.
/// Falls back to replacement (flagged) when the candidate set is short.
NegativeSample sample_negatives(const FeatureMap& right, std::pair<int, int> center_coord, const ScfConfig& cfg,
                                Rng& rng);

/// Temperature-scaled softmax classification of the positive against the
/// negatives, log-sum-exp stabilized. Nonnegative in standard mode.
double pixel_infonce(const std::vector<double>& query, const std::vector<double>& positive,
                     const std::vector<std::vector<double>>& negatives, double tau, bool normalize,
                     InfoNceDenominator denominator = InfoNceDenominator::standard);

struct ScfLossResult {
    int loss_id = -1;  // scalar node on the tape
    Tensor per_pixel;  // feature-resolution grid of per-pair losses
    bool skipped = false;
    long replacement_warnings = 0;
};

/// Pixel-wise contrastive loss over the positive pairs, averaged (the pairs
/// are already mask-filtered, so this equals the mask-weighted average).
/// Negatives per pair: N window samples from the right map plus every queue
/// entry. Pass right_id = -1 when the right features are key-encoder output:
/// the whole right path is then treated as detached constants.
ScfLossResult scf_loss_tape(Tape& tape, int left_id, int right_id, const Tensor& right_values, int stride,
                            const PositivePairSet& pairs, const NegativeQueue& queue, const ScfConfig& cfg, Rng rng);

/// Non-tape evaluation (same semantics, value only).
struct ScfLossValue {
    double value = 0.0;
    Tensor per_pixel;
    bool skipped = false;
    long replacement_warnings = 0;
};
ScfLossValue scf_loss(const FeatureMap& left, const FeatureMap& right, const PositivePairSet& pairs,
                      const NegativeQueue& queue, const ScfConfig& cfg, Rng rng);

} // namespace stereolab
