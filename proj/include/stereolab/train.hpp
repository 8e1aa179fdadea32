// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <vector>

#include "stereolab/config.hpp"
#include "stereolab/net.hpp"
#include "stereolab/scf.hpp"
#include "stereolab/ssw.hpp"
#include "stereolab/stereo_data.hpp"

namespace stereolab {

struct TrainedModel {
    ParamSet params;     // theta: encoder + aggregation
    ParamSet key_params; // eta (enc.* only); empty when the momentum encoder is off
    NegativeQueue queue; // capacity 0 when unused
    std::vector<CovarianceStats> ssw_stats;
    long steps = 0;
    long contrastive_skipped = 0;
    long replacement_warnings = 0;
};

/// Deterministic single-process training loop. One iteration runs
/// forward -> losses -> gradient step on theta -> momentum update -> queue
/// push -> whitening-statistics update, strictly in that order. The optional
/// log receives one JSON object per line (append-only).
TrainedModel train_model(const ExperimentConfig& cfg, const std::vector<StereoSample>& corpus, std::ostream* log);

} // namespace stereolab
