// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereolab/net.hpp"
#include "stereolab/scf.hpp"
#include "stereolab/ssw.hpp"
#include "stereolab/stereo_data.hpp"

namespace stereolab {

struct DataConfig {
    int train_scenes = 200;
    int test_scenes = 40;
    int height = 64;
    int width = 64;
    int scene_max_disp = 28; // generator budget, kept below net.max_disp
    RandomSceneOptions scene{1, 3, 5.0, 0.2, 0.02, true, 1};
};

struct NamedStyle {
    std::string name = "identity";
    DomainStyle style;
};

struct TrainConfig {
    int steps = 300;
    int batch = 2;
    int crop_height = 32;
    int crop_width = 32;
    double lr = 1e-3;
    double lr2 = 1e-4; // second phase
    int lr_switch = 225;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool augment = true;
    AugmentConfig augment_cfg;
    int max_pairs_per_sample = 96;
    int log_every = 25;
    int probe_samples = 4;
    /// Key-encoder EMA horizon rescaling for short runs: the effective
    /// per-step decay is momentum^momentum_step_scale. At reference scale
    /// (~1e5 iterations) every momentum in the sweep lets the key track the
    /// query; a short toy run only reaches that regime with the horizon
    /// rescaled by roughly ref_steps / toy_steps. 1 disables the adjustment.
    double momentum_step_scale = 1.0;
};

struct EvalConfig {
    std::vector<NamedStyle> styles;
    double delta = 3.0;            // matching-mask threshold for consistency metrics
    bool exclude_occluded = true;  // error metrics over non-occluded pixels when the mask exists
};

/// One experiment, fully specified. The config hash is embedded in every
/// artifact; identical hashes mean bit-reproducible outputs.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    DataConfig data;
    NetworkConfig net;
    bool scf_enable = false;
    ScfConfig scf;
    bool momentum_enable = false;
    double momentum = 0.9999;
    bool ssw_enable = false;
    SswConfig ssw;
    TotalLossConfig loss;
    TrainConfig train;
    EvalConfig eval;
    std::string output_dir = "out";

    void validate() const;
};

/// Defaults mirror the desk-scale protocol, including the three evaluation
/// styles (identity, an asymmetric consistency probe, a symmetric domain
/// shift).
ExperimentConfig default_config();

std::string config_to_json(const ExperimentConfig& cfg); // canonical (sorted keys)
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Dotted-path override, e.g. "train.steps=500" or "net.volume_kind=rgb".
/// Values parse as JSON when possible, else as strings.
void apply_override(ExperimentConfig& cfg, const std::string& spec);

/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace stereolab
