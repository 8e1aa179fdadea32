// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "stereolab/baseline.hpp"
#include "stereolab/checkpoint.hpp"
#include "stereolab/config.hpp"
#include "stereolab/metrics.hpp"
#include "stereolab/train.hpp"

namespace stereolab {

/// Output root override; relative output dirs resolve under it.
constexpr const char* kOutputRootEnv = "STEREOLAB_OUT";
std::string resolve_output_dir(const ExperimentConfig& cfg);

/// Deterministic in-memory corpus; each sample derives its own rng stream
/// from (seed, split, index), so generation order cannot matter.
std::vector<StereoSample> make_corpus(const ExperimentConfig& cfg, bool test_split);

void write_corpus(const std::vector<StereoSample>& corpus, const std::string& dir, const std::string& manifest_name,
                  const std::string& config_hash_line);
std::vector<StereoSample> load_corpus(const std::string& manifest_path);

/// Full evaluation of a trained query encoder over the configured styles.
std::vector<MetricsReport> evaluate_model(const ParamSet& params, const ExperimentConfig& cfg,
                                          const std::vector<StereoSample>& test_corpus);

void write_metrics_csv(const std::vector<MetricsReport>& reports, const ExperimentConfig& cfg,
                       const std::string& path);

/// Mean of a column over rows matching a style (pair- or pixel-weighted as
/// appropriate); helpers for the trend assertions.
double mean_cosine_for_style(const std::vector<MetricsReport>& reports, const std::string& style);
double mean_err3_for_style(const std::vector<MetricsReport>& reports, const std::string& style);

/// Checkpoint packing of a trained model (theta, eta, queue, whitening stats).
Checkpoint pack_model(const TrainedModel& model, const ExperimentConfig& cfg);
TrainedModel unpack_model(const Checkpoint& ckpt);

// -- CLI entry points --------------------------------------------------------
void cmd_gen_data(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path);
void cmd_diagnose(const ExperimentConfig& cfg, const std::string& checkpoint_path);
void cmd_plot(const std::string& mode, const std::vector<std::string>& inputs, const std::string& out_path);

/// Cost-volume-construction comparison: trains the learned variants on the
/// train-style corpus (no photometric augmentation), evaluates the >3px rate
/// under both styles. Recognized variants: "wta-sad", "rgb-volume",
/// "feature-volume".
std::vector<BaselineResult> run_appendix_a(const ExperimentConfig& base_cfg, const std::vector<StereoSample>& train,
                                           const std::vector<StereoSample>& test, const std::string& train_style,
                                           const std::string& shift_style, const std::vector<std::string>& variants);

} // namespace stereolab
