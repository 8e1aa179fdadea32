// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "stereolab/autodiff.hpp"
#include "stereolab/params.hpp"
#include "stereolab/rng.hpp"
#include "stereolab/scf.hpp"
#include "stereolab/ssw.hpp"
#include "stereolab/stereo_data.hpp"

namespace stereolab {

enum class VolumeKind { concat, correlation, rgb };

/// Toy end-to-end stereo network: a 3-stage convolutional encoder at a fixed
/// stride, a cost volume (feature concat, feature correlation, or raw RGB
/// with one learned reduction stage), a small 3-D conv aggregation stack, and
/// soft-argmin regression over the upsampled scores.
struct NetworkConfig {
    int channels = 16; // C
    int stride = 4;    // pixels per feature cell; 1, 2, 4, or 8
    int max_disp = 48; // D, divisible by stride
    VolumeKind volume_kind = VolumeKind::concat;
    int aggregation_depth = 2;    // conv3d layers, final one maps to a single channel
    int aggregation_channels = 8; // hidden width of the aggregation stack
    std::vector<int> in_layers;   // encoder stages (0-based) that run instance norm
    double in_epsilon = 1e-5;

    int levels() const { return max_disp / stride; }
    void validate() const;
};

struct TotalLossConfig {
    double lambda_scf = 1.0;
    double lambda_ssw = 0.1;
    double smooth_l1_beta = 1.0;
};

/// Encoder + aggregation parameter initialization (He-style normal draws,
/// zero biases); deterministic in the rng state.
ParamSet make_network_params(const NetworkConfig& cfg, Rng& rng);

/// Tape handles of one parameter set.
struct TapeParams {
    std::map<std::string, int> ids;
    int at(const std::string& name) const;
};
TapeParams put_params(Tape& tape, const ParamSet& params, bool requires_grad);

struct EncoderOut {
    int features = -1;        // (C, H/stride, W/stride)
    std::vector<int> in_outs; // instance-norm outputs per configured stage
};

/// Deterministic encoder forward on the tape. IN runs at the configured
/// stages (batch-independent by construction); the final stage has no
/// normalization or nonlinearity.
EncoderOut encode(Tape& tape, int image_id, const TapeParams& params, const NetworkConfig& cfg);

struct DisparityHeadOut {
    int scores = -1; // (D, H, W) upsampled cost scores
    int pred = -1;   // (H, W) soft-argmin disparity
};

/// volume -> aggregation -> trilinear upsample -> soft-argmin.
/// For VolumeKind::rgb the two image nodes are used instead of features.
DisparityHeadOut disparity_head(Tape& tape, int features_left, int features_right, int image_left, int image_right,
                                const TapeParams& params, const NetworkConfig& cfg);

struct ForwardOut {
    int image_left = -1;
    int image_right = -1;
    int features_left = -1;
    int features_right = -1; // node id; constant when the key encoder produced it
    std::vector<int> in_left_ids;
    std::vector<Tensor> in_right_values;
    int scores = -1;
    int pred = -1;
    bool right_detached = false;
};

/// Full training-mode forward pass. When `key_params` is non-null the right
/// branch runs through it with gradients blocked (the momentum design);
/// otherwise the query parameters process both views (weight sharing).
ForwardOut network_forward(Tape& tape, const Tensor& left_image, const Tensor& right_image, const TapeParams& theta,
                           const ParamSet* key_params, const NetworkConfig& cfg, bool images_require_grad = false);

/// Symmetric inference: the query encoder extracts both views; the key
/// encoder and the queue are never used at test time.
Tensor infer(const StereoSample& sample, const ParamSet& query_params, const NetworkConfig& cfg);

/// Feature extraction outside the tape (e.g. key encoder, evaluation).
FeatureMap extract_features(const Tensor& image, const ParamSet& params, const NetworkConfig& cfg, View view);

/// L = L_disp + lambda_scf * L_scf + lambda_ssw * L_ssw (scalar nodes).
int total_loss(Tape& tape, int disp_loss, int scf_loss, int ssw_loss, const TotalLossConfig& cfg);

} // namespace stereolab
