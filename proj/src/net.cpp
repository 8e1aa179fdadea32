// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/net.hpp"

#include <algorithm>
#include <cmath>

#include "stereolab/error.hpp"

namespace stereolab {

void NetworkConfig::validate() const {
    if (channels < 4) throw ConfigError("NetworkConfig: channels must be >= 4");
    if (stride != 1 && stride != 2 && stride != 4 && stride != 8)
        throw ConfigError("NetworkConfig: stride must be 1, 2, 4, or 8");
    if (max_disp < stride || max_disp % stride != 0)
        throw ConfigError("NetworkConfig: max_disp must be a positive multiple of stride");
    if (aggregation_depth < 1) throw ConfigError("NetworkConfig: aggregation_depth must be >= 1");
    if (aggregation_channels < 1) throw ConfigError("NetworkConfig: aggregation_channels must be >= 1");
    for (int l : in_layers)
        if (l < 0 || l > 1) throw ConfigError("NetworkConfig: in_layers indexes the first two stages only");
    if (!(in_epsilon > 0.0)) throw ConfigError("NetworkConfig: in_epsilon must be positive");
}

namespace {

struct StageSpec {
    int in_ch;
    int out_ch;
    int stride;
};

// Three conv stages whose stride product equals cfg.stride.
std::vector<StageSpec> encoder_stages(const NetworkConfig& cfg) {
    const int mid = std::max(4, cfg.channels / 2);
    int s0 = 1, s1 = 1, s2 = 1;
    switch (cfg.stride) {
    case 1: break;
    case 2: s0 = 2; break;
    case 4: s0 = 2, s1 = 2; break;
    case 8: s0 = 2, s1 = 2, s2 = 2; break;
    default: throw ConfigError("NetworkConfig: unsupported stride");
    }
    return {{3, mid, s0}, {mid, cfg.channels, s1}, {cfg.channels, cfg.channels, s2}};
}

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = sigma * rng.normal();
    return t;
}

int volume_channels(const NetworkConfig& cfg) {
    switch (cfg.volume_kind) {
    case VolumeKind::concat: return 2 * cfg.channels;
    case VolumeKind::correlation: return 1;
    case VolumeKind::rgb: return 2 * cfg.channels; // after the learned reduction stage
    }
    return 0;
}

} // namespace

ParamSet make_network_params(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamSet p;
    const auto stages = encoder_stages(cfg);
    for (size_t s = 0; s < stages.size(); ++s) {
        const auto& st = stages[s];
        const std::string base = "enc.conv" + std::to_string(s);
        p[base + ".w"] = he_normal({st.out_ch, st.in_ch, 3, 3}, st.in_ch * 9, rng);
        p[base + ".b"] = Tensor({st.out_ch});
    }
    if (cfg.volume_kind == VolumeKind::rgb) {
        // One learned mixing stage from the raw 6-channel RGB volume down to
        // the aggregation input shape (strided in all three dimensions).
        p["agg.rgb.w"] = he_normal({2 * cfg.channels, 6, 3, 9}, 6 * 27, rng);
        p["agg.rgb.b"] = Tensor({2 * cfg.channels});
    }
    int in_ch = volume_channels(cfg);
    for (int d = 0; d < cfg.aggregation_depth; ++d) {
        const int out_ch = d + 1 == cfg.aggregation_depth ? 1 : cfg.aggregation_channels;
        const std::string base = "agg.conv" + std::to_string(d);
        p[base + ".w"] = he_normal({out_ch, in_ch, 3, 9}, in_ch * 27, rng);
        p[base + ".b"] = Tensor({out_ch});
        in_ch = out_ch;
    }
    return p;
}

int TapeParams::at(const std::string& name) const {
    const auto it = ids.find(name);
    if (it == ids.end()) throw ConfigError("missing parameter " + name);
    return it->second;
}

TapeParams put_params(Tape& tape, const ParamSet& params, bool requires_grad) {
    TapeParams tp;
    for (const auto& [name, t] : params) tp.ids[name] = tape.leaf(t, requires_grad);
    return tp;
}

EncoderOut encode(Tape& tape, int image_id, const TapeParams& params, const NetworkConfig& cfg) {
    cfg.validate();
    const Tensor& img = tape.val(image_id);
    if (img.rank() != 3 || img.dim(0) != 3) throw ShapeError("encode: expects a 3xHxW image");
    if (img.dim(1) % cfg.stride != 0 || img.dim(2) % cfg.stride != 0)
        throw ShapeError("encode: image dims must be divisible by the stride");

    EncoderOut out;
    const auto stages = encoder_stages(cfg);
    int x = image_id;
    for (size_t s = 0; s < stages.size(); ++s) {
        const std::string base = "enc.conv" + std::to_string(s);
        x = tape.conv2d(x, params.at(base + ".w"), params.at(base + ".b"), stages[s].stride, 1);
        const bool last = s + 1 == stages.size();
        if (last) break;
        if (std::find(cfg.in_layers.begin(), cfg.in_layers.end(), static_cast<int>(s)) != cfg.in_layers.end()) {
            x = tape.instance_norm(x, cfg.in_epsilon);
            out.in_outs.push_back(x);
        }
        x = tape.elu(x);
    }
    out.features = x;
    return out;
}

DisparityHeadOut disparity_head(Tape& tape, int features_left, int features_right, int image_left, int image_right,
                                const TapeParams& params, const NetworkConfig& cfg) {
    const int levels = cfg.levels();
    int volume = -1;
    switch (cfg.volume_kind) {
    case VolumeKind::concat:
        volume = tape.concat_volume(features_left, features_right, levels);
        break;
    case VolumeKind::correlation:
        volume = tape.corr_volume(features_left, features_right, levels);
        break;
    case VolumeKind::rgb: {
        const int raw = tape.concat_volume(image_left, image_right, cfg.max_disp);
        volume = tape.conv3d(raw, params.at("agg.rgb.w"), params.at("agg.rgb.b"), cfg.stride, cfg.stride, cfg.stride, 1);
        break;
    }
    }

    int x = volume;
    for (int d = 0; d < cfg.aggregation_depth; ++d) {
        const std::string base = "agg.conv" + std::to_string(d);
        x = tape.conv3d(x, params.at(base + ".w"), params.at(base + ".b"), 1, 1, 1, 1);
        if (d + 1 < cfg.aggregation_depth) x = tape.elu(x);
    }
    // (1, L, h, w) -> (L, h, w), then upsample to (D, H, W)
    const Tensor& v = tape.val(x);
    x = tape.reshape(x, {v.dim(1), v.dim(2), v.dim(3)});

    DisparityHeadOut out;
    out.scores = cfg.stride > 1 ? tape.upsample3(x, cfg.stride) : x;
    out.pred = tape.soft_argmin(out.scores);
    return out;
}

ForwardOut network_forward(Tape& tape, const Tensor& left_image, const Tensor& right_image, const TapeParams& theta,
                           const ParamSet* key_params, const NetworkConfig& cfg, bool images_require_grad) {
    if (!left_image.same_shape(right_image)) throw ShapeError("network_forward: image shape mismatch");
    ForwardOut out;
    out.image_left = tape.leaf(left_image, images_require_grad);
    out.image_right = tape.leaf(right_image, images_require_grad);

    const EncoderOut left = encode(tape, out.image_left, theta, cfg);
    out.features_left = left.features;
    out.in_left_ids = left.in_outs;

    if (key_params != nullptr) {
        // Key branch: same architecture, EMA weights, gradients blocked.
        const TapeParams eta = put_params(tape, filter_prefix(*key_params, "enc."), false);
        const int right_const = tape.constant(right_image);
        const EncoderOut right = encode(tape, right_const, eta, cfg);
        out.features_right = right.features;
        out.right_detached = true;
        for (int id : right.in_outs) out.in_right_values.push_back(tape.val(id));
    } else {
        const EncoderOut right = encode(tape, out.image_right, theta, cfg);
        out.features_right = right.features;
        for (int id : right.in_outs) out.in_right_values.push_back(tape.val(id));
    }

    const DisparityHeadOut head =
        disparity_head(tape, out.features_left, out.features_right, out.image_left, out.image_right, theta, cfg);
    out.scores = head.scores;
    out.pred = head.pred;
    return out;
}

Tensor infer(const StereoSample& sample, const ParamSet& query_params, const NetworkConfig& cfg) {
    Tape tape;
    const TapeParams theta = put_params(tape, query_params, false);
    const ForwardOut fo = network_forward(tape, sample.left_image, sample.right_image, theta, nullptr, cfg, false);
    return tape.val(fo.pred);
}

FeatureMap extract_features(const Tensor& image, const ParamSet& params, const NetworkConfig& cfg, View view) {
    Tape tape;
    const TapeParams tp = put_params(tape, filter_prefix(params, "enc."), false);
    const int img = tape.constant(image);
    const EncoderOut enc = encode(tape, img, tp, cfg);
    FeatureMap fm;
    fm.values = tape.val(enc.features);
    fm.stride = cfg.stride;
    fm.view = view;
    return fm;
}

int total_loss(Tape& tape, int disp_loss, int scf_loss, int ssw_loss, const TotalLossConfig& cfg) {
    return tape.weighted_sum({disp_loss, scf_loss, ssw_loss}, {1.0, cfg.lambda_scf, cfg.lambda_ssw});
}

} // namespace stereolab
