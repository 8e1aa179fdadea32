// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stereolab/error.hpp"
#include "stereolab/rng.hpp"

namespace stereolab {

using nlohmann::json;

namespace {

json style_to_json(const DomainStyle& s) {
    return json{{"gamma", s.gamma},
                {"brightness_offset", s.brightness_offset},
                {"contrast_scale", s.contrast_scale},
                {"noise_sigma", s.noise_sigma},
                {"hue_rotation", s.hue_rotation},
                {"asymmetric", s.asymmetric}};
}

DomainStyle style_from_json(const json& j) {
    DomainStyle s;
    s.gamma = j.value("gamma", 1.0);
    s.brightness_offset = j.value("brightness_offset", 0.0);
    s.contrast_scale = j.value("contrast_scale", 1.0);
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.hue_rotation = j.value("hue_rotation", 0.0);
    s.asymmetric = j.value("asymmetric", false);
    return s;
}

std::string volume_kind_name(VolumeKind k) {
    switch (k) {
    case VolumeKind::concat: return "concat";
    case VolumeKind::correlation: return "correlation";
    case VolumeKind::rgb: return "rgb";
    }
    return "concat";
}

VolumeKind volume_kind_of(const std::string& s) {
    if (s == "concat") return VolumeKind::concat;
    if (s == "correlation") return VolumeKind::correlation;
    if (s == "rgb") return VolumeKind::rgb;
    throw ConfigError("unknown volume kind: " + s);
}

} // namespace

void ExperimentConfig::validate() const {
    net.validate();
    scf.validate();
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("momentum must be in [0, 1]");
    if (data.height < 16 || data.width < 16) throw ConfigError("data dims must be >= 16");
    if (data.scene_max_disp >= net.max_disp)
        throw ConfigError("scene_max_disp must stay below net.max_disp so no GT is excluded");
    if (train.crop_height % net.stride != 0 || train.crop_width % net.stride != 0 ||
        data.height % net.stride != 0 || data.width % net.stride != 0)
        throw ConfigError("image and crop dims must be divisible by the feature stride");
    if (train.crop_height > data.height || train.crop_width > data.width)
        throw ConfigError("crop larger than the generated images");
    if (train.steps < 1 || train.batch < 1) throw ConfigError("train.steps and train.batch must be positive");
    if (eval.styles.empty()) throw ConfigError("eval.styles must not be empty");
    if (ssw_enable) {
        if (net.in_layers != ssw.layers)
            throw ConfigError("ssw enabled: net.in_layers must equal ssw.layers (IN feeds the whitening loss)");
        if (ssw.layers.empty()) throw ConfigError("ssw.layers must not be empty");
        for (size_t i = 1; i < ssw.layers.size(); ++i)
            if (ssw.layers[i] <= ssw.layers[i - 1]) throw ConfigError("ssw.layers must be strictly increasing");
    }
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.net.max_disp = 32;
    cfg.scf.queue_capacity = 512;
    cfg.scf.queue_push_per_step = 64;
    cfg.ssw.layers = {0, 1};
    cfg.ssw.warmup_steps = 60;
    cfg.ssw.mask_refresh = 120;

    NamedStyle identity;
    identity.name = "identity";

    NamedStyle shift_asym;
    shift_asym.name = "shift_asym";
    shift_asym.style.gamma = 1.6;
    shift_asym.style.brightness_offset = 0.12;
    shift_asym.style.contrast_scale = 1.4;
    shift_asym.style.noise_sigma = 0.03;
    shift_asym.style.hue_rotation = 0.5;
    shift_asym.style.asymmetric = true;

    NamedStyle shift_sym;
    shift_sym.name = "shift_sym";
    shift_sym.style.gamma = 0.65;
    shift_sym.style.brightness_offset = -0.1;
    shift_sym.style.contrast_scale = 1.5;
    shift_sym.style.noise_sigma = 0.02;
    shift_sym.style.hue_rotation = -0.7;
    shift_sym.style.asymmetric = false;

    cfg.eval.styles = {identity, shift_asym, shift_sym};
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;

    j["data"] = {{"train_scenes", cfg.data.train_scenes},
                 {"test_scenes", cfg.data.test_scenes},
                 {"height", cfg.data.height},
                 {"width", cfg.data.width},
                 {"scene_max_disp", cfg.data.scene_max_disp},
                 {"scene",
                  {{"min_layers", cfg.data.scene.min_layers},
                   {"max_layers", cfg.data.scene.max_layers},
                   {"min_gap", cfg.data.scene.min_gap},
                   {"slope_prob", cfg.data.scene.slope_prob},
                   {"max_slope", cfg.data.scene.max_slope},
                   {"integer_disparities", cfg.data.scene.integer_disparities},
                   {"dot_size", cfg.data.scene.dot_size},
                   {"random_tint", cfg.data.scene.random_tint},
                   {"tint_amplitude", cfg.data.scene.tint_amplitude}}}};

    j["net"] = {{"channels", cfg.net.channels},
                {"stride", cfg.net.stride},
                {"max_disp", cfg.net.max_disp},
                {"volume_kind", volume_kind_name(cfg.net.volume_kind)},
                {"aggregation_depth", cfg.net.aggregation_depth},
                {"aggregation_channels", cfg.net.aggregation_channels},
                {"in_layers", cfg.net.in_layers},
                {"in_epsilon", cfg.net.in_epsilon}};

    j["scf"] = {{"enable", cfg.scf_enable},
                {"negatives_per_query", cfg.scf.negatives_per_query},
                {"window", cfg.scf.window},
                {"window_is_pixels", cfg.scf.window_is_pixels},
                {"queue_capacity", cfg.scf.queue_capacity},
                {"tau", cfg.scf.tau},
                {"normalize", cfg.scf.normalize},
                {"queue_push_per_step", cfg.scf.queue_push_per_step},
                {"exclusion_radius", cfg.scf.exclusion_radius},
                {"center_on_match", cfg.scf.center == NegativeCenter::match},
                {"paper_literal_denominator", cfg.scf.denominator == InfoNceDenominator::paper_literal}};

    j["momentum"] = {{"enable", cfg.momentum_enable}, {"value", cfg.momentum}};

    j["ssw"] = {{"enable", cfg.ssw_enable},
                {"epsilon", cfg.ssw.epsilon},
                {"layers", cfg.ssw.layers},
                {"cluster_count", cfg.ssw.cluster_count},
                {"warmup_steps", cfg.ssw.warmup_steps},
                {"mask_refresh", cfg.ssw.mask_refresh}};

    j["loss"] = {{"lambda_scf", cfg.loss.lambda_scf},
                 {"lambda_ssw", cfg.loss.lambda_ssw},
                 {"smooth_l1_beta", cfg.loss.smooth_l1_beta}};

    j["train"] = {{"steps", cfg.train.steps},
                  {"batch", cfg.train.batch},
                  {"crop_height", cfg.train.crop_height},
                  {"crop_width", cfg.train.crop_width},
                  {"lr", cfg.train.lr},
                  {"lr2", cfg.train.lr2},
                  {"lr_switch", cfg.train.lr_switch},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"augment", cfg.train.augment},
                  {"augment_cfg",
                   {{"max_log_gamma", cfg.train.augment_cfg.max_log_gamma},
                    {"max_brightness", cfg.train.augment_cfg.max_brightness},
                    {"max_log_contrast", cfg.train.augment_cfg.max_log_contrast},
                    {"noise_sigma", cfg.train.augment_cfg.noise_sigma},
                    {"max_hue", cfg.train.augment_cfg.max_hue},
                    {"asymmetric", cfg.train.augment_cfg.asymmetric}}},
                  {"max_pairs_per_sample", cfg.train.max_pairs_per_sample},
                  {"log_every", cfg.train.log_every},
                  {"probe_samples", cfg.train.probe_samples},
                  {"momentum_step_scale", cfg.train.momentum_step_scale}};

    json styles = json::array();
    for (const auto& ns : cfg.eval.styles) {
        json s = style_to_json(ns.style);
        s["name"] = ns.name;
        styles.push_back(s);
    }
    j["eval"] = {{"styles", styles}, {"delta", cfg.eval.delta}, {"exclude_occluded", cfg.eval.exclude_occluded}};
    return j.dump(2);
}

namespace {
template <class T> void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
} // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg = default_config();
    maybe(j, "seed", cfg.seed);
    maybe(j, "output_dir", cfg.output_dir);
    if (j.contains("data")) {
        const auto& d = j["data"];
        maybe(d, "train_scenes", cfg.data.train_scenes);
        maybe(d, "test_scenes", cfg.data.test_scenes);
        maybe(d, "height", cfg.data.height);
        maybe(d, "width", cfg.data.width);
        maybe(d, "scene_max_disp", cfg.data.scene_max_disp);
        if (d.contains("scene")) {
            const auto& s = d["scene"];
            maybe(s, "min_layers", cfg.data.scene.min_layers);
            maybe(s, "max_layers", cfg.data.scene.max_layers);
            maybe(s, "min_gap", cfg.data.scene.min_gap);
            maybe(s, "slope_prob", cfg.data.scene.slope_prob);
            maybe(s, "max_slope", cfg.data.scene.max_slope);
            maybe(s, "integer_disparities", cfg.data.scene.integer_disparities);
            maybe(s, "dot_size", cfg.data.scene.dot_size);
            maybe(s, "random_tint", cfg.data.scene.random_tint);
            maybe(s, "tint_amplitude", cfg.data.scene.tint_amplitude);
        }
    }
    if (j.contains("net")) {
        const auto& n = j["net"];
        maybe(n, "channels", cfg.net.channels);
        maybe(n, "stride", cfg.net.stride);
        maybe(n, "max_disp", cfg.net.max_disp);
        if (n.contains("volume_kind")) cfg.net.volume_kind = volume_kind_of(n["volume_kind"].get<std::string>());
        maybe(n, "aggregation_depth", cfg.net.aggregation_depth);
        maybe(n, "aggregation_channels", cfg.net.aggregation_channels);
        maybe(n, "in_layers", cfg.net.in_layers);
        maybe(n, "in_epsilon", cfg.net.in_epsilon);
    }
    if (j.contains("scf")) {
        const auto& s = j["scf"];
        maybe(s, "enable", cfg.scf_enable);
        maybe(s, "negatives_per_query", cfg.scf.negatives_per_query);
        maybe(s, "window", cfg.scf.window);
        maybe(s, "window_is_pixels", cfg.scf.window_is_pixels);
        maybe(s, "queue_capacity", cfg.scf.queue_capacity);
        maybe(s, "tau", cfg.scf.tau);
        maybe(s, "normalize", cfg.scf.normalize);
        maybe(s, "queue_push_per_step", cfg.scf.queue_push_per_step);
        maybe(s, "exclusion_radius", cfg.scf.exclusion_radius);
        if (s.contains("center_on_match"))
            cfg.scf.center = s["center_on_match"].get<bool>() ? NegativeCenter::match : NegativeCenter::query;
        if (s.contains("paper_literal_denominator"))
            cfg.scf.denominator = s["paper_literal_denominator"].get<bool>() ? InfoNceDenominator::paper_literal
                                                                             : InfoNceDenominator::standard;
    }
    if (j.contains("momentum")) {
        const auto& m = j["momentum"];
        maybe(m, "enable", cfg.momentum_enable);
        maybe(m, "value", cfg.momentum);
    }
    if (j.contains("ssw")) {
        const auto& s = j["ssw"];
        maybe(s, "enable", cfg.ssw_enable);
        maybe(s, "epsilon", cfg.ssw.epsilon);
        maybe(s, "layers", cfg.ssw.layers);
        maybe(s, "cluster_count", cfg.ssw.cluster_count);
        maybe(s, "warmup_steps", cfg.ssw.warmup_steps);
        maybe(s, "mask_refresh", cfg.ssw.mask_refresh);
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        maybe(l, "lambda_scf", cfg.loss.lambda_scf);
        maybe(l, "lambda_ssw", cfg.loss.lambda_ssw);
        maybe(l, "smooth_l1_beta", cfg.loss.smooth_l1_beta);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        maybe(t, "steps", cfg.train.steps);
        maybe(t, "batch", cfg.train.batch);
        maybe(t, "crop_height", cfg.train.crop_height);
        maybe(t, "crop_width", cfg.train.crop_width);
        maybe(t, "lr", cfg.train.lr);
        maybe(t, "lr2", cfg.train.lr2);
        maybe(t, "lr_switch", cfg.train.lr_switch);
        maybe(t, "adam_beta1", cfg.train.adam_beta1);
        maybe(t, "adam_beta2", cfg.train.adam_beta2);
        maybe(t, "adam_eps", cfg.train.adam_eps);
        maybe(t, "augment", cfg.train.augment);
        if (t.contains("augment_cfg")) {
            const auto& a = t["augment_cfg"];
            maybe(a, "max_log_gamma", cfg.train.augment_cfg.max_log_gamma);
            maybe(a, "max_brightness", cfg.train.augment_cfg.max_brightness);
            maybe(a, "max_log_contrast", cfg.train.augment_cfg.max_log_contrast);
            maybe(a, "noise_sigma", cfg.train.augment_cfg.noise_sigma);
            maybe(a, "max_hue", cfg.train.augment_cfg.max_hue);
            maybe(a, "asymmetric", cfg.train.augment_cfg.asymmetric);
        }
        maybe(t, "max_pairs_per_sample", cfg.train.max_pairs_per_sample);
        maybe(t, "log_every", cfg.train.log_every);
        maybe(t, "probe_samples", cfg.train.probe_samples);
        maybe(t, "momentum_step_scale", cfg.train.momentum_step_scale);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        maybe(e, "delta", cfg.eval.delta);
        maybe(e, "exclude_occluded", cfg.eval.exclude_occluded);
        if (e.contains("styles")) {
            cfg.eval.styles.clear();
            for (const auto& s : e["styles"]) {
                NamedStyle ns;
                ns.name = s.value("name", "unnamed");
                ns.style = style_from_json(s);
                cfg.eval.styles.push_back(ns);
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << config_to_json(cfg) << "\n";
}

void apply_override(ExperimentConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key.path=value: " + spec);
    std::string pointer = "/" + spec.substr(0, eq);
    for (auto& c : pointer)
        if (c == '.') c = '/';
    const std::string value = spec.substr(eq + 1);

    json j = json::parse(config_to_json(cfg));
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const std::exception&) {
        parsed = value; // plain string
    }
    try {
        j[json::json_pointer(pointer)] = parsed;
    } catch (const std::exception& e) {
        throw ConfigError("bad override path " + spec + ": " + e.what());
    }
    cfg = config_from_json(j.dump());
}

std::string config_hash(const ExperimentConfig& cfg) {
    // output_dir is where artifacts land, not part of the experiment identity
    json j = json::parse(config_to_json(cfg));
    j.erase("output_dir");
    const std::string canon = j.dump();
    const std::uint64_t h = fnv1a64(canon.data(), canon.size());
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace stereolab
