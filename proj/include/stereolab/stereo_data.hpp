// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereolab/rng.hpp"
#include "stereolab/tensor.hpp"

namespace stereolab {

/// One piecewise-planar scene layer. Disparity over the layer is the plane
///   d(u,v) = base + du*(u - ref_u) + dv*(v - ref_v),
/// so du = dv = 0 gives a fronto-parallel layer and nonzero slopes give
/// subpixel disparities.
struct PlanarLayer {
    enum class Shape { background, rect, disk };

    Shape shape = Shape::background;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0; // rect bounds, inclusive
    double cx = 0, cy = 0, radius = 0;     // disk
    double base = 0, du = 0, dv = 0;       // disparity plane
    double ref_u = 0, ref_v = 0;

    bool contains(double u, double v) const;
    double disparity(double u, double v) const { return base + du * (u - ref_u) + dv * (v - ref_v); }
};

/// Layered-shape scene description. The background covers everything; later
/// layers occlude earlier ones when disparities tie. Dot textures are
/// procedural per layer, so surfaces extend naturally past the left frame.
/// Dots vary around a scene tint: distinct scenes occupy distinct color
/// regions, the way distinct captures carry distinct global styles.
struct SceneSpec {
    PlanarLayer background;
    std::vector<PlanarLayer> layers;
    int dot_size = 1;                        // side of one random dot in pixels
    double tint[3] = {0.5, 0.5, 0.5};        // palette center per channel
    double tint_amplitude = 0.5;             // dot spread around the tint
};

/// Rectified stereo pair with exact ground truth from the generator.
/// Images are 3xHxW in [0,1]; disparities are HxW in pixels.
struct StereoSample {
    Tensor left_image;
    Tensor right_image;
    Tensor disparity_left;
    Tensor disparity_right;
    bool has_right_disparity = false;
    BoolGrid occlusion_left; // true = visible in both views
    std::string sample_id;
    std::string style_tag = "identity";

    int height() const { return disparity_left.rank() == 2 ? disparity_left.dim(0) : 0; }
    int width() const { return disparity_left.rank() == 2 ? disparity_left.dim(1) : 0; }
};

/// Photometric domain-shift transform. All fields at identity values make
/// apply_style a bit-identical no-op. In asymmetric mode the two views get
/// independent parameter draws centered on the given values.
struct DomainStyle {
    double gamma = 1.0;
    double brightness_offset = 0.0;
    double contrast_scale = 1.0;
    double noise_sigma = 0.0;
    double hue_rotation = 0.0; // radians about the gray axis
    bool asymmetric = false;

    bool is_identity() const;
    void validate() const; // throws ConfigError when outside documented ranges
};

/// Random-dot stereogram with piecewise-planar disparity. The right view is
/// synthesized by forward-warping integer dot positions (nearest-neighbor
/// placement), which keeps the visibility computation exact: a left pixel is
/// marked visible iff its dot wins the splat competition in the right view.
StereoSample generate_rds(std::uint64_t seed, int height, int width, int max_disp, const SceneSpec& spec);

/// Photometric transform of both images; geometry fields pass through
/// untouched. Deterministic in (sample, style, seed).
StereoSample apply_style(const StereoSample& sample, const DomainStyle& style, std::uint64_t seed);

/// Distinct per-view transforms (training-time augmentation entry point).
StereoSample apply_style_per_view(const StereoSample& sample, const DomainStyle& left_style,
                                  const DomainStyle& right_style, std::uint64_t seed);

/// Axis-aligned crop of images, disparities, and occlusion. Disparity values
/// are unchanged (the crop moves both views together).
StereoSample crop_sample(const StereoSample& sample, int y0, int x0, int height, int width);

/// Two-sided photometric jitter ranges for training-time augmentation; draws
/// are centered on identity (log-space for gamma and contrast).
struct AugmentConfig {
    double max_log_gamma = 0.3;
    double max_brightness = 0.1;
    double max_log_contrast = 0.25;
    double noise_sigma = 0.02;
    double max_hue = 0.35;
    bool asymmetric = true; // independent draws per view
};

DomainStyle draw_augment_style(const AugmentConfig& cfg, Rng& rng);

struct RandomSceneOptions {
    int min_layers = 1;
    int max_layers = 3;
    double min_gap = 4.0;     // disparity separation between stacked layers
    double slope_prob = 0.0;  // fraction of layers with sloped planes
    double max_slope = 0.02;  // |du|, |dv| bound
    bool integer_disparities = true;
    int dot_size = 1;
    bool random_tint = true;  // per-scene palette; false keeps neutral gray dots
    double tint_amplitude = 0.4;
};

/// Scene sampler used by corpus generation; pure function of the rng state.
SceneSpec make_random_scene(Rng& rng, int height, int width, int max_disp, const RandomSceneOptions& opt);

} // namespace stereolab
