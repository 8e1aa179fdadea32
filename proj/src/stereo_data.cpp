// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/stereo_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stereolab/error.hpp"

namespace stereolab {

bool PlanarLayer::contains(double u, double v) const {
    switch (shape) {
    case Shape::background:
        return true;
    case Shape::rect:
        return u >= x0 && u <= x1 && v >= y0 && v <= y1;
    case Shape::disk: {
        const double dx = u - cx, dy = v - cy;
        return dx * dx + dy * dy <= radius * radius;
    }
    }
    return false;
}

namespace {

long long floordiv(long long a, long long b) {
    long long q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// Procedural dot texture attached to a layer surface, indexed by integer
// left-view coordinates. Extends to any coordinate, including negative u.
// Dots spread around the scene tint and clamp to [0,1].
double dot_value(const SceneSpec& spec, std::uint64_t seed, int layer, long long u, long long v, int channel) {
    const long long bu = floordiv(u, spec.dot_size);
    const long long bv = floordiv(v, spec.dot_size);
    std::uint64_t h = mix64(seed);
    h = hash_combine(h, static_cast<std::uint64_t>(layer) + 1);
    h = hash_combine(h, static_cast<std::uint64_t>(bu + (1ll << 32)));
    h = hash_combine(h, static_cast<std::uint64_t>(bv + (1ll << 32)));
    h = hash_combine(h, static_cast<std::uint64_t>(channel));
    const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
    const double v01 = spec.tint[channel] + spec.tint_amplitude * (2.0 * unit - 1.0);
    return v01 < 0.0 ? 0.0 : (v01 > 1.0 ? 1.0 : v01);
}

struct SplatWinner {
    double d = -1.0;
    int layer = -1;
    long long u = std::numeric_limits<long long>::min();

    bool beat_by(double nd, int nlayer, long long nu) const {
        if (nd != d) return nd > d;
        if (nlayer != layer) return nlayer > layer;
        return nu > u;
    }
};

void check_disparity(double d, int max_disp) {
    if (!std::isfinite(d) || d < 0.0 || d >= static_cast<double>(max_disp))
        throw ConfigError("scene disparity " + std::to_string(d) + " outside [0, " + std::to_string(max_disp) + ")");
}

} // namespace

StereoSample generate_rds(std::uint64_t seed, int height, int width, int max_disp, const SceneSpec& spec) {
    if (height < 16 || width < 16) throw ConfigError("generate_rds: height and width must be >= 16");
    if (max_disp >= width) throw ConfigError("generate_rds: max_disp must be < width");
    if (spec.dot_size < 1) throw ConfigError("generate_rds: dot_size must be >= 1");
    if (spec.background.shape != PlanarLayer::Shape::background)
        throw ConfigError("generate_rds: background layer must have background shape");

    // Layer list with the background at index 0; later indices win ties.
    std::vector<const PlanarLayer*> layers;
    layers.push_back(&spec.background);
    for (const auto& l : spec.layers) {
        if (l.shape == PlanarLayer::Shape::background)
            throw ConfigError("generate_rds: only one background layer is allowed");
        layers.push_back(&l);
    }

    StereoSample s;
    s.left_image = Tensor({3, height, width});
    s.right_image = Tensor({3, height, width});
    s.disparity_left = Tensor({height, width});
    s.disparity_right = Tensor({height, width});
    s.has_right_disparity = true;
    s.occlusion_left = BoolGrid(height, width, false);

    std::vector<int> left_layer(static_cast<size_t>(height) * static_cast<size_t>(width), 0);

    // Left view: per pixel, the visible layer is the covering one with the
    // largest disparity (nearest surface).
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            double best_d = -1.0;
            int best_l = -1;
            for (int li = 0; li < static_cast<int>(layers.size()); ++li) {
                const auto& L = *layers[static_cast<size_t>(li)];
                if (!L.contains(u, v)) continue;
                const double d = L.disparity(u, v);
                check_disparity(d, max_disp);
                if (best_l < 0 || d > best_d || (d == best_d && li > best_l)) {
                    best_d = d;
                    best_l = li;
                }
            }
            s.disparity_left(v, u) = best_d;
            left_layer[static_cast<size_t>(v) * static_cast<size_t>(width) + static_cast<size_t>(u)] = best_l;
            for (int c = 0; c < 3; ++c)
                s.left_image(c, v, u) = dot_value(spec, seed, best_l, u, v, c);
        }
    }

    // Right view: forward-splat every layer's integer surface samples and keep
    // the nearest one per pixel. The background is unbounded, so every right
    // pixel receives at least one splat.
    std::vector<SplatWinner> winner(static_cast<size_t>(height) * static_cast<size_t>(width));
    const long long u_lo = -2, u_hi = static_cast<long long>(width) + max_disp + 2;
    for (int v = 0; v < height; ++v) {
        auto* row = winner.data() + static_cast<size_t>(v) * static_cast<size_t>(width);
        for (int li = 0; li < static_cast<int>(layers.size()); ++li) {
            const auto& L = *layers[static_cast<size_t>(li)];
            for (long long u = u_lo; u < u_hi; ++u) {
                if (!L.contains(static_cast<double>(u), v)) continue;
                const double d = L.disparity(static_cast<double>(u), v);
                check_disparity(d, max_disp);
                const long long t = std::llround(static_cast<double>(u) - d);
                if (t < 0 || t >= width) continue;
                if (row[t].layer < 0 || row[t].beat_by(d, li, u)) row[t] = SplatWinner{d, li, u};
            }
        }
        for (int t = 0; t < width; ++t) {
            const auto& wn = row[t];
            if (wn.layer < 0) throw Error("generate_rds: uncovered right pixel"); // background prevents this
            s.disparity_right(v, t) = wn.d;
            for (int c = 0; c < 3; ++c)
                s.right_image(c, v, t) = dot_value(spec, seed, wn.layer, wn.u, v, c);
        }
    }

    // A left pixel is visible in both views iff it reprojects inside the right
    // image and its own dot won the splat at the landing pixel.
    for (int v = 0; v < height; ++v) {
        const auto* row = winner.data() + static_cast<size_t>(v) * static_cast<size_t>(width);
        for (int u = 0; u < width; ++u) {
            const double d = s.disparity_left(v, u);
            if (static_cast<double>(u) - d < 0.0) continue;
            const long long t = std::llround(static_cast<double>(u) - d);
            if (t < 0 || t >= width) continue;
            const int li = left_layer[static_cast<size_t>(v) * static_cast<size_t>(width) + static_cast<size_t>(u)];
            if (row[t].layer == li && row[t].u == u) s.occlusion_left.at(v, u) = 1;
        }
    }

    s.sample_id = "rds-" + std::to_string(seed);
    s.style_tag = "identity";
    return s;
}

bool DomainStyle::is_identity() const {
    return gamma == 1.0 && brightness_offset == 0.0 && contrast_scale == 1.0 && noise_sigma == 0.0 &&
           hue_rotation == 0.0;
}

void DomainStyle::validate() const {
    if (!(gamma >= 0.25 && gamma <= 4.0)) throw ConfigError("DomainStyle: gamma outside [0.25, 4]");
    if (!(contrast_scale >= 0.25 && contrast_scale <= 4.0)) throw ConfigError("DomainStyle: contrast outside [0.25, 4]");
    if (!(std::abs(brightness_offset) <= 0.5)) throw ConfigError("DomainStyle: |brightness| > 0.5");
    if (!(noise_sigma >= 0.0 && noise_sigma <= 0.2)) throw ConfigError("DomainStyle: noise_sigma outside [0, 0.2]");
    if (!(std::abs(hue_rotation) <= M_PI)) throw ConfigError("DomainStyle: |hue_rotation| > pi");
}

namespace {

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Rotation about the gray axis (1,1,1)/sqrt(3) by theta (Rodrigues).
void hue_matrix(double theta, double m[3][3]) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double a = 1.0 / 3.0;
    const double k = std::sqrt(1.0 / 3.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double outer = a * (1.0 - c);
            m[i][j] = outer + (i == j ? c : 0.0);
        }
    // cross-product term: s * [axis]_x with axis = (k,k,k)
    m[0][1] -= s * k;
    m[0][2] += s * k;
    m[1][0] += s * k;
    m[1][2] -= s * k;
    m[2][0] -= s * k;
    m[2][1] += s * k;
}

// Per-view transform. Stages with identity parameters are skipped so the
// all-identity style is a bit-exact no-op.
void style_one_view(Tensor& img, const DomainStyle& st, Rng noise_rng) {
    const int h = img.dim(1), w = img.dim(2);
    if (st.contrast_scale != 1.0)
        for (std::int64_t i = 0; i < img.size(); ++i) img[i] = 0.5 + (img[i] - 0.5) * st.contrast_scale;
    if (st.brightness_offset != 0.0)
        for (std::int64_t i = 0; i < img.size(); ++i) img[i] += st.brightness_offset;
    if (st.contrast_scale != 1.0 || st.brightness_offset != 0.0)
        for (std::int64_t i = 0; i < img.size(); ++i) img[i] = clamp01(img[i]);
    if (st.gamma != 1.0)
        for (std::int64_t i = 0; i < img.size(); ++i) img[i] = std::pow(img[i], st.gamma);
    if (st.hue_rotation != 0.0) {
        double m[3][3];
        hue_matrix(st.hue_rotation, m);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double r = img(0, y, x), g = img(1, y, x), b = img(2, y, x);
                img(0, y, x) = clamp01(m[0][0] * r + m[0][1] * g + m[0][2] * b);
                img(1, y, x) = clamp01(m[1][0] * r + m[1][1] * g + m[1][2] * b);
                img(2, y, x) = clamp01(m[2][0] * r + m[2][1] * g + m[2][2] * b);
            }
    }
    if (st.noise_sigma > 0.0)
        for (std::int64_t i = 0; i < img.size(); ++i) img[i] = clamp01(img[i] + st.noise_sigma * noise_rng.normal());
}

// Independent per-view draw centered on the requested style: each parameter's
// offset from identity is scaled by U[0.5, 1.5] (log-space for the
// multiplicative parameters), then clamped back into the documented ranges.
DomainStyle draw_view_style(const DomainStyle& base, Rng& rng) {
    DomainStyle st = base;
    st.asymmetric = false;
    st.gamma = std::clamp(std::exp(rng.uniform(0.5, 1.5) * std::log(base.gamma)), 0.25, 4.0);
    st.contrast_scale = std::clamp(std::exp(rng.uniform(0.5, 1.5) * std::log(base.contrast_scale)), 0.25, 4.0);
    st.brightness_offset = std::clamp(rng.uniform(0.5, 1.5) * base.brightness_offset, -0.5, 0.5);
    st.noise_sigma = std::clamp(rng.uniform(0.5, 1.5) * base.noise_sigma, 0.0, 0.2);
    st.hue_rotation = std::clamp(rng.uniform(0.5, 1.5) * base.hue_rotation, -M_PI, M_PI);
    return st;
}

} // namespace

StereoSample apply_style(const StereoSample& sample, const DomainStyle& style, std::uint64_t seed) {
    style.validate();
    StereoSample out = sample;
    if (style.is_identity() && !style.asymmetric) return out;

    DomainStyle left_style = style, right_style = style;
    if (style.asymmetric) {
        Rng lp = Rng::derive(seed, 2), rp = Rng::derive(seed, 3);
        left_style = draw_view_style(style, lp);
        right_style = draw_view_style(style, rp);
    }
    style_one_view(out.left_image, left_style, Rng::derive(seed, 0));
    style_one_view(out.right_image, right_style, Rng::derive(seed, 1));
    return out;
}

StereoSample apply_style_per_view(const StereoSample& sample, const DomainStyle& left_style,
                                  const DomainStyle& right_style, std::uint64_t seed) {
    left_style.validate();
    right_style.validate();
    StereoSample out = sample;
    style_one_view(out.left_image, left_style, Rng::derive(seed, 0));
    style_one_view(out.right_image, right_style, Rng::derive(seed, 1));
    return out;
}

StereoSample crop_sample(const StereoSample& sample, int y0, int x0, int height, int width) {
    const int h = sample.height(), w = sample.width();
    if (y0 < 0 || x0 < 0 || y0 + height > h || x0 + width > w)
        throw ConfigError("crop_sample: window outside the image");
    StereoSample out;
    out.left_image = Tensor({3, height, width});
    out.right_image = Tensor({3, height, width});
    out.disparity_left = Tensor({height, width});
    out.disparity_right = Tensor({height, width});
    out.has_right_disparity = sample.has_right_disparity;
    out.occlusion_left = BoolGrid(height, width);
    out.sample_id = sample.sample_id;
    out.style_tag = sample.style_tag;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.left_image(c, y, x) = sample.left_image(c, y0 + y, x0 + x);
                out.right_image(c, y, x) = sample.right_image(c, y0 + y, x0 + x);
            }
            out.disparity_left(y, x) = sample.disparity_left(y0 + y, x0 + x);
            if (sample.has_right_disparity) out.disparity_right(y, x) = sample.disparity_right(y0 + y, x0 + x);
            out.occlusion_left.at(y, x) = sample.occlusion_left.at(y0 + y, x0 + x);
        }
    return out;
}

DomainStyle draw_augment_style(const AugmentConfig& cfg, Rng& rng) {
    DomainStyle st;
    st.gamma = std::clamp(std::exp(rng.uniform(-cfg.max_log_gamma, cfg.max_log_gamma)), 0.25, 4.0);
    st.contrast_scale = std::clamp(std::exp(rng.uniform(-cfg.max_log_contrast, cfg.max_log_contrast)), 0.25, 4.0);
    st.brightness_offset = std::clamp(rng.uniform(-cfg.max_brightness, cfg.max_brightness), -0.5, 0.5);
    st.noise_sigma = std::clamp(cfg.noise_sigma, 0.0, 0.2);
    st.hue_rotation = std::clamp(rng.uniform(-cfg.max_hue, cfg.max_hue), -M_PI, M_PI);
    return st;
}

SceneSpec make_random_scene(Rng& rng, int height, int width, int max_disp, const RandomSceneOptions& opt) {
    SceneSpec spec;
    spec.dot_size = opt.dot_size;
    spec.tint_amplitude = opt.tint_amplitude;
    if (opt.random_tint) {
        for (double& t : spec.tint) t = rng.uniform(0.25, 0.75);
    }

    const auto draw_disp = [&](double lo, double hi) {
        double d = rng.uniform(lo, hi);
        if (opt.integer_disparities) d = std::floor(d);
        return d;
    };

    const int n_layers = opt.min_layers + rng.index(opt.max_layers - opt.min_layers + 1);
    const double top = static_cast<double>(max_disp) - 1.0;
    const double span = top - opt.min_gap * n_layers;

    spec.background.shape = PlanarLayer::Shape::background;
    spec.background.base = draw_disp(0.0, std::max(1.0, std::min(3.0, span)));
    double prev = spec.background.base;

    for (int i = 0; i < n_layers; ++i) {
        PlanarLayer l;
        const bool disk = rng.uniform() < 0.35;
        const double size = rng.uniform(height / 5.0, height / 2.2);
        const double cx = rng.uniform(0.15 * width, 0.85 * width);
        const double cy = rng.uniform(0.15 * height, 0.85 * height);
        if (disk) {
            l.shape = PlanarLayer::Shape::disk;
            l.cx = cx;
            l.cy = cy;
            l.radius = size / 2.0;
        } else {
            l.shape = PlanarLayer::Shape::rect;
            l.x0 = cx - size / 2.0;
            l.x1 = cx + size / 2.0;
            l.y0 = cy - size / 2.0;
            l.y1 = cy + size / 2.0;
        }
        l.ref_u = cx;
        l.ref_v = cy;

        const double remaining = top - prev - opt.min_gap * (n_layers - i);
        const double lo = prev + opt.min_gap;
        const double hi = std::max(lo + 0.5, lo + remaining / std::max(1, n_layers - i));
        l.base = std::min(draw_disp(lo, hi), top - 1.0);
        prev = l.base;

        if (rng.uniform() < opt.slope_prob) {
            l.du = rng.uniform(-opt.max_slope, opt.max_slope);
            l.dv = rng.uniform(-opt.max_slope, opt.max_slope);
        }
        spec.layers.push_back(l);
    }
    return spec;
}

} // namespace stereolab
