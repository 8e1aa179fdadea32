// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "stereolab/net.hpp"
#include "stereolab/stereo_data.hpp"

using namespace stereolab;
using namespace stereolab::testutil;

namespace {
NetworkConfig small_config() {
    NetworkConfig cfg;
    cfg.channels = 8;
    cfg.stride = 4;
    cfg.max_disp = 16;
    cfg.aggregation_channels = 4;
    return cfg;
}

Tensor random_image(int h, int w, Rng& rng) {
    Tensor img({3, h, w});
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
    return img;
}
} // namespace

TEST_CASE("extract_features is deterministic with the contracted shape") {
    const NetworkConfig cfg = small_config();
    Rng rng(1);
    const ParamSet params = make_network_params(cfg, rng);
    const Tensor img = random_image(16, 32, rng);
    const FeatureMap a = extract_features(img, params, cfg, View::left);
    const FeatureMap b = extract_features(img, params, cfg, View::left);
    CHECK(a.values.shape() == std::vector<int>{8, 4, 8});
    CHECK(a.values.vec() == b.values.vec());
    CHECK(a.stride == 4);
}

TEST_CASE("instance norm stages keep features batch-independent") {
    NetworkConfig cfg = small_config();
    cfg.in_layers = {0, 1};
    Rng rng(2);
    const ParamSet params = make_network_params(cfg, rng);
    const Tensor img = random_image(16, 16, rng);
    // IN statistics depend only on the sample itself; re-running alone or
    // alongside other samples cannot change anything in this design, so the
    // forward is simply checked for determinism here.
    const FeatureMap a = extract_features(img, params, cfg, View::left);
    const FeatureMap b = extract_features(img, params, cfg, View::left);
    for (std::int64_t i = 0; i < a.values.size(); ++i)
        CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-6));
}

TEST_CASE("zero aggregation params give uniform scores and midpoint disparity") {
    NetworkConfig cfg = small_config();
    Rng rng(3);
    ParamSet params = make_network_params(cfg, rng);
    for (auto& [name, t] : params)
        if (name.rfind("agg.", 0) == 0) t.fill(0.0);
    const Tensor img = random_image(16, 16, rng);

    StereoSample s;
    s.left_image = img;
    s.right_image = img;
    s.disparity_left = Tensor({16, 16});
    const Tensor pred = infer(s, params, cfg);
    for (std::int64_t i = 0; i < pred.size(); ++i)
        CHECK(pred[i] == doctest::Approx((cfg.max_disp - 1) / 2.0).epsilon(1e-9));
}

TEST_CASE("inference output stays inside [0, D-1]") {
    const NetworkConfig cfg = small_config();
    Rng rng(4);
    const ParamSet params = make_network_params(cfg, rng);
    StereoSample s;
    s.left_image = random_image(16, 16, rng);
    s.right_image = random_image(16, 16, rng);
    s.disparity_left = Tensor({16, 16});
    const Tensor pred = infer(s, params, cfg);
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        CHECK(pred[i] >= 0.0);
        CHECK(pred[i] <= cfg.max_disp - 1.0);
    }
}

TEST_CASE("inference is independent of key params and queue state") {
    const NetworkConfig cfg = small_config();
    Rng rng(5);
    const ParamSet params = make_network_params(cfg, rng);
    StereoSample s;
    s.left_image = random_image(16, 16, rng);
    s.right_image = random_image(16, 16, rng);
    s.disparity_left = Tensor({16, 16});
    // infer takes only the query params by signature; verify the training
    // forward with a detached key branch leaves the query-side graph intact
    Tape t;
    const TapeParams theta = put_params(t, params, false);
    ParamSet other = make_network_params(cfg, rng); // a different key encoder
    const ForwardOut a = network_forward(t, s.left_image, s.right_image, theta, nullptr, cfg);
    const Tensor pred_query_both = t.val(a.pred);
    const Tensor pred_infer = infer(s, params, cfg);
    CHECK(pred_query_both.vec() == pred_infer.vec());
}

TEST_CASE("training forward with a key encoder detaches the right branch") {
    NetworkConfig cfg = small_config();
    cfg.in_layers = {0};
    Rng rng(6);
    const ParamSet params = make_network_params(cfg, rng);
    ParamSet key = filter_prefix(params, "enc.");
    for (auto& [name, t] : key)
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] *= 0.5; // a drifted key encoder

    Tape t;
    const TapeParams theta = put_params(t, params, true);
    const Tensor li = random_image(16, 16, rng), ri = random_image(16, 16, rng);
    const ForwardOut fo = network_forward(t, li, ri, theta, &key, cfg);
    CHECK(fo.right_detached);
    CHECK(!t.requires_grad(fo.features_right));
    CHECK(t.requires_grad(fo.features_left));
    CHECK(fo.in_left_ids.size() == 1);
    CHECK(fo.in_right_values.size() == 1);

    Tensor gt({16, 16});
    gt.fill(2.0);
    BoolGrid valid(16, 16, true);
    const int loss = t.smooth_l1(fo.pred, gt, valid, 1.0, cfg.max_disp);
    t.backward(loss);
    // gradients exist on query params
    double norm = 0.0;
    const Tensor& g = t.grad(theta.at("enc.conv0.w"));
    for (std::int64_t i = 0; i < g.size(); ++i) norm += g[i] * g[i];
    CHECK(norm > 0.0);
}

TEST_CASE("end-to-end gradients match finite differences (8x16x16)") {
    NetworkConfig cfg;
    cfg.channels = 4;
    cfg.stride = 4;
    cfg.max_disp = 8;
    cfg.aggregation_channels = 2;
    cfg.in_layers = {0};
    Rng rng(7);
    const ParamSet params = make_network_params(cfg, rng);
    const Tensor li = random_image(16, 16, rng), ri = random_image(16, 16, rng);
    Tensor gt({16, 16});
    for (std::int64_t i = 0; i < gt.size(); ++i) gt[i] = rng.uniform(0, 6);
    BoolGrid valid(16, 16, true);

    // pack selected parameters as fd inputs; the rest stay fixed
    const std::vector<std::string> names{"enc.conv0.w", "enc.conv2.w", "agg.conv0.w", "agg.conv1.b"};
    std::vector<Tensor> inputs;
    for (const auto& n : names) inputs.push_back(params.at(n));
    inputs.push_back(li); // input-pixel gradients too

    auto build = [&](Tape& t, const std::vector<int>& ids) {
        ParamSet rest = params;
        TapeParams tp;
        for (size_t i = 0; i < names.size(); ++i) {
            tp.ids[names[i]] = ids[i];
            rest.erase(names[i]);
        }
        const TapeParams fixed = put_params(t, rest, false);
        for (const auto& [n, id] : fixed.ids) tp.ids[n] = id;

        const int li_id = ids[names.size()];
        const int ri_id = t.constant(ri);
        const EncoderOut le = encode(t, li_id, tp, cfg);
        const EncoderOut re = encode(t, ri_id, tp, cfg);
        const DisparityHeadOut head = disparity_head(t, le.features, re.features, li_id, ri_id, tp, cfg);
        return t.smooth_l1(head.pred, gt, valid, 1.0, cfg.max_disp);
    };
    fd_check(inputs, build, 1e-5, 2e-5, 1e-9);
}

TEST_CASE("rgb volume variant runs and differentiates") {
    NetworkConfig cfg;
    cfg.channels = 4;
    cfg.stride = 4;
    cfg.max_disp = 8;
    cfg.aggregation_channels = 2;
    cfg.volume_kind = VolumeKind::rgb;
    Rng rng(8);
    const ParamSet params = make_network_params(cfg, rng);
    REQUIRE(params.count("agg.rgb.w") == 1);
    const Tensor li = random_image(16, 16, rng), ri = random_image(16, 16, rng);
    Tensor gt({16, 16});
    gt.fill(1.0);
    BoolGrid valid(16, 16, true);

    std::vector<Tensor> inputs{params.at("agg.rgb.w")};
    auto build = [&](Tape& t, const std::vector<int>& ids) {
        ParamSet rest = params;
        rest.erase("agg.rgb.w");
        TapeParams tp = put_params(t, rest, false);
        tp.ids["agg.rgb.w"] = ids[0];
        const int li_id = t.constant(li), ri_id = t.constant(ri);
        const EncoderOut le = encode(t, li_id, tp, cfg);
        const EncoderOut re = encode(t, ri_id, tp, cfg);
        const DisparityHeadOut head = disparity_head(t, le.features, re.features, li_id, ri_id, tp, cfg);
        return t.smooth_l1(head.pred, gt, valid, 1.0, cfg.max_disp);
    };
    fd_check(inputs, build, 1e-5, 2e-5, 1e-9);
}

TEST_CASE("total loss recovers the baseline when the lambdas vanish") {
    Tape t;
    const int disp = t.scalar(1.25), scf = t.scalar(7.0), ssw = t.scalar(3.0);
    TotalLossConfig cfg;
    cfg.lambda_scf = 0.0;
    cfg.lambda_ssw = 0.0;
    CHECK(t.val(total_loss(t, disp, scf, ssw, cfg))(0) == 1.25);

    cfg.lambda_scf = 1.0;
    cfg.lambda_ssw = 0.1;
    CHECK(t.val(total_loss(t, disp, scf, ssw, cfg))(0) == doctest::Approx(1.25 + 7.0 + 0.3));
}

TEST_CASE("horizontal shift equivariance of the disparity head") {
    // shifting both inputs right by one stride shifts the valid interior of
    // the prediction by the same amount (boundary band excluded)
    NetworkConfig cfg = small_config();
    Rng rng(9);
    const ParamSet params = make_network_params(cfg, rng);
    const int h = 16, w = 64, s = cfg.stride;
    Tensor base = random_image(h + 8, w + s, rng); // larger canvas, crop windows

    auto crop = [&](int x0) {
        Tensor img({3, h, w});
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) img(c, y, x) = base(c, y + 4, x + x0);
        return img;
    };

    StereoSample s0, s1;
    s0.left_image = crop(s);
    s0.right_image = crop(s); // zero-disparity content
    s0.disparity_left = Tensor({h, w});
    s1.left_image = crop(0);
    s1.right_image = crop(0);
    s1.disparity_left = Tensor({h, w});

    const Tensor p0 = infer(s0, params, cfg);
    const Tensor p1 = infer(s1, params, cfg);
    // s1 window content equals s0 shifted right by s pixels
    int checked = 0;
    const int margin = 24; // clear of the receptive-field boundary band
    for (int y = 4; y < h - 4; ++y)
        for (int x = margin; x + s < w - margin; ++x) {
            CHECK(std::abs(p1(y, x + s) - p0(y, x)) < 0.1);
            ++checked;
        }
    CHECK(checked > 0);
}
