// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "stereolab/error.hpp"
#include "stereolab/geometry.hpp"
#include "stereolab/stereo_data.hpp"

using namespace stereolab;

TEST_CASE("reproject shifts along the row") {
    auto r = reproject(10, 5, 3.0, 32);
    REQUIRE(r.has_value());
    CHECK(r->first == 7.0);
    CHECK(r->second == 5);

    r = reproject(10, 5, 0.0, 32);
    CHECK(r->first == 10.0);

    CHECK(!reproject(2, 5, 5.0, 32).has_value());
}

TEST_CASE("reprojection error matches hand values") {
    Tensor dl({1, 16}), dr({1, 16});
    dl(0, 10) = 4.0;
    dr(0, 6) = 4.0;
    auto f = reprojection_error(dl, dr);
    CHECK(f.valid.at(0, 10));
    CHECK(f.R(0, 10) == 0.0);

    dr(0, 6) = 7.0;
    f = reprojection_error(dl, dr);
    CHECK(f.R(0, 10) == 3.0);

    Tensor small({2, 2});
    CHECK_THROWS_AS(reprojection_error(dl, small), ShapeError);
}

TEST_CASE("matching mask uses a strict threshold") {
    Tensor dl({1, 4}), dr({1, 4});
    dl(0, 2) = 0.0;
    dr(0, 2) = 2.9;
    auto f = reprojection_error(dl, dr);
    CHECK(matching_mask(f, 3.0).M.at(0, 2)); // R = 2.9 < 3

    dr(0, 2) = 3.0;
    f = reprojection_error(dl, dr);
    CHECK(!matching_mask(f, 3.0).M.at(0, 2)); // R = 3.0, strict

    Tensor z({3, 3}), z2({3, 3});
    const auto all = matching_mask(reprojection_error(z, z2), 3.0);
    CHECK(all.M.count_true() == 9);
}

TEST_CASE("mask is monotone in delta and collapses to validity for large delta") {
    Rng rng(8);
    Tensor dl({8, 8}), dr({8, 8});
    for (std::int64_t i = 0; i < dl.size(); ++i) {
        dl[i] = std::floor(rng.uniform(0, 5));
        dr[i] = std::floor(rng.uniform(0, 5));
    }
    const auto f = reprojection_error(dl, dr);
    const auto m1 = matching_mask(f, 1.0);
    const auto m2 = matching_mask(f, 2.5);
    const auto big = matching_mask(f, 1e9);
    for (size_t i = 0; i < m1.M.v.size(); ++i) {
        if (m1.M.v[i]) CHECK(m2.M.v[i]);
        CHECK(big.M.v[i] == f.valid.v[i]);
    }
}

TEST_CASE("occlusion oracle agreement on generated scenes") {
    // Layers separated by > delta in disparity: occluded pixels fail the
    // check by at least the layer gap, visible pixels pass exactly.
    int agree = 0, total = 0;
    for (int k = 0; k < 5; ++k) {
        Rng rng(100 + static_cast<std::uint64_t>(k));
        RandomSceneOptions opt;
        opt.min_layers = 1;
        opt.max_layers = 3;
        opt.min_gap = 5.0;
        const SceneSpec spec = make_random_scene(rng, 64, 64, 40, opt);
        const StereoSample s = generate_rds(200 + static_cast<std::uint64_t>(k), 64, 64, 40, spec);
        const auto mask = matching_mask(reprojection_error(s.disparity_left, s.disparity_right), 3.0);
        for (int v = 0; v < 64; ++v)
            for (int u = 0; u < 64; ++u) {
                ++total;
                if ((mask.M.at(v, u) != 0) == (s.occlusion_left.at(v, u) != 0)) ++agree;
            }
    }
    CHECK(static_cast<double>(agree) / total >= 0.99);
}

namespace {
// Exhaustive pair enumerator, independent of collect_positive_pairs.
std::set<std::array<int, 4>> brute_force_pairs(const Tensor& dl, const MatchMask& mask, int stride) {
    std::set<std::array<int, 4>> out;
    const int fh = dl.dim(0) / stride, fw = dl.dim(1) / stride;
    for (int i = 0; i < fh; ++i)
        for (int j = 0; j < fw; ++j) {
            const int cy = i * stride + stride / 2, cx = j * stride + stride / 2;
            if (!mask.M.at(cy, cx)) continue;
            const double d = dl(cy, cx) / stride;
            const long long off = std::llround(d);
            if (std::abs(d - static_cast<double>(off)) > 0.5) continue;
            const long long ku = j - off;
            if (ku < 0 || ku >= fw) continue;
            out.insert({j, i, static_cast<int>(ku), i});
        }
    return out;
}
} // namespace

TEST_CASE("positive pairs: identity at stride 1 with zero disparity") {
    Tensor dl({4, 4});
    MatchMask mask;
    mask.M = BoolGrid(4, 4, true);
    const auto ps = collect_positive_pairs(dl, mask, 1);
    REQUIRE(ps.pairs.size() == 16);
    for (const auto& p : ps.pairs) {
        CHECK(p.query_u == p.key_u);
        CHECK(p.query_v == p.key_v);
    }
}

TEST_CASE("positive pairs: stride 4 with disparity 8 gives a 2-column offset") {
    Tensor dl({8, 16});
    dl.fill(8.0);
    MatchMask mask;
    mask.M = BoolGrid(8, 16, true);
    const auto ps = collect_positive_pairs(dl, mask, 4);
    CHECK(!ps.pairs.empty());
    for (const auto& p : ps.pairs) CHECK(p.key_u == p.query_u - 2);
}

TEST_CASE("positive pairs equal the exhaustive enumerator on random fields") {
    Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor dl({16, 16});
        MatchMask mask;
        mask.M = BoolGrid(16, 16);
        for (std::int64_t i = 0; i < dl.size(); ++i) dl[i] = rng.uniform(0, 10);
        for (auto& b : mask.M.v) b = rng.uniform() < 0.7 ? 1 : 0;
        for (int stride : {1, 2, 4}) {
            const auto got = collect_positive_pairs(dl, mask, stride);
            std::set<std::array<int, 4>> got_set;
            for (const auto& p : got.pairs) got_set.insert({p.query_u, p.query_v, p.key_u, p.key_v});
            CHECK(got_set == brute_force_pairs(dl, mask, stride));
            CHECK(got_set.size() == got.pairs.size()); // no duplicates
        }
    }
}

TEST_CASE("uniqueness fallback marks doubly-mapped columns") {
    // pixels 6 (d=2) and 8 (d=4) both land on right column 4; the larger
    // disparity wins, the other is flagged
    Tensor dl({1, 12});
    dl(0, 6) = 2.0;
    dl(0, 8) = 4.0;
    const BoolGrid m = uniqueness_mask(dl);
    CHECK(!m.at(0, 6));
    CHECK(m.at(0, 8));
    CHECK(m.at(0, 2)); // d=0 maps to its own column, uncontested
}
