// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fd_check.hpp"
#include "stereolab/error.hpp"
#include "stereolab/scf.hpp"

using namespace stereolab;
using namespace stereolab::testutil;

TEST_CASE("momentum update follows the moving average") {
    ParamSet theta;
    theta["w"] = Tensor::full({1}, 1.0);

    SUBCASE("m = 0 copies the query") {
        auto pair = make_momentum_pair(theta, 0.0);
        pair.query_params["w"](0) = 5.0;
        momentum_update(pair);
        CHECK(pair.key_params["w"](0) == 5.0);
        CHECK(pair.iteration == 1);
    }
    SUBCASE("m = 1 freezes the key") {
        auto pair = make_momentum_pair(theta, 1.0);
        pair.query_params["w"](0) = 5.0;
        momentum_update(pair);
        CHECK(pair.key_params["w"](0) == 1.0);
    }
    SUBCASE("scalar example") {
        auto pair = make_momentum_pair(theta, 0.9);
        pair.key_params["w"](0) = 0.0;
        pair.query_params["w"](0) = 1.0;
        momentum_update(pair);
        CHECK(pair.key_params["w"](0) == doctest::Approx(0.1));
        CHECK(pair.query_params["w"](0) == 1.0); // theta untouched
    }
    SUBCASE("initialization sets eta equal to theta") {
        const auto pair = make_momentum_pair(theta, 0.5);
        CHECK(pair.key_params.at("w")(0) == 1.0);
        CHECK(pair.iteration == 0);
    }
    SUBCASE("shape mismatch is rejected") {
        auto pair = make_momentum_pair(theta, 0.5);
        pair.key_params["w"] = Tensor({2});
        CHECK_THROWS_AS(momentum_update(pair), ShapeError);
    }
}

TEST_CASE("negative queue is strict FIFO") {
    NegativeQueue q(2, 3);
    q.push({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
    REQUIRE(q.size() == 2);
    CHECK(q.entry(0)[0] == 2.0);
    CHECK(q.entry(1)[0] == 3.0);

    q.push({});
    CHECK(q.size() == 2);
    CHECK(q.entry(0)[0] == 2.0);

    CHECK_THROWS_AS(q.push({{1, 2}}), ShapeError);
}

TEST_CASE("interleaved queue pushes equal a replay of the last K vectors") {
    Rng rng(6);
    const int K = 13;
    NegativeQueue q(K, 2);
    std::vector<std::vector<double>> all;
    for (int round = 0; round < 9; ++round) {
        std::vector<std::vector<double>> batch;
        const int n = rng.index(6);
        for (int i = 0; i < n; ++i) {
            batch.push_back({rng.normal(), rng.normal()});
            all.push_back(batch.back());
        }
        q.push(batch);
    }
    const int expect = std::min<int>(K, static_cast<int>(all.size()));
    REQUIRE(q.size() == expect);
    for (int i = 0; i < expect; ++i) CHECK(q.entry(i) == all[all.size() - static_cast<size_t>(expect) + static_cast<size_t>(i)]);
}

namespace {
FeatureMap random_map(int c, int h, int w, int stride, Rng& rng, View view = View::right) {
    FeatureMap fm;
    fm.values = random_tensor({c, h, w}, rng);
    fm.stride = stride;
    fm.view = view;
    return fm;
}
} // namespace

TEST_CASE("sample_negatives: count, exclusion, and uniformity at a corner") {
    Rng rng(7);
    FeatureMap right = random_map(4, 16, 16, 4, rng);
    ScfConfig cfg; // N = 60, window 50 px -> 13x13 cells

    SUBCASE("interior: N distinct cells, match and neighbors excluded") {
        Rng r2(8);
        const auto s = sample_negatives(right, {8, 8}, cfg, r2);
        CHECK(s.coords.size() == 60);
        CHECK(!s.with_replacement);
        std::set<std::pair<int, int>> seen;
        for (const auto& c : s.coords) {
            CHECK(seen.insert(c).second); // distinct
            CHECK(!(c.second == 8 && std::abs(c.first - 8) <= 1));
            CHECK(std::abs(c.first - 8) <= 6);
            CHECK(std::abs(c.second - 8) <= 6);
        }
    }

    SUBCASE("corner: clamped window, replacement flagged, uniform draws") {
        // rows/cols 0..6 minus {(0,0),(1,0)}: 47 candidates < N = 60
        Rng r2(9);
        std::map<std::pair<int, int>, long> counts;
        const int draws = 10000;
        long total = 0;
        for (int i = 0; i < draws; ++i) {
            const auto s = sample_negatives(right, {0, 0}, cfg, r2);
            CHECK(s.with_replacement);
            REQUIRE(s.coords.size() == 60);
            for (const auto& c : s.coords) {
                ++counts[c];
                ++total;
            }
        }
        REQUIRE(counts.size() == 47);
        const double expected = static_cast<double>(total) / 47.0;
        double chi2 = 0.0;
        for (const auto& [c, n] : counts) {
            const double d = static_cast<double>(n) - expected;
            chi2 += d * d / expected;
        }
        // p ~ 5e-4 critical value for df = 46 (Wilson-Hilferty)
        const double df = 46.0, z = 3.29;
        const double crit = df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3.0);
        CHECK(chi2 < crit);
    }
}

TEST_CASE("pixel_infonce hand values") {
    SUBCASE("equal positive and negative logits give log 2") {
        const std::vector<double> q{1.0, 0.0}, p{0.5, 0.3};
        const double l = pixel_infonce(q, p, {{0.5, 0.3}}, 1.0, false);
        CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("orthogonal negatives at tau 0.07") {
        const int n = 60;
        std::vector<double> q{1.0, 0.0, 0.0};
        std::vector<std::vector<double>> negs(n, {0.0, 1.0, 0.0});
        const double l = pixel_infonce(q, q, negs, 0.07, true);
        const double expect = std::log1p(n * std::exp(-1.0 / 0.07));
        CHECK(l == doctest::Approx(expect).epsilon(1e-9));
        CHECK(l == doctest::Approx(3.7e-5).epsilon(0.02)); // scale check
    }
    SUBCASE("no negatives collapses to zero") {
        const std::vector<double> q{0.2, 0.4};
        CHECK(pixel_infonce(q, q, {}, 0.07, true) == 0.0);
    }
    SUBCASE("zero vector under normalization is a degenerate-feature error") {
        const std::vector<double> q{0.0, 0.0};
        CHECK_THROWS(pixel_infonce(q, q, {}, 0.07, true));
    }
    SUBCASE("loss decreases strictly as the positive aligns") {
        const std::vector<double> q{1.0, 0.0};
        const std::vector<std::vector<double>> negs{{0.3, 0.4}, {-0.2, 0.1}};
        double prev = std::numeric_limits<double>::infinity();
        for (double a : {0.0, 0.3, 0.8, 1.5}) {
            const double l = pixel_infonce(q, {a, 0.5}, negs, 0.5, false);
            CHECK(l < prev);
            prev = l;
        }
    }
    SUBCASE("paper-literal denominator omits the positive") {
        const std::vector<double> q{1.0, 0.0}, p{0.8, 0.1};
        const std::vector<std::vector<double>> negs{{0.1, 0.9}};
        const double standard = pixel_infonce(q, p, negs, 0.25, false, InfoNceDenominator::standard);
        const double literal = pixel_infonce(q, p, negs, 0.25, false, InfoNceDenominator::paper_literal);
        // z+ = 3.2, zn = 0.4: standard = lse(3.2, 0.4) - 3.2; literal = 0.4 - 3.2
        CHECK(standard == doctest::Approx(std::log(std::exp(3.2) + std::exp(0.4)) - 3.2).epsilon(1e-12));
        CHECK(literal == doctest::Approx(-2.8).epsilon(1e-12));
        CHECK(standard >= 0.0);
    }
}

namespace {
PositivePairSet interior_pairs_4x4() {
    PositivePairSet ps;
    ps.stride = 1;
    ps.pairs = {{2, 1, 1, 1}, {1, 2, 1, 2}, {2, 3, 2, 3}};
    return ps;
}
} // namespace

TEST_CASE("scf_loss equals an independent full-window oracle") {
    // Window covers the whole 4x4 map and N equals the candidate count, so
    // the negative set is deterministic: every cell except the key and its
    // horizontal neighbors. The oracle never touches the sampler.
    Rng rng(11);
    FeatureMap left = random_map(8, 4, 4, 1, rng, View::left);
    FeatureMap right = random_map(8, 4, 4, 1, rng);
    const PositivePairSet ps = interior_pairs_4x4();

    ScfConfig cfg;
    cfg.window = 9.0;
    cfg.window_is_pixels = false;
    cfg.negatives_per_query = 13; // 16 cells - key - two neighbors
    cfg.queue_capacity = 8;
    NegativeQueue queue(8, 8);
    queue.push({std::vector<double>(8, 0.25), std::vector<double>(8, -0.5)});

    const auto got = scf_loss(left, right, ps, queue, cfg, Rng(123));

    auto cell = [](const Tensor& m, int u, int v) {
        std::vector<double> out(static_cast<size_t>(m.dim(0)));
        for (int c = 0; c < m.dim(0); ++c) out[static_cast<size_t>(c)] = m(c, v, u);
        return out;
    };
    double expect = 0.0;
    for (const auto& pr : ps.pairs) {
        const auto q = cell(left.values, pr.query_u, pr.query_v);
        const auto p = cell(right.values, pr.key_u, pr.key_v);
        std::vector<std::vector<double>> negs;
        for (int v = 0; v < 4; ++v)
            for (int u = 0; u < 4; ++u) {
                if (v == pr.key_v && std::abs(u - pr.key_u) <= 1) continue;
                negs.push_back(cell(right.values, u, v));
            }
        REQUIRE(static_cast<int>(negs.size()) == 13);
        for (int i = 0; i < queue.size(); ++i) negs.push_back(queue.entry(i));

        // independent scalar InfoNCE
        auto unit = [](std::vector<double> v) {
            double n = 0.0;
            for (double x : v) n += x * x;
            n = std::sqrt(n);
            for (double& x : v) x /= n;
            return v;
        };
        const auto qu = unit(q), pu = unit(p);
        double zpos = 0.0;
        for (size_t i = 0; i < qu.size(); ++i) zpos += qu[i] * pu[i];
        zpos /= cfg.tau;
        double denom = std::exp(zpos);
        for (const auto& nn : negs) {
            const auto nu = unit(nn);
            double zn = 0.0;
            for (size_t i = 0; i < qu.size(); ++i) zn += qu[i] * nu[i];
            denom += std::exp(zn / cfg.tau);
        }
        expect += -std::log(std::exp(zpos) / denom);
    }
    expect /= static_cast<double>(ps.pairs.size());

    CHECK(got.value == doctest::Approx(expect).epsilon(1e-6));
    CHECK(!got.skipped);
    CHECK(got.value >= 0.0);
}

TEST_CASE("scf_loss on an empty pair set is zero and flagged") {
    Rng rng(12);
    FeatureMap left = random_map(4, 4, 4, 1, rng, View::left);
    FeatureMap right = random_map(4, 4, 4, 1, rng);
    PositivePairSet ps;
    ps.stride = 1;
    NegativeQueue queue(4, 4);
    ScfConfig cfg;
    const auto r = scf_loss(left, right, ps, queue, cfg, Rng(1));
    CHECK(r.skipped);
    CHECK(r.value == 0.0);
}

namespace {
// random rotation from composed Givens rotations
std::vector<std::vector<double>> random_rotation(int dim, Rng& rng) {
    std::vector<std::vector<double>> m(static_cast<size_t>(dim), std::vector<double>(static_cast<size_t>(dim), 0.0));
    for (int i = 0; i < dim; ++i) m[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
    for (int rep = 0; rep < 3 * dim; ++rep) {
        const int a = rng.index(dim);
        int b = rng.index(dim);
        if (a == b) b = (b + 1) % dim;
        const double th = rng.uniform(0, 2 * M_PI);
        const double c = std::cos(th), s = std::sin(th);
        for (int j = 0; j < dim; ++j) {
            const double xa = m[static_cast<size_t>(a)][static_cast<size_t>(j)];
            const double xb = m[static_cast<size_t>(b)][static_cast<size_t>(j)];
            m[static_cast<size_t>(a)][static_cast<size_t>(j)] = c * xa - s * xb;
            m[static_cast<size_t>(b)][static_cast<size_t>(j)] = s * xa + c * xb;
        }
    }
    return m;
}

Tensor rotate_map(const Tensor& map, const std::vector<std::vector<double>>& rot) {
    const int c = map.dim(0), h = map.dim(1), w = map.dim(2);
    Tensor out({c, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int i = 0; i < c; ++i) {
                double s = 0.0;
                for (int j = 0; j < c; ++j) s += rot[static_cast<size_t>(i)][static_cast<size_t>(j)] * map(j, y, x);
                out(i, y, x) = s;
            }
    return out;
}
} // namespace

TEST_CASE("scf_loss is invariant under a common orthogonal transform") {
    Rng rng(13);
    const int dim = 6;
    FeatureMap left = random_map(dim, 4, 4, 1, rng, View::left);
    FeatureMap right = random_map(dim, 4, 4, 1, rng);
    const PositivePairSet ps = interior_pairs_4x4();
    ScfConfig cfg;
    cfg.negatives_per_query = 5;
    cfg.window = 9.0;
    cfg.window_is_pixels = false;
    NegativeQueue queue(6, dim);
    queue.push({std::vector<double>{1, 0, 0, 0, 0, 0}, std::vector<double>{0, 0.5, 0, 0.5, 0, 0}});

    const auto base = scf_loss(left, right, ps, queue, cfg, Rng(77));

    const auto rot = random_rotation(dim, rng);
    FeatureMap left_r = left, right_r = right;
    left_r.values = rotate_map(left.values, rot);
    right_r.values = rotate_map(right.values, rot);
    NegativeQueue queue_r(6, dim);
    for (int i = 0; i < queue.size(); ++i) {
        std::vector<double> v(static_cast<size_t>(dim), 0.0);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b)
                v[static_cast<size_t>(a)] += rot[static_cast<size_t>(a)][static_cast<size_t>(b)] * queue.entry(i)[static_cast<size_t>(b)];
        queue_r.push({v});
    }
    const auto rotated = scf_loss(left_r, right_r, ps, queue_r, cfg, Rng(77));
    CHECK(rotated.value == doctest::Approx(base.value).epsilon(1e-6));
}

TEST_CASE("scf_loss is reproducible for a fixed rng") {
    Rng rng(14);
    FeatureMap left = random_map(5, 8, 8, 1, rng, View::left);
    FeatureMap right = random_map(5, 8, 8, 1, rng);
    PositivePairSet ps;
    ps.stride = 1;
    for (int i = 1; i < 7; ++i) ps.pairs.push_back({i, i, std::max(0, i - 1), i});
    ScfConfig cfg;
    cfg.negatives_per_query = 10;
    NegativeQueue queue(16, 5);
    queue.push({std::vector<double>(5, 0.1)});
    const auto a = scf_loss(left, right, ps, queue, cfg, Rng(5));
    const auto b = scf_loss(left, right, ps, queue, cfg, Rng(5));
    CHECK(a.value == b.value);
    CHECK(a.per_pixel.vec() == b.per_pixel.vec());
}

TEST_CASE("scf_loss gradients match finite differences") {
    Rng rng(15);
    const Tensor left = random_tensor({8, 4, 4}, rng);
    const Tensor right = random_tensor({8, 4, 4}, rng);
    const PositivePairSet ps = interior_pairs_4x4();
    ScfConfig cfg;
    cfg.negatives_per_query = 6;
    cfg.window = 7.0;
    cfg.window_is_pixels = false;
    NegativeQueue queue(4, 8);
    queue.push({std::vector<double>(8, 0.3)});

    SUBCASE("detached right (key encoder path)") {
        fd_check({left}, [&](Tape& t, const std::vector<int>& ids) {
            return scf_loss_tape(t, ids[0], -1, right, 1, ps, queue, cfg, Rng(99)).loss_id;
        });
    }
    SUBCASE("shared weights: gradients flow into both maps") {
        fd_check({left, right}, [&](Tape& t, const std::vector<int>& ids) {
            return scf_loss_tape(t, ids[0], ids[1], t.val(ids[1]), 1, ps, queue, cfg, Rng(99)).loss_id;
        });
    }
    SUBCASE("unnormalized mode") {
        ScfConfig c2 = cfg;
        c2.normalize = false;
        c2.tau = 1.0;
        fd_check({left}, [&](Tape& t, const std::vector<int>& ids) {
            return scf_loss_tape(t, ids[0], -1, right, 1, ps, queue, c2, Rng(99)).loss_id;
        });
    }
}
