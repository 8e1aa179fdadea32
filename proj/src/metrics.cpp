// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/metrics.hpp"

#include <cmath>

#include "stereolab/error.hpp"

namespace stereolab {

namespace {

void load_vec(const Tensor& map, int u, int v, std::vector<double>& out) {
    const int c = map.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(map.dim(1)) * map.dim(2);
    const double* p = map.data() + (static_cast<std::int64_t>(v) * map.dim(2) + u);
    out.resize(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) out[static_cast<size_t>(i)] = p[static_cast<std::int64_t>(i) * plane];
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

double cosine_consistency(const FeatureMap& left, const FeatureMap& right, const PositivePairSet& pairs) {
    if (pairs.pairs.empty()) throw Error("cosine_consistency: undefined over an empty pair set");
    if (!left.values.same_shape(right.values)) throw ShapeError("cosine_consistency: feature shape mismatch");
    std::vector<double> q, k;
    double total = 0.0;
    for (const auto& p : pairs.pairs) {
        load_vec(left.values, p.query_u, p.query_v, q);
        load_vec(right.values, p.key_u, p.key_v, k);
        const double nq = norm(q), nk = norm(k);
        if (nq < 1e-12 || nk < 1e-12) throw Error("cosine_consistency: zero feature vector at a paired location");
        double dot = 0.0;
        for (size_t i = 0; i < q.size(); ++i) dot += q[i] * k[i];
        total += dot / (nq * nk);
    }
    return total / static_cast<double>(pairs.pairs.size());
}

std::vector<double> per_channel_inconsistency(const FeatureMap& left, const FeatureMap& right,
                                              const PositivePairSet& pairs, bool normalize) {
    if (pairs.pairs.empty()) throw Error("per_channel_inconsistency: undefined over an empty pair set");
    if (!left.values.same_shape(right.values)) throw ShapeError("per_channel_inconsistency: feature shape mismatch");
    const int c = left.channels();
    std::vector<double> acc(static_cast<size_t>(c), 0.0);
    std::vector<double> q, k;
    for (const auto& p : pairs.pairs) {
        load_vec(left.values, p.query_u, p.query_v, q);
        load_vec(right.values, p.key_u, p.key_v, k);
        if (normalize) {
            const double nq = norm(q), nk = norm(k);
            if (nq < 1e-12 || nk < 1e-12)
                throw Error("per_channel_inconsistency: zero feature vector at a paired location");
            for (int i = 0; i < c; ++i) {
                q[static_cast<size_t>(i)] /= nq;
                k[static_cast<size_t>(i)] /= nk;
            }
        }
        for (int i = 0; i < c; ++i) acc[static_cast<size_t>(i)] += std::abs(q[static_cast<size_t>(i)] - k[static_cast<size_t>(i)]);
    }
    for (auto& x : acc) x /= static_cast<double>(pairs.pairs.size());
    return acc;
}

long count_valid(const Tensor& gt, const BoolGrid& valid) {
    long n = 0;
    for (int y = 0; y < gt.dim(0); ++y)
        for (int x = 0; x < gt.dim(1); ++x)
            if (valid.at(y, x) && std::isfinite(gt(y, x))) ++n;
    return n;
}

double threshold_error_rate(const Tensor& pred, const Tensor& gt, const BoolGrid& valid, double t) {
    if (!pred.same_shape(gt)) throw ShapeError("threshold_error_rate: shape mismatch");
    if (!(t > 0.0)) throw ConfigError("threshold_error_rate: threshold must be positive");
    long n = 0, bad = 0;
    for (int y = 0; y < gt.dim(0); ++y)
        for (int x = 0; x < gt.dim(1); ++x) {
            if (!valid.at(y, x) || !std::isfinite(gt(y, x))) continue;
            ++n;
            if (std::abs(pred(y, x) - gt(y, x)) > t) ++bad;
        }
    if (n == 0) throw Error("threshold_error_rate: no valid pixels");
    return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

ConsistencyResult stereo_consistency(const FeatureMap& left, const FeatureMap& right, const StereoSample& sample,
                                     double delta, bool normalize) {
    ConsistencyResult out;
    if (!sample.has_right_disparity)
        throw DataError("stereo_consistency: right disparity required for the reprojection check");
    const ReprojectionField field = reprojection_error(sample.disparity_left, sample.disparity_right);
    const MatchMask mask = matching_mask(field, delta);
    const PositivePairSet pairs = collect_positive_pairs(sample.disparity_left, mask, left.stride);
    out.pair_count = static_cast<long>(pairs.pairs.size());
    if (out.pair_count == 0) return out;
    out.masked = cosine_consistency(left, right, pairs);
    out.per_channel = per_channel_inconsistency(left, right, pairs, normalize);

    // unmasked variant: every cell with an in-bounds reprojection
    const MatchMask loose = matching_mask(field, 1e18);
    const PositivePairSet all = collect_positive_pairs(sample.disparity_left, loose, left.stride);
    out.unmasked = all.pairs.empty() ? 0.0 : cosine_consistency(left, right, all);
    return out;
}

double d1(const Tensor& pred, const Tensor& gt, const BoolGrid& valid) {
    if (!pred.same_shape(gt)) throw ShapeError("d1: shape mismatch");
    long n = 0, bad = 0;
    for (int y = 0; y < gt.dim(0); ++y)
        for (int x = 0; x < gt.dim(1); ++x) {
            const double g = gt(y, x);
            if (!valid.at(y, x) || !std::isfinite(g)) continue;
            ++n;
            const double e = std::abs(pred(y, x) - g);
            if (e > 3.0 && e > 0.05 * g) ++bad;
        }
    if (n == 0) throw Error("d1: no valid pixels");
    return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

} // namespace stereolab
