// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/ssw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stereolab/error.hpp"

namespace stereolab {

NormalizedFeature instance_normalize(const Tensor& x, double epsilon, int layer_index) {
    if (x.rank() != 2) throw ShapeError("instance_normalize expects C x HW");
    if (x.dim(1) < 2) throw ShapeError("instance_normalize requires HW >= 2");
    if (!(epsilon > 0.0)) throw ConfigError("instance_normalize: epsilon must be positive");
    const int c = x.dim(0), n = x.dim(1);

    NormalizedFeature f;
    f.layer_index = layer_index;
    f.x_hat = Tensor({c, n});
    for (int i = 0; i < c; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var /= n; // population variance
        const double inv = 1.0 / std::sqrt(var + epsilon);
        for (int j = 0; j < n; ++j) f.x_hat(i, j) = (x(i, j) - mean) * inv;
    }
    return f;
}

Tensor covariance(const NormalizedFeature& f) {
    const int c = f.x_hat.dim(0), n = f.x_hat.dim(1);
    Tensor sigma({c, c});
    for (int i = 0; i < c; ++i)
        for (int j = i; j < c; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += f.x_hat(i, k) * f.x_hat(j, k);
            s /= n;
            sigma(i, j) = s;
            sigma(j, i) = s;
        }
    return sigma;
}

Tensor variance_matrix(const std::vector<Tensor>& cov_left_list, const std::vector<Tensor>& cov_right_list) {
    if (cov_left_list.size() != cov_right_list.size())
        throw ShapeError("variance_matrix: list length mismatch");
    if (cov_left_list.empty()) throw ShapeError("variance_matrix: empty input");
    const int c = cov_left_list[0].dim(0);
    Tensor v({c, c});
    for (size_t n = 0; n < cov_left_list.size(); ++n) {
        const Tensor& l = cov_left_list[n];
        const Tensor& r = cov_right_list[n];
        if (!l.same_shape(v) || !r.same_shape(v)) throw ShapeError("variance_matrix: covariance shape mismatch");
        for (std::int64_t i = 0; i < v.size(); ++i) {
            const double mu = 0.5 * (l[i] + r[i]);
            const double dl = l[i] - mu, dr = r[i] - mu;
            v[i] += dl * dl + dr * dr;
        }
    }
    const double scale = 1.0 / (2.0 * static_cast<double>(cov_left_list.size()));
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] *= scale;
    return v;
}

std::vector<int> kmeans_1d(const std::vector<double>& values, int k) {
    const int n = static_cast<int>(values.size());
    if (k < 1) throw ConfigError("kmeans_1d: k must be >= 1");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[static_cast<size_t>(a)] < values[static_cast<size_t>(b)];
    });

    const int keff = std::min(k, n);
    std::vector<double> s(static_cast<size_t>(n) + 1, 0.0), s2(static_cast<size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        const double x = values[static_cast<size_t>(order[static_cast<size_t>(i)])];
        s[static_cast<size_t>(i) + 1] = s[static_cast<size_t>(i)] + x;
        s2[static_cast<size_t>(i) + 1] = s2[static_cast<size_t>(i)] + x * x;
    }
    auto cost = [&](int i, int j) { // within-cluster SSE over sorted [i, j)
        const double sum = s[static_cast<size_t>(j)] - s[static_cast<size_t>(i)];
        const double sq = s2[static_cast<size_t>(j)] - s2[static_cast<size_t>(i)];
        return sq - sum * sum / static_cast<double>(j - i);
    };

    // D[m][j]: optimal cost of splitting the first j sorted values into m groups.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(static_cast<size_t>(keff) + 1,
                                        std::vector<double>(static_cast<size_t>(n) + 1, inf));
    std::vector<std::vector<int>> split(static_cast<size_t>(keff) + 1, std::vector<int>(static_cast<size_t>(n) + 1, 0));
    dp[0][0] = 0.0;
    for (int m = 1; m <= keff; ++m)
        for (int j = m; j <= n; ++j)
            for (int i = m - 1; i < j; ++i) {
                if (dp[static_cast<size_t>(m) - 1][static_cast<size_t>(i)] == inf) continue;
                const double c = dp[static_cast<size_t>(m) - 1][static_cast<size_t>(i)] + cost(i, j);
                if (c < dp[static_cast<size_t>(m)][static_cast<size_t>(j)]) {
                    dp[static_cast<size_t>(m)][static_cast<size_t>(j)] = c;
                    split[static_cast<size_t>(m)][static_cast<size_t>(j)] = i;
                }
            }

    std::vector<int> assign(static_cast<size_t>(n), 0);
    int j = n;
    for (int m = keff; m >= 1; --m) {
        const int i = split[static_cast<size_t>(m)][static_cast<size_t>(j)];
        for (int t = i; t < j; ++t) assign[static_cast<size_t>(order[static_cast<size_t>(t)])] = m - 1;
        j = i;
    }
    return assign;
}

BoolGrid select_mask(const Tensor& V, int clusters) {
    if (V.rank() != 2 || V.dim(0) != V.dim(1)) throw ShapeError("select_mask expects a square matrix");
    if (clusters < 2) throw ConfigError("select_mask: clusters must be >= 2");
    const int c = V.dim(0);
    BoolGrid mask(c, c, false);

    std::vector<double> vals;
    std::vector<std::pair<int, int>> coords;
    for (int i = 0; i < c; ++i)
        for (int j = i + 1; j < c; ++j) {
            vals.push_back(V(i, j));
            coords.emplace_back(i, j);
        }
    if (vals.empty()) return mask;

    const double vmin = *std::min_element(vals.begin(), vals.end());
    const double vmax = *std::max_element(vals.begin(), vals.end());
    if (vmin == vmax) {
        // Degenerate: no variation between channel pairs. Select entries more
        // than two standard deviations above the mean; with all values equal
        // that is the empty set.
        return mask;
    }

    const auto assign = kmeans_1d(vals, clusters);
    const int top = *std::max_element(assign.begin(), assign.end());
    double top_min = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < vals.size(); ++t)
        if (assign[t] == top) top_min = std::min(top_min, vals[t]);
    for (size_t t = 0; t < vals.size(); ++t) {
        // equal variance values always get equal decisions
        if (vals[t] >= top_min) {
            mask.at(coords[t].first, coords[t].second) = 1;
            mask.at(coords[t].second, coords[t].first) = 1;
        }
    }
    return mask;
}

CovarianceStats::CovarianceStats(int channels, int cluster_count)
    : channels_(channels), cluster_count_(cluster_count), v_mean_({channels, channels}),
      mask_(channels, channels, false) {}

void CovarianceStats::accumulate(const Tensor& cov_left, const Tensor& cov_right) {
    if (cov_left.dim(0) != channels_ || !cov_left.same_shape(cov_right))
        throw ShapeError("CovarianceStats::accumulate: shape mismatch");
    ++count_;
    const double w = 1.0 / static_cast<double>(count_);
    for (std::int64_t i = 0; i < v_mean_.size(); ++i) {
        const double mu = 0.5 * (cov_left[i] + cov_right[i]);
        const double dl = cov_left[i] - mu, dr = cov_right[i] - mu;
        const double v = 0.5 * (dl * dl + dr * dr); // per-sample Eq. contribution
        v_mean_[i] += (v - v_mean_[i]) * w;
    }
}

void CovarianceStats::refresh_mask() {
    if (count_ == 0) return;
    mask_ = select_mask(v_mean_, cluster_count_);
    mask_ready_ = true;
}

SswLossResult ssw_loss(const std::vector<NormalizedFeature>& normalized_left,
                       const std::vector<CovarianceStats>& stats) {
    SswLossResult out;
    if (normalized_left.empty()) return out;
    if (normalized_left.size() != stats.size()) throw ShapeError("ssw_loss: layer list mismatch");
    for (const auto& st : stats)
        if (!st.mask_ready()) return out; // not ready yet

    double total = 0.0;
    for (size_t g = 0; g < normalized_left.size(); ++g) {
        const Tensor sigma = covariance(normalized_left[g]);
        const auto& m = stats[g].mask();
        const int c = sigma.dim(0);
        if (m.h != c) throw ShapeError("ssw_loss: mask/feature channel mismatch");
        double layer = 0.0;
        for (int i = 0; i < c; ++i)
            for (int j = i + 1; j < c; ++j) // strict upper triangle
                if (m.at(i, j)) layer += std::abs(sigma(i, j));
        total += layer;
    }
    out.value = total / static_cast<double>(normalized_left.size());
    out.ready = true;
    return out;
}

} // namespace stereolab
