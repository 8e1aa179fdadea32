// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/geometry.hpp"

#include <cmath>

#include "stereolab/error.hpp"

namespace stereolab {

std::optional<std::pair<double, int>> reproject(int u, int v, double disparity, int width) {
    const double target = static_cast<double>(u) - disparity;
    if (target < 0.0 || target > static_cast<double>(width - 1)) return std::nullopt;
    return std::make_pair(target, v);
}

ReprojectionField reprojection_error(const Tensor& disparity_left, const Tensor& disparity_right,
                                     const BoolGrid* valid_left, const BoolGrid* valid_right) {
    if (!disparity_left.same_shape(disparity_right)) throw ShapeError("reprojection_error: shape mismatch");
    const int h = disparity_left.dim(0), w = disparity_left.dim(1);

    ReprojectionField out;
    out.R = Tensor({h, w});
    out.valid = BoolGrid(h, w, false);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            if (valid_left && !valid_left->at(v, u)) continue;
            const double dl = disparity_left(v, u);
            if (!std::isfinite(dl)) continue;
            const long long uc = static_cast<long long>(u) - std::llround(dl);
            if (uc < 0 || uc >= w) continue;
            if (valid_right && !valid_right->at(v, static_cast<int>(uc))) continue;
            const double dr = disparity_right(v, static_cast<int>(uc));
            if (!std::isfinite(dr)) continue;
            out.R(v, u) = std::abs(dl - dr);
            out.valid.at(v, u) = 1;
        }
    return out;
}

MatchMask matching_mask(const ReprojectionField& field, double delta) {
    if (!(delta > 0.0)) throw ConfigError("matching_mask: delta must be positive");
    MatchMask out;
    out.delta = delta;
    out.M = BoolGrid(field.valid.h, field.valid.w, false);
    for (int v = 0; v < field.valid.h; ++v)
        for (int u = 0; u < field.valid.w; ++u)
            if (field.valid.at(v, u) && field.R(v, u) < delta) out.M.at(v, u) = 1;
    return out;
}

PositivePairSet collect_positive_pairs(const Tensor& disparity_left, const MatchMask& mask, int stride, CellRule rule,
                                       double round_tolerance) {
    const int h = disparity_left.dim(0), w = disparity_left.dim(1);
    if (stride < 1) throw ConfigError("collect_positive_pairs: stride must be >= 1");
    if (h % stride != 0 || w % stride != 0)
        throw ConfigError("collect_positive_pairs: stride must divide image dimensions");
    if (mask.M.h != h || mask.M.w != w) throw ShapeError("collect_positive_pairs: mask shape mismatch");

    const int fh = h / stride, fw = w / stride;
    PositivePairSet out;
    out.stride = stride;

    for (int i = 0; i < fh; ++i)
        for (int j = 0; j < fw; ++j) {
            const int cy = i * stride + stride / 2;
            const int cx = j * stride + stride / 2;
            bool admitted = false;
            switch (rule) {
            case CellRule::center:
                admitted = mask.M.at(cy, cx) != 0;
                break;
            case CellRule::all: {
                admitted = true;
                for (int dy = 0; dy < stride && admitted; ++dy)
                    for (int dx = 0; dx < stride && admitted; ++dx)
                        admitted = mask.M.at(i * stride + dy, j * stride + dx) != 0;
                break;
            }
            case CellRule::any: {
                for (int dy = 0; dy < stride && !admitted; ++dy)
                    for (int dx = 0; dx < stride && !admitted; ++dx)
                        admitted = mask.M.at(i * stride + dy, j * stride + dx) != 0;
                break;
            }
            }
            if (!admitted) continue;

            const double d = disparity_left(cy, cx) / static_cast<double>(stride);
            const long long off = std::llround(d);
            if (std::abs(d - static_cast<double>(off)) > round_tolerance) continue;
            const long long ku = static_cast<long long>(j) - off;
            if (ku < 0 || ku >= fw) continue;
            out.pairs.push_back(PixelPair{j, i, static_cast<int>(ku), i});
        }
    return out;
}

BoolGrid uniqueness_mask(const Tensor& disparity_left, const BoolGrid* valid_left) {
    const int h = disparity_left.dim(0), w = disparity_left.dim(1);
    BoolGrid out(h, w, false);
    std::vector<double> best(static_cast<size_t>(w));
    std::vector<int> owner(static_cast<size_t>(w));
    for (int v = 0; v < h; ++v) {
        for (int t = 0; t < w; ++t) {
            best[static_cast<size_t>(t)] = -1.0;
            owner[static_cast<size_t>(t)] = -1;
        }
        for (int u = 0; u < w; ++u) {
            if (valid_left && !valid_left->at(v, u)) continue;
            const double d = disparity_left(v, u);
            if (!std::isfinite(d)) continue;
            const long long t = static_cast<long long>(u) - std::llround(d);
            if (t < 0 || t >= w) continue;
            auto& b = best[static_cast<size_t>(t)];
            // larger disparity wins the column; ties go to the later pixel
            if (d >= b) {
                b = d;
                owner[static_cast<size_t>(t)] = u;
            }
        }
        for (int t = 0; t < w; ++t)
            if (owner[static_cast<size_t>(t)] >= 0) out.at(v, owner[static_cast<size_t>(t)]) = 1;
    }
    return out;
}

} // namespace stereolab
