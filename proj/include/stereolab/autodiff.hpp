// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "stereolab/tensor.hpp"

namespace stereolab {

/// Reverse-mode tape over Tensor values. Nodes are appended in topological
/// order; backward() walks them in reverse. The networks here are small, so
/// clarity and bit-exact determinism win over throughput.
class Tape {
public:
    int leaf(Tensor value, bool requires_grad);
    int constant(Tensor value) { return leaf(std::move(value), false); }
    int scalar(double v) { return constant(Tensor::full({1}, v)); }

    /// Low-level node constructor for ops defined outside this file. The
    /// backward callback reads grad(self) and accumulates into grad(parent).
    int make_node(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward);

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    Tensor& grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }
    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // -- elementwise and reductions ------------------------------------------
    int add(int a, int b);
    /// sum_i coef[i] * terms[i]; all terms share one shape.
    int weighted_sum(const std::vector<int>& terms, const std::vector<double>& coef);
    int elu(int x);
    /// scalar <x, weights>; weights is a plain tensor of the same shape.
    int inner(int x, const Tensor& weights);

    // -- network layers -------------------------------------------------------
    int conv2d(int x, int w, int b, int stride, int pad);
    int conv3d(int x, int w, int b, int sd, int sh, int sw, int pad);
    int instance_norm(int x, double eps); // CxHxW, per-channel over HxW

    // -- cost volumes ----------------------------------------------------------
    /// (C,h,w) x (C,h,w) -> (2C, levels, h, w); right shifted k columns,
    /// out-of-range zero-filled.
    int concat_volume(int left, int right, int levels);
    /// (C,h,w) x (C,h,w) -> (1, levels, h, w) per-pixel dot products.
    int corr_volume(int left, int right, int levels);

    // -- disparity head ---------------------------------------------------------
    /// (D,h,w) -> (D*f, h*f, w*f), trilinear, source = out/f (level k maps to
    /// disparity k*f exactly), clamped at the high edge.
    int upsample3(int x, int factor);
    /// (D,H,W) -> (H,W): sum_d d * softmax_d(-scores).
    int soft_argmin(int scores);
    /// Mean Huber penalty over pixels with valid && gt < d_max; returns a
    /// scalar node. *skipped set when no pixel qualifies (value 0).
    int smooth_l1(int pred, const Tensor& gt, const BoolGrid& valid, double beta, double d_max,
                  bool* skipped = nullptr);

    // -- whitening path ----------------------------------------------------------
    int reshape(int x, std::vector<int> shape); // same element count
    int gram(int x);                            // (C,N) -> (C,C) = X X^T / N
    /// sum over strict upper triangle of mask * |sigma|; scalar node.
    int masked_abs_upper(int sigma, const BoolGrid& mask);

    void backward(int root);

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::vector<int> parents;
        std::function<void(Tape&, int)> back;
        bool needs = false;
    };

    bool any_needs(const std::vector<int>& ids) const;
    std::vector<Node> nodes_;
};

} // namespace stereolab
