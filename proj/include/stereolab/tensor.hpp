// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stereolab/error.hpp"

namespace stereolab {

/// Dense row-major tensor of doubles, rank <= 4. Double precision throughout:
/// the gradient checks and bit-reproducibility contracts leave no room for
/// float drift at this scale.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        v_.assign(static_cast<size_t>(count(shape_)), 0.0);
    }

    static Tensor full(std::vector<int> shape, double value) {
        Tensor t(std::move(shape));
        for (auto& x : t.v_) x = value;
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    double& operator[](std::int64_t i) { return v_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return v_[static_cast<size_t>(i)]; }

    double& operator()(int a) { return v_[static_cast<size_t>(a)]; }
    double operator()(int a) const { return v_[static_cast<size_t>(a)]; }

    double& operator()(int a, int b) { return v_[idx2(a, b)]; }
    double operator()(int a, int b) const { return v_[idx2(a, b)]; }

    double& operator()(int a, int b, int c) { return v_[idx3(a, b, c)]; }
    double operator()(int a, int b, int c) const { return v_[idx3(a, b, c)]; }

    double& operator()(int a, int b, int c, int d) { return v_[idx4(a, b, c, d)]; }
    double operator()(int a, int b, int c, int d) const { return v_[idx4(a, b, c, d)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double x) {
        for (auto& v : v_) v = x;
    }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

private:
    size_t idx2(int a, int b) const {
        assert(rank() == 2);
        return static_cast<size_t>(a) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(b);
    }
    size_t idx3(int a, int b, int c) const {
        assert(rank() == 3);
        return (static_cast<size_t>(a) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(b)) *
                   static_cast<size_t>(shape_[2]) +
               static_cast<size_t>(c);
    }
    size_t idx4(int a, int b, int c, int d) const {
        assert(rank() == 4);
        return ((static_cast<size_t>(a) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(b)) *
                    static_cast<size_t>(shape_[2]) +
                static_cast<size_t>(c)) *
                   static_cast<size_t>(shape_[3]) +
               static_cast<size_t>(d);
    }

    std::vector<int> shape_;
    std::vector<double> v_;
};

/// H x W boolean grid (stored as bytes).
struct BoolGrid {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> v;

    BoolGrid() = default;
    BoolGrid(int height, int width, bool init = false)
        : h(height), w(width), v(static_cast<size_t>(height) * static_cast<size_t>(width), init ? 1 : 0) {}

    std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)]; }
    std::uint8_t at(int y, int x) const {
        return v[static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)];
    }
    std::int64_t count_true() const {
        std::int64_t n = 0;
        for (auto b : v) n += b ? 1 : 0;
        return n;
    }
};

} // namespace stereolab
