// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <doctest.h>

#include <functional>
#include <vector>

#include "stereolab/autodiff.hpp"
#include "stereolab/rng.hpp"

namespace stereolab::testutil {

using GraphBuilder = std::function<int(Tape&, const std::vector<int>&)>;

inline double eval_graph(const std::vector<Tensor>& inputs, const GraphBuilder& build) {
    Tape t;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) ids.push_back(t.constant(in));
    return t.val(build(t, ids))(0);
}

/// Central finite differences against the tape gradients, every element of
/// every input.
inline void fd_check(std::vector<Tensor> inputs, const GraphBuilder& build, double step = 1e-5, double rtol = 1e-5,
                     double atol = 1e-8) {
    Tape t;
    std::vector<int> ids;
    for (const auto& in : inputs) ids.push_back(t.leaf(in, true));
    const int loss = build(t, ids);
    t.backward(loss);

    for (size_t k = 0; k < inputs.size(); ++k) {
        const Tensor analytic = t.grad(ids[k]);
        for (std::int64_t j = 0; j < inputs[k].size(); ++j) {
            const double orig = inputs[k][j];
            inputs[k][j] = orig + step;
            const double fp = eval_graph(inputs, build);
            inputs[k][j] = orig - step;
            const double fm = eval_graph(inputs, build);
            inputs[k][j] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double a = analytic[j];
            const double err = std::abs(a - fd);
            const double bound = atol + rtol * std::max(std::abs(a), std::abs(fd));
            if (err > bound) {
                CAPTURE(k);
                CAPTURE(j);
                CAPTURE(a);
                CAPTURE(fd);
                CHECK(err <= bound);
                return;
            }
        }
    }
    CHECK(true);
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

} // namespace stereolab::testutil
