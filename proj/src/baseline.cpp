// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/baseline.hpp"

#include <cmath>
#include <limits>

#include "stereolab/error.hpp"

namespace stereolab {

Tensor wta_sad_match(const StereoSample& sample, int window, int max_disp) {
    if (window < 1 || window % 2 == 0) throw ConfigError("wta_sad_match: window must be odd and >= 1");
    const int h = sample.height(), w = sample.width();
    if (max_disp < 1 || max_disp > w) throw ConfigError("wta_sad_match: bad max_disp");
    const int half = window / 2;
    const Tensor& L = sample.left_image;
    const Tensor& R = sample.right_image;

    Tensor disp({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double best = std::numeric_limits<double>::infinity();
            int best_d = 0;
            for (int d = 0; d < max_disp; ++d) {
                if (x - d < 0) break;
                double cost = 0.0;
                int count = 0;
                for (int wy = -half; wy <= half; ++wy) {
                    const int yy = y + wy;
                    if (yy < 0 || yy >= h) continue;
                    for (int wx = -half; wx <= half; ++wx) {
                        const int xl = x + wx;
                        const int xr = xl - d;
                        if (xl < 0 || xl >= w || xr < 0 || xr >= w) continue;
                        for (int c = 0; c < 3; ++c) cost += std::abs(L(c, yy, xl) - R(c, yy, xr));
                        ++count;
                    }
                }
                if (count == 0) continue;
                cost /= static_cast<double>(count);
                if (cost < best) { // strict: ties keep the smaller disparity
                    best = cost;
                    best_d = d;
                }
            }
            disp(y, x) = static_cast<double>(best_d);
        }
    return disp;
}

} // namespace stereolab
