// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "stereolab/tensor.hpp"

namespace stereolab {

enum class DisparityFormat { pfm, kitti_png16 };

/// Disparity file IO.
///
/// pfm         stores float32, so the round trip is exact at float precision.
///             Sign of the header scale encodes endianness; rows are stored
///             bottom-to-top per the format.
/// kitti_png16 16-bit grayscale PNG holding disparity*256; stored 0 means
///             invalid. Invalid pixels are surfaced as NaN in memory, and
///             values below 1/512 px round to the invalid code.
Tensor read_disparity(const std::string& path, DisparityFormat format);
void write_disparity(const Tensor& grid, const std::string& path, DisparityFormat format);

/// 3xHxW color images as PF (color pfm) files.
Tensor read_image_pfm(const std::string& path);
void write_image_pfm(const Tensor& image, const std::string& path);

/// Boolean masks as 8-bit binary PGM (0 = false, 255 = true).
BoolGrid read_mask_pgm(const std::string& path);
void write_mask_pgm(const BoolGrid& mask, const std::string& path);

/// Raw 16-bit grayscale PNG access (value semantics left to the caller).
Tensor read_png16(const std::string& path);
void write_png16(const Tensor& grid, const std::string& path); // values in [0, 65535], rounded

/// Line-oriented corpus index: one sample per line,
///   sample_id TAB style_tag TAB left TAB right TAB disp_left TAB disp_right TAB occlusion
/// with paths relative to the manifest location ("-" = absent).
struct ManifestEntry {
    std::string sample_id;
    std::string style_tag;
    std::string left_image;
    std::string right_image;
    std::string disparity_left;
    std::string disparity_right;
    std::string occlusion;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

} // namespace stereolab
