// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pressgen::cli {

/// Encodes 8-bit RGB pixels (row-major, 3 bytes per pixel) as a PNG file image.
std::vector<std::uint8_t> encode_png_rgb(std::span<const std::uint8_t> rgb, int width, int height);

/// Renders one pressure frame (row-major, values in [0, 1]) as a heat-colored
/// PNG, each cell drawn as a `scale` x `scale` block.
void write_heatmap_png(const std::filesystem::path& path, std::span<const float> frame, int height, int width,
                       int scale);

}  // namespace pressgen::cli
