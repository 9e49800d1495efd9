// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace protomask {

/// 8-bit image with `channels` interleaved samples per pixel (1 or 3).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int w, int h, int c) : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w * h * c), 0) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Binary P5 (grayscale) / P6 (RGB) writers, maxval 255.
void write_pgm(const std::filesystem::path& path, const Image8& image);
void write_ppm(const std::filesystem::path& path, const Image8& image);

/// Readers accept comments in the header and require maxval 255.
/// Throw FormatError on malformed or truncated files.
Image8 read_pgm(const std::filesystem::path& path);
Image8 read_ppm(const std::filesystem::path& path);

}  // namespace protomask
