// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protomask/box.hpp"
#include "protomask/tensor.hpp"

namespace protomask {

enum class ShapeClass : int { circle = 0, triangle = 1, rectangle = 2 };
inline constexpr int kNumShapeClasses = 3;
const std::array<std::string, kNumShapeClasses>& shape_class_names();

struct Instance {
  int label = 0;
  Box box;              // tight box of `mask`, normalized corners
  Tensor<double> mask;  // [S, S] of 0/1
};

struct Sample {
  Tensor<double> image;  // [3, S, S], multiples of 1/255
  std::vector<Instance> instances;

  std::size_t size() const { return image.dim(1); }
  std::vector<Box> boxes() const;
  std::vector<int> labels() const;
  /// Mirror image and masks left to right; boxes are recomputed from masks.
  Sample flipped_horizontally() const;

  friend bool operator==(const Sample& a, const Sample& b);
};

struct GeneratorOptions {
  int size = 128;
  int max_instances = 4;
  double min_scale = 0.18;  // shape extent as a fraction of the image side
  double max_scale = 0.45;
  /// Chance that a new shape copies the class of an earlier one and is
  /// placed overlapping it.
  double cluster_probability = 0.3;
  /// Placements that leave any instance with fewer visible pixels than
  /// max(min_visible_pixels, min_visible_fraction * its full area) are re-rolled.
  double min_visible_fraction = 0.25;
  int min_visible_pixels = 24;
  int max_attempts = 30;

  void validate() const;
};

struct GeneratorStats {
  std::size_t samples = 0;
  std::size_t instances = 0;
  std::size_t same_class_overlap_samples = 0;
  std::size_t rerolls = 0;

  double overlap_frequency() const {
    return samples ? static_cast<double>(same_class_overlap_samples) / static_cast<double>(samples) : 0.0;
  }
};

/// Sample `index` of the stream defined by `seed`. Independent of every
/// other index. `same_class_overlap` reports whether two instances of the
/// same class overlap before occlusion.
Sample generate_sample(std::uint64_t seed, std::size_t index, const GeneratorOptions& options,
                       bool* same_class_overlap = nullptr, std::size_t* rerolls = nullptr);

struct Dataset {
  std::vector<Sample> samples;
  GeneratorStats stats;
};

Dataset generate_dataset(std::uint64_t seed, std::size_t count, const GeneratorOptions& options = {});

/// Tight normalized box of the nonzero pixels of an [S, S] mask.
/// Throws ValidationError for an empty mask.
Box mask_tight_box(const Tensor<double>& mask);

/// Checks shapes, value ranges, labels in [0, num_classes), nonempty
/// binary masks and box/mask consistency. Throws ValidationError.
void validate_sample(const Sample& sample, int num_classes = kNumShapeClasses);

/// Directory layout: image.ppm, annotations.json, mask_NNN.pgm.
void save_sample(const std::filesystem::path& dir, const Sample& sample);
Sample load_sample(const std::filesystem::path& dir, int num_classes = kNumShapeClasses);

/// Dataset directory: manifest.json plus one sample directory per entry.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, std::uint64_t seed,
                  const GeneratorOptions& options);
std::vector<Sample> load_dataset(const std::filesystem::path& dir, int num_classes = kNumShapeClasses);

}  // namespace protomask
