// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "protomask/errors.hpp"
#include "protomask/pnm.hpp"

namespace protomask {

namespace fs = std::filesystem;
using nlohmann::json;

const std::array<std::string, kNumShapeClasses>& shape_class_names() {
  static const std::array<std::string, kNumShapeClasses> names = {"circle", "triangle", "rectangle"};
  return names;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Portable uniform draws; the standard distributions are not specified
// bit-for-bit across library implementations.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t index) : engine_(splitmix64(splitmix64(seed) ^ index)) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int below(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

 private:
  std::mt19937_64 engine_;
};

using Rgb = std::array<double, 3>;

struct ShapeSpec {
  int label = 0;
  double cx = 0, cy = 0;  // pixels
  double extent = 0;      // pixels
  double aspect = 1;
  double angle = 0;
  std::array<double, 6> tri{};  // triangle vertices x0,y0,x1,y1,x2,y2
  Rgb color{};
};

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool covers(const ShapeSpec& s, double px, double py) {
  switch (static_cast<ShapeClass>(s.label)) {
    case ShapeClass::circle: {
      const double r = s.extent / 2;
      const double dx = px - s.cx, dy = py - s.cy;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeClass::rectangle: {
      const double hw = s.extent * std::sqrt(s.aspect) / 2, hh = s.extent / std::sqrt(s.aspect) / 2;
      return std::abs(px - s.cx) <= hw && std::abs(py - s.cy) <= hh;
    }
    case ShapeClass::triangle: {
      const auto& v = s.tri;
      const double e0 = edge(v[0], v[1], v[2], v[3], px, py);
      const double e1 = edge(v[2], v[3], v[4], v[5], px, py);
      const double e2 = edge(v[4], v[5], v[0], v[1], px, py);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

// Pixel-center rasterization, no anti-aliasing.
std::vector<std::uint8_t> rasterize(const ShapeSpec& s, int size) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(size) * size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      m[static_cast<std::size_t>(y) * size + x] = covers(s, x + 0.5, y + 0.5) ? 1 : 0;
    }
  }
  return m;
}

std::size_t count(const std::vector<std::uint8_t>& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

double color_distance(const Rgb& a, const Rgb& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

Rgb random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

ShapeSpec propose_shape(Rng& rng, const GeneratorOptions& o, const std::vector<ShapeSpec>& placed) {
  const double side = o.size;
  ShapeSpec s;
  s.extent = rng.uniform(o.min_scale, o.max_scale) * side;
  s.aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  s.angle = rng.uniform(0.0, 2 * std::numbers::pi);
  const double reach = s.extent / 2 * std::max(std::sqrt(s.aspect), 1 / std::sqrt(s.aspect));
  const double lo = std::min(reach, side / 2), hi = std::max(side - reach, side / 2);
  if (!placed.empty() && rng.uniform() < o.cluster_probability) {
    const ShapeSpec& anchor = placed[static_cast<std::size_t>(rng.below(static_cast<int>(placed.size())))];
    s.label = anchor.label;
    const double dist = rng.uniform(0.45, 0.85) * (anchor.extent + s.extent) / 2;
    const double dir = rng.uniform(0.0, 2 * std::numbers::pi);
    s.cx = std::clamp(anchor.cx + dist * std::cos(dir), lo, hi);
    s.cy = std::clamp(anchor.cy + dist * std::sin(dir), lo, hi);
  } else {
    s.label = rng.below(kNumShapeClasses);
    s.cx = rng.uniform(lo, hi);
    s.cy = rng.uniform(lo, hi);
  }
  const double r = s.extent / 2;
  for (int k = 0; k < 3; ++k) {
    const double a = s.angle + k * 2 * std::numbers::pi / 3 + rng.uniform(-0.3, 0.3);
    s.tri[2 * k] = s.cx + r * std::cos(a);
    s.tri[2 * k + 1] = s.cy + r * std::sin(a);
  }
  return s;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Tensor<double> mask_tensor(const std::vector<std::uint8_t>& m, int size) {
  Tensor<double> t({static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  for (std::size_t i = 0; i < m.size(); ++i) t[i] = m[i];
  return t;
}

bool masks_intersect(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) return true;
  }
  return false;
}

}  // namespace

void GeneratorOptions::validate() const {
  if (size < 16) throw ConfigError("size must be at least 16");
  if (max_instances < 1) throw ConfigError("max_instances must be at least 1");
  if (!(min_scale > 0 && min_scale <= max_scale && max_scale <= 1)) {
    throw ConfigError("scales must satisfy 0 < min_scale <= max_scale <= 1");
  }
  if (!(cluster_probability >= 0 && cluster_probability <= 1)) throw ConfigError("cluster_probability out of [0, 1]");
  if (!(min_visible_fraction > 0 && min_visible_fraction <= 1)) throw ConfigError("min_visible_fraction out of (0, 1]");
  if (min_visible_pixels < 1) throw ConfigError("min_visible_pixels must be positive");
  if (max_attempts < 1) throw ConfigError("max_attempts must be positive");
}

std::vector<Box> Sample::boxes() const {
  std::vector<Box> out;
  for (const auto& inst : instances) out.push_back(inst.box);
  return out;
}

std::vector<int> Sample::labels() const {
  std::vector<int> out;
  for (const auto& inst : instances) out.push_back(inst.label);
  return out;
}

Sample Sample::flipped_horizontally() const {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Sample out;
  out.image = Tensor<double>(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.image.at(ch, y, x) = image.at(ch, y, w - 1 - x);
    }
  }
  for (const auto& inst : instances) {
    Instance f;
    f.label = inst.label;
    f.mask = Tensor<double>(inst.mask.shape());
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) f.mask.at(y, x) = inst.mask.at(y, w - 1 - x);
    }
    f.box = mask_tight_box(f.mask);
    out.instances.push_back(std::move(f));
  }
  return out;
}

bool operator==(const Sample& a, const Sample& b) {
  if (!(a.image == b.image) || a.instances.size() != b.instances.size()) return false;
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    const auto& x = a.instances[i];
    const auto& y = b.instances[i];
    if (x.label != y.label || !(x.box == y.box) || !(x.mask == y.mask)) return false;
  }
  return true;
}

Box mask_tight_box(const Tensor<double>& mask) {
  if (mask.rank() != 2) throw ValidationError("mask must be 2-D, got " + shape_string(mask.shape()));
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  std::size_t x0 = w, y0 = h, x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask.at(y, x) != 0.0) {
        any = true;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (!any) throw ValidationError("mask is empty");
  return {static_cast<double>(x0) / static_cast<double>(w), static_cast<double>(y0) / static_cast<double>(h),
          static_cast<double>(x1 + 1) / static_cast<double>(w), static_cast<double>(y1 + 1) / static_cast<double>(h)};
}

Sample generate_sample(std::uint64_t seed, std::size_t index, const GeneratorOptions& options,
                       bool* same_class_overlap, std::size_t* rerolls) {
  options.validate();
  Rng rng(seed, index);
  const int size = options.size;
  const std::size_t npix = static_cast<std::size_t>(size) * size;

  // Background: linear gradient between two colors.
  const Rgb bg0 = random_color(rng), bg1 = random_color(rng);
  const double theta = rng.uniform(0.0, 2 * std::numbers::pi);

  const int wanted = 1 + rng.below(options.max_instances);
  std::vector<ShapeSpec> shapes;
  std::vector<std::vector<std::uint8_t>> full, visible;
  std::size_t rejected = 0;
  for (int i = 0; i < wanted; ++i) {
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
      ShapeSpec s = propose_shape(rng, options, shapes);
      for (int t = 0; t < 50; ++t) {
        s.color = random_color(rng);
        if (std::min(color_distance(s.color, bg0), color_distance(s.color, bg1)) >= 0.35) break;
      }
      auto mask = rasterize(s, size);
      const auto enough = [&](std::size_t vis, std::size_t total) {
        return vis >= static_cast<std::size_t>(options.min_visible_pixels) &&
               static_cast<double>(vis) >= options.min_visible_fraction * static_cast<double>(total);
      };
      bool ok = enough(count(mask), count(mask));
      std::vector<std::vector<std::uint8_t>> next = visible;
      for (std::size_t j = 0; ok && j < next.size(); ++j) {
        for (std::size_t p = 0; p < npix; ++p) {
          if (mask[p]) next[j][p] = 0;
        }
        ok = enough(count(next[j]), count(full[j]));
      }
      if (!ok) {
        ++rejected;
        continue;
      }
      visible = std::move(next);
      visible.push_back(mask);
      full.push_back(std::move(mask));
      shapes.push_back(s);
      break;
    }
  }
  if (shapes.empty()) throw StateError("could not place any shape; check generator options");

  Sample sample;
  sample.image = Tensor<double>({3, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = ((x + 0.5) / size - 0.5) * ct + ((y + 0.5) / size - 0.5) * st;
      const double t = std::clamp(u / std::numbers::sqrt2 + 0.5, 0.0, 1.0);
      Rgb c{};
      for (int ch = 0; ch < 3; ++ch) c[ch] = bg0[ch] + (bg1[ch] - bg0[ch]) * t;
      for (std::size_t k = 0; k < shapes.size(); ++k) {
        if (full[k][static_cast<std::size_t>(y) * size + x]) c = shapes[k].color;
      }
      for (int ch = 0; ch < 3; ++ch) {
        sample.image.at(static_cast<std::size_t>(ch), static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            to_byte(c[ch]) / 255.0;
      }
    }
  }

  bool overlap = false;
  for (std::size_t a = 0; a < shapes.size(); ++a) {
    for (std::size_t b = a + 1; b < shapes.size(); ++b) {
      if (shapes[a].label == shapes[b].label && masks_intersect(full[a], full[b])) overlap = true;
    }
    Instance inst;
    inst.label = shapes[a].label;
    inst.mask = mask_tensor(visible[a], size);
    inst.box = mask_tight_box(inst.mask);
    sample.instances.push_back(std::move(inst));
  }
  if (same_class_overlap) *same_class_overlap = overlap;
  if (rerolls) *rerolls = rejected;
  return sample;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t count, const GeneratorOptions& options) {
  options.validate();
  Dataset ds;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    bool overlap = false;
    std::size_t rerolls = 0;
    ds.samples.push_back(generate_sample(seed, i, options, &overlap, &rerolls));
    ds.stats.samples += 1;
    ds.stats.instances += ds.samples.back().instances.size();
    ds.stats.same_class_overlap_samples += overlap ? 1 : 0;
    ds.stats.rerolls += rerolls;
  }
  return ds;
}

void validate_sample(const Sample& sample, int num_classes) {
  const auto& img = sample.image;
  if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) != img.dim(2)) {
    throw ValidationError("image must be [3, S, S], got " + shape_string(img.shape()));
  }
  for (double v : img.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("image values must lie in [0, 1]");
  }
  const std::size_t s = img.dim(1);
  for (std::size_t i = 0; i < sample.instances.size(); ++i) {
    const auto& inst = sample.instances[i];
    const std::string where = "instances[" + std::to_string(i) + "]";
    if (inst.label < 0 || inst.label >= num_classes) {
      throw ValidationError(where + ".class " + std::to_string(inst.label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    const Box& b = inst.box;
    for (double v : {b.x1, b.y1, b.x2, b.y2}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(where + ".box has a coordinate outside [0, 1]");
    }
    if (!(b.x1 < b.x2 && b.y1 < b.y2)) throw ValidationError(where + ".box is degenerate");
    if (inst.mask.shape() != Shape{s, s}) {
      throw ValidationError(where + ".mask must be [" + std::to_string(s) + ", " + std::to_string(s) + "]");
    }
    for (double v : inst.mask.data()) {
      if (v != 0.0 && v != 1.0) throw ValidationError(where + ".mask is not binary");
    }
    const Box tight = mask_tight_box(inst.mask);
    constexpr double kTol = 1e-9;
    if (std::abs(tight.x1 - b.x1) > kTol || std::abs(tight.y1 - b.y1) > kTol || std::abs(tight.x2 - b.x2) > kTol ||
        std::abs(tight.y2 - b.y2) > kTol) {
      throw ValidationError(where + ".box is not the tight box of its mask");
    }
  }
}

namespace {

std::string mask_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mask_%03zu.pgm", i);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

}  // namespace

void save_sample(const fs::path& dir, const Sample& sample) {
  validate_sample(sample);
  fs::create_directories(dir);
  const int s = static_cast<int>(sample.size());
  Image8 rgb(s, s, 3);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb.at(x, y, c) = to_byte(sample.image.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
                                                  static_cast<std::size_t>(x)));
      }
    }
  }
  write_ppm(dir / "image.ppm", rgb);
  json instances = json::array();
  for (std::size_t i = 0; i < sample.instances.size(); ++i) {
    const auto& inst = sample.instances[i];
    Image8 m(s, s, 1);
    for (std::size_t p = 0; p < inst.mask.size(); ++p) m.pixels[p] = inst.mask[p] != 0.0 ? 255 : 0;
    const std::string name = mask_file_name(i);
    write_pgm(dir / name, m);
    instances.push_back({{"class", inst.label},
                         {"box", {inst.box.x1, inst.box.y1, inst.box.x2, inst.box.y2}},
                         {"mask", name}});
  }
  write_text(dir / "annotations.json", json{{"instances", instances}}.dump(1) + "\n");
}

Sample load_sample(const fs::path& dir, int num_classes) {
  Sample sample;
  const Image8 rgb = read_ppm(dir / "image.ppm");
  if (rgb.width != rgb.height) throw FormatError("image.ppm: image must be square");
  const auto s = static_cast<std::size_t>(rgb.width);
  sample.image = Tensor<double>({3, s, s});
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        sample.image.at(c, y, x) = rgb.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) / 255.0;
      }
    }
  }
  const json ann = read_json(dir / "annotations.json");
  if (!ann.is_object() || !ann.contains("instances") || !ann["instances"].is_array()) {
    throw FormatError("annotations.json: field 'instances' must be an array");
  }
  std::size_t i = 0;
  for (const auto& item : ann["instances"]) {
    const std::string where = "annotations.json: instances[" + std::to_string(i++) + "]";
    if (!item.is_object()) throw FormatError(where + " must be an object");
    if (!item.contains("class") || !item["class"].is_number_integer()) {
      throw FormatError(where + ".class must be an integer");
    }
    if (!item.contains("box") || !item["box"].is_array() || item["box"].size() != 4 ||
        !std::all_of(item["box"].begin(), item["box"].end(), [](const json& v) { return v.is_number(); })) {
      throw FormatError(where + ".box must be an array of 4 numbers");
    }
    if (!item.contains("mask") || !item["mask"].is_string()) throw FormatError(where + ".mask must be a file name");
    Instance inst;
    inst.label = item["class"].get<int>();
    const auto& b = item["box"];
    inst.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    const std::string mask_name = item["mask"].get<std::string>();
    if (fs::path(mask_name).filename().string() != mask_name) {
      throw FormatError(where + ".mask must name a file inside the sample directory");
    }
    const Image8 m = read_pgm(dir / mask_name);
    if (static_cast<std::size_t>(m.width) != s || static_cast<std::size_t>(m.height) != s) {
      throw FormatError(mask_name + ": size does not match image.ppm");
    }
    inst.mask = Tensor<double>({s, s});
    for (std::size_t p = 0; p < m.pixels.size(); ++p) {
      if (m.pixels[p] != 0 && m.pixels[p] != 255) throw FormatError(mask_name + ": pixels must be 0 or 255");
      inst.mask[p] = m.pixels[p] ? 1.0 : 0.0;
    }
    sample.instances.push_back(std::move(inst));
  }
  validate_sample(sample, num_classes);
  return sample;
}

void save_dataset(const fs::path& dir, const Dataset& dataset, std::uint64_t seed, const GeneratorOptions& options) {
  fs::create_directories(dir);
  json names = json::array();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    save_sample(dir / buf, dataset.samples[i]);
    names.push_back(buf);
  }
  const json manifest = {
      {"format", "protomask-dataset"},
      {"version", 1},
      {"seed", seed},
      {"size", options.size},
      {"max_instances", options.max_instances},
      {"classes", shape_class_names()},
      {"count", dataset.samples.size()},
      {"samples", names},
      {"stats",
       {{"instances", dataset.stats.instances},
        {"same_class_overlap_samples", dataset.stats.same_class_overlap_samples},
        {"overlap_frequency", dataset.stats.overlap_frequency()},
        {"rerolls", dataset.stats.rerolls}}}};
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

std::vector<Sample> load_dataset(const fs::path& dir, int num_classes) {
  const json manifest = read_json(dir / "manifest.json");
  if (!manifest.is_object() || manifest.value("format", "") != "protomask-dataset") {
    throw FormatError("manifest.json: field 'format' must be \"protomask-dataset\"");
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw FormatError("manifest.json: field 'samples' must be an array");
  }
  std::vector<Sample> samples;
  for (const auto& name : manifest["samples"]) {
    if (!name.is_string()) throw FormatError("manifest.json: 'samples' entries must be strings");
    samples.push_back(load_sample(dir / name.get<std::string>(), num_classes));
  }
  return samples;
}

}  // namespace protomask
