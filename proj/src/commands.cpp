// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "protomask/assembly.hpp"
#include "protomask/errors.hpp"
#include "protomask/pnm.hpp"
#include "protomask/train.hpp"

namespace protomask {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

void write_run_manifest(const fs::path& out, const std::string& command, const std::vector<std::string>& files) {
  json list = json::array();
  for (const auto& f : files) list.push_back(f);
  write_json(out / "manifest.json", {{"command", command}, {"files", list}});
}

std::string indexed(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::string> class_names_for(const ModelConfig& cfg) {
  if (cfg.num_classes == kNumShapeClasses) {
    return {shape_class_names().begin(), shape_class_names().end()};
  }
  std::vector<std::string> names;
  for (int c = 0; c < cfg.num_classes; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

// Inference at the requested precision on a double-precision model.
class Detector {
 public:
  Detector(const Model<double>& model, Precision precision) : model64_(model) {
    if (precision == Precision::f32) model32_.emplace(model.cast<float>());
  }
  InferenceResult operator()(const Tensor<double>& image, const InferenceOptions& options) const {
    return model32_ ? infer(*model32_, image, options) : infer(model64_, image, options);
  }

 private:
  const Model<double>& model64_;
  std::optional<Model<float>> model32_;
};

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json detections_json(const std::vector<Detection>& dets, const std::vector<std::string>& names) {
  json list = json::array();
  for (const auto& d : dets) {
    list.push_back({{"class", d.label},
                    {"class_name", names.at(static_cast<std::size_t>(d.label))},
                    {"score", d.score},
                    {"box", box_json(d.box)}});
  }
  return {{"detections", list}};
}

Image8 to_image8(const Tensor<double>& image) {
  const int s = static_cast<int>(image.dim(1));
  Image8 out(s, s, 3);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = image.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

Image8 mask_image(const Tensor<double>& mask, double scale) {
  Image8 out(static_cast<int>(mask.dim(1)), static_cast<int>(mask.dim(0)), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(mask[i] * scale, 0.0, 1.0) * 255.0));
  }
  return out;
}

Image8 overlay(const Tensor<double>& image, const std::vector<Detection>& dets) {
  Image8 out = to_image8(image);
  const int s = out.width;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto color = palette_color(i);
    const auto& d = dets[i];
    if (!d.mask.empty()) {
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if (d.mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) == 0.0) continue;
          for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<std::uint8_t>((out.at(x, y, c) + color[c]) / 2);
        }
      }
    }
    const int x0 = std::clamp(static_cast<int>(std::floor(d.box.x1 * s)), 0, s - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(d.box.y1 * s)), 0, s - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(d.box.x2 * s)) - 1, 0, s - 1);
    const int y1 = std::clamp(static_cast<int>(std::ceil(d.box.y2 * s)) - 1, 0, s - 1);
    for (int x = x0; x <= x1; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y0, c) = out.at(x, y1, c) = color[c];
    }
    for (int y = y0; y <= y1; ++y) {
      for (int c = 0; c < 3; ++c) out.at(x0, y, c) = out.at(x1, y, c) = color[c];
    }
  }
  return out;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

unsigned thread_limit() {
  unsigned n = 1;
  if (const char* env = std::getenv("PROTOMASK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("PROTOMASK_THREADS must be a positive integer");
    n = static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? std::min(n, hw) : n;
}

std::array<std::uint8_t, 3> palette_color(std::size_t index) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 10> kPalette = {{{230, 25, 75},
                                                                           {60, 180, 75},
                                                                           {255, 225, 25},
                                                                           {0, 130, 200},
                                                                           {245, 130, 48},
                                                                           {145, 30, 180},
                                                                           {70, 240, 240},
                                                                           {240, 50, 230},
                                                                           {210, 245, 60},
                                                                           {250, 190, 212}}};
  return kPalette[index % kPalette.size()];
}

Tensor<double> load_image(const fs::path& path) {
  const Image8 img = read_ppm(path);
  if (img.width != img.height) throw FormatError(path.filename().string() + ": image must be square");
  const auto s = static_cast<std::size_t>(img.width);
  Tensor<double> t({3, s, s});
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        t.at(c, y, x) = img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) / 255.0;
      }
    }
  }
  return t;
}

Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

json cmd_generate(const GenerateArgs& args) {
  args.options.validate();
  make_dir(args.out);
  const Dataset ds = generate_dataset(args.seed, args.count, args.options);
  write_json(args.out / "config.json", {{"command", "generate"},
                                        {"seed", args.seed},
                                        {"count", args.count},
                                        {"size", args.options.size},
                                        {"max_instances", args.options.max_instances},
                                        {"min_scale", args.options.min_scale},
                                        {"max_scale", args.options.max_scale},
                                        {"cluster_probability", args.options.cluster_probability},
                                        {"min_visible_fraction", args.options.min_visible_fraction},
                                        {"min_visible_pixels", args.options.min_visible_pixels},
                                        {"out", args.out.string()}});
  // The dataset manifest doubles as the run index.
  save_dataset(args.out, ds, args.seed, args.options);
  return {{"count", ds.samples.size()},
          {"instances", ds.stats.instances},
          {"same_class_overlap_samples", ds.stats.same_class_overlap_samples},
          {"overlap_frequency", ds.stats.overlap_frequency()},
          {"rerolls", ds.stats.rerolls}};
}

json cmd_train(const TrainArgs& args) {
  const std::vector<Sample> samples = load_dataset(args.data);
  if (samples.empty()) throw ConfigError("training set " + args.data.string() + " is empty");
  ModelConfig cfg;
  if (args.config) {
    const json j = read_json_file(*args.config);
    cfg = model_config_from_json(j.contains("model") ? j["model"] : j);
  }
  if (args.iterations) cfg.schedule.iterations = *args.iterations;
  cfg.schedule.seed = args.seed;
  cfg.validate();
  if (samples.front().size() != static_cast<std::size_t>(cfg.input_size)) {
    throw ConfigError("dataset images are " + std::to_string(samples.front().size()) + " px but input_size is " +
                      std::to_string(cfg.input_size));
  }
  make_dir(args.out);

  int start = 0;
  std::optional<Model<double>> model;
  const fs::path ckpt = checkpoint_path(args.out);
  if (args.resume && fs::exists(ckpt)) {
    TrainingCheckpoint tc = load_training_checkpoint(ckpt);
    if (to_json(tc.model.config()) != to_json(cfg)) {
      throw ConfigError("cannot resume: checkpoint config differs from the requested config");
    }
    start = tc.iteration;
    model.emplace(std::move(tc.model));
  } else {
    model.emplace(cfg, args.seed);
  }
  write_json(args.out / "config.json", {{"command", "train"},
                                        {"data", args.data.string()},
                                        {"seed", args.seed},
                                        {"resume_from", start},
                                        {"model", to_json(cfg)}});

  TrainOptions options;
  options.out_dir = args.out;
  if (!args.quiet) {
    options.on_iteration = [](const TrainLogEntry& e) {
      if (e.iteration == 1 || e.iteration % 100 == 0) std::cerr << e.to_json().dump() << '\n';
    };
  }
  const TrainResult result = train(*model, samples, start, options);
  write_run_manifest(args.out, "train", {"config.json", "train_log.jsonl", "checkpoint.ptck"});
  json report = {{"iterations_run", result.iterations_run},
                 {"final_iteration", result.final_iteration},
                 {"checkpoint", ckpt.string()}};
  if (!result.log.empty()) {
    report["first"] = result.log.front().to_json();
    report["last"] = result.log.back().to_json();
  }
  return report;
}

json cmd_infer(const InferArgs& args) {
  if (args.image.has_value() == args.data.has_value()) throw ConfigError("infer needs exactly one of --image or --data");
  const TrainingCheckpoint tc = load_training_checkpoint(args.ckpt);
  const ModelConfig& cfg = tc.model.config();
  const auto names = class_names_for(cfg);
  InferenceOptions options;
  options.settings = cfg.inference;
  if (args.score_threshold) options.settings.score_threshold = *args.score_threshold;
  options.nms = args.nms;
  options.boxes_only = args.boxes_only;
  const Detector detector(tc.model, args.precision);

  std::vector<std::pair<std::string, Tensor<double>>> inputs;
  if (args.image) {
    inputs.emplace_back(args.image->stem().string(), load_image(*args.image));
  } else {
    const auto samples = load_dataset(*args.data, cfg.num_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) inputs.emplace_back(indexed("%05zu", i), samples[i].image);
  }
  make_dir(args.out);
  write_json(args.out / "config.json", {{"command", "infer"},
                                        {"ckpt", args.ckpt.string()},
                                        {"input", args.image ? args.image->string() : args.data->string()},
                                        {"boxes_only", args.boxes_only},
                                        {"score_threshold", options.settings.score_threshold},
                                        {"nms", to_string(args.nms)},
                                        {"precision", args.precision == Precision::f32 ? "f32" : "f64"},
                                        {"viz", args.viz},
                                        {"model", to_json(cfg)}});

  std::vector<std::string> files = {"config.json", "report.json"};
  std::vector<double> net_ms, nms_ms, mask_ms;
  std::size_t total = 0;
  for (const auto& [name, image] : inputs) {
    if (image.dim(1) != static_cast<std::size_t>(cfg.input_size)) {
      throw ConfigError(name + ": image size does not match the model input size");
    }
    const InferenceResult r = detector(image, options);
    const fs::path dir = args.out / name;
    make_dir(dir);
    write_json(dir / "detections.json", detections_json(r.detections, names));
    files.push_back(name + "/detections.json");
    write_json(dir / "timing.json", {{"network_ms", r.network_ms}, {"nms_ms", r.nms_ms}, {"mask_ms", r.mask_ms}});
    files.push_back(name + "/timing.json");
    if (!args.boxes_only) {
      for (std::size_t i = 0; i < r.detections.size(); ++i) {
        const std::string f = indexed("mask_%03zu.pgm", i);
        write_pgm(dir / f, mask_image(r.detections[i].mask, 1.0));
        files.push_back(name + "/" + f);
      }
    }
    if (args.viz) {
      write_ppm(dir / "overlay.ppm", overlay(image, r.detections));
      files.push_back(name + "/overlay.ppm");
    }
    net_ms.push_back(r.network_ms);
    nms_ms.push_back(r.nms_ms);
    mask_ms.push_back(r.mask_ms);
    total += r.detections.size();
  }
  const json report = {{"images", inputs.size()},
                       {"detections", total},
                       {"boxes_only", args.boxes_only},
                       {"network_ms_mean", mean(net_ms)},
                       {"nms_ms_mean", mean(nms_ms)},
                       {"mask_ms_mean", mean(mask_ms)}};
  write_json(args.out / "report.json", report);
  write_run_manifest(args.out, "infer", files);
  return report;
}

json cmd_eval(const EvalArgs& args, EvalResult* result_out) {
  const TrainingCheckpoint tc = load_training_checkpoint(args.ckpt);
  const ModelConfig& cfg = tc.model.config();
  const auto samples = load_dataset(args.data, cfg.num_classes);
  InferenceOptions options;
  options.settings = cfg.inference;
  options.nms = args.nms;
  options.boxes_only = args.mode == EvalMode::box;
  const Detector detector(tc.model, args.precision);
  std::vector<EvalImage> images;
  for (const auto& s : samples) {
    if (s.size() != static_cast<std::size_t>(cfg.input_size)) {
      throw ConfigError("dataset image size does not match the model input size");
    }
    images.push_back({detector(s.image, options).detections, s.instances});
  }
  EvalResult result = evaluate(images, class_names_for(cfg), args.mode);
  make_dir(args.out);
  write_json(args.out / "config.json", {{"command", "eval"},
                                        {"ckpt", args.ckpt.string()},
                                        {"data", args.data.string()},
                                        {"mode", to_string(args.mode)},
                                        {"nms", to_string(args.nms)},
                                        {"precision", args.precision == Precision::f32 ? "f32" : "f64"},
                                        {"model", to_json(cfg)}});
  const json report = result.to_json();
  write_json(args.out / "eval.json", report);
  json matches = json::array();
  for (const auto& m : result.matches) {
    matches.push_back({{"image", m.image}, {"detection", m.detection}, {"class", m.label}, {"score", m.score},
                       {"threshold", m.threshold}, {"gt", m.gt}, {"iou", m.iou}});
  }
  write_json(args.out / "matches.json", matches);
  write_run_manifest(args.out, "eval", {"config.json", "eval.json", "matches.json"});
  if (result_out) *result_out = std::move(result);
  return report;
}

ScoredDetections bench_detections(std::uint64_t seed, std::size_t trial, std::size_t n, std::size_t c) {
  std::mt19937_64 rng(mix(mix(seed) ^ (0xBE9Cull + trial)));
  ScoredDetections d;
  const std::size_t clusters = std::max<std::size_t>(1, n / 10);
  for (std::size_t cls = 0; cls < c; ++cls) {
    std::vector<Box> centers;
    for (std::size_t k = 0; k < clusters; ++k) {
      const double w = 0.05 + 0.25 * unit(rng), h = 0.05 + 0.25 * unit(rng);
      centers.push_back(Box::from_center(0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng), w, h));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Box& ctr = centers[static_cast<std::size_t>(rng() % clusters)];
      const double cx = ctr.center_x(), cy = ctr.center_y();
      const double w = ctr.width() * (0.8 + 0.4 * unit(rng)), h = ctr.height() * (0.8 + 0.4 * unit(rng));
      const double jx = (unit(rng) - 0.5) * 0.3 * ctr.width(), jy = (unit(rng) - 0.5) * 0.3 * ctr.height();
      d.boxes.push_back(Box::from_center(cx + jx, cy + jy, w, h).clamped());
      d.scores.push_back(unit(rng));
      d.classes.push_back(static_cast<int>(cls));
    }
  }
  return d;
}

json cmd_bench_nms(const BenchArgs& args) {
  if (args.n == 0 || args.c == 0 || args.trials == 0) throw ConfigError("bench-nms needs n, c and trials >= 1");
  struct Trial {
    std::vector<std::size_t> fast, sequential;
    double fast_ms = 0, sequential_ms = 0;
  };
  std::vector<Trial> trials(args.trials);
  const auto run = [&](std::size_t t) {
    const ScoredDetections d = bench_detections(args.seed, t, args.n, args.c);
    Trial& tr = trials[t];
    auto t0 = std::chrono::steady_clock::now();
    tr.fast = fast_nms_indices(d, args.iou_threshold, args.n);
    tr.fast_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    t0 = std::chrono::steady_clock::now();
    tr.sequential = sequential_nms_indices(d, args.iou_threshold);
    tr.sequential_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::sort(tr.fast.begin(), tr.fast.end());
    std::sort(tr.sequential.begin(), tr.sequential.end());
  };
  const unsigned workers = std::min<unsigned>(thread_limit(), static_cast<unsigned>(args.trials));
  if (workers <= 1) {
    for (std::size_t t = 0; t < args.trials; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < args.trials; t += workers) run(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> fast_ms, seq_ms, fast_kept, seq_kept;
  std::size_t diverged = 0;
  json per_trial = json::array();
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const Trial& tr = trials[t];
    fast_ms.push_back(tr.fast_ms);
    seq_ms.push_back(tr.sequential_ms);
    fast_kept.push_back(static_cast<double>(tr.fast.size()));
    seq_kept.push_back(static_cast<double>(tr.sequential.size()));
    const bool differs = tr.fast != tr.sequential;
    diverged += differs ? 1 : 0;
    per_trial.push_back({{"trial", t}, {"fast", tr.fast}, {"sequential", tr.sequential}, {"diverged", differs}});
  }
  const auto summary = [](const std::vector<double>& ms, const std::vector<double>& kept) {
    return json{{"mean_ms", mean(ms)}, {"p50_ms", percentile(ms, 0.5)}, {"p95_ms", percentile(ms, 0.95)},
                {"kept_mean", mean(kept)}};
  };
  const json fast = summary(fast_ms, fast_kept), seq = summary(seq_ms, seq_kept);
  const json& head = args.variant == NmsVariant::fast ? fast : seq;
  const json report = {{"variant", to_string(args.variant)},
                       {"n", args.n},
                       {"c", args.c},
                       {"trials", args.trials},
                       {"iou_threshold", args.iou_threshold},
                       {"mean_ms", head["mean_ms"]},
                       {"p50_ms", head["p50_ms"]},
                       {"p95_ms", head["p95_ms"]},
                       {"kept_mean", head["kept_mean"]},
                       {"divergence_rate", static_cast<double>(diverged) / static_cast<double>(args.trials)},
                       {"fast", fast},
                       {"sequential", seq}};
  make_dir(args.out);
  write_json(args.out / "config.json", {{"command", "bench-nms"},
                                        {"n", args.n},
                                        {"c", args.c},
                                        {"trials", args.trials},
                                        {"variant", to_string(args.variant)},
                                        {"iou_threshold", args.iou_threshold},
                                        {"seed", args.seed},
                                        {"threads", workers}});
  write_json(args.out / "bench_nms.json", report);
  write_json(args.out / "trials.json", {{"n", args.n}, {"c", args.c}, {"trials", per_trial}});
  write_run_manifest(args.out, "bench-nms", {"config.json", "bench_nms.json", "trials.json"});
  return report;
}

double audit_divergence_rate(const json& trials) {
  if (!trials.contains("trials") || !trials["trials"].is_array()) {
    throw FormatError("trials.json: field 'trials' must be an array");
  }
  const auto& list = trials["trials"];
  if (list.empty()) return 0.0;
  std::size_t differ = 0;
  for (const auto& t : list) {
    auto a = t.at("fast").get<std::vector<std::size_t>>();
    auto b = t.at("sequential").get<std::vector<std::size_t>>();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    differ += a != b ? 1 : 0;
  }
  return static_cast<double>(differ) / static_cast<double>(list.size());
}

json cmd_viz_protos(const VizArgs& args) {
  const TrainingCheckpoint tc = load_training_checkpoint(args.ckpt);
  const ModelConfig& cfg = tc.model.config();
  const Tensor<double> image = load_image(args.image);
  if (image.dim(1) != static_cast<std::size_t>(cfg.input_size)) {
    throw ConfigError("image size does not match the model input size");
  }
  InferenceOptions options;
  options.settings = cfg.inference;
  const InferenceResult r = infer(tc.model, image, options);
  make_dir(args.out);
  write_json(args.out / "config.json", {{"command", "viz-protos"},
                                        {"ckpt", args.ckpt.string()},
                                        {"image", args.image.string()},
                                        {"model", to_json(cfg)}});
  std::vector<std::string> files = {"config.json"};
  const Tensor<double>& p = r.prototypes;
  const std::size_t h = p.dim(0), w = p.dim(1), k = p.dim(2);
  for (std::size_t j = 0; j < k; ++j) {
    Tensor<double> map({h, w});
    double peak = 0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        map.at(y, x) = p.at(y, x, j);
        peak = std::max(peak, map.at(y, x));
      }
    }
    const std::string f = indexed("proto_%02zu.pgm", j);
    write_pgm(args.out / f, mask_image(map, peak > 0 ? 1.0 / peak : 0.0));
    files.push_back(f);
  }
  json top = nullptr;
  if (!r.detections.empty()) {
    write_pgm(args.out / "top_mask_soft.pgm", mask_image(mask_slice(r.soft_masks, 0), 1.0));
    write_pgm(args.out / "top_mask.pgm", mask_image(r.detections.front().mask, 1.0));
    files.push_back("top_mask_soft.pgm");
    files.push_back("top_mask.pgm");
    const auto& d = r.detections.front();
    top = {{"class", d.label}, {"score", d.score}, {"box", box_json(d.box)}};
  }
  write_run_manifest(args.out, "viz-protos", files);
  return {{"prototypes", k}, {"grid", {h, w}}, {"top_detection", top}};
}

}  // namespace protomask
