/* Copyright 2026 The vidseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Deterministic synthetic video generator: axis-aligned rectangles moving at
// integer velocities over a flat background. Labels, flow and occlusion masks
// are exact, so warping frame t+1 labels with the generated flow reproduces
// frame t labels on every non-occluded pixel.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidseg/core.hpp"
#include "vidseg/io.hpp"
#include "vidseg/mix.hpp"

namespace vidseg {

struct SynthObject {
  int class_id = 0;
  int x = 0;  // top-left corner at frame 0
  int y = 0;
  int width = 1;
  int height = 1;
  int vx = 0;  // pixels per frame
  int vy = 0;
  int depth = 0;  // smaller is nearer the camera; must be unique

  friend bool operator==(const SynthObject&, const SynthObject&) = default;
};

struct WorldSpec {
  std::string clip_id = "synth_0000";
  int width = 64;
  int height = 48;
  int num_classes = 19;
  int background_class = 0;
  std::vector<SynthObject> objects;
  int length = 5;
  std::uint64_t seed = 1;
  double label_noise = 0.0;
  Domain domain = Domain::kTarget;
  Split split = Split::kVal;
  std::optional<std::vector<int>> labeled_frames;  // default: every frame
  std::vector<int> direct_flow_ks;                 // extra o_{t->t+k}, |k| > 1

  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

inline void validate(const WorldSpec& spec) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kParameter, "world spec: " + m); };
  if (spec.clip_id.empty()) fail("clip_id must be non-empty");
  if (spec.width <= 0 || spec.height <= 0) fail("canvas must be positive");
  if (spec.num_classes < 1 || spec.num_classes > 254) fail("num_classes must be in [1,254]");
  if (spec.background_class < 0 || spec.background_class >= spec.num_classes) {
    fail("background_class outside class space");
  }
  if (spec.length < 1) fail("length must be >= 1");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 1.0)) fail("label_noise must be in [0,1)");
  if (spec.label_noise > 0.0 && spec.num_classes < 2) fail("label noise needs >= 2 classes");
  std::set<int> depths;
  for (const auto& o : spec.objects) {
    if (o.class_id < 0 || o.class_id >= spec.num_classes) fail("object class outside class space");
    if (o.width <= 0 || o.height <= 0) fail("object size must be positive");
    if (!depths.insert(o.depth).second) fail("object depths must be unique");
  }
  if (spec.labeled_frames) {
    for (int f : *spec.labeled_frames) {
      if (f < 0 || f >= spec.length) fail("labeled frame outside sequence");
    }
  }
  for (int k : spec.direct_flow_ks) {
    if (k == 0 || k == 1 || k == -1) fail("direct_flow_ks entries must satisfy |k| > 1");
  }
}

struct SynthFrame {
  int index = 0;
  RgbImage image;
  LabelMap labels;                 // exact ground truth
  LabelMap prediction;             // labels with injected noise
  ScalarPlane confidence;          // 1 where unchanged, 0.5 where flipped
  std::optional<FlowField> flow_fwd;  // o_{t->t+1}, absent on the last frame
  std::optional<FlowField> flow_bwd;  // o_{t->t-1}, absent on the first frame
  std::optional<ValidityMask> occluded_fwd;  // 1 where the t->t+1 warp identity may fail
};

namespace detail {

inline constexpr std::int32_t kBackground = -1;

// Index of the nearest object covering each pixel at frame t, or kBackground.
inline std::vector<std::int32_t> render_owners(const WorldSpec& spec, int t) {
  std::vector<std::int32_t> owner(std::size_t(spec.width) * spec.height, kBackground);
  std::vector<std::size_t> order(spec.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.objects[a].depth > spec.objects[b].depth;  // far first
  });
  for (std::size_t idx : order) {
    const auto& o = spec.objects[idx];
    const long x0 = long(o.x) + long(o.vx) * t;
    const long y0 = long(o.y) + long(o.vy) * t;
    const long xa = std::max(0L, x0), xb = std::min(long(spec.width), x0 + o.width);
    const long ya = std::max(0L, y0), yb = std::min(long(spec.height), y0 + o.height);
    for (long r = ya; r < yb; ++r) {
      for (long c = xa; c < xb; ++c) owner[std::size_t(r) * spec.width + c] = std::int32_t(idx);
    }
  }
  return owner;
}

inline std::pair<int, int> owner_velocity(const WorldSpec& spec, std::int32_t owner) {
  if (owner == kBackground) return {0, 0};
  return {spec.objects[owner].vx, spec.objects[owner].vy};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Fixed class palette: the 19 Cityscapes colours, then a hashed fallback.
inline std::array<std::uint8_t, 3> class_color(int class_id) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 19> kPalette{{
      {128, 64, 128}, {244, 35, 232}, {70, 70, 70},    {102, 102, 156}, {190, 153, 153},
      {153, 153, 153}, {250, 170, 30}, {220, 220, 0},  {107, 142, 35},  {152, 251, 152},
      {70, 130, 180},  {220, 20, 60},  {255, 0, 0},    {0, 0, 142},     {0, 0, 70},
      {0, 60, 100},    {0, 80, 100},   {0, 0, 230},    {119, 11, 32},
  }};
  if (class_id >= 0 && class_id < 19) return kPalette[class_id];
  if (class_id == kIgnoreLabel) return {0, 0, 0};
  const auto h = detail::splitmix64(static_cast<std::uint64_t>(class_id));
  return {std::uint8_t(h), std::uint8_t(h >> 8), std::uint8_t(h >> 16)};
}

inline RgbImage render_image(const LabelMap& labels) {
  std::vector<std::uint8_t> rgb(labels.size() * 3);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto c = class_color(labels.data()[p]);
    std::copy(c.begin(), c.end(), rgb.begin() + 3 * p);
  }
  return RgbImage(labels.width(), labels.height(), std::move(rgb));
}

// Exact flow o_{t->t+k}: each pixel moves with its visible owner.
inline FlowField exact_flow(const WorldSpec& spec, int t, int k) {
  const auto owner = detail::render_owners(spec, t);
  std::vector<float> dx(owner.size()), dy(owner.size());
  for (std::size_t p = 0; p < owner.size(); ++p) {
    const auto [vx, vy] = detail::owner_velocity(spec, owner[p]);
    dx[p] = static_cast<float>(vx * k);
    dy[p] = static_cast<float>(vy * k);
  }
  return FlowField(spec.width, spec.height, std::move(dx), std::move(dy));
}

// Pixels of frame t whose owner is not the visible owner at the displaced
// position in frame t+k, or whose displaced position leaves the canvas.
inline ValidityMask occlusion_mask(const WorldSpec& spec, int t, int k) {
  const auto now = detail::render_owners(spec, t);
  const auto then = detail::render_owners(spec, t + k);
  std::vector<std::uint8_t> occluded(now.size(), 0);
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const std::size_t p = std::size_t(r) * spec.width + c;
      const auto [vx, vy] = detail::owner_velocity(spec, now[p]);
      const long rr = r + long(vy) * k;
      const long cc = c + long(vx) * k;
      if (rr < 0 || rr >= spec.height || cc < 0 || cc >= spec.width) {
        occluded[p] = 1;
      } else if (then[std::size_t(rr) * spec.width + cc] != now[p]) {
        occluded[p] = 1;
      }
    }
  }
  return ValidityMask(spec.width, spec.height, std::move(occluded));
}

inline LabelMap render_labels(const WorldSpec& spec, int t) {
  const auto owner = detail::render_owners(spec, t);
  std::vector<std::uint8_t> labels(owner.size());
  for (std::size_t p = 0; p < owner.size(); ++p) {
    labels[p] = static_cast<std::uint8_t>(owner[p] == detail::kBackground
                                              ? spec.background_class
                                              : spec.objects[owner[p]].class_id);
  }
  return LabelMap(spec.width, spec.height, std::move(labels), ClassSpace(spec.num_classes));
}

inline std::vector<SynthFrame> generate_sequence(const WorldSpec& spec) {
  validate(spec);
  const ClassSpace space(spec.num_classes);
  std::vector<SynthFrame> frames;
  frames.reserve(spec.length);
  for (int t = 0; t < spec.length; ++t) {
    LabelMap labels = render_labels(spec, t);
    std::vector<std::uint8_t> pred(labels.data().begin(), labels.data().end());
    std::vector<float> conf(pred.size(), 1.f);
    if (spec.label_noise > 0.0) {
      std::mt19937_64 rng(detail::splitmix64(spec.seed ^ detail::splitmix64(std::uint64_t(t))));
      for (std::size_t p = 0; p < pred.size(); ++p) {
        if (detail::unit_double(rng) < spec.label_noise) {
          // Uniform over the other K - 1 classes.
          auto other = static_cast<int>(uniform_below(rng, spec.num_classes - 1));
          if (other >= pred[p]) ++other;
          pred[p] = static_cast<std::uint8_t>(other);
          conf[p] = 0.5f;
        }
      }
    }
    SynthFrame f{t,
                 render_image(labels),
                 labels,
                 LabelMap(spec.width, spec.height, std::move(pred), space),
                 ScalarPlane(spec.width, spec.height, std::move(conf)),
                 std::nullopt,
                 std::nullopt,
                 std::nullopt};
    if (t + 1 < spec.length) {
      f.flow_fwd = exact_flow(spec, t, 1);
      f.occluded_fwd = occlusion_mask(spec, t, 1);
    }
    if (t > 0) f.flow_bwd = exact_flow(spec, t, -1);
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Random worlds

struct RandomWorldOptions {
  int min_size = 16;
  int max_width = 128;
  int max_height = 128;
  int max_length = 10;
  int max_objects = 6;
  int max_speed = 3;
  int num_classes = 19;
  double label_noise = 0.0;
};

inline WorldSpec random_world_spec(std::uint64_t seed, const RandomWorldOptions& opt = {},
                                   const std::string& clip_id = "synth_0000") {
  std::mt19937_64 rng(detail::splitmix64(seed));
  auto between = [&](int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform_below(rng, std::uint64_t(hi - lo + 1)));
  };
  WorldSpec spec;
  spec.clip_id = clip_id;
  spec.seed = seed;
  spec.width = between(opt.min_size, opt.max_width);
  spec.height = between(opt.min_size, opt.max_height);
  spec.num_classes = opt.num_classes;
  spec.background_class = 0;
  spec.length = between(2, opt.max_length);
  spec.label_noise = opt.label_noise;
  const int n = between(1, opt.max_objects);
  for (int i = 0; i < n; ++i) {
    SynthObject o;
    o.class_id = opt.num_classes > 1 ? between(1, opt.num_classes - 1) : 0;
    o.width = between(2, std::max(2, spec.width / 2));
    o.height = between(2, std::max(2, spec.height / 2));
    o.x = between(-o.width / 2, spec.width - 1);
    o.y = between(-o.height / 2, spec.height - 1);
    o.vx = between(-opt.max_speed, opt.max_speed);
    o.vy = between(-opt.max_speed, opt.max_speed);
    o.depth = i;
    spec.objects.push_back(o);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// JSON

inline WorldSpec world_spec_from_json(const nlohmann::json& j) {
  try {
    WorldSpec s;
    s.clip_id = j.value("clip_id", s.clip_id);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.background_class = j.value("background_class", s.background_class);
    s.length = j.value("length", s.length);
    s.seed = j.value("seed", s.seed);
    s.label_noise = j.value("label_noise", s.label_noise);
    const auto domain = j.value("domain", std::string("target"));
    if (domain != "source" && domain != "target") throw std::invalid_argument("bad domain");
    s.domain = domain == "source" ? Domain::kSource : Domain::kTarget;
    const auto split = j.value("split", std::string("val"));
    if (split != "train" && split != "val") throw std::invalid_argument("bad split");
    s.split = split == "train" ? Split::kTrain : Split::kVal;
    if (j.contains("labeled_frames")) {
      s.labeled_frames = j.at("labeled_frames").get<std::vector<int>>();
    }
    s.direct_flow_ks = j.value("direct_flow_ks", std::vector<int>{});
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      SynthObject obj;
      obj.class_id = o.at("class_id").get<int>();
      obj.x = o.at("x").get<int>();
      obj.y = o.at("y").get<int>();
      obj.width = o.at("width").get<int>();
      obj.height = o.at("height").get<int>();
      obj.vx = o.value("vx", 0);
      obj.vy = o.value("vy", 0);
      obj.depth = o.value("depth", static_cast<int>(s.objects.size()));
      s.objects.push_back(obj);
    }
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("world spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorKind::kParse, std::string("world spec: ") + e.what());
  }
}

inline nlohmann::ordered_json to_json(const WorldSpec& s) {
  nlohmann::ordered_json j;
  j["clip_id"] = s.clip_id;
  j["width"] = s.width;
  j["height"] = s.height;
  j["num_classes"] = s.num_classes;
  j["background_class"] = s.background_class;
  j["length"] = s.length;
  j["seed"] = s.seed;
  j["label_noise"] = s.label_noise;
  j["domain"] = to_string(s.domain);
  j["split"] = to_string(s.split);
  if (s.labeled_frames) j["labeled_frames"] = *s.labeled_frames;
  if (!s.direct_flow_ks.empty()) j["direct_flow_ks"] = s.direct_flow_ks;
  auto objs = nlohmann::ordered_json::array();
  for (const auto& o : s.objects) {
    objs.push_back({{"class_id", o.class_id}, {"x", o.x}, {"y", o.y}, {"width", o.width},
                    {"height", o.height}, {"vx", o.vx}, {"vy", o.vy}, {"depth", o.depth}});
  }
  j["objects"] = std::move(objs);
  return j;
}

// Accepts a single world object, {"clips": [world, ...]}, or
// {"random": {"clips": N, "seed": S, ...RandomWorldOptions fields}}.
inline std::vector<WorldSpec> dataset_spec_from_json(const nlohmann::json& j) {
  std::vector<WorldSpec> out;
  if (j.contains("clips")) {
    for (const auto& c : j.at("clips")) out.push_back(world_spec_from_json(c));
  } else if (j.contains("random")) {
    const auto& r = j.at("random");
    RandomWorldOptions opt;
    opt.min_size = r.value("min_size", opt.min_size);
    opt.max_width = r.value("max_width", opt.max_width);
    opt.max_height = r.value("max_height", opt.max_height);
    opt.max_length = r.value("max_length", opt.max_length);
    opt.max_objects = r.value("max_objects", opt.max_objects);
    opt.max_speed = r.value("max_speed", opt.max_speed);
    opt.num_classes = r.value("num_classes", opt.num_classes);
    opt.label_noise = r.value("label_noise", opt.label_noise);
    const int clips = r.value("clips", 1);
    const auto seed = r.value("seed", std::uint64_t{1});
    for (int i = 0; i < clips; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "synth_%04d", i);
      auto spec = random_world_spec(seed * 1000003ULL + std::uint64_t(i), opt, id);
      validate(spec);
      out.push_back(std::move(spec));
    }
  } else {
    out.push_back(world_spec_from_json(j));
  }
  std::set<std::string> ids;
  for (const auto& s : out) {
    if (!ids.insert(s.clip_id).second) {
      throw Error(ErrorKind::kDuplicate, "duplicate clip_id " + s.clip_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset emission
//
// Layout under out_dir (stem = frame_stem(clip, frame)):
//   images/<stem>.png       RGB frame
//   labels/<stem>.png       ground truth (labelled frames only)
//   preds/<stem>.png        predictions (labels with injected noise)
//   conf/<stem>.pfm         top-1 confidence of the predictions
//   flow/<stem>_fwd.flo     o_{t->t+1};  flow/<stem>_bwd.flo  o_{t->t-1}
//   flow/<stem>_k<k>.flo    direct o_{t->t+k} for each requested k
//   manifest.jsonl

inline DatasetManifest emit_dataset(const std::vector<WorldSpec>& specs,
                                    const fs::path& out_dir) {
  std::vector<ManifestRecord> records;
  for (const auto& spec : specs) {
    const auto frames = generate_sequence(spec);
    for (const auto& f : frames) {
      const auto stem = frame_stem(spec.clip_id, f.index);
      ManifestRecord r;
      r.clip_id = spec.clip_id;
      r.frame_index = f.index;
      r.domain = spec.domain;
      r.split = spec.split;
      r.image_path = "images/" + stem + ".png";
      write_rgb_png(f.image, out_dir / *r.image_path);
      const bool labeled =
          !spec.labeled_frames ||
          std::find(spec.labeled_frames->begin(), spec.labeled_frames->end(), f.index) !=
              spec.labeled_frames->end();
      if (labeled) {
        r.label_path = "labels/" + stem + ".png";
        write_label_png(f.labels, out_dir / *r.label_path);
      }
      write_label_png(f.prediction, out_dir / "preds" / (stem + ".png"));
      write_pfm(f.confidence, out_dir / "conf" / (stem + ".pfm"));
      if (f.flow_fwd) {
        r.flow_fwd_path = "flow/" + stem + "_fwd.flo";
        write_flo(*f.flow_fwd, out_dir / *r.flow_fwd_path);
      }
      if (f.flow_bwd) {
        r.flow_bwd_path = "flow/" + stem + "_bwd.flo";
        write_flo(*f.flow_bwd, out_dir / *r.flow_bwd_path);
      }
      for (int k : spec.direct_flow_ks) {
        if (f.index + k < 0 || f.index + k >= spec.length) continue;
        const auto rel = "flow/" + stem + "_k" + (k > 0 ? "+" : "") + std::to_string(k) + ".flo";
        write_flo(exact_flow(spec, f.index, k), out_dir / rel);
        r.flows[k] = rel;
      }
      records.push_back(std::move(r));
    }
  }
  DatasetManifest manifest(std::move(records), out_dir);
  write_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

inline DatasetManifest emit_dataset(const WorldSpec& spec, const fs::path& out_dir) {
  return emit_dataset(std::vector<WorldSpec>{spec}, out_dir);
}

}  // namespace vidseg
