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

// Batch execution over a dataset manifest: frame-pair enumeration at a signed
// frame distance, refinement and evaluation jobs, and frame-distance sweeps.
//
// Jobs fan out over a small thread pool. Each work item writes to its own
// slot or output path and every reduction is over integer counts, so reports
// and files are byte-identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidseg/core.hpp"
#include "vidseg/io.hpp"
#include "vidseg/metrics.hpp"
#include "vidseg/refine.hpp"
#include "vidseg/warp.hpp"

namespace vidseg {

// ---------------------------------------------------------------------------
// Work pool

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(worker, item) for item in [0, n) on `workers` threads. Items are
// claimed dynamically; callers must make results independent of the worker
// that processed an item.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(int, std::size_t)>& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto body = [&](int w) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(w, i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Pair enumeration

struct FramePair {
  std::string clip_id;
  int t = 0;
  int k = 0;
  // Either one direct flow o_{t->t+k} or |k| unit-step flows to be composed.
  std::vector<fs::path> flow_paths;
  bool composed = false;
  std::optional<fs::path> gt_t;

  friend bool operator==(const FramePair&, const FramePair&) = default;
};

enum class Anchor { kLabeled, kAll };

struct PairEnumeration {
  std::vector<FramePair> pairs;
  std::size_t skipped_missing_partner = 0;
  std::size_t skipped_missing_flow = 0;
};

inline std::optional<std::string> unit_flow(const ManifestRecord& r, int step) {
  if (step > 0) return r.flow_fwd_path ? r.flow_fwd_path : std::nullopt;
  return r.flow_bwd_path ? r.flow_bwd_path : std::nullopt;
}

// For every anchor frame t whose clip also holds frame t+k, emits one pair in
// clip-then-frame order. Direct flows in the manifest take precedence over
// chains of unit-step flows.
inline PairEnumeration enumerate_pairs(const DatasetManifest& manifest, int k,
                                       Anchor anchor = Anchor::kLabeled) {
  if (k == 0) throw Error(ErrorKind::kParameter, "frame distance must be non-zero");
  PairEnumeration out;
  const int step = k > 0 ? 1 : -1;
  for (const auto& rec : manifest.records()) {
    if (anchor == Anchor::kLabeled && !rec.label_path) continue;
    if (!manifest.find(rec.clip_id, rec.frame_index + k)) {
      ++out.skipped_missing_partner;
      continue;
    }
    FramePair pair;
    pair.clip_id = rec.clip_id;
    pair.t = rec.frame_index;
    pair.k = k;
    if (rec.label_path) pair.gt_t = manifest.resolve(*rec.label_path);
    if (auto it = rec.flows.find(k); it != rec.flows.end()) {
      pair.flow_paths.push_back(manifest.resolve(it->second));
    } else if (std::abs(k) == 1) {
      if (auto f = unit_flow(rec, step)) pair.flow_paths.push_back(manifest.resolve(*f));
    } else {
      pair.composed = true;
      for (int i = 0; i < std::abs(k); ++i) {
        const auto* hop = manifest.find(rec.clip_id, rec.frame_index + i * step);
        auto f = hop ? unit_flow(*hop, step) : std::nullopt;
        if (!f) {
          pair.flow_paths.clear();
          break;
        }
        pair.flow_paths.push_back(manifest.resolve(*f));
      }
    }
    if (pair.flow_paths.empty()) {
      ++out.skipped_missing_flow;
      continue;
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

inline FlowField load_pair_flow(const FramePair& pair) {
  if (!pair.composed) return read_flo(pair.flow_paths.front());
  std::vector<FlowField> hops;
  hops.reserve(pair.flow_paths.size());
  for (const auto& p : pair.flow_paths) hops.push_back(read_flo(p));
  return compose_flows(hops).payload;
}

// ---------------------------------------------------------------------------
// Job configuration

struct JobConfig {
  fs::path manifest;
  fs::path pred_dir;
  std::optional<fs::path> conf_dir;
  Strategy strategy = Strategy::kConsistency;
  int frame_distance = 1;
  std::vector<int> classes;  // evaluated class universe; empty = all
  int num_classes = 19;
  int workers = 0;           // 0 = hardware concurrency
  std::uint64_t seed = 1;
  fs::path out_dir;
  std::optional<Split> split;
  std::optional<Domain> domain;
};

inline fs::path prediction_path(const JobConfig& c, const std::string& clip, int frame) {
  return c.pred_dir / (frame_stem(clip, frame) + ".png");
}

inline fs::path confidence_path(const JobConfig& c, const std::string& clip, int frame) {
  return *c.conf_dir / (frame_stem(clip, frame) + ".pfm");
}

// Keeps records matching the optional split/domain filters.
inline DatasetManifest filter_manifest(const DatasetManifest& m, const JobConfig& c) {
  if (!c.split && !c.domain) return m;
  std::vector<ManifestRecord> kept;
  for (const auto& r : m.records()) {
    if (c.split && r.split != *c.split) continue;
    if (c.domain && r.domain != *c.domain) continue;
    kept.push_back(r);
  }
  return DatasetManifest(std::move(kept), m.base_dir());
}

struct PairError {
  std::string clip_id;
  int frame_index = 0;
  std::string message;
};

inline nlohmann::ordered_json to_json(const std::vector<PairError>& errors) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : errors) {
    arr.push_back({{"clip_id", e.clip_id}, {"frame_index", e.frame_index},
                   {"error", e.message}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Refinement job

inline constexpr double kFailureBudget = 0.10;

struct RefineReport {
  Strategy strategy = Strategy::kNone;
  int frame_distance = 0;
  std::size_t pairs_total = 0;
  std::size_t pairs_ok = 0;
  std::size_t skipped_missing_partner = 0;
  std::size_t skipped_missing_flow = 0;
  std::size_t flows_direct = 0;
  std::size_t flows_composed = 0;
  std::uint64_t pixels_total = 0;
  std::uint64_t pixels_retained = 0;
  std::uint64_t pixels_retained_with_gt = 0;
  std::uint64_t pixels_retained_correct = 0;
  std::vector<PairError> errors;
  std::uint64_t seed = 1;

  double retained_fraction() const {
    return pixels_total ? double(pixels_retained) / double(pixels_total) : 0.0;
  }
  std::optional<double> retained_accuracy() const {
    if (pixels_retained_with_gt == 0) return std::nullopt;
    return 100.0 * double(pixels_retained_correct) / double(pixels_retained_with_gt);
  }
  bool failed() const {
    return pairs_total > 0 && double(errors.size()) > kFailureBudget * double(pairs_total);
  }
};

inline nlohmann::ordered_json to_json(const RefineReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["strategy"] = to_string(r.strategy);
  j["frame_distance"] = r.frame_distance;
  j["seed"] = r.seed;
  j["pairs_total"] = r.pairs_total;
  j["pairs_ok"] = r.pairs_ok;
  j["pairs_failed"] = r.errors.size();
  j["skipped_missing_partner"] = r.skipped_missing_partner;
  j["skipped_missing_flow"] = r.skipped_missing_flow;
  j["flows_direct"] = r.flows_direct;
  j["flows_composed"] = r.flows_composed;
  j["pixels_total"] = r.pixels_total;
  j["pixels_retained"] = r.pixels_retained;
  j["retained_fraction"] = r.retained_fraction();
  const auto acc = r.retained_accuracy();
  j["retained_accuracy"] = json_or_null(acc);
  j["job_failed"] = r.failed();
  j["errors"] = to_json(r.errors);
  return j;
}

namespace detail {

inline void validate_refine_config(const JobConfig& c) {
  if (needs_flow(c.strategy) && c.frame_distance == 0) {
    throw Error(ErrorKind::kParameter,
                std::string(to_string(c.strategy)) + " needs a non-zero frame distance");
  }
  if (needs_confidence(c.strategy) && !c.conf_dir) {
    throw Error(ErrorKind::kMissingInput, "max_confidence needs a confidence directory");
  }
}

inline int signed_distance(const JobConfig& c) {
  switch (c.strategy) {
    case Strategy::kWarpForward: return std::abs(c.frame_distance);
    case Strategy::kWarpBackward: return -std::abs(c.frame_distance);
    default: return c.frame_distance;
  }
}

}  // namespace detail

// Refines every anchor frame and writes <out_dir>/<stem>.png plus
// <out_dir>/report.json. Oracle refinement anchors on labelled frames; the
// other strategies anchor on every frame with a partner at the distance.
inline RefineReport run_refine_job(const JobConfig& config) {
  detail::validate_refine_config(config);
  const auto manifest = filter_manifest(load_manifest(config.manifest), config);
  const ClassSpace space(config.num_classes);
  RefineReport report;
  report.strategy = config.strategy;
  report.seed = config.seed;

  std::vector<FramePair> pairs;
  if (needs_flow(config.strategy)) {
    report.frame_distance = detail::signed_distance(config);
    auto e = enumerate_pairs(manifest, report.frame_distance, Anchor::kAll);
    pairs = std::move(e.pairs);
    report.skipped_missing_partner = e.skipped_missing_partner;
    report.skipped_missing_flow = e.skipped_missing_flow;
  } else {
    for (const auto& r : manifest.records()) {
      if (config.strategy == Strategy::kOracle && !r.label_path) continue;
      FramePair p;
      p.clip_id = r.clip_id;
      p.t = r.frame_index;
      if (r.label_path) p.gt_t = manifest.resolve(*r.label_path);
      pairs.push_back(std::move(p));
    }
  }
  report.pairs_total = pairs.size();
  for (const auto& p : pairs) {
    if (p.flow_paths.empty()) continue;
    (p.composed ? report.flows_composed : report.flows_direct) += 1;
  }

  struct Outcome {
    bool ok = false;
    std::string error;
    std::uint64_t total = 0, retained = 0, with_gt = 0, correct = 0;
  };
  std::vector<Outcome> outcomes(pairs.size());
  fs::create_directories(config.out_dir);

  parallel_for(pairs.size(), resolve_workers(config.workers), [&](int, std::size_t i) {
    const auto& pair = pairs[i];
    Outcome& o = outcomes[i];
    try {
      const auto stem = frame_stem(pair.clip_id, pair.t);
      const auto pred_t_path = prediction_path(config, pair.clip_id, pair.t);
      const auto out_path = config.out_dir / (stem + ".png");
      RefineInput in;
      in.pl_t = read_label_png(pred_t_path, space);
      std::optional<LabelMap> refined;
      if (config.strategy == Strategy::kNone) {
        detail::write_file_bytes(out_path, detail::read_file_bytes(pred_t_path));
        refined = *in.pl_t;
      } else {
        if (needs_flow(config.strategy)) {
          in.pl_tpk = read_label_png(
              prediction_path(config, pair.clip_id, pair.t + pair.k), space);
          in.flow = load_pair_flow(pair);
        }
        if (needs_confidence(config.strategy)) {
          in.conf_t = read_pfm(confidence_path(config, pair.clip_id, pair.t));
          in.conf_tpk = read_pfm(confidence_path(config, pair.clip_id, pair.t + pair.k));
        }
        if (config.strategy == Strategy::kOracle) in.gt_t = read_label_png(*pair.gt_t, space);
        refined = refine(config.strategy, in);
        write_label_png(*refined, out_path);
      }
      o.total = refined->size();
      const auto out = refined->data();
      for (std::uint8_t v : out) o.retained += v != kIgnoreLabel;
      if (pair.gt_t) {
        const LabelMap gt = in.gt_t ? *in.gt_t : read_label_png(*pair.gt_t, space);
        require_same_shape(gt, *refined, "refined vs ground truth");
        const auto g = gt.data();
        for (std::size_t p = 0; p < out.size(); ++p) {
          if (out[p] == kIgnoreLabel || g[p] == kIgnoreLabel) continue;
          ++o.with_gt;
          o.correct += out[p] == g[p];
        }
      }
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.ok) {
      report.errors.push_back({pairs[i].clip_id, pairs[i].t, o.error});
      continue;
    }
    ++report.pairs_ok;
    report.pixels_total += o.total;
    report.pixels_retained += o.retained;
    report.pixels_retained_with_gt += o.with_gt;
    report.pixels_retained_correct += o.correct;
  }
  const auto text = to_json(report).dump(2) + "\n";
  detail::write_file_bytes(config.out_dir / "report.json",
                           std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                     text.size()));
  return report;
}

// ---------------------------------------------------------------------------
// Evaluation job

struct EvalReport {
  MetricReport metrics;
  ConfusionMatrix confusion{ClassSpace(1)};
  std::size_t frames_expected = 0;
  std::size_t frames_evaluated = 0;
  std::vector<PairError> missing;  // predictions absent or unreadable

  bool coverage_warning() const { return !missing.empty(); }
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  auto j = report_to_json(r.metrics);
  j["frames_expected"] = r.frames_expected;
  j["frames_evaluated"] = r.frames_evaluated;
  j["coverage_warning"] = r.coverage_warning();
  j["missing"] = to_json(r.missing);
  return j;
}

// Evaluates predictions of every labelled frame into a single confusion
// matrix, restricted to config.classes.
inline EvalReport run_eval_job(const JobConfig& config) {
  const auto manifest = filter_manifest(load_manifest(config.manifest), config);
  const ClassSpace space(config.num_classes);
  std::vector<const ManifestRecord*> frames;
  for (const auto& r : manifest.records()) {
    if (r.label_path) frames.push_back(&r);
  }
  const int workers = resolve_workers(config.workers);
  std::vector<ConfusionMatrix> partial(workers, ConfusionMatrix(space));
  std::vector<std::optional<std::string>> errors(frames.size());
  parallel_for(frames.size(), workers, [&](int w, std::size_t i) {
    const auto& rec = *frames[i];
    try {
      const auto pred_path = prediction_path(config, rec.clip_id, rec.frame_index);
      if (!fs::exists(pred_path)) throw Error(ErrorKind::kIo, "missing prediction");
      const auto pred = read_label_png(pred_path, space);
      const auto gt = read_label_png(manifest.resolve(*rec.label_path), space);
      ConfusionMatrix local(space);
      local.accumulate(pred, gt);
      partial[w].merge_from(local);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  ConfusionMatrix total(space);
  for (const auto& p : partial) total.merge_from(p);
  EvalReport report;
  report.frames_expected = frames.size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (errors[i]) {
      report.missing.push_back({frames[i]->clip_id, frames[i]->frame_index, *errors[i]});
    } else {
      ++report.frames_evaluated;
    }
  }
  report.metrics = summarize(total, config.classes);
  report.confusion = std::move(total);
  return report;
}

// ---------------------------------------------------------------------------
// Temporal metrics over a manifest

enum class TemporalMetric { kPredConsis, kWarped, kConsistency };

inline std::optional<TemporalMetric> parse_temporal_metric(std::string_view s) {
  if (s == "predconsis") return TemporalMetric::kPredConsis;
  if (s == "warped") return TemporalMetric::kWarped;
  if (s == "consistency") return TemporalMetric::kConsistency;
  return std::nullopt;
}

struct TemporalAggregate {
  int k = 0;
  std::size_t pairs = 0;
  std::size_t failed = 0;
  std::size_t skipped_missing_partner = 0;
  std::size_t skipped_missing_flow = 0;
  std::size_t flows_direct = 0;
  std::size_t flows_composed = 0;
  ConfusionMatrix warped;
  ConfusionMatrix consistency;
  ConfusionMatrix pred_consis;
  std::uint64_t pixels_total = 0;
  std::uint64_t pixels_retained = 0;
  std::vector<PairError> errors;

  explicit TemporalAggregate(ClassSpace s) : warped(s), consistency(s), pred_consis(s) {}

  double retained_fraction() const {
    return pixels_total ? double(pixels_retained) / double(pixels_total) : 0.0;
  }
  const char* flow_source() const {
    if (flows_direct && flows_composed) return "mixed";
    if (flows_direct) return "direct";
    if (flows_composed) return "composed";
    return "none";
  }
};

// Accumulates all three temporal metrics for distance k. Prediction
// consistency needs no ground truth and anchors on every frame; the two
// ground-truth metrics use labelled anchors only.
inline TemporalAggregate accumulate_temporal(const DatasetManifest& manifest,
                                             const JobConfig& config, int k,
                                             Anchor anchor) {
  const ClassSpace space(config.num_classes);
  TemporalAggregate agg(space);
  agg.k = k;
  auto e = enumerate_pairs(manifest, k, anchor);
  agg.skipped_missing_partner = e.skipped_missing_partner;
  agg.skipped_missing_flow = e.skipped_missing_flow;
  const auto& pairs = e.pairs;
  for (const auto& p : pairs) (p.composed ? agg.flows_composed : agg.flows_direct) += 1;

  struct Outcome {
    std::optional<ConfusionMatrix> warped, consistency, pred_consis;
    std::uint64_t total = 0, retained = 0;
    std::optional<std::string> error;
  };
  std::vector<Outcome> outcomes(pairs.size());
  parallel_for(pairs.size(), resolve_workers(config.workers), [&](int, std::size_t i) {
    const auto& pair = pairs[i];
    auto& o = outcomes[i];
    try {
      const auto pl_t = read_label_png(prediction_path(config, pair.clip_id, pair.t), space);
      const auto pl_tpk =
          read_label_png(prediction_path(config, pair.clip_id, pair.t + pair.k), space);
      const auto flow = load_pair_flow(pair);
      o.pred_consis = pl_pred_consis_confusion(pl_t, pl_tpk, flow);
      const auto filtered = refine_consistency(pl_t, pl_tpk, flow);
      o.total = filtered.size();
      for (std::uint8_t v : filtered.data()) o.retained += v != kIgnoreLabel;
      if (pair.gt_t) {
        const auto gt = read_label_png(*pair.gt_t, space);
        o.warped = pl_warped_confusion(pl_tpk, flow, gt);
        o.consistency = ConfusionMatrix(space);
        o.consistency->accumulate(filtered, gt);
      }
    } catch (const std::exception& ex) {
      o.error = ex.what();
    }
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& o = outcomes[i];
    if (o.error) {
      ++agg.failed;
      agg.errors.push_back({pairs[i].clip_id, pairs[i].t, *o.error});
      continue;
    }
    ++agg.pairs;
    agg.pred_consis.merge_from(*o.pred_consis);
    if (o.warped) agg.warped.merge_from(*o.warped);
    if (o.consistency) agg.consistency.merge_from(*o.consistency);
    agg.pixels_total += o.total;
    agg.pixels_retained += o.retained;
  }
  return agg;
}

struct ConsisResult {
  TemporalMetric metric = TemporalMetric::kPredConsis;
  TemporalAggregate aggregate;
  MetricReport report;
};

inline ConsisResult run_consis_job(const JobConfig& config, TemporalMetric metric) {
  if (config.frame_distance == 0) {
    throw Error(ErrorKind::kParameter, "frame distance must be non-zero");
  }
  const auto manifest = filter_manifest(load_manifest(config.manifest), config);
  const Anchor anchor = metric == TemporalMetric::kPredConsis ? Anchor::kAll : Anchor::kLabeled;
  auto agg = accumulate_temporal(manifest, config, config.frame_distance, anchor);
  MetricReport report;
  switch (metric) {
    case TemporalMetric::kPredConsis:
      report = summarize(agg.pred_consis, config.classes);
      break;
    case TemporalMetric::kWarped:
      report = summarize(agg.warped, config.classes);
      break;
    case TemporalMetric::kConsistency:
      report = summarize(agg.consistency, config.classes);
      report.retained_fraction = agg.retained_fraction();
      break;
  }
  return ConsisResult{metric, std::move(agg), std::move(report)};
}

// ---------------------------------------------------------------------------
// Frame-distance sweep

struct SweepRow {
  int k = 0;
  bool present = false;  // false when no pair could be formed (e.g. missing flow)
  double warped_miou = 0, warped_acc = 0;
  double consistency_miou = 0, consistency_acc = 0;
  double retained_fraction = 0;
  std::size_t pairs = 0;
  std::string flow_source = "none";
};

inline std::vector<SweepRow> frame_distance_sweep(const JobConfig& config,
                                                  std::span<const int> ks) {
  const auto manifest = filter_manifest(load_manifest(config.manifest), config);
  std::vector<SweepRow> rows;
  for (int k : ks) {
    if (k == 0) throw Error(ErrorKind::kParameter, "sweep distances must be non-zero");
    const auto agg = accumulate_temporal(manifest, config, k, Anchor::kLabeled);
    SweepRow row;
    row.k = k;
    row.pairs = agg.pairs;
    row.flow_source = agg.flow_source();
    row.present = agg.pairs > 0;
    if (row.present) {
      const auto w = summarize(agg.warped, config.classes);
      const auto c = summarize(agg.consistency, config.classes);
      row.warped_miou = w.miou;
      row.warped_acc = w.class_avg_acc;
      row.consistency_miou = c.miou;
      row.consistency_acc = c.class_avg_acc;
      row.retained_fraction = agg.retained_fraction();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Columns: k,pl_warped_miou,pl_warped_acc,pl_consistency_miou,
// pl_consistency_acc,retained_fraction,pairs,flow_source. Absent rows carry
// "NA" in every metric column.
inline std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out =
      "k,pl_warped_miou,pl_warped_acc,pl_consistency_miou,pl_consistency_acc,"
      "retained_fraction,pairs,flow_source\n";
  for (const auto& r : rows) {
    out += std::to_string(r.k) + ",";
    if (r.present) {
      out += format_fixed(r.warped_miou) + "," + format_fixed(r.warped_acc) + "," +
             format_fixed(r.consistency_miou) + "," + format_fixed(r.consistency_acc) + "," +
             format_fixed(r.retained_fraction, 4);
    } else {
      out += "NA,NA,NA,NA,NA";
    }
    out += "," + std::to_string(r.pairs) + "," + r.flow_source + "\n";
  }
  return out;
}

inline nlohmann::ordered_json sweep_to_json(std::span<const SweepRow> rows) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["k"] = r.k;
    auto val = [&](double v) { return json_or_null(r.present ? std::optional(v) : std::nullopt); };
    row["pl_warped_miou"] = val(r.warped_miou);
    row["pl_warped_acc"] = val(r.warped_acc);
    row["pl_consistency_miou"] = val(r.consistency_miou);
    row["pl_consistency_acc"] = val(r.consistency_acc);
    row["retained_fraction"] = val(r.retained_fraction);
    row["pairs"] = r.pairs;
    row["flow_source"] = r.flow_source;
    arr.push_back(std::move(row));
  }
  j["rows"] = std::move(arr);
  return j;
}

}  // namespace vidseg
