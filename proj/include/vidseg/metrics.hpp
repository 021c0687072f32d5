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

// Confusion-matrix evaluation (per-class IoU, mIoU, class-average accuracy)
// and the temporal pseudo-label metrics built on top of it.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidseg/core.hpp"
#include "vidseg/refine.hpp"
#include "vidseg/warp.hpp"

namespace vidseg {

inline constexpr int kReportSchemaVersion = 1;

// K x K counts, rows = ground truth, columns = prediction. Pixels whose ground
// truth is ignore contribute nothing. Pixels with a valid ground truth but an
// ignore prediction are not scored; they are tallied per ground-truth class in
// `rejected` so retention can be reported alongside the scores.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(ClassSpace class_space)
      : class_space_(class_space),
        counts_(std::size_t(class_space.num_classes()) * class_space.num_classes(), 0),
        rejected_(class_space.num_classes(), 0) {}

  const ClassSpace& class_space() const noexcept { return class_space_; }
  int num_classes() const noexcept { return class_space_.num_classes(); }

  std::uint64_t count(int gt, int pred) const {
    return counts_[std::size_t(gt) * num_classes() + pred];
  }
  std::uint64_t rejected(int gt) const { return rejected_[gt]; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::span<const std::uint64_t> rejected() const noexcept { return rejected_; }

  std::uint64_t pixels_evaluated() const noexcept {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }
  std::uint64_t pixels_rejected() const noexcept {
    std::uint64_t n = 0;
    for (auto c : rejected_) n += c;
    return n;
  }

  void add(int gt, int pred, std::uint64_t n = 1) {
    counts_[std::size_t(gt) * num_classes() + pred] += n;
  }
  void add_rejected(int gt, std::uint64_t n = 1) { rejected_[gt] += n; }

  void accumulate(const LabelMap& pred, const LabelMap& gt) {
    require_same_shape(pred, gt, "confusion_accumulate");
    if (!(pred.class_space() == class_space_) || !(gt.class_space() == class_space_)) {
      throw Error(ErrorKind::kShape, "confusion_accumulate: class-space mismatch");
    }
    const auto p = pred.data();
    const auto g = gt.data();
    const std::size_t k = num_classes();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (g[i] == kIgnoreLabel) continue;
      if (p[i] == kIgnoreLabel) {
        ++rejected_[g[i]];
      } else {
        ++counts_[g[i] * k + p[i]];
      }
    }
  }

  void merge_from(const ConfusionMatrix& other) {
    if (!(other.class_space_ == class_space_)) {
      throw Error(ErrorKind::kShape, "merge: class-space mismatch");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    for (std::size_t i = 0; i < rejected_.size(); ++i) rejected_[i] += other.rejected_[i];
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  ClassSpace class_space_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> rejected_;
};

inline ConfusionMatrix confusion_accumulate(const LabelMap& pred, const LabelMap& gt,
                                            ConfusionMatrix acc) {
  acc.accumulate(pred, gt);
  return acc;
}

inline ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  ConfusionMatrix out = a;
  out.merge_from(b);
  return out;
}

struct ClassMetric {
  int class_id = 0;
  std::optional<double> iou;  // percent; absent when the class has zero union
  std::optional<double> acc;  // percent; absent when the class has no ground truth

  friend bool operator==(const ClassMetric&, const ClassMetric&) = default;
};

struct MetricReport {
  std::vector<ClassMetric> per_class;
  double miou = 0.0;
  double class_avg_acc = 0.0;
  std::optional<double> retained_fraction;
  std::uint64_t pixels_evaluated = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// Arithmetic mean of the present entries, in index order; 0 when none.
inline double mean_of_present(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// `classes` restricts the report (and the means) to an evaluated class
// universe; empty means every class of the class space.
inline MetricReport summarize(const ConfusionMatrix& acc,
                              std::span<const int> classes = {}) {
  MetricReport report;
  report.pixels_evaluated = acc.pixels_evaluated();
  const std::uint64_t seen = report.pixels_evaluated + acc.pixels_rejected();
  if (seen > 0) {
    report.retained_fraction =
        static_cast<double>(report.pixels_evaluated) / static_cast<double>(seen);
  }
  if (report.pixels_evaluated == 0) return report;

  const int k = acc.num_classes();
  std::vector<int> universe(classes.begin(), classes.end());
  if (universe.empty()) {
    for (int c = 0; c < k; ++c) universe.push_back(c);
  }
  std::vector<std::uint64_t> row_sum(k, 0), col_sum(k, 0);
  for (int g = 0; g < k; ++g) {
    for (int p = 0; p < k; ++p) {
      row_sum[g] += acc.count(g, p);
      col_sum[p] += acc.count(g, p);
    }
  }
  std::vector<std::optional<double>> ious, accs;
  for (int c : universe) {
    if (!acc.class_space().is_class(c)) {
      throw Error(ErrorKind::kParameter, "class " + std::to_string(c) +
                                             " outside the class space");
    }
    ClassMetric m{c, std::nullopt, std::nullopt};
    const std::uint64_t tp = acc.count(c, c);
    const std::uint64_t uni = row_sum[c] + col_sum[c] - tp;
    if (uni > 0) m.iou = 100.0 * static_cast<double>(tp) / static_cast<double>(uni);
    if (row_sum[c] > 0) {
      m.acc = 100.0 * static_cast<double>(tp) / static_cast<double>(row_sum[c]);
    }
    ious.push_back(m.iou);
    accs.push_back(m.acc);
    report.per_class.push_back(m);
  }
  report.miou = mean_of_present(ious);
  report.class_avg_acc = mean_of_present(accs);
  return report;
}

// ---------------------------------------------------------------------------
// Temporal pseudo-label metrics. Pixels whose warp leaves the frame are
// excluded from scoring (they land in the rejected tally).

// Current-frame pseudo-label plays the ground-truth role.
inline ConfusionMatrix pl_pred_consis_confusion(const LabelMap& pl_t, const LabelMap& pl_tpk,
                                                const FlowField& flow) {
  require_same_shape(pl_t, pl_tpk, "pl_pred_consis");
  ConfusionMatrix acc(pl_t.class_space());
  acc.accumulate(propagate_labels(pl_tpk, flow).payload, pl_t);
  return acc;
}

inline ConfusionMatrix pl_warped_confusion(const LabelMap& pl_tpk, const FlowField& flow,
                                           const LabelMap& gt_t) {
  require_same_shape(pl_tpk, gt_t, "pl_warped");
  ConfusionMatrix acc(gt_t.class_space());
  acc.accumulate(propagate_labels(pl_tpk, flow).payload, gt_t);
  return acc;
}

inline ConfusionMatrix pl_consistency_confusion(const LabelMap& pl_t, const LabelMap& pl_tpk,
                                                const FlowField& flow, const LabelMap& gt_t) {
  require_same_shape(pl_t, gt_t, "pl_consistency");
  ConfusionMatrix acc(gt_t.class_space());
  acc.accumulate(refine_consistency(pl_t, pl_tpk, flow), gt_t);
  return acc;
}

inline MetricReport pl_pred_consis(const LabelMap& pl_t, const LabelMap& pl_tpk,
                                   const FlowField& flow, std::span<const int> classes = {}) {
  return summarize(pl_pred_consis_confusion(pl_t, pl_tpk, flow), classes);
}

inline MetricReport pl_warped(const LabelMap& pl_tpk, const FlowField& flow,
                              const LabelMap& gt_t, std::span<const int> classes = {}) {
  return summarize(pl_warped_confusion(pl_tpk, flow, gt_t), classes);
}

// Scores the consistency-filtered map against ground truth; retained_fraction
// is the share of all pixels kept by the filter.
inline MetricReport pl_consistency(const LabelMap& pl_t, const LabelMap& pl_tpk,
                                   const FlowField& flow, const LabelMap& gt_t,
                                   std::span<const int> classes = {}) {
  require_same_shape(pl_t, gt_t, "pl_consistency");
  const LabelMap filtered = refine_consistency(pl_t, pl_tpk, flow);
  ConfusionMatrix acc(gt_t.class_space());
  acc.accumulate(filtered, gt_t);
  MetricReport report = summarize(acc, classes);
  report.retained_fraction = retained_fraction(filtered);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// Columns: class,iou,acc. One row per class, then a "mean" row. Absent values
// are empty cells.
inline std::string report_to_csv(const MetricReport& r) {
  std::string out = "class,iou,acc\n";
  for (const auto& m : r.per_class) {
    out += std::to_string(m.class_id) + ",";
    out += (m.iou ? format_fixed(*m.iou) : std::string()) + ",";
    out += (m.acc ? format_fixed(*m.acc) : std::string()) + "\n";
  }
  out += "mean," + format_fixed(r.miou) + "," + format_fixed(r.class_avg_acc) + "\n";
  return out;
}

inline nlohmann::ordered_json json_or_null(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["miou"] = r.miou;
  j["class_avg_acc"] = r.class_avg_acc;
  j["retained_fraction"] = json_or_null(r.retained_fraction);
  j["pixels_evaluated"] = r.pixels_evaluated;
  auto per_class = nlohmann::ordered_json::array();
  for (const auto& m : r.per_class) {
    nlohmann::ordered_json c;
    c["class"] = m.class_id;
    c["iou"] = json_or_null(m.iou);
    c["acc"] = json_or_null(m.acc);
    per_class.push_back(std::move(c));
  }
  j["per_class"] = std::move(per_class);
  return j;
}

}  // namespace vidseg
