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

// Pseudo-label refinement strategies. Each strategy takes the current-frame
// pseudo-label and (depending on the strategy) a flow-aligned neighbour
// prediction, confidences, or ground truth, and returns a refined map where
// discarded pixels carry the ignore label.

#include <optional>
#include <string>
#include <string_view>

#include "vidseg/core.hpp"
#include "vidseg/warp.hpp"

namespace vidseg {

// Keeps pl_t where it equals the flow-aligned pl_tpk. Invalid warps and
// ignore labels are never retained.
inline LabelMap refine_consistency(const LabelMap& pl_t, const LabelMap& pl_tpk,
                                   const FlowField& flow) {
  require_same_shape(pl_t, pl_tpk, "refine_consistency");
  require_same_shape(pl_t, flow, "refine_consistency");
  const auto warped = propagate_labels(pl_tpk, flow);
  const auto cur = pl_t.data();
  const auto prop = warped.payload.data();
  const auto valid = warped.validity.data();
  std::vector<std::uint8_t> out(cur.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = (valid[p] && cur[p] == prop[p]) ? cur[p] : kIgnoreLabel;
  }
  return LabelMap(pl_t.width(), pl_t.height(), std::move(out), pl_t.class_space());
}

// Per pixel, keeps pl_t when conf_t >= aligned conf_tpk (ties keep pl_t) and
// otherwise takes the aligned pl_tpk. Where the warp leaves the frame the
// current prediction is kept.
inline LabelMap refine_max_confidence(const LabelMap& pl_t, const ScalarPlane& conf_t,
                                      const LabelMap& pl_tpk,
                                      const ScalarPlane& conf_tpk,
                                      const FlowField& flow) {
  require_same_shape(pl_t, conf_t, "refine_max_confidence");
  require_same_shape(pl_t, pl_tpk, "refine_max_confidence");
  require_same_shape(pl_t, conf_tpk, "refine_max_confidence");
  require_same_shape(pl_t, flow, "refine_max_confidence");
  require_unit_interval(conf_t, "conf_t");
  require_unit_interval(conf_tpk, "conf_tpk");
  // Both warps use the same nearest sampling, so label and confidence come
  // from the same source pixel.
  const auto warped_pl = propagate_labels(pl_tpk, flow);
  const auto warped_conf = propagate_plane(conf_tpk, flow, Sampling::kNearest);
  const auto cur = pl_t.data();
  const auto ct = conf_t.data();
  const auto prop = warped_pl.payload.data();
  const auto cp = warped_conf.payload.data();
  const auto valid = warped_pl.validity.data();
  std::vector<std::uint8_t> out(cur.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = (!valid[p] || ct[p] >= cp[p]) ? cur[p] : prop[p];
  }
  return LabelMap(pl_t.width(), pl_t.height(), std::move(out), pl_t.class_space());
}

// Adopts the aligned neighbour prediction. Forward versus backward is decided
// by which flow the caller passes.
inline LabelMap refine_warp_frame(const LabelMap& pl_tpk, const FlowField& flow) {
  return propagate_labels(pl_tpk, flow).payload;
}

inline LabelMap refine_oracle(const LabelMap& pl_t, const LabelMap& gt_t) {
  require_same_shape(pl_t, gt_t, "refine_oracle");
  const auto cur = pl_t.data();
  const auto gt = gt_t.data();
  std::vector<std::uint8_t> out(cur.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = (gt[p] != kIgnoreLabel && cur[p] == gt[p]) ? cur[p] : kIgnoreLabel;
  }
  return LabelMap(pl_t.width(), pl_t.height(), std::move(out), pl_t.class_space());
}

inline double retained_fraction(const LabelMap& refined) {
  std::size_t kept = 0;
  for (std::uint8_t v : refined.data()) kept += v != kIgnoreLabel;
  return static_cast<double>(kept) / static_cast<double>(refined.size());
}

enum class Strategy {
  kConsistency,
  kMaxConfidence,
  kWarpForward,
  kWarpBackward,
  kOracle,
  kNone,
};

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kConsistency: return "consistency";
    case Strategy::kMaxConfidence: return "max_confidence";
    case Strategy::kWarpForward: return "warp_forward";
    case Strategy::kWarpBackward: return "warp_backward";
    case Strategy::kOracle: return "oracle";
    case Strategy::kNone: return "none";
  }
  return "unknown";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kConsistency, Strategy::kMaxConfidence, Strategy::kWarpForward,
                 Strategy::kWarpBackward, Strategy::kOracle, Strategy::kNone}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

inline bool needs_flow(Strategy s) {
  return s == Strategy::kConsistency || s == Strategy::kMaxConfidence ||
         s == Strategy::kWarpForward || s == Strategy::kWarpBackward;
}

inline bool needs_confidence(Strategy s) { return s == Strategy::kMaxConfidence; }

struct RefineInput {
  std::optional<LabelMap> pl_t;
  std::optional<LabelMap> pl_tpk;
  std::optional<ScalarPlane> conf_t;
  std::optional<ScalarPlane> conf_tpk;
  std::optional<FlowField> flow;
  std::optional<LabelMap> gt_t;
};

namespace detail {

template <typename T>
const T& require_input(const std::optional<T>& v, const char* name, Strategy s) {
  if (!v) {
    throw Error(ErrorKind::kMissingInput,
                std::string(to_string(s)) + " refinement requires " + name);
  }
  return *v;
}

}  // namespace detail

// Strategy dispatch with presence checks. Warp-forward and warp-backward
// differ only in the flow the caller supplies.
inline LabelMap refine(Strategy s, const RefineInput& in) {
  using detail::require_input;
  switch (s) {
    case Strategy::kConsistency:
      return refine_consistency(require_input(in.pl_t, "pl_t", s),
                                require_input(in.pl_tpk, "pl_tpk", s),
                                require_input(in.flow, "flow", s));
    case Strategy::kMaxConfidence:
      return refine_max_confidence(
          require_input(in.pl_t, "pl_t", s), require_input(in.conf_t, "conf_t", s),
          require_input(in.pl_tpk, "pl_tpk", s), require_input(in.conf_tpk, "conf_tpk", s),
          require_input(in.flow, "flow", s));
    case Strategy::kWarpForward:
    case Strategy::kWarpBackward:
      return refine_warp_frame(require_input(in.pl_tpk, "pl_tpk", s),
                               require_input(in.flow, "flow", s));
    case Strategy::kOracle:
      return refine_oracle(require_input(in.pl_t, "pl_t", s),
                           require_input(in.gt_t, "gt_t", s));
    case Strategy::kNone:
      return require_input(in.pl_t, "pl_t", s);
  }
  throw Error(ErrorKind::kParameter, "unknown strategy");
}

}  // namespace vidseg
