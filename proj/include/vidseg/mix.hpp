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

// Cross-domain class-mix and its temporally consistent variant.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "vidseg/core.hpp"

namespace vidseg {

// Unbiased draw from [0, n) by rejection. std::uniform_int_distribution is
// implementation-defined, which would make plans differ across toolchains.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

struct MixPlan {
  std::vector<std::uint8_t> classes;  // sorted, unique
  std::uint64_t seed = 0;

  bool contains(std::uint8_t label) const {
    return std::binary_search(classes.begin(), classes.end(), label);
  }

  friend bool operator==(const MixPlan&, const MixPlan&) = default;
};

inline std::vector<std::uint8_t> classes_present(const LabelMap& labels) {
  std::array<bool, 256> seen{};
  for (std::uint8_t v : labels.data()) seen[v] = true;
  std::vector<std::uint8_t> out;
  for (int c = 0; c < 255; ++c) {
    if (seen[c]) out.push_back(static_cast<std::uint8_t>(c));
  }
  return out;
}

// Picks ceil(m/2) of the m non-ignore classes present in y_src, uniformly
// without replacement.
inline MixPlan select_mix_classes(const LabelMap& y_src, std::uint64_t seed) {
  auto present = classes_present(y_src);
  if (present.empty()) {
    throw Error(ErrorKind::kEmptySource, "source label map has no non-ignore pixels");
  }
  const std::size_t take = (present.size() + 1) / 2;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + uniform_below(rng, present.size() - i);
    std::swap(present[i], present[j]);
  }
  present.resize(take);
  std::sort(present.begin(), present.end());
  return MixPlan{std::move(present), seed};
}

struct MixedSample {
  RgbImage image;
  LabelMap labels;
  MixPlan plan;
};

// Pixels whose source label is in the plan come from the source (image and
// label); all others come from the target image and target pseudo-label.
// Ignore-labelled source pixels are never pasted.
inline MixedSample classmix(const RgbImage& img_src, const RgbImage& img_tgt,
                            const LabelMap& y_src, const LabelMap& pl_tgt,
                            const MixPlan& plan) {
  require_same_shape(img_src, img_tgt, "classmix images");
  require_same_shape(img_src, y_src, "classmix source labels");
  require_same_shape(img_src, pl_tgt, "classmix target labels");
  std::array<bool, 256> paste{};
  for (std::uint8_t c : plan.classes) paste[c] = c != kIgnoreLabel;
  const auto ys = y_src.data();
  const auto yt = pl_tgt.data();
  const auto is = img_src.data();
  const auto it = img_tgt.data();
  std::vector<std::uint8_t> labels(ys.size());
  std::vector<std::uint8_t> rgb(it.begin(), it.end());
  for (std::size_t p = 0; p < ys.size(); ++p) {
    if (paste[ys[p]]) {
      labels[p] = ys[p];
      std::copy_n(is.begin() + 3 * p, 3, rgb.begin() + 3 * p);
    } else {
      labels[p] = yt[p];
    }
  }
  // The mixed map may carry source classes outside the target class space.
  const ClassSpace space = y_src.class_space().num_classes() >= pl_tgt.class_space().num_classes()
                               ? y_src.class_space()
                               : pl_tgt.class_space();
  return MixedSample{RgbImage(img_src.width(), img_src.height(), std::move(rgb)),
                     LabelMap(y_src.width(), y_src.height(), std::move(labels), space),
                     plan};
}

struct MixFrame {
  RgbImage img_src;
  RgbImage img_tgt;
  LabelMap y_src;
  LabelMap pl_tgt;
};

// Mixes frames t and t+k with one shared class set so flow correspondence
// between the mixed frames is preserved.
inline std::pair<MixedSample, MixedSample> consistent_classmix_pair(
    const MixFrame& frame_t, const MixFrame& frame_tpk, const MixPlan& plan) {
  return {classmix(frame_t.img_src, frame_t.img_tgt, frame_t.y_src, frame_t.pl_tgt, plan),
          classmix(frame_tpk.img_src, frame_tpk.img_tgt, frame_tpk.y_src,
                   frame_tpk.pl_tgt, plan)};
}

}  // namespace vidseg
