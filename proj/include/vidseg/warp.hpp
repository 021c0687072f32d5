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

// Pull-based alignment of a frame-(t+k) raster onto frame t.
//
// Output pixel (i, j) samples the source raster at (i + dy, j + dx), where
// (dx, dy) is the forward flow o_{t -> t+k} stored at (i, j). Nearest sampling
// rounds the sample coordinate half away from zero; bilinear sampling blends
// the (up to) four surrounding pixels. A pixel whose sample leaves the raster
// is marked invalid and its payload is ignore (labels) or zero (reals).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vidseg/core.hpp"

namespace vidseg {

template <typename Payload>
struct WarpResult {
  Payload payload;
  ValidityMask validity;
};

enum class Sampling { kNearest, kBilinear };

namespace detail {

inline constexpr std::int32_t kOutside = -1;

// Source index for each output pixel under nearest sampling, or kOutside.
inline std::vector<std::int32_t> nearest_sources(const FlowField& flow) {
  const int w = flow.width();
  const int h = flow.height();
  const double max_r = h - 1;
  const double max_c = w - 1;
  const auto dx = flow.dx();
  const auto dy = flow.dy();
  std::vector<std::int32_t> src(flow.size());
  for (int i = 0; i < h; ++i) {
    const std::size_t base = std::size_t(i) * w;
    for (int j = 0; j < w; ++j) {
      const std::size_t p = base + j;
      const double r = std::round(double(i) + double(dy[p]));
      const double c = std::round(double(j) + double(dx[p]));
      if (r >= 0.0 && r <= max_r && c >= 0.0 && c <= max_c) {
        src[p] = static_cast<std::int32_t>(r) * w + static_cast<std::int32_t>(c);
      } else {
        src[p] = kOutside;
      }
    }
  }
  return src;
}

inline ValidityMask mask_from_sources(int w, int h, std::span<const std::int32_t> src) {
  std::vector<std::uint8_t> valid(src.size());
  for (std::size_t p = 0; p < src.size(); ++p) valid[p] = src[p] != kOutside;
  return ValidityMask(w, h, std::move(valid));
}

struct BilinearTap {
  std::int32_t r0, c0, r1, c1;
  double fy, fx;
  bool valid;
};

// r1/c1 collapse onto r0/c0 when the fractional part is exactly zero, so an
// integral sample on the last row or column stays valid.
inline BilinearTap bilinear_tap(int i, int j, float dx, float dy, int w, int h) {
  const double y = double(i) + double(dy);
  const double x = double(j) + double(dx);
  BilinearTap t{};
  const double y0 = std::floor(y);
  const double x0 = std::floor(x);
  t.fy = y - y0;
  t.fx = x - x0;
  const double y1 = t.fy > 0.0 ? y0 + 1.0 : y0;
  const double x1 = t.fx > 0.0 ? x0 + 1.0 : x0;
  t.valid = y0 >= 0.0 && x0 >= 0.0 && y1 <= h - 1 && x1 <= w - 1;
  if (t.valid) {
    t.r0 = static_cast<std::int32_t>(y0);
    t.c0 = static_cast<std::int32_t>(x0);
    t.r1 = static_cast<std::int32_t>(y1);
    t.c1 = static_cast<std::int32_t>(x1);
  }
  return t;
}

}  // namespace detail

inline WarpResult<LabelMap> propagate_labels(const LabelMap& labels_tpk,
                                             const FlowField& flow) {
  require_same_shape(labels_tpk, flow, "propagate_labels");
  const auto src = detail::nearest_sources(flow);
  const auto in = labels_tpk.data();
  std::vector<std::uint8_t> out(src.size());
  for (std::size_t p = 0; p < src.size(); ++p) {
    out[p] = src[p] == detail::kOutside ? kIgnoreLabel : in[src[p]];
  }
  return {LabelMap(labels_tpk.width(), labels_tpk.height(), std::move(out),
                   labels_tpk.class_space()),
          detail::mask_from_sources(flow.width(), flow.height(), src)};
}

inline WarpResult<ScalarPlane> propagate_plane(const ScalarPlane& plane,
                                               const FlowField& flow,
                                               Sampling mode = Sampling::kNearest) {
  require_same_shape(plane, flow, "propagate_plane");
  const int w = plane.width();
  const int h = plane.height();
  const auto in = plane.data();
  if (mode == Sampling::kNearest) {
    const auto src = detail::nearest_sources(flow);
    std::vector<float> out(src.size());
    for (std::size_t p = 0; p < src.size(); ++p) {
      out[p] = src[p] == detail::kOutside ? 0.f : in[src[p]];
    }
    return {ScalarPlane(w, h, std::move(out)), detail::mask_from_sources(w, h, src)};
  }
  std::vector<float> out(plane.size(), 0.f);
  std::vector<std::uint8_t> valid(plane.size(), 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t p = std::size_t(i) * w + j;
      const auto t = detail::bilinear_tap(i, j, flow.dx()[p], flow.dy()[p], w, h);
      if (!t.valid) continue;
      const double v00 = in[std::size_t(t.r0) * w + t.c0];
      const double v01 = in[std::size_t(t.r0) * w + t.c1];
      const double v10 = in[std::size_t(t.r1) * w + t.c0];
      const double v11 = in[std::size_t(t.r1) * w + t.c1];
      const double top = v00 + t.fx * (v01 - v00);
      const double bottom = v10 + t.fx * (v11 - v10);
      out[p] = static_cast<float>(top + t.fy * (bottom - top));
      valid[p] = 1;
    }
  }
  return {ScalarPlane(w, h, std::move(out)), ValidityMask(w, h, std::move(valid))};
}

inline WarpResult<LogitVolume> propagate_logits(const LogitVolume& volume,
                                                const FlowField& flow) {
  require_same_shape(volume, flow, "propagate_logits");
  const auto src = detail::nearest_sources(flow);
  const int ch = volume.channels();
  std::vector<float> out(volume.data().size(), 0.f);
  for (std::size_t p = 0; p < src.size(); ++p) {
    if (src[p] == detail::kOutside) continue;
    const auto from = volume.pixel(static_cast<std::size_t>(src[p]));
    std::copy(from.begin(), from.end(), out.begin() + p * ch);
  }
  return {LogitVolume(volume.width(), volume.height(), ch, std::move(out)),
          detail::mask_from_sources(flow.width(), flow.height(), src)};
}

// Chains unit-step flows o_{t->t+1}, o_{t+1->t+2}, ... into o_{t->t+n} by
// sampling each next hop (nearest) at the position reached so far. A pixel is
// invalid once any hop lands outside the raster; its composed flow then points
// one column left of the raster so any later warp also reports it invalid.
inline WarpResult<FlowField> compose_flows(std::span<const FlowField> hops) {
  if (hops.empty()) throw Error(ErrorKind::kMissingInput, "compose_flows: no flows");
  const int w = hops.front().width();
  const int h = hops.front().height();
  for (const auto& f : hops) require_same_shape(f, hops.front(), "compose_flows");
  const std::size_t n = hops.front().size();
  std::vector<double> px(n), py(n);
  std::vector<std::uint8_t> valid(n, 1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      py[std::size_t(i) * w + j] = i;
      px[std::size_t(i) * w + j] = j;
    }
  }
  for (const auto& hop : hops) {
    for (std::size_t p = 0; p < n; ++p) {
      if (!valid[p]) continue;
      const double r = std::round(py[p]);
      const double c = std::round(px[p]);
      if (r < 0.0 || r > h - 1 || c < 0.0 || c > w - 1) {
        valid[p] = 0;
        continue;
      }
      const std::size_t q = std::size_t(r) * w + std::size_t(c);
      py[p] += hop.dy()[q];
      px[p] += hop.dx()[q];
    }
  }
  std::vector<float> dx(n, 0.f), dy(n, 0.f);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t p = std::size_t(i) * w + j;
      if (!valid[p]) {
        dx[p] = -static_cast<float>(j + 1);
        continue;
      }
      // The last hop may also leave the raster.
      const double r = std::round(py[p]);
      const double c = std::round(px[p]);
      if (r < 0.0 || r > h - 1 || c < 0.0 || c > w - 1) {
        valid[p] = 0;
        dx[p] = -static_cast<float>(j + 1);
        continue;
      }
      dy[p] = static_cast<float>(py[p] - i);
      dx[p] = static_cast<float>(px[p] - j);
    }
  }
  return {FlowField(w, h, std::move(dx), std::move(dy)), ValidityMask(w, h, std::move(valid))};
}

}  // namespace vidseg
