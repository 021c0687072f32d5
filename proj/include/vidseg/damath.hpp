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

// Forward evaluation of the adaptation objectives and fusion operators:
// rare-class sampling distribution, multi-resolution attention fusion, the
// masked-image consistency loss, video discriminator losses and 1x1
// convolutional fusion of flow-aligned logits. No gradients are computed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vidseg/bytes.hpp"
#include "vidseg/core.hpp"
#include "vidseg/warp.hpp"

namespace vidseg {

inline constexpr double kProbabilityEpsilon = 1e-7;

// Fixed-shape pairwise (tree) summation; the result does not depend on how
// the caller partitions work.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

// ---------------------------------------------------------------------------
// Rare-class sampling

struct ClassFrequencies {
  std::vector<double> f;     // share of pixels carrying each class, in [0,1]
  double temperature = 1.0;  // T > 0
};

// P(c) = exp((1 - f_c) / T) / sum_c' exp((1 - f_c') / T)
inline std::vector<double> rcs_distribution(const ClassFrequencies& freqs) {
  if (!(freqs.temperature > 0.0) || !std::isfinite(freqs.temperature)) {
    throw Error(ErrorKind::kParameter, "rcs temperature must be positive and finite");
  }
  if (freqs.f.empty()) throw Error(ErrorKind::kParameter, "rcs needs at least one class");
  std::vector<double> logits(freqs.f.size());
  for (std::size_t c = 0; c < freqs.f.size(); ++c) {
    const double f = freqs.f[c];
    if (!(f >= 0.0 && f <= 1.0)) {
      throw Error(ErrorKind::kParameter, "class frequency outside [0,1]");
    }
    logits[c] = (1.0 - f) / freqs.temperature;
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  for (std::size_t c = 0; c < p.size(); ++c) p[c] = std::exp(logits[c] - shift);
  const double z = pairwise_sum(p);
  for (double& v : p) v /= z;
  return p;
}

// ---------------------------------------------------------------------------
// Multi-resolution fusion

namespace detail {

// Half-pixel-centred bilinear resize of an interleaved H x W x C buffer.
// Uses the lerp form a + t * (b - a) so constant inputs stay exactly constant.
inline std::vector<float> resize_bilinear(std::span<const float> in, int w, int h, int ch,
                                          int out_w, int out_h) {
  std::vector<float> out(std::size_t(out_w) * out_h * ch);
  const double sx = double(w) / out_w;
  const double sy = double(h) / out_h;
  for (int r = 0; r < out_h; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(h - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = y - y0;
    for (int c = 0; c < out_w; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(w - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = x - x0;
      for (int k = 0; k < ch; ++k) {
        const double v00 = in[(std::size_t(y0) * w + x0) * ch + k];
        const double v01 = in[(std::size_t(y0) * w + x1) * ch + k];
        const double v10 = in[(std::size_t(y1) * w + x0) * ch + k];
        const double v11 = in[(std::size_t(y1) * w + x1) * ch + k];
        const double top = v00 + fx * (v01 - v00);
        const double bottom = v10 + fx * (v11 - v10);
        out[(std::size_t(r) * out_w + c) * ch + k] = static_cast<float>(top + fy * (bottom - top));
      }
    }
  }
  return out;
}

inline std::pair<int, int> scaled_size(int w, int h, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorKind::kParameter, "scale factor must be positive and finite");
  }
  const long out_w = std::lround(w * s);
  const long out_h = std::lround(h * s);
  if (out_w <= 0 || out_h <= 0) throw Error(ErrorKind::kShape, "scaled size is empty");
  return {static_cast<int>(out_w), static_cast<int>(out_h)};
}

}  // namespace detail

inline LogitVolume upsample(const LogitVolume& v, double s) {
  const auto [w, h] = detail::scaled_size(v.width(), v.height(), s);
  return LogitVolume(w, h, v.channels(),
                     detail::resize_bilinear(v.data(), v.width(), v.height(), v.channels(), w, h));
}

inline ScalarPlane upsample(const ScalarPlane& p, double s) {
  const auto [w, h] = detail::scaled_size(p.width(), p.height(), s);
  return ScalarPlane(w, h, detail::resize_bilinear(p.data(), p.width(), p.height(), 1, w, h));
}

// y = up((1 - a) * y_context, s) + up(a, s) * y_detail. The attention map
// lives at the context resolution and is broadcast across channels.
inline LogitVolume mrfusion_fuse(const LogitVolume& y_context, const LogitVolume& y_detail,
                                 const ScalarPlane& attention, double scale) {
  require_same_shape(y_context, attention, "mrfusion_fuse attention");
  if (y_context.channels() != y_detail.channels()) {
    throw Error(ErrorKind::kShape, "mrfusion_fuse: channel mismatch");
  }
  require_unit_interval(attention, "attention");
  const int ch = y_context.channels();
  const auto a = attention.data();
  std::vector<float> weighted(y_context.data().begin(), y_context.data().end());
  for (std::size_t p = 0; p < a.size(); ++p) {
    const float keep = 1.f - a[p];
    for (int k = 0; k < ch; ++k) weighted[p * ch + k] *= keep;
  }
  const LogitVolume ctx_up =
      upsample(LogitVolume(y_context.width(), y_context.height(), ch, std::move(weighted)), scale);
  const ScalarPlane att_up = upsample(attention, scale);
  require_same_shape(ctx_up, y_detail, "mrfusion_fuse scaled context vs detail");
  std::vector<float> out(ctx_up.data().begin(), ctx_up.data().end());
  const auto d = y_detail.data();
  const auto au = att_up.data();
  for (std::size_t p = 0; p < au.size(); ++p) {
    for (int k = 0; k < ch; ++k) out[p * ch + k] += au[p] * d[p * ch + k];
  }
  return LogitVolume(y_detail.width(), y_detail.height(), ch, std::move(out));
}

// ---------------------------------------------------------------------------
// Losses

// Mean over non-ignore pixels of q * cross-entropy(softmax(logits), label).
inline double mic_loss(const LogitVolume& masked_logits, const LabelMap& pseudo_label,
                       const ScalarPlane& q) {
  require_same_shape(masked_logits, pseudo_label, "mic_loss");
  require_same_shape(masked_logits, q, "mic_loss weight");
  if (masked_logits.channels() != pseudo_label.class_space().num_classes()) {
    throw Error(ErrorKind::kShape, "mic_loss: logit channels differ from class count");
  }
  require_unit_interval(q, "mic weight");
  const auto labels = pseudo_label.data();
  const auto weight = q.data();
  std::vector<double> terms;
  terms.reserve(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == kIgnoreLabel) continue;
    const auto z = masked_logits.pixel(p);
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (float v : z) s += std::exp(double(v) - zmax);
    const double ce = zmax + std::log(s) - double(z[labels[p]]);
    terms.push_back(double(weight[p]) * ce);
  }
  if (terms.empty()) {
    throw Error(ErrorKind::kUndefinedLoss, "mic_loss: every pixel is ignore");
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

namespace detail {

inline double mean_neg_log(const ScalarPlane& d, bool complement) {
  std::vector<double> terms(d.size());
  const auto v = d.data();
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (!(v[p] >= 0.f && v[p] <= 1.f)) {
      throw Error(ErrorKind::kData, "discriminator output outside [0,1]");
    }
    double x = std::clamp(double(v[p]), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    if (complement) x = 1.0 - x;
    terms[p] = -std::log(x);
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

}  // namespace detail

// Discriminator objective: -mean log D(source) - mean log(1 - D(target)),
// each term normalised by its own pixel count.
inline double video_disc_loss_D(const ScalarPlane& d_src, const ScalarPlane& d_tgt) {
  return detail::mean_neg_log(d_src, false) + detail::mean_neg_log(d_tgt, true);
}

// Feature-extractor objective: -mean log D(target).
inline double video_disc_loss_f(const ScalarPlane& d_tgt) {
  return detail::mean_neg_log(d_tgt, false);
}

// ---------------------------------------------------------------------------
// 1x1 convolutional fusion of current and flow-aligned neighbour logits.

struct FusionWeights {
  int c_out = 0;
  int c_in = 0;
  std::vector<float> weights;  // c_out x c_in, row-major
  std::vector<float> bias;     // c_out entries, or empty for no bias

  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

inline void validate(const FusionWeights& w) {
  if (w.c_out <= 0 || w.c_in <= 0 ||
      w.weights.size() != std::size_t(w.c_out) * w.c_in ||
      !(w.bias.empty() || w.bias.size() == std::size_t(w.c_out))) {
    throw Error(ErrorKind::kShape, "fusion weights have inconsistent dimensions");
  }
  for (float v : w.weights) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite fusion weight");
  }
  for (float v : w.bias) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite fusion bias");
  }
}

// Layout: int32 c_out, int32 c_in, int32 has_bias, then c_out*c_in float32
// weights and (if has_bias) c_out float32 biases, all little-endian.
inline std::vector<std::uint8_t> encode_fusion_weights(const FusionWeights& w) {
  validate(w);
  std::vector<std::uint8_t> out;
  detail::store_le(out, static_cast<std::int32_t>(w.c_out));
  detail::store_le(out, static_cast<std::int32_t>(w.c_in));
  detail::store_le(out, static_cast<std::int32_t>(w.bias.empty() ? 0 : 1));
  for (float v : w.weights) detail::store_le(out, v);
  for (float v : w.bias) detail::store_le(out, v);
  return out;
}

inline FusionWeights decode_fusion_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw Error(ErrorKind::kLength, "fusion weights: truncated header");
  FusionWeights w;
  w.c_out = detail::load_le<std::int32_t>(bytes.data());
  w.c_in = detail::load_le<std::int32_t>(bytes.data() + 4);
  const auto has_bias = detail::load_le<std::int32_t>(bytes.data() + 8);
  if (w.c_out <= 0 || w.c_in <= 0 || (has_bias != 0 && has_bias != 1)) {
    throw Error(ErrorKind::kFormat, "fusion weights: bad header");
  }
  const std::uint64_t n = std::uint64_t(w.c_out) * w.c_in + (has_bias ? w.c_out : 0);
  if (bytes.size() != 12 + 4 * n) {
    throw Error(ErrorKind::kLength, "fusion weights: payload size mismatch");
  }
  const std::uint8_t* p = bytes.data() + 12;
  w.weights.resize(std::size_t(w.c_out) * w.c_in);
  for (auto& v : w.weights) { v = detail::load_le<float>(p); p += 4; }
  if (has_bias) {
    w.bias.resize(w.c_out);
    for (auto& v : w.bias) { v = detail::load_le<float>(p); p += 4; }
  }
  validate(w);
  return w;
}

inline FusionWeights read_fusion_weights(const std::filesystem::path& path) {
  return decode_fusion_weights(detail::read_file_bytes(path));
}

inline void write_fusion_weights(const FusionWeights& w, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_fusion_weights(w));
}

// out = W * (logits_t ++ aligned logits_tpk) + b at every pixel. Where the
// warp leaves the frame the aligned half is filled with logits_t.
inline LogitVolume accel_fuse(const LogitVolume& logits_t, const LogitVolume& logits_tpk,
                              const FlowField& flow, const FusionWeights& w) {
  require_same_shape(logits_t, logits_tpk, "accel_fuse");
  if (logits_t.channels() != logits_tpk.channels()) {
    throw Error(ErrorKind::kShape, "accel_fuse: channel mismatch");
  }
  validate(w);
  const int ch = logits_t.channels();
  if (w.c_in != 2 * ch || w.c_out != ch) {
    throw Error(ErrorKind::kShape, "accel_fuse: weights must be C x 2C with C = " +
                                       std::to_string(ch));
  }
  const auto warped = propagate_logits(logits_tpk, flow);
  const auto valid = warped.validity.data();
  std::vector<double> stacked(2 * ch);
  std::vector<float> out(logits_t.data().size());
  for (std::size_t p = 0; p < logits_t.pixels(); ++p) {
    const auto cur = logits_t.pixel(p);
    const auto nb = valid[p] ? warped.payload.pixel(p) : cur;
    for (int k = 0; k < ch; ++k) {
      stacked[k] = cur[k];
      stacked[ch + k] = nb[k];
    }
    for (int o = 0; o < ch; ++o) {
      double acc = w.bias.empty() ? 0.0 : double(w.bias[o]);
      const float* row = w.weights.data() + std::size_t(o) * w.c_in;
      for (int i = 0; i < w.c_in; ++i) acc += double(row[i]) * stacked[i];
      out[p * ch + o] = static_cast<float>(acc);
    }
  }
  return LogitVolume(logits_t.width(), logits_t.height(), ch, std::move(out));
}

}  // namespace vidseg
