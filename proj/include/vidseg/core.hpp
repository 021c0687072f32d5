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

// Shared raster types for label propagation and evaluation.
//
// All rasters are row-major with a top-left origin: x grows rightward, y
// grows downward, and element (row, col) lives at data[row * width + col].

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vidseg {

enum class ErrorKind {
  kInvalidLabel,
  kShape,
  kFormat,
  kLength,
  kData,
  kUnsupportedFormat,
  kParse,
  kDuplicate,
  kMissingInput,
  kEmptySource,
  kParameter,
  kUndefinedLoss,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidLabel: return "invalid-label";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kLength: return "length";
    case ErrorKind::kData: return "data";
    case ErrorKind::kUnsupportedFormat: return "unsupported-format";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kDuplicate: return "duplicate";
    case ErrorKind::kMissingInput: return "missing-input";
    case ErrorKind::kEmptySource: return "empty-source";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kUndefinedLoss: return "undefined-loss";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers can branch
// on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr std::uint8_t kIgnoreLabel = 255;

class ClassSpace {
 public:
  explicit ClassSpace(int num_classes) : num_classes_(num_classes) {
    if (num_classes < 1 || num_classes > 254) {
      throw Error(ErrorKind::kParameter,
                  "num_classes must be in [1, 254], got " +
                      std::to_string(num_classes));
    }
  }

  int num_classes() const noexcept { return num_classes_; }
  static constexpr std::uint8_t ignore_value() noexcept { return kIgnoreLabel; }

  bool is_class(int v) const noexcept { return v >= 0 && v < num_classes_; }
  bool is_valid(int v) const noexcept { return is_class(v) || v == kIgnoreLabel; }

  friend bool operator==(const ClassSpace&, const ClassSpace&) = default;

 private:
  int num_classes_;
};

// Dense H x W grid. The typed rasters below wrap it and add their own
// validation; Grid itself only guarantees the size contract.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::kShape, "raster dimensions must be positive, got " +
                                         std::to_string(width) + "x" +
                                         std::to_string(height));
    }
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorKind::kShape, "raster payload has " +
                                         std::to_string(data_.size()) +
                                         " elements, expected " +
                                         std::to_string(std::size_t(width) * height));
    }
  }
  Grid(int width, int height, T fill)
      : Grid(width, height,
             std::vector<T>(width > 0 && height > 0
                                ? static_cast<std::size_t>(width) * height
                                : 0,
                            fill)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  const T& at(int row, int col) const { return data_[index(row, col)]; }
  std::span<const T> data() const noexcept { return data_; }
  std::span<const T> row(int r) const noexcept {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(r) * width_,
                                             width_);
  }

  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
bool same_shape(const A& a, const B& b) noexcept {
  return a.width() == b.width() && a.height() == b.height();
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!same_shape(a, b)) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

class LabelMap {
 public:
  LabelMap(int width, int height, std::vector<std::uint8_t> data,
           ClassSpace class_space)
      : grid_(width, height, std::move(data)), class_space_(class_space) {
    const int k = class_space_.num_classes();
    for (std::uint8_t v : grid_.data()) {
      if (v >= k && v != kIgnoreLabel) {
        throw Error(ErrorKind::kInvalidLabel,
                    "label " + std::to_string(v) + " outside 0.." +
                        std::to_string(k - 1) + " and not ignore");
      }
    }
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  std::size_t size() const noexcept { return grid_.size(); }
  const ClassSpace& class_space() const noexcept { return class_space_; }

  std::uint8_t at(int row, int col) const { return grid_.at(row, col); }
  std::span<const std::uint8_t> data() const noexcept { return grid_.data(); }
  std::span<const std::uint8_t> row(int r) const noexcept { return grid_.row(r); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Grid<std::uint8_t> grid_;
  ClassSpace class_space_;
};

class FlowField {
 public:
  FlowField(int width, int height, std::vector<float> dx, std::vector<float> dy)
      : dx_(width, height, std::move(dx)), dy_(width, height, std::move(dy)) {
    for (std::size_t i = 0; i < dx_.size(); ++i) {
      if (!std::isfinite(dx_.data()[i]) || !std::isfinite(dy_.data()[i])) {
        throw Error(ErrorKind::kData, "flow contains a non-finite value at pixel " +
                                          std::to_string(i));
      }
    }
  }

  static FlowField zeros(int width, int height) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    return FlowField(width, height, std::vector<float>(n, 0.f),
                     std::vector<float>(n, 0.f));
  }
  static FlowField uniform(int width, int height, float dx, float dy) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    return FlowField(width, height, std::vector<float>(n, dx),
                     std::vector<float>(n, dy));
  }

  int width() const noexcept { return dx_.width(); }
  int height() const noexcept { return dx_.height(); }
  std::size_t size() const noexcept { return dx_.size(); }

  std::span<const float> dx() const noexcept { return dx_.data(); }
  std::span<const float> dy() const noexcept { return dy_.data(); }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  Grid<float> dx_;
  Grid<float> dy_;
};

class ScalarPlane {
 public:
  ScalarPlane(int width, int height, std::vector<float> data)
      : grid_(width, height, std::move(data)) {
    for (float v : grid_.data()) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kData, "scalar plane contains a non-finite value");
      }
    }
  }
  static ScalarPlane filled(int width, int height, float v) {
    return ScalarPlane(width, height,
                       std::vector<float>(static_cast<std::size_t>(width) * height, v));
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  std::size_t size() const noexcept { return grid_.size(); }
  float at(int row, int col) const { return grid_.at(row, col); }
  std::span<const float> data() const noexcept { return grid_.data(); }

  friend bool operator==(const ScalarPlane&, const ScalarPlane&) = default;

 private:
  Grid<float> grid_;
};

// Throws kData unless every value lies in [0, 1].
inline void require_unit_interval(const ScalarPlane& plane, const char* what) {
  for (float v : plane.data()) {
    if (!(v >= 0.f && v <= 1.f)) {
      throw Error(ErrorKind::kData,
                  std::string(what) + " must lie in [0,1], found " + std::to_string(v));
    }
  }
}

// H x W x C, channel-interleaved: element (r, c, ch) at ((r * W) + c) * C + ch.
class LogitVolume {
 public:
  LogitVolume(int width, int height, int channels, std::vector<float> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw Error(ErrorKind::kShape, "logit volume dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorKind::kShape, "logit volume payload size mismatch");
    }
    for (float v : data_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kData, "logit volume contains a non-finite value");
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  float at(int row, int col, int ch) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  std::span<const float> pixel(std::size_t idx) const noexcept {
    return std::span<const float>(data_).subspan(idx * channels_, channels_);
  }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const LogitVolume&, const LogitVolume&) = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<float> data_;
};

// Byte-per-pixel boolean mask (1 = valid). std::vector<bool> is avoided so the
// mask can be viewed as a span.
class ValidityMask {
 public:
  ValidityMask(int width, int height, std::vector<std::uint8_t> data)
      : grid_(width, height, std::move(data)) {
    for (std::uint8_t v : grid_.data()) {
      if (v > 1) throw Error(ErrorKind::kData, "validity mask values must be 0 or 1");
    }
  }
  static ValidityMask all(int width, int height, bool value) {
    return ValidityMask(width, height,
                        std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height,
                                                  value ? 1 : 0));
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  std::size_t size() const noexcept { return grid_.size(); }
  bool at(int row, int col) const { return grid_.at(row, col) != 0; }
  std::span<const std::uint8_t> data() const noexcept { return grid_.data(); }

  std::size_t count_valid() const noexcept {
    std::size_t n = 0;
    for (std::uint8_t v : grid_.data()) n += v;
    return n;
  }

  friend bool operator==(const ValidityMask&, const ValidityMask&) = default;

 private:
  Grid<std::uint8_t> grid_;
};

inline ValidityMask mask_and(const ValidityMask& a, const ValidityMask& b) {
  require_same_shape(a, b, "mask_and");
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] & b.data()[i];
  return ValidityMask(a.width(), a.height(), std::move(out));
}

// Interleaved 8-bit RGB image; only used as a pass-through payload.
class RgbImage {
 public:
  RgbImage(int width, int height, std::vector<std::uint8_t> rgb)
      : width_(width), height_(height), rgb_(std::move(rgb)) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::kShape, "image dimensions must be positive");
    }
    if (rgb_.size() != static_cast<std::size_t>(width) * height * 3) {
      throw Error(ErrorKind::kShape, "image payload size mismatch");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> data() const noexcept { return rgb_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

inline LabelMap make_label_map(int width, int height, int fill,
                               ClassSpace class_space) {
  if (!class_space.is_valid(fill)) {
    throw Error(ErrorKind::kInvalidLabel,
                "fill value " + std::to_string(fill) + " is not a class or ignore");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::kShape, "raster dimensions must be positive");
  }
  return LabelMap(width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height,
                                            static_cast<std::uint8_t>(fill)),
                  class_space);
}

// Pixels where the mask is false become ignore.
inline LabelMap apply_mask(const LabelMap& labels, const ValidityMask& mask) {
  require_same_shape(labels, mask, "apply_mask");
  std::vector<std::uint8_t> out(labels.data().begin(), labels.data().end());
  const auto m = mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!m[i]) out[i] = kIgnoreLabel;
  }
  return LabelMap(labels.width(), labels.height(), std::move(out),
                  labels.class_space());
}

}  // namespace vidseg
