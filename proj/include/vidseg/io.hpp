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

// Readers and writers for the on-disk artifacts:
//   .flo   Middlebury optical flow (little-endian float32, "PIEH" magic)
//   .png   8-bit single-channel label maps (and RGB images for pass-through)
//   .pfm   grayscale little-endian portable float maps
//   .jsonl dataset manifests, one record per line
//
// Readers never clamp or coerce: every out-of-contract byte stream raises a
// typed vidseg::Error.

#include <png.h>

#include <algorithm>
#include <charconv>
#include <csetjmp>
#include <cstdio>
#include <limits>
#include <tuple>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidseg/bytes.hpp"
#include "vidseg/core.hpp"

namespace vidseg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Middlebury .flo

inline constexpr float kFloMagic = 202021.25f;

inline FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::kFormat, ".flo: missing magic");
  if (std::memcmp(bytes.data(), "PIEH", 4) != 0) {
    throw Error(ErrorKind::kFormat, ".flo: bad magic");
  }
  if (bytes.size() < 12) throw Error(ErrorKind::kLength, ".flo: truncated header");
  const auto width = detail::load_le<std::int32_t>(bytes.data() + 4);
  const auto height = detail::load_le<std::int32_t>(bytes.data() + 8);
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::kFormat, ".flo: non-positive dimensions " +
                                        std::to_string(width) + "x" +
                                        std::to_string(height));
  }
  const std::uint64_t n = std::uint64_t(width) * std::uint64_t(height);
  const std::uint64_t expected = 12 + 8 * n;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kLength, ".flo: payload is " + std::to_string(bytes.size()) +
                                        " bytes, expected " + std::to_string(expected));
  }
  std::vector<float> dx(n), dy(n);
  const std::uint8_t* p = bytes.data() + 12;
  for (std::uint64_t i = 0; i < n; ++i, p += 8) {
    dx[i] = detail::load_le<float>(p);
    dy[i] = detail::load_le<float>(p + 4);
  }
  return FlowField(width, height, std::move(dx), std::move(dy));
}

inline std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * flow.size());
  detail::store_le(out, kFloMagic);
  detail::store_le(out, static_cast<std::int32_t>(flow.width()));
  detail::store_le(out, static_cast<std::int32_t>(flow.height()));
  for (std::size_t i = 0; i < flow.size(); ++i) {
    detail::store_le(out, flow.dx()[i]);
    detail::store_le(out, flow.dy()[i]);
  }
  return out;
}

inline FlowField read_flo(const fs::path& path) {
  return decode_flo(detail::read_file_bytes(path));
}

inline void write_flo(const FlowField& flow, const fs::path& path) {
  detail::write_file_bytes(path, encode_flo(flow));
}

// ---------------------------------------------------------------------------
// PNG (libpng). Errors are routed through setjmp; no C++ object with a
// non-trivial destructor is created between setjmp and the libpng calls.

namespace detail {

struct PngReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + len > cur->size) {
    png_error(png, "truncated stream");
  }
  std::memcpy(out, cur->data + cur->offset, len);
  cur->offset += len;
}

inline void png_write_to_vector(png_structp png, png_bytep in, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + len);
}

inline void png_flush_noop(png_structp) {}

inline void png_error_to_buffer(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<char*>(png_get_error_ptr(png));
  std::snprintf(buf, 256, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_silent(png_structp, png_const_charp) {}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// Decodes an 8-bit PNG whose color type is `want_color_type` without any
// transformations. Any other layout is a format error.
inline DecodedPng decode_png(std::span<const std::uint8_t> bytes, int want_color_type,
                             const char* what) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorKind::kFormat, std::string(what) + ": not a PNG stream");
  }
  DecodedPng result;
  char err[256] = {0};
  volatile int failure = 0;  // 0 ok, 1 libpng error, 2 wrong layout
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err,
                                           png_error_to_buffer, png_warning_silent);
  if (!png) throw Error(ErrorKind::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorKind::kIo, "png_create_info_struct failed");
  }
  PngReadCursor cursor{bytes.data(), bytes.size(), 0};
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    failure = 1;
  } else {
    png_set_read_fn(png, &cursor, png_read_from_memory);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8 || color != want_color_type || w == 0 || h == 0 ||
        w > 0x7fffffff || h > 0x7fffffff) {
      failure = 2;
      std::snprintf(err, sizeof(err), "unsupported layout (bit depth %d, color type %d)",
                    depth, color);
    } else {
      png_set_interlace_handling(png);
      png_read_update_info(png, info);
      result.width = static_cast<int>(w);
      result.height = static_cast<int>(h);
      result.channels = png_get_channels(png, info);
      const std::size_t stride = std::size_t(w) * result.channels;
      result.pixels.resize(stride * h);
      rows.resize(h);
      for (png_uint_32 r = 0; r < h; ++r) rows[r] = result.pixels.data() + r * stride;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (failure == 1) {
    throw Error(ErrorKind::kFormat, std::string(what) + ": " + err);
  }
  if (failure == 2) {
    throw Error(ErrorKind::kFormat, std::string(what) + ": " + err);
  }
  return result;
}

// `pixels` holds rows of width * channels samples; 16-bit samples are
// big-endian byte pairs as libpng expects.
inline std::vector<std::uint8_t> encode_png(int width, int height, int color_type,
                                            int channels,
                                            std::span<const std::uint8_t> pixels,
                                            int bit_depth = 8) {
  std::vector<std::uint8_t> out;
  char err[256] = {0};
  volatile int failure = 0;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err,
                                            png_error_to_buffer, png_warning_silent);
  if (!png) throw Error(ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::kIo, "png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  const std::size_t stride = std::size_t(width) * channels * (bit_depth / 8);
  if (pixels.size() != stride * height) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kShape, "png encode: pixel buffer size mismatch");
  }
  for (int r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(pixels.data() + r * stride);
  }
  if (setjmp(png_jmpbuf(png))) {
    failure = 1;
  } else {
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  if (failure) throw Error(ErrorKind::kIo, std::string("png encode: ") + err);
  return out;
}

}  // namespace detail

inline LabelMap decode_label_png(std::span<const std::uint8_t> bytes,
                                 ClassSpace class_space) {
  auto png = detail::decode_png(bytes, PNG_COLOR_TYPE_GRAY, "label png");
  return LabelMap(png.width, png.height, std::move(png.pixels), class_space);
}

inline std::vector<std::uint8_t> encode_label_png(const LabelMap& labels) {
  return detail::encode_png(labels.width(), labels.height(), PNG_COLOR_TYPE_GRAY, 1,
                            labels.data());
}

inline LabelMap read_label_png(const fs::path& path, ClassSpace class_space) {
  return decode_label_png(detail::read_file_bytes(path), class_space);
}

inline void write_label_png(const LabelMap& labels, const fs::path& path) {
  detail::write_file_bytes(path, encode_label_png(labels));
}

inline RgbImage read_rgb_png(const fs::path& path) {
  auto png = detail::decode_png(detail::read_file_bytes(path), PNG_COLOR_TYPE_RGB,
                                "rgb png");
  return RgbImage(png.width, png.height, std::move(png.pixels));
}

inline void write_rgb_png(const RgbImage& image, const fs::path& path) {
  detail::write_file_bytes(path, detail::encode_png(image.width(), image.height(),
                                                    PNG_COLOR_TYPE_RGB, 3,
                                                    image.data()));
}

// ---------------------------------------------------------------------------
// PFM, grayscale only. Rows are stored bottom-to-top.

namespace detail {

inline bool is_pfm_space(std::uint8_t c) {
  return c == ' ' || c == '\n' || c == '\r' || c == '\t';
}

// Reads one whitespace-delimited token starting at `pos`; leaves `pos` on the
// single delimiter that follows it.
inline std::string_view pfm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size() && is_pfm_space(bytes[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !is_pfm_space(bytes[pos])) ++pos;
  if (start == pos || pos >= bytes.size()) {
    throw Error(ErrorKind::kFormat, "pfm: truncated header");
  }
  return {reinterpret_cast<const char*>(bytes.data()) + start, pos - start};
}

template <typename T>
T pfm_number(std::string_view tok, const char* what) {
  T value{};
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || end != tok.data() + tok.size()) {
    throw Error(ErrorKind::kFormat, std::string("pfm: malformed ") + what + " '" +
                                        std::string(tok) + "'");
  }
  return value;
}

}  // namespace detail

inline ScalarPlane decode_pfm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 3) throw Error(ErrorKind::kFormat, "pfm: truncated header");
  if (bytes[0] == 'P' && bytes[1] == 'F' && detail::is_pfm_space(bytes[2])) {
    throw Error(ErrorKind::kUnsupportedFormat, "pfm: color (PF) maps are not supported");
  }
  if (!(bytes[0] == 'P' && bytes[1] == 'f' && detail::is_pfm_space(bytes[2]))) {
    throw Error(ErrorKind::kFormat, "pfm: bad magic");
  }
  pos = 2;
  const int width = detail::pfm_number<int>(detail::pfm_token(bytes, pos), "width");
  const int height = detail::pfm_number<int>(detail::pfm_token(bytes, pos), "height");
  const double scale = detail::pfm_number<double>(detail::pfm_token(bytes, pos), "scale");
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::kFormat, "pfm: non-positive dimensions");
  }
  if (scale == 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorKind::kFormat, "pfm: scale must be finite and non-zero");
  }
  if (scale > 0.0) {
    throw Error(ErrorKind::kUnsupportedFormat, "pfm: big-endian payloads are not supported");
  }
  ++pos;  // the single whitespace byte terminating the scale line
  const std::uint64_t n = std::uint64_t(width) * std::uint64_t(height);
  if (bytes.size() - pos != 4 * n) {
    throw Error(ErrorKind::kLength, "pfm: payload is " + std::to_string(bytes.size() - pos) +
                                        " bytes, expected " + std::to_string(4 * n));
  }
  std::vector<float> data(n);
  for (int file_row = 0; file_row < height; ++file_row) {
    const int r = height - 1 - file_row;
    const std::uint8_t* p = bytes.data() + pos + std::size_t(file_row) * width * 4;
    for (int c = 0; c < width; ++c) {
      data[std::size_t(r) * width + c] = detail::load_le<float>(p + 4 * c);
    }
  }
  return ScalarPlane(width, height, std::move(data));
}

inline std::vector<std::uint8_t> encode_pfm(const ScalarPlane& plane) {
  const std::string header = "Pf\n" + std::to_string(plane.width()) + " " +
                             std::to_string(plane.height()) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * plane.size());
  for (int r = plane.height() - 1; r >= 0; --r) {
    for (int c = 0; c < plane.width(); ++c) detail::store_le(out, plane.at(r, c));
  }
  return out;
}

inline ScalarPlane read_pfm(const fs::path& path) {
  return decode_pfm(detail::read_file_bytes(path));
}

inline void write_pfm(const ScalarPlane& plane, const fs::path& path) {
  detail::write_file_bytes(path, encode_pfm(plane));
}

// ---------------------------------------------------------------------------
// Per-frame artifact naming shared by prediction, confidence and output
// directories: "<clip_id>_<frame_index zero-padded to 6>".

inline std::string frame_stem(const std::string& clip_id, int frame_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", frame_index);
  return clip_id + "_" + buf;
}

// ---------------------------------------------------------------------------
// JSON Lines manifest

enum class Domain { kSource, kTarget };
enum class Split { kTrain, kVal };

inline const char* to_string(Domain d) { return d == Domain::kSource ? "source" : "target"; }
inline const char* to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

struct ManifestRecord {
  std::string clip_id;
  int frame_index = 0;
  std::optional<std::string> image_path;
  std::optional<std::string> label_path;
  std::optional<std::string> flow_fwd_path;  // o_{t -> t+1}
  std::optional<std::string> flow_bwd_path;  // o_{t -> t-1}
  // Direct long-range flows o_{t -> t+k}, keyed by signed k (|k| > 1).
  std::map<int, std::string> flows;
  Domain domain = Domain::kTarget;
  Split split = Split::kVal;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;

  // Sorts by (clip_id, frame_index) and rejects duplicates.
  explicit DatasetManifest(std::vector<ManifestRecord> records, fs::path base_dir = {})
      : records_(std::move(records)), base_dir_(std::move(base_dir)) {
    std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
      return std::tie(a.clip_id, a.frame_index) < std::tie(b.clip_id, b.frame_index);
    });
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (i > 0 && records_[i - 1].clip_id == r.clip_id &&
          records_[i - 1].frame_index == r.frame_index) {
        throw Error(ErrorKind::kDuplicate, "duplicate record (" + r.clip_id + ", " +
                                               std::to_string(r.frame_index) + ")");
      }
      clip_index_[r.clip_id].push_back(r.frame_index);
      position_[{r.clip_id, r.frame_index}] = i;
    }
  }

  const std::vector<ManifestRecord>& records() const noexcept { return records_; }
  const std::map<std::string, std::vector<int>>& clip_index() const noexcept {
    return clip_index_;
  }
  const fs::path& base_dir() const noexcept { return base_dir_; }

  const ManifestRecord* find(const std::string& clip_id, int frame_index) const {
    auto it = position_.find({clip_id, frame_index});
    return it == position_.end() ? nullptr : &records_[it->second];
  }

  // Artifact paths are interpreted relative to the manifest's directory.
  fs::path resolve(const std::string& path) const {
    fs::path p(path);
    return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
  }

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.records_ == b.records_;
  }

 private:
  std::vector<ManifestRecord> records_;
  std::map<std::string, std::vector<int>> clip_index_;
  std::map<std::pair<std::string, int>, std::size_t> position_;
  fs::path base_dir_;
};

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& j,
                                                  const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
  return it->get<std::string>();
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
  ManifestRecord r;
  if (!j.contains("clip_id") || !j["clip_id"].is_string()) {
    throw std::invalid_argument("clip_id must be a string");
  }
  r.clip_id = j["clip_id"].get<std::string>();
  if (r.clip_id.empty()) throw std::invalid_argument("clip_id must be non-empty");
  if (!j.contains("frame_index") || !j["frame_index"].is_number_integer()) {
    throw std::invalid_argument("frame_index must be an integer");
  }
  const auto frame = j["frame_index"].get<std::int64_t>();
  if (frame < 0 || frame > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("frame_index must be a non-negative int");
  }
  r.frame_index = static_cast<int>(frame);
  r.image_path = optional_string(j, "image_path");
  r.label_path = optional_string(j, "label_path");
  r.flow_fwd_path = optional_string(j, "flow_fwd_path");
  r.flow_bwd_path = optional_string(j, "flow_bwd_path");
  if (auto it = j.find("flows"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw std::invalid_argument("flows must be an object");
    for (const auto& [key, value] : it->items()) {
      int k = 0;
      auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
      if (ec != std::errc() || end != key.data() + key.size() || k == 0) {
        throw std::invalid_argument("flows key must be a non-zero integer, got '" + key + "'");
      }
      if (!value.is_string()) throw std::invalid_argument("flows values must be strings");
      r.flows[k] = value.get<std::string>();
    }
  }
  const auto domain = j.value("domain", std::string());
  if (domain == "source") r.domain = Domain::kSource;
  else if (domain == "target") r.domain = Domain::kTarget;
  else throw std::invalid_argument("domain must be \"source\" or \"target\"");
  const auto split = j.value("split", std::string());
  if (split == "train") r.split = Split::kTrain;
  else if (split == "val") r.split = Split::kVal;
  else throw std::invalid_argument("split must be \"train\" or \"val\"");
  if (!r.image_path && !r.label_path && !r.flow_fwd_path && !r.flow_bwd_path &&
      r.flows.empty()) {
    throw std::invalid_argument("record has no artifact paths");
  }
  return r;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["clip_id"] = r.clip_id;
  j["frame_index"] = r.frame_index;
  if (r.image_path) j["image_path"] = *r.image_path;
  if (r.label_path) j["label_path"] = *r.label_path;
  if (r.flow_fwd_path) j["flow_fwd_path"] = *r.flow_fwd_path;
  if (r.flow_bwd_path) j["flow_bwd_path"] = *r.flow_bwd_path;
  if (!r.flows.empty()) {
    nlohmann::ordered_json flows = nlohmann::ordered_json::object();
    for (const auto& [k, p] : r.flows) flows[std::to_string(k)] = p;
    j["flows"] = std::move(flows);
  }
  j["domain"] = to_string(r.domain);
  j["split"] = to_string(r.split);
  return j;
}

inline DatasetManifest parse_manifest(std::string_view text, fs::path base_dir = {}) {
  std::vector<ManifestRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
    if (!blank) {
      try {
        records.push_back(detail::record_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::kParse,
                    "manifest line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return DatasetManifest(std::move(records), std::move(base_dir));
}

inline std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records()) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                         bytes.size()),
                        path.parent_path());
}

inline void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const auto text = serialize_manifest(manifest);
  detail::write_file_bytes(
      path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace vidseg
