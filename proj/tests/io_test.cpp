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

#include "vidseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace vidseg {
namespace {

using testing::ScratchDir;
namespace fs = std::filesystem;

std::vector<std::uint8_t> le32(std::uint32_t u) {
  return {std::uint8_t(u), std::uint8_t(u >> 8), std::uint8_t(u >> 16), std::uint8_t(u >> 24)};
}
std::vector<std::uint8_t> lef(float f) { return le32(std::bit_cast<std::uint32_t>(f)); }

void append(std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

// --- .flo -------------------------------------------------------------------

TEST(FloTest, DecodesHandAssembledPayload) {
  std::vector<std::uint8_t> bytes = {'P', 'I', 'E', 'H'};
  append(bytes, le32(1));
  append(bytes, le32(1));
  append(bytes, lef(2.0f));
  append(bytes, lef(-1.0f));
  ASSERT_EQ(bytes.size(), 20u);
  // The magic bytes are the little-endian encoding of 202021.25.
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4), lef(202021.25f));
  const auto flow = decode_flo(bytes);
  EXPECT_EQ(flow.width(), 1);
  EXPECT_EQ(flow.height(), 1);
  EXPECT_EQ(flow.dx()[0], 2.0f);
  EXPECT_EQ(flow.dy()[0], -1.0f);
}

TEST(FloTest, WrongMagicIsFormatError) {
  std::vector<std::uint8_t> bytes = lef(123.45f);
  append(bytes, le32(1));
  append(bytes, le32(1));
  append(bytes, lef(0.f));
  append(bytes, lef(0.f));
  EXPECT_EQ(kind_of([&] { decode_flo(bytes); }), ErrorKind::kFormat);
}

TEST(FloTest, TruncatedPayloadIsLengthError) {
  auto bytes = encode_flo(FlowField::zeros(3, 2));
  bytes.pop_back();
  EXPECT_EQ(kind_of([&] { decode_flo(bytes); }), ErrorKind::kLength);
  bytes.resize(10);
  EXPECT_EQ(kind_of([&] { decode_flo(bytes); }), ErrorKind::kLength);
}

TEST(FloTest, NonFiniteValueIsDataError) {
  std::vector<std::uint8_t> bytes = {'P', 'I', 'E', 'H'};
  append(bytes, le32(1));
  append(bytes, le32(1));
  append(bytes, lef(std::numeric_limits<float>::quiet_NaN()));
  append(bytes, lef(0.f));
  EXPECT_EQ(kind_of([&] { decode_flo(bytes); }), ErrorKind::kData);
  // A NaN flow cannot be formed in memory, so it can never be written.
  EXPECT_EQ(kind_of([&] {
              FlowField(1, 1, {std::numeric_limits<float>::quiet_NaN()}, {0.f});
            }),
            ErrorKind::kData);
}

TEST(FloTest, FileSizeFormula) {
  ScratchDir dir("flo");
  write_flo(FlowField::zeros(2, 2), dir / "z.flo");
  EXPECT_EQ(fs::file_size(dir / "z.flo"), 12u + 8u * 2 * 2);
}

TEST(FloTest, RoundTripIsBitExact) {
  ScratchDir dir("flo_rt");
  std::mt19937 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + rng() % 17, h = 1 + rng() % 13;
    std::vector<float> dx(std::size_t(w) * h), dy(dx.size());
    for (auto* v : {&dx, &dy}) {
      for (auto& x : *v) {
        // Any finite bit pattern, including subnormals and negative zero.
        float f;
        do {
          f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
        } while (!std::isfinite(f));
        x = f;
      }
    }
    const FlowField flow(w, h, dx, dy);
    write_flo(flow, dir / "f.flo");
    const auto back = read_flo(dir / "f.flo");
    ASSERT_EQ(back.width(), w);
    ASSERT_EQ(std::memcmp(back.dx().data(), dx.data(), dx.size() * 4), 0);
    ASSERT_EQ(std::memcmp(back.dy().data(), dy.data(), dy.size() * 4), 0);
  }
}

TEST(FloTest, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { read_flo("/nonexistent/dir/x.flo"); }), ErrorKind::kIo);
}

// --- PNG --------------------------------------------------------------------

TEST(LabelPngTest, UniformImage) {
  ScratchDir dir("png");
  write_label_png(make_label_map(2, 2, 5, ClassSpace(6)), dir / "a.png");
  const auto m = read_label_png(dir / "a.png", ClassSpace(6));
  EXPECT_EQ(m, make_label_map(2, 2, 5, ClassSpace(6)));
}

TEST(LabelPngTest, OutOfRangeValueIsInvalidLabel) {
  std::vector<std::uint8_t> px = {0, 200, 3, 255};
  const auto bytes = detail::encode_png(2, 2, PNG_COLOR_TYPE_GRAY, 1, px);
  EXPECT_EQ(kind_of([&] { decode_label_png(bytes, ClassSpace(19)); }), ErrorKind::kInvalidLabel);
}

TEST(LabelPngTest, SixteenBitAndMultiChannelAreFormatErrors) {
  std::vector<std::uint8_t> px16(2 * 2 * 2, 0);
  const auto gray16 = detail::encode_png(2, 2, PNG_COLOR_TYPE_GRAY, 1, px16, 16);
  EXPECT_EQ(kind_of([&] { decode_label_png(gray16, ClassSpace(19)); }), ErrorKind::kFormat);
  std::vector<std::uint8_t> rgb(2 * 2 * 3, 1);
  const auto color = detail::encode_png(2, 2, PNG_COLOR_TYPE_RGB, 3, rgb);
  EXPECT_EQ(kind_of([&] { decode_label_png(color, ClassSpace(19)); }), ErrorKind::kFormat);
  std::vector<std::uint8_t> ga(2 * 2 * 2, 1);
  const auto gray_alpha = detail::encode_png(2, 2, PNG_COLOR_TYPE_GRAY_ALPHA, 2, ga);
  EXPECT_EQ(kind_of([&] { decode_label_png(gray_alpha, ClassSpace(19)); }), ErrorKind::kFormat);
}

TEST(LabelPngTest, CorruptStreamsAreFormatErrors) {
  auto bytes = encode_label_png(make_label_map(4, 4, 1, ClassSpace(3)));
  auto not_png = bytes;
  not_png[1] = 'X';
  EXPECT_EQ(kind_of([&] { decode_label_png(not_png, ClassSpace(3)); }), ErrorKind::kFormat);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_EQ(kind_of([&] { decode_label_png(truncated, ClassSpace(3)); }), ErrorKind::kFormat);
}

TEST(LabelPngTest, RoundTripRandomMaps) {
  ScratchDir dir("png_rt");
  std::mt19937 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + rng() % 40, h = 1 + rng() % 30;
    const auto m = testing::random_labels(rng, w, h, 19, 0.2);
    write_label_png(m, dir / "m.png");
    EXPECT_EQ(read_label_png(dir / "m.png", ClassSpace(19)), m);
  }
}

TEST(RgbPngTest, RoundTrip) {
  ScratchDir dir("rgb");
  std::vector<std::uint8_t> px(3 * 5 * 4);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::uint8_t(i * 37);
  const RgbImage img(5, 4, px);
  write_rgb_png(img, dir / "i.png");
  EXPECT_EQ(read_rgb_png(dir / "i.png"), img);
}

// --- PFM --------------------------------------------------------------------

std::vector<std::uint8_t> text_bytes(const std::string& s) { return {s.begin(), s.end()}; }

TEST(PfmTest, RowsAreStoredBottomToTop) {
  auto bytes = text_bytes("Pf\n1 2\n-1.0\n");
  append(bytes, lef(0.25f));  // bottom row
  append(bytes, lef(0.75f));  // top row
  const auto plane = decode_pfm(bytes);
  EXPECT_EQ(plane.width(), 1);
  EXPECT_EQ(plane.height(), 2);
  EXPECT_EQ(plane.at(0, 0), 0.75f);
  EXPECT_EQ(plane.at(1, 0), 0.25f);
}

TEST(PfmTest, ColorHeaderIsUnsupported) {
  auto bytes = text_bytes("PF\n1 1\n-1.0\n");
  append(bytes, lef(0.f));
  append(bytes, lef(0.f));
  append(bytes, lef(0.f));
  EXPECT_EQ(kind_of([&] { decode_pfm(bytes); }), ErrorKind::kUnsupportedFormat);
}

TEST(PfmTest, BigEndianScaleIsUnsupported) {
  auto bytes = text_bytes("Pf\n1 1\n1.0\n");
  append(bytes, lef(0.f));
  EXPECT_EQ(kind_of([&] { decode_pfm(bytes); }), ErrorKind::kUnsupportedFormat);
}

TEST(PfmTest, MalformedHeadersAndPayloads) {
  EXPECT_EQ(kind_of([] { decode_pfm(text_bytes("P5\n1 1\n255\n")); }), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([] { decode_pfm(text_bytes("Pf\nx 1\n-1.0\n")); }), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([] { decode_pfm(text_bytes("Pf\n1 1\n0\n    ")); }), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([] { decode_pfm(text_bytes("Pf\n1 1\n-1.0\nab")); }), ErrorKind::kLength);
  EXPECT_EQ(kind_of([] { decode_pfm(text_bytes("Pf\n1")); }), ErrorKind::kFormat);
}

TEST(PfmTest, RoundTripRandomPlanes) {
  ScratchDir dir("pfm");
  std::mt19937 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + rng() % 20, h = 1 + rng() % 20;
    const auto plane = testing::random_plane(rng, w, h, -1e6f, 1e6f);
    write_pfm(plane, dir / "p.pfm");
    EXPECT_EQ(read_pfm(dir / "p.pfm"), plane);
  }
}

// --- manifest ---------------------------------------------------------------

std::string rec(const std::string& clip, int frame, const std::string& extra = "") {
  return R"({"clip_id":")" + clip + R"(","frame_index":)" + std::to_string(frame) +
         R"(,"image_path":"img.png","domain":"target","split":"val")" + extra + "}\n";
}

TEST(ManifestTest, BuildsSortedClipIndex) {
  const auto m = parse_manifest(rec("c", 20) + rec("c", 19));
  ASSERT_EQ(m.clip_index().size(), 1u);
  EXPECT_EQ(m.clip_index().at("c"), (std::vector<int>{19, 20}));
  EXPECT_EQ(m.records().front().frame_index, 19);
}

TEST(ManifestTest, DuplicateFrameIsRejected) {
  EXPECT_EQ(kind_of([] { parse_manifest(rec("c", 20) + rec("c", 20)); }), ErrorKind::kDuplicate);
}

TEST(ManifestTest, MalformedLineReportsLineNumber) {
  try {
    parse_manifest(rec("c", 1) + "\n" + "{not json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ManifestTest, FieldValidation) {
  auto parse_kind = [](const std::string& line) {
    return kind_of([&] { parse_manifest(line); });
  };
  EXPECT_EQ(parse_kind(R"({"clip_id":"","frame_index":0,"image_path":"a","domain":"target","split":"val"})"),
            ErrorKind::kParse);
  EXPECT_EQ(parse_kind(R"({"clip_id":"c","frame_index":-1,"image_path":"a","domain":"target","split":"val"})"),
            ErrorKind::kParse);
  EXPECT_EQ(parse_kind(R"({"clip_id":"c","frame_index":0,"domain":"target","split":"val"})"),
            ErrorKind::kParse);
  EXPECT_EQ(parse_kind(R"({"clip_id":"c","frame_index":0,"image_path":"a","domain":"x","split":"val"})"),
            ErrorKind::kParse);
  EXPECT_EQ(parse_kind(R"({"clip_id":"c","frame_index":0,"image_path":"a","domain":"target","split":"val","flows":{"0":"f"}})"),
            ErrorKind::kParse);
}

TEST(ManifestTest, CityscapesSeqClipLabelledAtTwentiethFrame) {
  std::string text;
  for (int f = 0; f < 30; ++f) {
    text += rec("aachen_000000", f, f == 19 ? R"(,"label_path":"gt/aachen_19.png")" : "");
  }
  const auto m = parse_manifest(text);
  int labelled = 0;
  for (const auto& r : m.records()) {
    if (r.label_path) {
      ++labelled;
      EXPECT_EQ(r.frame_index, 19);
    }
  }
  EXPECT_EQ(labelled, 1);
}

TEST(ManifestTest, ShuffledLinesYieldIdenticalManifest) {
  std::vector<std::string> lines;
  for (int c = 0; c < 3; ++c)
    for (int f = 0; f < 6; ++f) lines.push_back(rec("clip" + std::to_string(c), f));
  std::string in_order;
  for (const auto& l : lines) in_order += l;
  const auto reference = parse_manifest(in_order);
  std::mt19937 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text;
    for (const auto& l : lines) text += l;
    EXPECT_EQ(parse_manifest(text), reference);
  }
}

TEST(ManifestTest, SerializeParseRoundTrip) {
  ManifestRecord r;
  r.clip_id = "c";
  r.frame_index = 4;
  r.label_path = "l.png";
  r.flow_fwd_path = "f.flo";
  r.flows[-3] = "b3.flo";
  r.flows[5] = "f5.flo";
  r.domain = Domain::kSource;
  r.split = Split::kTrain;
  const DatasetManifest m({r});
  EXPECT_EQ(parse_manifest(serialize_manifest(m)), m);
}

TEST(ManifestTest, ResolvesRelativeToManifestDirectory) {
  ScratchDir dir("manifest");
  const auto text = rec("c", 0);
  detail::write_file_bytes(dir / "m.jsonl",
                           std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  const auto m = load_manifest(dir / "m.jsonl");
  EXPECT_EQ(m.resolve("img.png"), dir.path() / "img.png");
  EXPECT_EQ(m.resolve("/abs/x.png"), fs::path("/abs/x.png"));
}

TEST(FrameStemTest, ZeroPadsFrameIndex) {
  EXPECT_EQ(frame_stem("clip", 19), "clip_000019");
}

}  // namespace
}  // namespace vidseg
