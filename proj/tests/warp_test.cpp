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

#include "vidseg/warp.hpp"

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace vidseg {
namespace {

using testing::from_rows;
using testing::to_rows;

std::vector<bool> valid_row(const ValidityMask& m) {
  std::vector<bool> out;
  for (auto v : m.data()) out.push_back(v != 0);
  return out;
}

TEST(PropagateLabelsTest, ZeroFlowIsIdentity) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 1 + rng() % 9, h = 1 + rng() % 9;
    const auto labels = testing::random_labels(rng, w, h, 19, 0.1);
    const auto r = propagate_labels(labels, FlowField::zeros(w, h));
    EXPECT_EQ(r.payload, labels);
    EXPECT_EQ(r.validity.count_valid(), labels.size());
  }
}

TEST(PropagateLabelsTest, UnitShiftVacatesLastColumn) {
  const auto labels = from_rows({{3, 7}}, 8);
  const auto r = propagate_labels(labels, FlowField::uniform(2, 1, 1.f, 0.f));
  EXPECT_EQ(to_rows(r.payload), (testing::Rows{{7, 255}}));
  EXPECT_EQ(valid_row(r.validity), (std::vector<bool>{true, false}));
}

TEST(PropagateLabelsTest, MatchesBruteForceOnRandomIntegerFlows) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto labels = testing::random_labels(rng, 3, 3, 5, 0.1);
    const auto flow = testing::random_integer_flow(rng, 3, 3, 3);
    const auto r = propagate_labels(labels, flow);
    const auto oracle = testing::oracle_warp_labels(labels, flow);
    ASSERT_EQ(to_rows(r.payload), oracle.labels);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ASSERT_EQ(r.validity.at(i, j), oracle.valid[i][j]);
  }
}

TEST(PropagateLabelsTest, RoundsHalfAwayFromZero) {
  const auto labels = from_rows({{0, 1, 2, 3}}, 4);
  // From column 1: +0.5 lands on 1.5 -> 2, -0.5 lands on 0.5 -> 1.
  // From column 0: -0.5 lands on -0.5 -> -1, which is outside.
  std::vector<float> dx = {-0.5f, 0.5f, -0.5f, 0.f};
  const auto r = propagate_labels(labels, FlowField(4, 1, dx, std::vector<float>(4, 0.f)));
  EXPECT_EQ(to_rows(r.payload), (testing::Rows{{255, 2, 2, 3}}));
}

TEST(PropagateLabelsTest, MatchesOracleOnRealFlows) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 2 + rng() % 8, h = 2 + rng() % 8;
    const auto labels = testing::random_labels(rng, w, h, 19);
    const auto flow = testing::random_real_flow(rng, w, h, 4.0);
    const auto r = propagate_labels(labels, flow);
    ASSERT_EQ(to_rows(r.payload), testing::oracle_warp_labels(labels, flow).labels);
  }
}

TEST(PropagateLabelsTest, ShapeMismatchIsRejected) {
  const auto labels = make_label_map(3, 2, 0, ClassSpace(2));
  try {
    propagate_labels(labels, FlowField::zeros(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(PropagateLabelsTest, ValidityDependsOnlyOnFlow) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto flow = testing::random_real_flow(rng, 6, 5, 5.0);
    const auto a = propagate_labels(testing::random_labels(rng, 6, 5, 3), flow);
    const auto b = propagate_labels(testing::random_labels(rng, 6, 5, 19, 0.5), flow);
    const auto c = propagate_plane(testing::random_plane(rng, 6, 5), flow);
    EXPECT_EQ(a.validity, b.validity);
    EXPECT_EQ(a.validity, c.validity);
  }
}

TEST(PropagateLabelsTest, NeverInventsLabels) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto labels = testing::random_labels(rng, 7, 7, 19);
    const auto r = propagate_labels(labels, testing::random_real_flow(rng, 7, 7, 6.0));
    const std::set<std::uint8_t> in(labels.data().begin(), labels.data().end());
    for (auto v : r.payload.data()) {
      EXPECT_TRUE(v == kIgnoreLabel || in.count(v));
    }
  }
}

TEST(PropagateLabelsTest, IntegerShiftIsTranslationOnInterior) {
  std::mt19937 rng(6);
  const auto labels = testing::random_labels(rng, 10, 8, 19);
  const int a = 2, b = -1;  // dx, dy
  const auto r = propagate_labels(labels, FlowField::uniform(10, 8, float(a), float(b)));
  for (int i = 1; i < 8; ++i)
    for (int j = 0; j < 8; ++j) EXPECT_EQ(r.payload.at(i, j), labels.at(i + b, j + a));
}

TEST(PropagatePlaneTest, ZeroFlowIsIdentityInBothModes) {
  std::mt19937 rng(7);
  const auto plane = testing::random_plane(rng, 5, 4);
  for (auto mode : {Sampling::kNearest, Sampling::kBilinear}) {
    const auto r = propagate_plane(plane, FlowField::zeros(5, 4), mode);
    EXPECT_EQ(r.payload, plane);
    EXPECT_EQ(r.validity.count_valid(), plane.size());
  }
}

TEST(PropagatePlaneTest, HalfPixelBilinear) {
  const ScalarPlane plane(2, 1, {0.0f, 1.0f});
  const FlowField flow(2, 1, {0.5f, 0.f}, {0.f, 0.f});
  const auto r = propagate_plane(plane, flow, Sampling::kBilinear);
  EXPECT_FLOAT_EQ(r.payload.at(0, 0), 0.5f);
  EXPECT_TRUE(r.validity.at(0, 0));
  EXPECT_FLOAT_EQ(r.payload.at(0, 1), 1.0f);
}

TEST(PropagatePlaneTest, BilinearMatchesOracle) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto plane = testing::random_plane(rng, 4, 4, -3.f, 3.f);
    const auto flow = testing::random_real_flow(rng, 4, 4, 1.5);
    std::vector<std::vector<bool>> valid;
    const auto oracle = testing::oracle_bilinear(plane, flow, valid);
    const auto r = propagate_plane(plane, flow, Sampling::kBilinear);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        ASSERT_EQ(r.validity.at(i, j), valid[i][j]);
        if (valid[i][j]) {
          ASSERT_NEAR(r.payload.at(i, j), oracle[i][j], 1e-6);
        } else {
          ASSERT_EQ(r.payload.at(i, j), 0.f);
        }
      }
    }
  }
}

TEST(PropagatePlaneTest, NearestMirrorsLabels) {
  std::mt19937 rng(9);
  const auto labels = testing::random_labels(rng, 6, 6, 19);
  std::vector<float> as_float(labels.data().begin(), labels.data().end());
  const ScalarPlane plane(6, 6, as_float);
  const auto flow = testing::random_real_flow(rng, 6, 6, 3.0);
  const auto a = propagate_labels(labels, flow);
  const auto b = propagate_plane(plane, flow);
  EXPECT_EQ(a.validity, b.validity);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (a.validity.data()[p]) {
      EXPECT_EQ(float(a.payload.data()[p]), b.payload.data()[p]);
    }
  }
}

TEST(PropagateLogitsTest, ZeroFlowIsIdentity) {
  std::mt19937 rng(10);
  const auto v = testing::random_logits(rng, 4, 3, 5);
  const auto r = propagate_logits(v, FlowField::zeros(4, 3));
  EXPECT_EQ(r.payload, v);
  EXPECT_EQ(r.validity.count_valid(), 12u);
}

TEST(PropagateLogitsTest, TwoChannelShift) {
  // HWC layout: pixel0 = (1, 2), pixel1 = (3, 4).
  const LogitVolume v(2, 1, 2, {1.f, 2.f, 3.f, 4.f});
  const auto r = propagate_logits(v, FlowField::uniform(2, 1, 1.f, 0.f));
  EXPECT_EQ(r.payload.at(0, 0, 0), 3.f);
  EXPECT_EQ(r.payload.at(0, 0, 1), 4.f);
  EXPECT_TRUE(r.validity.at(0, 0));
  EXPECT_FALSE(r.validity.at(0, 1));
}

TEST(PropagateLogitsTest, EqualsPerChannelPlanes) {
  std::mt19937 rng(11);
  const int w = 5, h = 4, c = 3;
  const auto v = testing::random_logits(rng, w, h, c);
  const auto flow = testing::random_real_flow(rng, w, h, 3.0);
  const auto r = propagate_logits(v, flow);
  for (int ch = 0; ch < c; ++ch) {
    std::vector<float> plane;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) plane.push_back(v.at(i, j, ch));
    const auto pr = propagate_plane(ScalarPlane(w, h, plane), flow);
    EXPECT_EQ(pr.validity, r.validity);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) EXPECT_EQ(r.payload.at(i, j, ch), pr.payload.at(i, j));
  }
}

TEST(ComposeFlowsTest, SingleHopIsUnchangedWhereValid) {
  std::mt19937 rng(12);
  const auto flow = testing::random_integer_flow(rng, 6, 6, 2);
  const auto r = compose_flows(std::vector<FlowField>{flow});
  const auto direct = propagate_labels(make_label_map(6, 6, 0, ClassSpace(1)), flow);
  EXPECT_EQ(r.validity, direct.validity);
  for (std::size_t p = 0; p < flow.size(); ++p) {
    if (!r.validity.data()[p]) continue;
    EXPECT_EQ(r.payload.dx()[p], flow.dx()[p]);
    EXPECT_EQ(r.payload.dy()[p], flow.dy()[p]);
  }
}

TEST(ComposeFlowsTest, ComposedWarpEqualsSequentialWarps) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 7, h = 5;
    std::vector<FlowField> hops;
    for (int k = 0; k < 3; ++k) hops.push_back(testing::random_integer_flow(rng, w, h, 1));
    std::vector<LabelMap> frames;
    for (int k = 0; k <= 3; ++k) frames.push_back(testing::random_labels(rng, w, h, 19));
    // Warp frame 3 back to frame 0 one hop at a time.
    auto chain = frames[3];
    for (int k = 2; k >= 0; --k) chain = propagate_labels(chain, hops[k]).payload;
    const auto composed = compose_flows(hops);
    const auto direct = propagate_labels(frames[3], composed.payload);
    EXPECT_EQ(direct.payload, chain);
    EXPECT_EQ(direct.validity, composed.validity);
  }
}

TEST(ComposeFlowsTest, EmptyInputIsRejected) {
  try {
    compose_flows({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
  }
}

}  // namespace
}  // namespace vidseg
