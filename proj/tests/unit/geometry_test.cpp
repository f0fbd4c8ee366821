// Copyright 2026 The SemanticSTR Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sstr/geometry.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"

namespace sstr::geometry {
namespace {

using testing::grid_box;
using testing::inside;
using testing::perimeter_oracle;
using testing::raster_areas;

TextInstance text(Box b, double mask) { return {b, mask, "w", true}; }

TEST(ScaleBox, IdentityWhenMaskFillsBox) { EXPECT_EQ(scale_box(text({0, 0, 10, 10}, 100)), (Box{0, 0, 10, 10})); }

TEST(ScaleBox, HalfMask) { EXPECT_EQ(scale_box(text({0, 0, 10, 10}, 50)), (Box{2.5, 2.5, 5, 5})); }

TEST(ScaleBox, OffsetBox) { EXPECT_EQ(scale_box(text({4, 6, 8, 2}, 8)), (Box{6, 6.5, 4, 1})); }

TEST(ScaleBox, PreservesCenterAndScalesAreaBySquare) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Box b = grid_box(rng);
    const double s = u(rng);
    const Box r = scale_box(text(b, s * b.area()));
    EXPECT_NEAR(r.x + r.w / 2, b.x + b.w / 2, 1e-12);
    EXPECT_NEAR(r.y + r.h / 2, b.y + b.h / 2, 1e-12);
    EXPECT_NEAR(r.area(), s * s * b.area(), 1e-9);
  }
}

TEST(ClampMaskArea, ClampsIntoBoxArea) {
  const Box b{0, 0, 4, 5};
  EXPECT_EQ(clamp_mask_area(30, b), 20);
  EXPECT_EQ(clamp_mask_area(0, b), 20);
  EXPECT_EQ(clamp_mask_area(-3, b), 20);
  EXPECT_EQ(clamp_mask_area(7, b), 7);
}

TEST(Encompasses, Examples) {
  EXPECT_TRUE(encompasses({0, 0, 10, 10}, {2, 2, 3, 3}));
  EXPECT_TRUE(encompasses({0, 0, 10, 10}, {0, 0, 10, 10}));
  EXPECT_FALSE(encompasses({0, 0, 10, 10}, {8, 8, 5, 5}));
}

TEST(Encompasses, AgreesWithPerimeterSampling) {
  std::mt19937_64 rng(2);
  std::size_t positives = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box outer = grid_box(rng);
    Box inner = grid_box(rng);
    if (i % 3 == 0) {
      // Bias toward containment so both outcomes are well represented.
      inner = {outer.x + outer.w / 4, outer.y + outer.h / 4 - (i % 2) * 0.25, outer.w / 2, outer.h / 2 + (i % 5 == 0) * outer.h};
    }
    const bool expected = perimeter_oracle(outer, inner, rng);
    EXPECT_EQ(encompasses(outer, inner), expected) << i;
    positives += expected;
  }
  EXPECT_GT(positives, 100u);
  EXPECT_LT(positives, 900u);
}

TEST(Iou, Examples) {
  EXPECT_EQ(iou({1, 2, 3, 4}, {1, 2, 3, 4}), 1.0);
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 1, 1}), 0.0);
  EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 0, 2, 2}), 1.0 / 3.0, 1e-15);
}

TEST(Iou, MatchesRasterizedAreas) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Box a = grid_box(rng), b = grid_box(rng);
    const auto [inter, uni] = raster_areas(a, b);
    EXPECT_NEAR(intersection_area(a, b), inter, 1e-9);
    EXPECT_NEAR(iou(a, b), inter / uni, 1e-6);
  }
}

TEST(Iou, SymmetricBoundedAndOneOnlyForIdentical) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Box a = grid_box(rng), b = grid_box(rng);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
    if (!(a == b)) EXPECT_LT(v, 1);
  }
}

TEST(AssignOverlap, EmptyScene) { EXPECT_TRUE(assign_overlap(text({0, 0, 5, 5}, 25), {}).empty()); }

TEST(AssignOverlap, HugeObjectOnly) {
  const std::vector<DetectedObject> objs = {{{0, 0, 128, 128}, "wall", 1}, {{100, 100, 5, 5}, "cup", 1}};
  const auto out = assign_overlap(text({10, 10, 20, 8}, 160), objs);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].tag, "wall");
}

TEST(AssignOverlap, ScaledBoxDecidesMembership) {
  // The object covers the central half of the text box but not the full box.
  const std::vector<DetectedObject> objs = {{{4, 4, 12, 12}, "sign", 1}};
  EXPECT_TRUE(assign_overlap(text({0, 0, 20, 20}, 100), objs).size() == 1);
  EXPECT_TRUE(assign_overlap(text({0, 0, 20, 20}, 400), objs).empty());
}

TEST(AssignOverlap, MatchesBruteForceAndOrdersByArea) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DetectedObject> objs;
    for (int k = 0; k < 8; ++k) objs.push_back({grid_box(rng), "t" + std::to_string(k), 1});
    const Box tb = grid_box(rng);
    const TextInstance t = text(tb, frac(rng) * tb.area());
    const Box sb = scale_box(t);
    std::set<std::string> expected;
    for (const auto& o : objs) {
      const bool corners = inside(o.box, sb.x, sb.y) && inside(o.box, sb.right(), sb.y) && inside(o.box, sb.x, sb.bottom()) &&
                           inside(o.box, sb.right(), sb.bottom());
      if (corners) expected.insert(o.tag);
    }
    const auto out = assign_overlap(t, objs);
    std::set<std::string> got;
    for (const auto& o : out) got.insert(o.tag);
    EXPECT_EQ(got, expected);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LE(out[i - 1].box.area(), out[i].box.area());
    // Overlap objects are a subset of the scene objects.
    std::set<std::string> scene;
    for (const auto& w : assign_scene(t, objs)) scene.insert(w.object.tag);
    EXPECT_TRUE(std::includes(scene.begin(), scene.end(), got.begin(), got.end()));
  }
}

TEST(AssignScene, FloorAndIdentity) {
  const TextInstance t = text({10, 10, 10, 4}, 40);
  const std::vector<DetectedObject> objs = {{{90, 90, 5, 5}, "far", 1}, {{10, 10, 10, 4}, "same", 1}};
  const auto out = assign_scene(t, objs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].object.tag, "same");
  EXPECT_EQ(out[0].weight, 1.0);
  EXPECT_EQ(out[1].object.tag, "far");
  EXPECT_EQ(out[1].weight, kMinSceneWeight);
}

TEST(AssignScene, WeightsEqualClampedRasterIou) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DetectedObject> objs;
    for (int k = 0; k < 5; ++k) objs.push_back({grid_box(rng), "t" + std::to_string(k), 1});
    const Box tb = grid_box(rng);
    const auto out = assign_scene(text(tb, tb.area()), objs);
    ASSERT_EQ(out.size(), objs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto [inter, uni] = raster_areas(out[i].object.box, tb);
      EXPECT_NEAR(out[i].weight, std::max(inter / uni, kMinSceneWeight), 1e-6);
      if (i) EXPECT_GE(out[i - 1].weight, out[i].weight);
    }
  }
}

}  // namespace
}  // namespace sstr::geometry
