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

#include "sstr/scenedata.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"
#include "sstr/image.hpp"
#include "sstr/synth.hpp"
#include "test_util.hpp"

namespace sstr {
namespace {

using testing::TempDir;

void write_text(const std::string& path, const std::string& body) { std::ofstream(path) << body; }

GrayImage gradient_image(std::size_t w, std::size_t h) {
  GrayImage img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) img.at(x, y) = static_cast<float>((x * 7 + y * 13) % 256) / 255.0f;
  }
  return img;
}

TEST(Charset, FixedLayout) {
  EXPECT_EQ(charset::kSize, 39);
  EXPECT_EQ(charset::kGo, 36);
  EXPECT_EQ(charset::kEos, 37);
  EXPECT_EQ(charset::kPad, 38);
  EXPECT_EQ(charset::index_of('0'), 0);
  EXPECT_EQ(charset::index_of('9'), 9);
  EXPECT_EQ(charset::index_of('a'), 10);
  EXPECT_EQ(charset::index_of('z'), 35);
  EXPECT_EQ(charset::index_of('-'), -1);
}

TEST(Charset, EncodeStop) {
  EXPECT_EQ(charset::encode("STOP"), (std::vector<int>{28, 29, 24, 25, charset::kEos}));
}

TEST(Charset, EncodeDigits) { EXPECT_EQ(charset::encode("46"), (std::vector<int>{4, 6, charset::kEos})); }

TEST(Charset, DropsUnknownAndLowercases) {
  EXPECT_EQ(charset::normalize("Caf\xc3\xa9-22!"), "caf22");
  EXPECT_EQ(charset::encode("!!"), (std::vector<int>{charset::kEos}));
}

TEST(Charset, RoundTripOn1000RandomStrings) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::uniform_int_distribution<std::size_t> len(0, 25), pick(0, alphabet.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    std::string s(len(rng), ' ');
    for (auto& c : s) c = alphabet[pick(rng)];
    EXPECT_EQ(charset::decode(charset::encode(s)), charset::normalize(s));
  }
}

TEST(Charset, DecodeSkipsSpecialsAndStopsAtEos) {
  const std::vector<int> toks = {charset::kGo, 10, charset::kPad, 11, charset::kEos, 12};
  EXPECT_EQ(charset::decode(toks), "ab");
}

class LoaderTest : public ::testing::Test {
 protected:
  TempDir dir{"loader"};
  void SetUp() override { write_pgm(dir.file("a.pgm"), gradient_image(64, 48)); }
};

TEST_F(LoaderTest, EmptyList) {
  write_text(dir.file("ann.json"), "[]");
  const LoadReport r = load_annotations(dir.file("ann.json"));
  EXPECT_TRUE(r.scenes.empty());
  EXPECT_EQ(r.skipped, 0u);
}

TEST_F(LoaderTest, MissingMaskAreaDefaultsToBoxArea) {
  write_text(dir.file("ann.json"),
             R"([{"image_id": 7, "image_path": "a.pgm",
                  "instances": [{"bbox": [2, 3, 10, 5], "utf8_string": "ok"}],
                  "objects": [{"bbox": [0, 0, 64, 48], "tag": "Wall", "score": 0.5}]}])");
  const LoadReport r = load_annotations(dir.file("ann.json"));
  ASSERT_EQ(r.scenes.size(), 1u);
  const auto& t = r.scenes[0].texts.at(0).instance;
  EXPECT_EQ(r.scenes[0].image_id, "7");
  EXPECT_EQ(t.mask_area, 50);
  EXPECT_TRUE(t.legible);
  EXPECT_EQ(geometry::scale_box(t), t.box);
  EXPECT_EQ(r.scenes[0].objects.at(0).tag, "wall");
}

TEST_F(LoaderTest, MalformedRecordsAreSkippedAndCounted) {
  write_text(dir.file("ann.json"),
             R"([{"image_id": "s1", "image_path": "a.pgm",
                  "instances": [{"bbox": [2, 3, 10], "utf8_string": "bad"},
                                {"bbox": [1, 1, 8, 8], "mask_area": 32, "utf8_string": "good", "legible": false},
                                {"bbox": [500, 500, 4, 4], "utf8_string": "outside"}],
                  "objects": [{"bbox": [0, 0, 4, 4]}]},
                 {"image_id": "s2", "image_path": "missing.pgm"},
                 {"image_path": "a.pgm"}])");
  const LoadReport r = load_annotations(dir.file("ann.json"));
  ASSERT_EQ(r.scenes.size(), 1u);
  EXPECT_EQ(r.skipped, 5u);
  EXPECT_EQ(r.warnings.size(), 5u);
  ASSERT_EQ(r.scenes[0].texts.size(), 1u);
  EXPECT_FALSE(r.scenes[0].texts[0].instance.legible);  // kept, flagged
}

TEST_F(LoaderTest, BoxesClampedAndMaskRescaled) {
  write_text(dir.file("ann.json"),
             R"([{"image_id": "s", "image_path": "a.pgm",
                  "instances": [{"bbox": [60, 40, 8, 16], "mask_area": 64, "utf8_string": "edge"},
                                {"bbox": [0, 0, 4, 4], "mask_area": 99, "utf8_string": "big"}]}])");
  const LoadReport r = load_annotations(dir.file("ann.json"));
  const auto& a = r.scenes.at(0).texts.at(0).instance;
  EXPECT_EQ(a.box, (geometry::Box{60, 40, 4, 8}));
  EXPECT_DOUBLE_EQ(a.mask_area, 16);  // 64 * (32 / 128)
  EXPECT_EQ(r.scenes[0].texts.at(1).instance.mask_area, 16);  // clamped to the box
}

TEST_F(LoaderTest, EveryRecordBadIsFormatError) {
  write_text(dir.file("ann.json"), R"([{"image_id": "x"}, {"image_path": "nope.pgm", "image_id": 2}])");
  EXPECT_THROW(load_annotations(dir.file("ann.json")), FormatError);
  write_text(dir.file("obj.json"), R"({"image_id": "x"})");
  EXPECT_THROW(load_annotations(dir.file("obj.json")), FormatError);
  write_text(dir.file("broken.json"), "[{");
  EXPECT_THROW(load_annotations(dir.file("broken.json")), FormatError);
}

TEST_F(LoaderTest, UnreadableFileIsIoError) { EXPECT_THROW(load_annotations(dir.file("none.json")), IoError); }

TEST(SaveLoad, RoundTripReproducesScenes) {
  TempDir dir("roundtrip");
  std::vector<SceneAnnotation> scenes = synth::generate_dataset(5, 6, synth::SynthConfig());
  const std::vector<SceneAnnotation> original = scenes;
  save_annotations(dir.file("data/ann.json"), scenes);
  const LoadReport r = load_annotations(dir.file("data/ann.json"));
  ASSERT_EQ(r.scenes.size(), original.size());
  EXPECT_EQ(r.skipped, 0u);
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& a = original[i];
    const auto& b = r.scenes[i];
    EXPECT_EQ(a.image_id, b.image_id);
    ASSERT_EQ(a.image.width, b.image.width);
    ASSERT_EQ(a.image.height, b.image.height);
    for (std::size_t k = 0; k < a.image.pixels.size(); ++k) {
      ASSERT_NEAR(a.image.pixels[k], b.image.pixels[k], 0.5 / 255 + 1e-6);  // 8-bit storage
    }
    ASSERT_EQ(a.texts.size(), b.texts.size());
    for (std::size_t k = 0; k < a.texts.size(); ++k) {
      EXPECT_NEAR(a.texts[k].instance.box.w, b.texts[k].instance.box.w, 1e-9);
      EXPECT_NEAR(a.texts[k].instance.box.h, b.texts[k].instance.box.h, 1e-9);
      EXPECT_NEAR(a.texts[k].instance.mask_area, b.texts[k].instance.mask_area, 1e-9);
      EXPECT_EQ(a.texts[k].instance.transcription, b.texts[k].instance.transcription);
      EXPECT_EQ(a.texts[k].occluded, b.texts[k].occluded);
      EXPECT_EQ(a.texts[k].word_class, b.texts[k].word_class);
    }
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (std::size_t k = 0; k < a.objects.size(); ++k) {
      // Loading recomputes w and h from the clamped corners.
      EXPECT_NEAR(a.objects[k].box.x, b.objects[k].box.x, 1e-9);
      EXPECT_NEAR(a.objects[k].box.y, b.objects[k].box.y, 1e-9);
      EXPECT_NEAR(a.objects[k].box.w, b.objects[k].box.w, 1e-9);
      EXPECT_NEAR(a.objects[k].box.h, b.objects[k].box.h, 1e-9);
      EXPECT_EQ(a.objects[k].tag, b.objects[k].tag);
    }
  }
}

TEST(CropRect, FloorCeilAndClamp) {
  const PixelRect r = crop_rect({2.4, 3.6, 5.2, 1.1}, 50, 40);
  EXPECT_EQ(r.x0, 2u);
  EXPECT_EQ(r.y0, 3u);
  EXPECT_EQ(r.w, 6u);  // ceil(7.6) - 2
  EXPECT_EQ(r.h, 2u);  // ceil(4.7) - 3
  const PixelRect off = crop_rect({60, 0, 5, 5}, 50, 40);
  EXPECT_EQ(off.w, 0u);
}

SceneAnnotation manual_scene() {
  SceneAnnotation s;
  s.image_id = "m";
  s.image = gradient_image(80, 60);
  s.texts.push_back({{{5.5, 7.2, 30.1, 9.4}, 200, "Hello", true}, false, -1});
  s.texts.push_back({{{40, 30, 20, 10}, 200, "hidden", false}, false, -1});
  s.texts.push_back({{{10, 40, 30, 10}, 300, "!!", true}, false, -1});
  s.texts.push_back({{{60, 45, 12, 8}, 96, "z7", true}, true, 0});
  s.objects.push_back({{0, 0, 80, 60}, "room", 1});
  s.objects.push_back({{3, 5, 36, 14}, "sign", 1});
  s.objects.push_back({{50, 40, 5, 5}, "cup", 1});
  return s;
}

TEST(CropSamples, PixelsEqualSubArrayBeforeResize) {
  const SceneAnnotation scene = manual_scene();
  const auto samples = crop_samples(scene, AssignmentMode::kOverlap);
  ASSERT_EQ(samples.size(), 2u);  // illegible and empty transcriptions dropped
  const auto& box = scene.texts[0].instance.box;
  const std::size_t x0 = 5, y0 = 7, x1 = 36, y1 = 17;  // floor / ceil by hand
  GrayImage sub(x1 - x0, y1 - y0);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) sub.at(x - x0, y - y0) = scene.image.at(x, y);
  }
  const PixelRect r = crop_rect(box, 80, 60);
  EXPECT_EQ(r.x0, x0);
  EXPECT_EQ(r.w, x1 - x0);
  EXPECT_TRUE(crop(scene.image, r.x0, r.y0, r.w, r.h) == sub);
  EXPECT_TRUE(samples[0].image == resize_keep_aspect(sub, kCropWidth, kCropHeight));
  EXPECT_EQ(samples[0].image.width, kCropWidth);
  EXPECT_EQ(samples[0].image.height, kCropHeight);
  EXPECT_EQ(samples[0].text, "hello");
  EXPECT_EQ(samples[0].id, "m/0");
  EXPECT_EQ(samples[1].id, "m/3");
  EXPECT_TRUE(samples[1].occluded);
}

TEST(CropSamples, OverlapTagsSubsetOfSceneTags) {
  const SceneAnnotation scene = manual_scene();
  const auto ov = crop_samples(scene, AssignmentMode::kOverlap);
  const auto sc = crop_samples(scene, AssignmentMode::kScene);
  ASSERT_EQ(ov.size(), sc.size());
  for (std::size_t i = 0; i < ov.size(); ++i) {
    std::set<std::string> a, b;
    for (const auto& t : ov[i].tags) {
      a.insert(t.tag);
      EXPECT_EQ(t.weight, 1.0);
    }
    for (const auto& t : sc[i].tags) b.insert(t.tag);
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    EXPECT_EQ(sc[i].tags.size(), scene.objects.size());
  }
  ASSERT_EQ(ov[0].tags.size(), 2u);
  EXPECT_EQ(ov[0].tags[0].tag, "sign");  // most specific first
  EXPECT_EQ(ov[0].tags[1].tag, "room");
  EXPECT_TRUE(crop_samples(scene, AssignmentMode::kNone)[0].tags.empty());
}

TEST(CropSamples, NoLegibleInstancesGivesNothing) {
  SceneAnnotation s = manual_scene();
  for (auto& t : s.texts) t.instance.legible = false;
  EXPECT_TRUE(crop_samples(s, AssignmentMode::kScene).empty());
}

TEST(CropSamples, DegenerateCropWarns) {
  SceneAnnotation s = manual_scene();
  s.texts[0].instance.box = {90, 90, 3, 3};
  std::vector<std::string> warnings;
  EXPECT_EQ(crop_samples(s, AssignmentMode::kScene, &warnings).size(), 1u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(CropSamples, OverlongTranscriptionExcluded) {
  SceneAnnotation s = manual_scene();
  s.texts[0].instance.transcription = std::string(26, 'a');
  EXPECT_EQ(crop_samples(s, AssignmentMode::kScene).size(), 1u);
  s.texts[0].instance.transcription = std::string(25, 'a');
  const auto out = crop_samples(s, AssignmentMode::kScene);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].target.size(), charset::kMaxSteps);
}

}  // namespace
}  // namespace sstr
