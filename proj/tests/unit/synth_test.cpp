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

#include "sstr/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"

namespace sstr::synth {
namespace {

// Plug-in mutual information in nats between paired discrete labels.
double mutual_information(const std::vector<std::string>& a, const std::vector<int>& b) {
  std::map<std::string, double> pa;
  std::map<int, double> pb;
  std::map<std::pair<std::string, int>, double> pab;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1 / n;
    pb[b[i]] += 1 / n;
    pab[{a[i], b[i]}] += 1 / n;
  }
  double mi = 0;
  for (const auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  return mi;
}

TEST(Synth, ZeroOcclusionRateMeansNoOccluders) {
  SynthConfig cfg;
  cfg.occlusion_rate = 0;
  for (const auto& s : generate_dataset(3, 200, cfg)) {
    for (const auto& t : s.texts) EXPECT_FALSE(t.occluded);
  }
}

TEST(Synth, FullOcclusionRateOccludesEverything) {
  SynthConfig cfg;
  cfg.occlusion_rate = 1;
  for (const auto& s : generate_dataset(4, 50, cfg)) {
    for (const auto& t : s.texts) EXPECT_TRUE(t.occluded);
  }
}

TEST(Synth, DeterministicForSeed) {
  const SynthConfig cfg;
  const SceneAnnotation a = generate_synthetic_scene(99, cfg), b = generate_synthetic_scene(99, cfg);
  EXPECT_TRUE(a.image == b.image);
  ASSERT_EQ(a.texts.size(), b.texts.size());
  for (std::size_t i = 0; i < a.texts.size(); ++i) EXPECT_EQ(a.texts[i].instance.transcription, b.texts[i].instance.transcription);
  EXPECT_FALSE(generate_synthetic_scene(100, cfg).image == a.image);
}

TEST(Synth, PivotWordsDifferOnlyAtPivot) {
  for (const auto& fam : default_vocabulary()) {
    const std::string w0 = family_word(fam, 0), w1 = family_word(fam, 1);
    const int p = family_pivot(fam);
    ASSERT_EQ(w0.size(), w1.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
      if (static_cast<int>(i) == p) {
        EXPECT_EQ(pivot_digit(w1[i]), w0[i]) << fam;  // class 0 carries the digit
      } else {
        EXPECT_EQ(w0[i], w1[i]) << fam;
      }
    }
  }
}

TEST(Synth, TagsCarryClassInformation) {
  const SynthConfig cfg;
  std::vector<std::string> host;
  std::vector<int> cls;
  for (const auto& scene : generate_dataset(5, 1000, cfg)) {
    for (const auto& s : crop_samples(scene, AssignmentMode::kOverlap)) {
      host.push_back(s.tags.empty() ? "" : s.tags.front().tag);
      cls.push_back(s.word_class);
    }
  }
  ASSERT_GT(host.size(), 1000u);
  const double mi = mutual_information(host, cls);
  std::vector<int> shuffled = cls;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
  EXPECT_GT(mi, 0.3);
  EXPECT_GT(mi, 10 * mutual_information(host, shuffled));
}

TEST(Synth, ThousandSceneInvariants) {
  const SynthConfig cfg;
  std::size_t n = 0;
  for (const auto& scene : generate_dataset(6, 1000, cfg)) {
    EXPECT_EQ(scene.image.width, cfg.scene_size);
    for (const auto& v : scene.image.pixels) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
    for (const auto& t : scene.texts) {
      EXPECT_TRUE(t.instance.box.valid());
      EXPECT_GT(t.instance.mask_area, 0);
      EXPECT_LE(t.instance.mask_area, t.instance.box.area());
    }
    for (const auto& s : crop_samples(scene, AssignmentMode::kScene)) {
      ++n;
      EXPECT_LE(s.target.size(), charset::kMaxSteps);
      EXPECT_EQ(s.target.back(), charset::kEos);
      EXPECT_EQ(s.image.width, kCropWidth);
      for (const auto& tw : s.tags) {
        EXPECT_GE(tw.weight, geometry::kMinSceneWeight);
        EXPECT_LE(tw.weight, 1.0);
      }
    }
  }
  EXPECT_GE(n, 1000u);
}

TEST(Synth, ConfigJsonRoundTrip) {
  SynthConfig a;
  a.occlusion_rate = 0.55;
  a.max_words = 2;
  nlohmann::json j = a;
  const SynthConfig b = j.get<SynthConfig>();
  EXPECT_EQ(b.occlusion_rate, 0.55);
  EXPECT_EQ(b.max_words, 2u);
  EXPECT_EQ(nlohmann::json(b), j);
}

TEST(Synth, ValidateRejectsBadSettings) {
  SynthConfig c;
  c.occlusion_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SynthConfig();
  c.tags.pop_back();
  EXPECT_THROW(c.validate(), ConfigError);
  c = SynthConfig();
  c.distractor_tag_probs[40] += 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(SynthConfig().validate());
}

}  // namespace
}  // namespace sstr::synth
