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

#pragma once

// Synthetic scene generator.
//
// Words come in two classes. Every vocabulary family has one "pivot"
// position holding a letter (class 1, "text") or its look-alike digit
// (class 0, "numeric"); the two glyphs differ only in the middle column,
// so an occluder over that column makes the word ambiguous from pixels
// alone. Each word sits inside a host object whose tag is drawn from a
// class-conditional distribution, which is what a tag-aware recognizer can
// exploit.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sstr/scenedata.hpp"

namespace sstr::synth {

inline constexpr int kGlyphW = 5;
inline constexpr int kGlyphH = 7;
inline constexpr int kNumClasses = 2;
inline constexpr std::size_t kTagVocabularySize = 64;

// Letter/digit pairs whose glyphs differ only in column 2, rows 2..4.
inline constexpr std::array<std::pair<char, char>, 8> kPivotPairs = {
    {{'o', '0'}, {'i', '1'}, {'z', '2'}, {'s', '5'}, {'g', '6'}, {'t', '7'}, {'b', '8'}, {'q', '9'}}};

// Row bitmaps (bit 4 = leftmost column) for a symbol in the charset.
const std::array<std::uint8_t, kGlyphH>& glyph(char c);
bool glyph_pixel(char c, int col, int row);

char pivot_digit(char letter);  // '\0' if not a pivot letter

// A family is written in its text form with the pivot letter uppercased,
// e.g. "kaSr"; the numeric form swaps in the digit ("ka5r").
std::string family_word(const std::string& family, int word_class);
int family_pivot(const std::string& family);  // throws ConfigError when malformed

std::vector<std::string> default_vocabulary(std::size_t n_families = 60, std::uint64_t seed = 20260101);
std::vector<std::string> default_tags();  // 16 numeric, 16 text, 32 distractor tags

struct SynthConfig {
  std::size_t scene_size = 128;
  double occlusion_rate = 0.3;
  // Probability that an occluded word has its pivot character covered
  // (otherwise a uniformly chosen character).
  double pivot_occlusion_rate = 0.7;
  double occluder_min_frac = 0.3;  // of the character cell width
  double occluder_max_frac = 0.4;
  std::size_t n_objects = 2;  // distractor objects per scene
  double background_object_rate = 0.5;
  std::size_t min_words = 1;
  std::size_t max_words = 3;
  double min_glyph_scale = 1.6;  // pixels per font unit
  double max_glyph_scale = 2.4;
  double max_rotation_deg = 8.0;
  double max_shear = 0.15;
  double max_curvature = 0.0;  // peak baseline bend, font units
  double noise_sigma = 0.03;
  double host_margin_min = 2.0;
  double host_margin_max = 12.0;
  double illegible_rate = 0.0;
  std::vector<std::string> vocabulary = default_vocabulary();
  std::vector<std::string> tags = default_tags();
  // Host-object tag distribution per word class, and the distractor
  // distribution; each has one probability per entry of `tags`.
  std::array<std::vector<double>, kNumClasses> class_tag_probs;
  std::vector<double> distractor_tag_probs;

  SynthConfig();
  void validate() const;  // ConfigError on out-of-range settings
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);  // missing keys keep defaults

// Renders one scene. Deterministic in (seed, cfg).
SceneAnnotation generate_synthetic_scene(std::uint64_t seed, const SynthConfig& cfg);

// Scenes named "<prefix><index>", seeded by hashing (seed, index).
std::vector<SceneAnnotation> generate_dataset(std::uint64_t seed, std::size_t count, const SynthConfig& cfg,
                                              const std::string& prefix = "syn");

// Per-word-rendering description used by tests of the normalization module.
struct CurvedWord {
  GrayImage crop;              // kCropWidth x kCropHeight
  double curvature = 0;        // signed bend in crop-normalized units
  std::vector<double> src_x;   // fiducials in [-1,1]^2 that trace the bent text
  std::vector<double> src_y;
};

// Renders a single word directly into a 32x100 crop with a parabolic
// baseline bend of `bend` (fraction of the crop half-height) and returns
// the fiducial positions that follow the bend.
CurvedWord render_curved_word(const std::string& word, double bend, std::size_t k_fiducials = 20);

// Mean absolute vertical offset (in pixels) of per-column ink centroids
// from their best straight-line fit; zero for perfectly straight text.
double baseline_curvature(const GrayImage& crop);

}  // namespace sstr::synth
