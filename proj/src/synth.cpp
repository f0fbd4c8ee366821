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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string_view>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"
#include "sstr/nn.hpp"

namespace sstr::synth {

namespace {

using Glyph = std::array<std::uint8_t, kGlyphH>;

constexpr Glyph rows(const std::array<std::string_view, kGlyphH>& r) {
  Glyph g{};
  for (int y = 0; y < kGlyphH; ++y) {
    std::uint8_t v = 0;
    for (int x = 0; x < kGlyphW; ++x) v = static_cast<std::uint8_t>((v << 1) | (r[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '1' ? 1 : 0));
    g[static_cast<std::size_t>(y)] = v;
  }
  return g;
}

// Uppercase-style 5x7 shapes; the charset is case-insensitive.
const std::array<Glyph, 26> kLetters = {
    rows({"01110", "10001", "10001", "11111", "10001", "10001", "10001"}),  // a
    rows({"11110", "10001", "10001", "11110", "10001", "10001", "11110"}),  // b
    rows({"01110", "10001", "10000", "10000", "10000", "10001", "01110"}),  // c
    rows({"11110", "10001", "10001", "10001", "10001", "10001", "11110"}),  // d
    rows({"11111", "10000", "10000", "11110", "10000", "10000", "11111"}),  // e
    rows({"11111", "10000", "10000", "11110", "10000", "10000", "10000"}),  // f
    rows({"01110", "10001", "10000", "10111", "10001", "10001", "01111"}),  // g
    rows({"10001", "10001", "10001", "11111", "10001", "10001", "10001"}),  // h
    rows({"01110", "00100", "00100", "00100", "00100", "00100", "01110"}),  // i
    rows({"00111", "00010", "00010", "00010", "00010", "10010", "01100"}),  // j
    rows({"10001", "10010", "10100", "11000", "10100", "10010", "10001"}),  // k
    rows({"10000", "10000", "10000", "10000", "10000", "10000", "11111"}),  // l
    rows({"10001", "11011", "10101", "10101", "10001", "10001", "10001"}),  // m
    rows({"10001", "10001", "11001", "10101", "10011", "10001", "10001"}),  // n
    rows({"01110", "10001", "10001", "10001", "10001", "10001", "01110"}),  // o
    rows({"11110", "10001", "10001", "11110", "10000", "10000", "10000"}),  // p
    rows({"01110", "10001", "10001", "10001", "10101", "10010", "01101"}),  // q
    rows({"11110", "10001", "10001", "11110", "10100", "10010", "10001"}),  // r
    rows({"01111", "10000", "10000", "01110", "00001", "00001", "11110"}),  // s
    rows({"11111", "00100", "00100", "00100", "00100", "00100", "00100"}),  // t
    rows({"10001", "10001", "10001", "10001", "10001", "10001", "01110"}),  // u
    rows({"10001", "10001", "10001", "10001", "10001", "01010", "00100"}),  // v
    rows({"10001", "10001", "10001", "10101", "10101", "10101", "01010"}),  // w
    rows({"10001", "10001", "01010", "00100", "01010", "10001", "10001"}),  // x
    rows({"10001", "10001", "01010", "00100", "00100", "00100", "00100"}),  // y
    rows({"11111", "00001", "00010", "00100", "01000", "10000", "11111"}),  // z
};

const Glyph kThree = rows({"11111", "00010", "00100", "00010", "00001", "10001", "01110"});
const Glyph kFour = rows({"00010", "00110", "01010", "10010", "11111", "00010", "00010"});

const std::array<Glyph, 10> kDigits = [] {
  std::array<Glyph, 10> d{};
  d[3] = kThree;
  d[4] = kFour;
  for (const auto& [letter, digit] : kPivotPairs) {
    Glyph g = kLetters[static_cast<std::size_t>(letter - 'a')];
    for (int r = 2; r <= 4; ++r) g[static_cast<std::size_t>(r)] ^= 0b00100;
    d[static_cast<std::size_t>(digit - '0')] = g;
  }
  return d;
}();

const Glyph kBlank{};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t pick(Rng& rng, const std::vector<double>& probs) {
  return std::discrete_distribution<std::size_t>(probs.begin(), probs.end())(rng);
}

// Maps font coordinates (u along the word, v down the glyph rows) to scene
// pixels and back.
struct WordPose {
  double width_units = 0;
  double cx = 0, cy = 0;
  double scale = 2;
  double cos_t = 1, sin_t = 0;
  double shear = 0;
  double bend = 0;

  double bend_at(double u) const {
    const double t = 2.0 * u / width_units - 1.0;
    return bend * t * t;
  }
  // Pixel offset from (cx, cy).
  std::pair<double, double> forward_rel(double u, double v) const {
    const double a = u - width_units / 2;
    const double b = v + bend_at(u) - kGlyphH / 2.0;
    const double xs = a + shear * b;
    return {scale * (cos_t * xs - sin_t * b), scale * (sin_t * xs + cos_t * b)};
  }
  std::pair<double, double> inverse(double px, double py) const {
    const double qx = (px - cx) / scale, qy = (py - cy) / scale;
    const double xs = cos_t * qx + sin_t * qy;
    const double b = -sin_t * qx + cos_t * qy;
    const double a = xs - shear * b;
    const double u = a + width_units / 2;
    return {u, b + kGlyphH / 2.0 - bend_at(u)};
  }
};

struct Extents {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
};

// Bounds of the word outline relative to the pose center, traced along the
// edges so curved words are covered.
Extents outline_extents(const WordPose& pose, double v_lo, double v_hi) {
  Extents e;
  const int steps = 32;
  for (int i = 0; i <= steps; ++i) {
    const double u = pose.width_units * i / steps;
    for (double v : {v_lo, v_hi}) {
      const auto [x, y] = pose.forward_rel(u, v);
      e.x0 = std::min(e.x0, x), e.x1 = std::max(e.x1, x);
      e.y0 = std::min(e.y0, y), e.y1 = std::max(e.y1, y);
    }
  }
  for (double u : {0.0, pose.width_units}) {
    for (int i = 0; i <= steps; ++i) {
      const auto [x, y] = pose.forward_rel(u, v_lo + (v_hi - v_lo) * i / steps);
      e.x0 = std::min(e.x0, x), e.x1 = std::max(e.x1, x);
      e.y0 = std::min(e.y0, y), e.y1 = std::max(e.y1, y);
    }
  }
  return e;
}

struct Occluder {
  bool present = false;
  double u_center = 0, half_width = 0;
  float intensity = 0;
};

bool ink_at(const std::string& word, double u, double v) {
  if (u < 0 || v < 0 || v >= kGlyphH) return false;
  const auto k = static_cast<std::size_t>(u / (kGlyphW + 1));
  if (k >= word.size()) return false;
  const int col = static_cast<int>(u - static_cast<double>(k) * (kGlyphW + 1));
  if (col >= kGlyphW) return false;
  return glyph_pixel(word[k], col, static_cast<int>(v));
}

// Supersampled inverse-mapped rendering of one word (and its occluder)
// into `img` over the pixel rectangle [x0, x1) x [y0, y1).
void render_word(GrayImage& img, const std::string& word, const WordPose& pose, const Occluder& occ, float ink,
                 const GrayImage& background, int x0, int y0, int x1, int y1) {
  constexpr int kSub = 3;
  for (int py = std::max(0, y0); py < std::min<int>(static_cast<int>(img.height), y1); ++py) {
    for (int px = std::max(0, x0); px < std::min<int>(static_cast<int>(img.width), x1); ++px) {
      const float bg = background.at(static_cast<std::size_t>(px), static_cast<std::size_t>(py));
      float acc = 0;
      bool touched = false;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const auto [u, v] = pose.inverse(px + (sx + 0.5) / kSub, py + (sy + 0.5) / kSub);
          float c = bg;
          if (occ.present && std::abs(u - occ.u_center) <= occ.half_width && v >= -0.5 && v <= kGlyphH + 0.5) {
            c = occ.intensity;
            touched = true;
          } else if (ink_at(word, u, v)) {
            c = ink;
            touched = true;
          }
          acc += c;
        }
      }
      if (touched) img.at(static_cast<std::size_t>(px), static_cast<std::size_t>(py)) = acc / (kSub * kSub);
    }
  }
}

geometry::Box clamp_box(geometry::Box b, double size) {
  const double x0 = std::clamp(b.x, 0.0, size), y0 = std::clamp(b.y, 0.0, size);
  const double x1 = std::clamp(b.right(), 0.0, size), y1 = std::clamp(b.bottom(), 0.0, size);
  return {x0, y0, x1 - x0, y1 - y0};
}

void check_probs(const std::vector<double>& p, std::size_t n, const std::string& what) {
  if (p.size() != n) throw ConfigError(what + " must have one entry per tag (" + std::to_string(n) + ")");
  double sum = 0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError(what + " entries must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError(what + " must sum to 1 (got " + std::to_string(sum) + ")");
}

void check_range(double lo, double hi, double min_allowed, double max_allowed, const std::string& what) {
  if (!(lo >= min_allowed && hi <= max_allowed && lo <= hi)) {
    throw ConfigError(what + " must satisfy " + std::to_string(min_allowed) + " <= min <= max <= " + std::to_string(max_allowed));
  }
}

}  // namespace

const std::array<std::uint8_t, kGlyphH>& glyph(char c) {
  const int idx = charset::index_of(c);
  if (idx < 0) return kBlank;
  if (idx < 10) return kDigits[static_cast<std::size_t>(idx)];
  return kLetters[static_cast<std::size_t>(idx - 10)];
}

bool glyph_pixel(char c, int col, int row) {
  if (col < 0 || col >= kGlyphW || row < 0 || row >= kGlyphH) return false;
  return (glyph(c)[static_cast<std::size_t>(row)] >> (kGlyphW - 1 - col)) & 1;
}

char pivot_digit(char letter) {
  const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(letter)));
  for (const auto& [a, d] : kPivotPairs) {
    if (a == l) return d;
  }
  return '\0';
}

int family_pivot(const std::string& family) {
  int pivot = -1;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const char c = family[i];
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (pivot >= 0) throw ConfigError("vocabulary family '" + family + "' has more than one pivot");
      if (!pivot_digit(c)) throw ConfigError("vocabulary family '" + family + "': '" + std::string(1, c) + "' is not a pivot letter");
      pivot = static_cast<int>(i);
    } else if (charset::index_of(c) < 0) {
      throw ConfigError("vocabulary family '" + family + "' contains a character outside the charset");
    }
  }
  if (pivot < 0) throw ConfigError("vocabulary family '" + family + "' has no uppercase pivot letter");
  if (family.size() > charset::kMaxLength) throw ConfigError("vocabulary family '" + family + "' is too long");
  return pivot;
}

std::string family_word(const std::string& family, int word_class) {
  const int p = family_pivot(family);
  std::string w = family;
  const char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(w[static_cast<std::size_t>(p)])));
  w[static_cast<std::size_t>(p)] = word_class == 0 ? pivot_digit(letter) : letter;
  return w;
}

std::vector<std::string> default_vocabulary(std::size_t n_families, std::uint64_t seed) {
  const std::string stem_chars = "acdefhjklmnprsuvwxy34";
  std::string filler;
  for (char c : stem_chars) {
    if (!pivot_digit(c)) filler.push_back(c);
  }
  Rng rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n_families) {
    const auto len = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
    const auto pos = std::uniform_int_distribution<std::size_t>(0, len - 1)(rng);
    std::string f(len, ' ');
    for (std::size_t i = 0; i < len; ++i) {
      f[i] = filler[std::uniform_int_distribution<std::size_t>(0, filler.size() - 1)(rng)];
    }
    const auto& piv = kPivotPairs[std::uniform_int_distribution<std::size_t>(0, kPivotPairs.size() - 1)(rng)];
    f[pos] = static_cast<char>(std::toupper(static_cast<unsigned char>(piv.first)));
    if (seen.insert(f).second) out.push_back(f);
  }
  return out;
}

std::vector<std::string> default_tags() {
  return {
      // numeric
      "clock", "number", "jersey", "scoreboard", "calculator", "price_tag", "license_plate", "speedometer",
      "phone", "keypad", "timer", "calendar", "thermometer", "odometer", "ticket", "house_number",
      // text
      "sign", "stop_sign", "street_sign", "billboard", "banner", "poster", "book", "menu",
      "storefront", "label", "logo", "newspaper", "magazine", "shirt", "flag", "notice_board",
      // distractors
      "person", "tree", "car", "wall", "sky", "building", "road", "window",
      "bus", "bicycle", "dog", "cat", "bench", "grass", "cloud", "door",
      "pole", "fence", "lamp", "chair", "table", "bag", "umbrella", "truck",
      "boat", "bird", "train", "hat", "bottle", "cup", "plant", "shadow",
  };
}

SynthConfig::SynthConfig() {
  const std::size_t n = tags.size();
  for (int c = 0; c < kNumClasses; ++c) {
    auto& p = class_tag_probs[static_cast<std::size_t>(c)];
    p.assign(n, 0.0);
    for (std::size_t i = 0; i < 16; ++i) {
      p[i] = (c == 0 ? 0.85 : 0.05) / 16;
      p[16 + i] = (c == 1 ? 0.85 : 0.05) / 16;
    }
    for (std::size_t i = 32; i < n; ++i) p[i] = 0.10 / 32;
  }
  distractor_tag_probs.assign(n, 0.0);
  for (std::size_t i = 32; i < n; ++i) distractor_tag_probs[i] = 1.0 / 32;
}

void SynthConfig::validate() const {
  if (scene_size < 64 || scene_size > 4096) throw ConfigError("scene_size must be in [64, 4096]");
  if (!(occlusion_rate >= 0 && occlusion_rate <= 1)) throw ConfigError("occlusion_rate must be in [0, 1]");
  if (!(pivot_occlusion_rate >= 0 && pivot_occlusion_rate <= 1)) throw ConfigError("pivot_occlusion_rate must be in [0, 1]");
  if (!(background_object_rate >= 0 && background_object_rate <= 1)) throw ConfigError("background_object_rate must be in [0, 1]");
  if (!(illegible_rate >= 0 && illegible_rate <= 1)) throw ConfigError("illegible_rate must be in [0, 1]");
  check_range(occluder_min_frac, occluder_max_frac, 0.0, 0.4, "occluder width fraction");
  check_range(static_cast<double>(min_words), static_cast<double>(max_words), 1, 3, "words per scene");
  check_range(min_glyph_scale, max_glyph_scale, 0.5, 4.0, "glyph scale");
  check_range(host_margin_min, host_margin_max, 0.0, 32.0, "host margin");
  if (!(max_rotation_deg >= 0 && max_rotation_deg <= 30)) throw ConfigError("max_rotation_deg must be in [0, 30]");
  if (!(max_shear >= 0 && max_shear <= 0.5)) throw ConfigError("max_shear must be in [0, 0.5]");
  if (!(max_curvature >= 0 && max_curvature <= 4)) throw ConfigError("max_curvature must be in [0, 4]");
  if (!(noise_sigma >= 0 && noise_sigma <= 0.5)) throw ConfigError("noise_sigma must be in [0, 0.5]");
  if (n_objects > 12) throw ConfigError("n_objects must be at most 12");
  if (vocabulary.empty()) throw ConfigError("vocabulary must not be empty");
  for (const auto& f : vocabulary) {
    family_pivot(f);
    if (f.size() > 8) throw ConfigError("vocabulary family '" + f + "' is longer than 8 characters");
  }
  if (tags.size() != kTagVocabularySize) throw ConfigError("tag vocabulary must have exactly 64 tags");
  std::set<std::string> unique(tags.begin(), tags.end());
  if (unique.size() != tags.size()) throw ConfigError("tag vocabulary has duplicates");
  for (int c = 0; c < kNumClasses; ++c) {
    check_probs(class_tag_probs[static_cast<std::size_t>(c)], tags.size(), "class_tag_probs[" + std::to_string(c) + "]");
  }
  check_probs(distractor_tag_probs, tags.size(), "distractor_tag_probs");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{
      {"scene_size", c.scene_size},
      {"occlusion_rate", c.occlusion_rate},
      {"pivot_occlusion_rate", c.pivot_occlusion_rate},
      {"occluder_min_frac", c.occluder_min_frac},
      {"occluder_max_frac", c.occluder_max_frac},
      {"n_objects", c.n_objects},
      {"background_object_rate", c.background_object_rate},
      {"min_words", c.min_words},
      {"max_words", c.max_words},
      {"min_glyph_scale", c.min_glyph_scale},
      {"max_glyph_scale", c.max_glyph_scale},
      {"max_rotation_deg", c.max_rotation_deg},
      {"max_shear", c.max_shear},
      {"max_curvature", c.max_curvature},
      {"noise_sigma", c.noise_sigma},
      {"host_margin_min", c.host_margin_min},
      {"host_margin_max", c.host_margin_max},
      {"illegible_rate", c.illegible_rate},
      {"vocabulary", c.vocabulary},
      {"tags", c.tags},
      {"class_tag_probs", c.class_tag_probs},
      {"distractor_tag_probs", c.distractor_tag_probs},
  };
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  if (!j.is_object()) throw ConfigError("synthetic data config must be a JSON object");
  try {
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("scene_size", c.scene_size);
    get("occlusion_rate", c.occlusion_rate);
    get("pivot_occlusion_rate", c.pivot_occlusion_rate);
    get("occluder_min_frac", c.occluder_min_frac);
    get("occluder_max_frac", c.occluder_max_frac);
    get("n_objects", c.n_objects);
    get("background_object_rate", c.background_object_rate);
    get("min_words", c.min_words);
    get("max_words", c.max_words);
    get("min_glyph_scale", c.min_glyph_scale);
    get("max_glyph_scale", c.max_glyph_scale);
    get("max_rotation_deg", c.max_rotation_deg);
    get("max_shear", c.max_shear);
    get("max_curvature", c.max_curvature);
    get("noise_sigma", c.noise_sigma);
    get("host_margin_min", c.host_margin_min);
    get("host_margin_max", c.host_margin_max);
    get("illegible_rate", c.illegible_rate);
    get("vocabulary", c.vocabulary);
    get("tags", c.tags);
    get("class_tag_probs", c.class_tag_probs);
    get("distractor_tag_probs", c.distractor_tag_probs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic data config: ") + e.what());
  }
}

SceneAnnotation generate_synthetic_scene(std::uint64_t seed, const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  const auto S = static_cast<double>(cfg.scene_size);
  SceneAnnotation scene;

  // Background: flat base with a faint linear gradient.
  const bool dark_text = uniform(rng, 0, 1) < 0.5;
  const double base = dark_text ? uniform(rng, 0.6, 0.9) : uniform(rng, 0.1, 0.4);
  const double gx = uniform(rng, -0.1, 0.1), gy = uniform(rng, -0.1, 0.1);
  GrayImage background(cfg.scene_size, cfg.scene_size);
  for (std::size_t y = 0; y < cfg.scene_size; ++y) {
    for (std::size_t x = 0; x < cfg.scene_size; ++x) {
      background.at(x, y) = static_cast<float>(base + gx * (x / S - 0.5) + gy * (y / S - 0.5));
    }
  }
  GrayImage img = background;

  const auto n_words = std::uniform_int_distribution<std::size_t>(cfg.min_words, cfg.max_words)(rng);
  const double band = S / static_cast<double>(n_words);
  std::vector<geometry::DetectedObject> objects;

  for (std::size_t wi = 0; wi < n_words; ++wi) {
    const int word_class = std::uniform_int_distribution<int>(0, kNumClasses - 1)(rng);
    const auto& family = cfg.vocabulary[std::uniform_int_distribution<std::size_t>(0, cfg.vocabulary.size() - 1)(rng)];
    const std::string word = family_word(family, word_class);
    const auto pivot = static_cast<std::size_t>(family_pivot(family));

    WordPose pose;
    pose.width_units = static_cast<double>(word.size() * (kGlyphW + 1) - 1);
    pose.scale = uniform(rng, cfg.min_glyph_scale, cfg.max_glyph_scale);
    const double theta = uniform(rng, -cfg.max_rotation_deg, cfg.max_rotation_deg) * std::numbers::pi / 180.0;
    pose.cos_t = std::cos(theta);
    pose.sin_t = std::sin(theta);
    pose.shear = uniform(rng, -cfg.max_shear, cfg.max_shear);
    pose.bend = cfg.max_curvature > 0 ? uniform(rng, -cfg.max_curvature, cfg.max_curvature) : 0.0;

    // Shrink until the word fits its band and the scene width.
    Extents ext = outline_extents(pose, 0, kGlyphH);
    while ((ext.x1 - ext.x0 > S - 4 || ext.y1 - ext.y0 > band - 2) && pose.scale > 0.5) {
      pose.scale *= 0.9;
      ext = outline_extents(pose, 0, kGlyphH);
    }
    const double band_top = band * static_cast<double>(wi);
    const double cx_lo = 2 - ext.x0, cx_hi = S - 2 - ext.x1;
    const double cy_lo = band_top + 1 - ext.y0, cy_hi = band_top + band - 1 - ext.y1;
    pose.cx = cx_hi > cx_lo ? uniform(rng, cx_lo, cx_hi) : (cx_lo + cx_hi) / 2;
    pose.cy = cy_hi > cy_lo ? uniform(rng, cy_lo, cy_hi) : (cy_lo + cy_hi) / 2;

    Occluder occ;
    if (uniform(rng, 0, 1) < cfg.occlusion_rate) {
      occ.present = true;
      const bool on_pivot = uniform(rng, 0, 1) < cfg.pivot_occlusion_rate;
      const std::size_t target = on_pivot ? pivot : std::uniform_int_distribution<std::size_t>(0, word.size() - 1)(rng);
      const double frac = uniform(rng, cfg.occluder_min_frac, cfg.occluder_max_frac);
      occ.half_width = frac * kGlyphW / 2;
      // Pivot occluders stay centered enough to hide the middle column.
      const double jitter = on_pivot ? 0.05 * kGlyphW : 0.25 * kGlyphW;
      occ.u_center = static_cast<double>(target) * (kGlyphW + 1) + kGlyphW / 2.0 + uniform(rng, -jitter, jitter);
      occ.intensity = static_cast<float>(uniform(rng, 0, 1));
    }
    const float ink = static_cast<float>(dark_text ? uniform(rng, 0.0, base - 0.35) : uniform(rng, base + 0.35, 1.0));
    render_word(img, word, pose, occ, ink, background, static_cast<int>(std::floor(pose.cx + ext.x0)) - 1,
                static_cast<int>(std::floor(pose.cy + ext.y0)) - 1, static_cast<int>(std::ceil(pose.cx + ext.x1)) + 1,
                static_cast<int>(std::ceil(pose.cy + ext.y1)) + 1);

    SceneText t;
    t.instance.box = clamp_box({pose.cx + ext.x0, pose.cy + ext.y0, ext.x1 - ext.x0, ext.y1 - ext.y0}, S);
    // The outline is a parallelogram (bend preserves area), so its area is
    // |det| of the pose times the font rectangle.
    const double quad_area = pose.scale * pose.scale * pose.width_units * kGlyphH;
    t.instance.mask_area = geometry::clamp_mask_area(quad_area, t.instance.box);
    t.instance.transcription = word;
    t.instance.legible = !(cfg.illegible_rate > 0 && uniform(rng, 0, 1) < cfg.illegible_rate);
    t.occluded = occ.present;
    t.word_class = word_class;

    const geometry::Box& tb = t.instance.box;
    const double ml = uniform(rng, cfg.host_margin_min, cfg.host_margin_max);
    const double mt = uniform(rng, cfg.host_margin_min, cfg.host_margin_max);
    const double mr = uniform(rng, cfg.host_margin_min, cfg.host_margin_max);
    const double mb = uniform(rng, cfg.host_margin_min, cfg.host_margin_max);
    geometry::DetectedObject host;
    host.box = clamp_box({tb.x - ml, tb.y - mt, tb.w + ml + mr, tb.h + mt + mb}, S);
    host.tag = cfg.tags[pick(rng, cfg.class_tag_probs[static_cast<std::size_t>(word_class)])];
    host.detection_score = uniform(rng, 0.5, 1.0);
    objects.push_back(std::move(host));
    scene.texts.push_back(std::move(t));
  }

  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    geometry::DetectedObject o;
    const double w = uniform(rng, 12, S / 2), h = uniform(rng, 12, S / 2);
    o.box = {uniform(rng, 0, S - w), uniform(rng, 0, S - h), w, h};
    o.tag = cfg.tags[pick(rng, cfg.distractor_tag_probs)];
    o.detection_score = uniform(rng, 0.3, 1.0);
    objects.push_back(std::move(o));
  }
  if (uniform(rng, 0, 1) < cfg.background_object_rate) {
    geometry::DetectedObject o;
    const double x0 = uniform(rng, 0, 2), y0 = uniform(rng, 0, 2);
    o.box = {x0, y0, S - x0 - uniform(rng, 0, 2), S - y0 - uniform(rng, 0, 2)};
    o.tag = cfg.tags[pick(rng, cfg.distractor_tag_probs)];
    o.detection_score = uniform(rng, 0.3, 1.0);
    objects.push_back(std::move(o));
  }
  std::shuffle(objects.begin(), objects.end(), rng);
  scene.objects = std::move(objects);

  if (cfg.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (auto& p : img.pixels) p = static_cast<float>(std::clamp(p + noise(rng), 0.0, 1.0));
  }
  quantize8(img);
  scene.image = std::move(img);
  return scene;
}

std::vector<SceneAnnotation> generate_dataset(std::uint64_t seed, std::size_t count, const SynthConfig& cfg,
                                              const std::string& prefix) {
  cfg.validate();
  std::vector<SceneAnnotation> out;
  out.reserve(count);
  const int digits = std::max<int>(5, static_cast<int>(std::to_string(count).size()));
  for (std::size_t i = 0; i < count; ++i) {
    auto scene = generate_synthetic_scene(splitmix64(seed * 0x100000001B3ull + i), cfg);
    std::string idx = std::to_string(i);
    scene.image_id = prefix + std::string(static_cast<std::size_t>(std::max(0, digits - static_cast<int>(idx.size()))), '0') + idx;
    out.push_back(std::move(scene));
  }
  return out;
}

CurvedWord render_curved_word(const std::string& word, double bend, std::size_t k_fiducials) {
  if (word.empty() || word.size() > 7) throw InputError("curved word must have 1..7 characters");
  if (k_fiducials < 4 || k_fiducials % 2) throw InputError("fiducial count must be even and at least 4");
  constexpr double W = kCropWidth, H = kCropHeight;
  CurvedWord out;
  out.curvature = bend;
  out.crop = GrayImage(kCropWidth, kCropHeight, 0.0f);
  const double scale = 2.0;
  const double width_px = scale * static_cast<double>(word.size() * (kGlyphW + 1) - 1);
  const double left = (W - width_px) / 2;
  const double top = H / 2 - scale * kGlyphH / 2.0;
  // Vertical displacement in pixels at pixel column x.
  const auto offset = [&](double x) {
    const double xn = 2 * x / (W - 1) - 1;
    return bend * (H - 1) / 2 * xn * xn;
  };
  constexpr int kSub = 3;
  for (std::size_t py = 0; py < kCropHeight; ++py) {
    for (std::size_t px = 0; px < kCropWidth; ++px) {
      float acc = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double x = px + (sx + 0.5) / kSub, y = py + (sy + 0.5) / kSub;
          const double u = (x - left) / scale, v = (y - offset(x - 0.5) - top) / scale;
          if (ink_at(word, u, v)) acc += 1.0f;
        }
      }
      out.crop.at(px, py) = acc / (kSub * kSub);
    }
  }
  const std::size_t half = k_fiducials / 2;
  for (std::size_t i = 0; i < k_fiducials; ++i) {
    const double x = -0.9 + 1.8 * static_cast<double>(i % half) / static_cast<double>(half - 1);
    const double y = i < half ? -0.9 : 0.9;
    out.src_x.push_back(x);
    out.src_y.push_back(y + bend * x * x);
  }
  return out;
}

double baseline_curvature(const GrayImage& crop) {
  // Ink centroids over 8-pixel column bins, which smooths out glyph shape.
  constexpr std::size_t kBin = 8;
  std::vector<double> xs, ys;
  for (std::size_t x0 = 0; x0 < crop.width; x0 += kBin) {
    double mass = 0, mx = 0, my = 0;
    for (std::size_t x = x0; x < std::min(crop.width, x0 + kBin); ++x) {
      for (std::size_t y = 0; y < crop.height; ++y) {
        const double m = crop.at(x, y);
        mass += m;
        mx += m * static_cast<double>(x);
        my += m * static_cast<double>(y);
      }
    }
    if (mass > 2.0) {
      xs.push_back(mx / mass);
      ys.push_back(my / mass);
    }
  }
  if (xs.size() < 2) return 0;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0;
  double dev = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) dev += std::abs(ys[i] - (my + slope * (xs[i] - mx)));
  return dev / n;
}

}  // namespace sstr::synth
