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

// Scene annotations (COCOText-style JSON), and the per-instance training
// samples cut out of them.

#include <string>
#include <vector>

#include "sstr/geometry.hpp"
#include "sstr/image.hpp"

namespace sstr {

inline constexpr std::size_t kCropWidth = 100;
inline constexpr std::size_t kCropHeight = 32;

struct SceneText {
  geometry::TextInstance instance;
  bool occluded = false;  // generator ground truth; false for ingested data
  int word_class = -1;    // generator ground truth; -1 when unknown
};

struct SceneAnnotation {
  std::string image_id;
  std::string image_path;  // relative to the annotation file
  GrayImage image;
  std::vector<SceneText> texts;
  std::vector<geometry::DetectedObject> objects;
};

struct LoadReport {
  std::vector<SceneAnnotation> scenes;
  std::size_t skipped = 0;  // malformed scene or instance records
  std::vector<std::string> warnings;
};

// Parses the annotation JSON and loads every referenced image. Boxes are
// clamped to image bounds and mask areas to (0, box area].
LoadReport load_annotations(const std::string& path);

// Writes the JSON plus one PGM per scene (under images/ next to the file)
// and rewrites each scene's image_path accordingly.
void save_annotations(const std::string& path, std::vector<SceneAnnotation>& scenes);

enum class AssignmentMode { kOverlap, kScene, kNone };

AssignmentMode parse_assignment_mode(const std::string& name);
std::string to_string(AssignmentMode mode);

struct TagWeight {
  std::string tag;
  double weight = 1.0;

  friend bool operator==(const TagWeight&, const TagWeight&) = default;
};

struct Sample {
  std::string id;         // "<image_id>/<instance index>"
  std::string scene_ref;  // image_id
  GrayImage image;        // kCropWidth x kCropHeight
  std::string text;       // normalized transcription
  std::vector<int> target;  // tokens ending in EOS
  std::vector<TagWeight> tags;  // relevance-ordered
  bool occluded = false;
  int word_class = -1;
};

// Integer pixel rectangle covering `box`, clamped to the image. Width or
// height is zero when the box misses the image.
struct PixelRect {
  std::size_t x0 = 0, y0 = 0, w = 0, h = 0;
};
PixelRect crop_rect(const geometry::Box& box, std::size_t image_w, std::size_t image_h);

// One sample per legible instance with a nonempty in-charset transcription
// of at most 25 characters. Degenerate crops are skipped with a warning.
std::vector<Sample> crop_samples(const SceneAnnotation& scene, AssignmentMode mode,
                                 std::vector<std::string>* warnings = nullptr);

std::vector<Sample> crop_all(const std::vector<SceneAnnotation>& scenes, AssignmentMode mode,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace sstr
