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

// Bounding-box arithmetic used to attach scene objects to text instances.
// Boxes are axis-aligned, [x, y, w, h] with (x, y) the top-left corner.

#include <string>
#include <vector>

namespace sstr::geometry {

struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

struct TextInstance {
  Box box;
  double mask_area = 0;  // clamped to (0, box.area()] on ingestion
  std::string transcription;
  bool legible = true;
};

struct DetectedObject {
  Box box;
  std::string tag;
  double detection_score = 1.0;
};

struct WeightedObject {
  DetectedObject object;
  double weight = 1.0;
};

// Floor applied to scene-mode IoU weights.
inline constexpr double kMinSceneWeight = 0.1;

// Clamps mask_area into (0, box.area()]; non-positive or missing areas fall
// back to the full box area.
double clamp_mask_area(double mask_area, const Box& box);

// Shrinks the text box about its center by s = mask_area / box_area.
Box scale_box(const TextInstance& text);

// True iff all four corners of `inner` lie inside `outer` or on its border.
bool encompasses(const Box& outer, const Box& inner);

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

// Objects that encompass the scaled text box, smallest box area first.
std::vector<DetectedObject> assign_overlap(const TextInstance& text, const std::vector<DetectedObject>& objects);

// Every object with weight max(iou, 0.1), heaviest first.
std::vector<WeightedObject> assign_scene(const TextInstance& text, const std::vector<DetectedObject>& objects);

}  // namespace sstr::geometry
