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

#include <algorithm>
#include <cmath>

namespace sstr::geometry {

bool Box::valid() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0 && h > 0; }

double clamp_mask_area(double mask_area, const Box& box) {
  const double full = box.area();
  if (!(mask_area > 0) || !std::isfinite(mask_area)) return full;
  return std::min(mask_area, full);
}

Box scale_box(const TextInstance& text) {
  const Box& b = text.box;
  const double s = clamp_mask_area(text.mask_area, b) / b.area();
  return Box{b.x + (1 - s) * b.w / 2, b.y + (1 - s) * b.h / 2, s * b.w, s * b.h};
}

bool encompasses(const Box& outer, const Box& inner) {
  return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() && inner.bottom() <= outer.bottom();
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<DetectedObject> assign_overlap(const TextInstance& text, const std::vector<DetectedObject>& objects) {
  const Box scaled = scale_box(text);
  std::vector<DetectedObject> out;
  for (const auto& o : objects) {
    if (encompasses(o.box, scaled)) out.push_back(o);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DetectedObject& a, const DetectedObject& b) { return a.box.area() < b.box.area(); });
  return out;
}

std::vector<WeightedObject> assign_scene(const TextInstance& text, const std::vector<DetectedObject>& objects) {
  std::vector<WeightedObject> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back({o, std::max(iou(o.box, text.box), kMinSceneWeight)});
  std::stable_sort(out.begin(), out.end(), [](const WeightedObject& a, const WeightedObject& b) { return a.weight > b.weight; });
  return out;
}

}  // namespace sstr::geometry
