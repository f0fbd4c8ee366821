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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"

namespace sstr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

geometry::Box parse_box(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("bbox must be [x, y, w, h]");
  geometry::Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw FormatError("bbox has non-finite coordinates");
  }
  return b;
}

// Intersects with the image; returns false when nothing is left.
bool clamp_to_image(geometry::Box& b, std::size_t w, std::size_t h) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(w));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(h));
  const double x1 = std::clamp(b.x + b.w, 0.0, static_cast<double>(w));
  const double y1 = std::clamp(b.y + b.h, 0.0, static_cast<double>(h));
  b = geometry::Box{x0, y0, x1 - x0, y1 - y0};
  return b.w > 0 && b.h > 0;
}

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw FormatError("image_id must be a string or integer");
}

json box_json(const geometry::Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

}  // namespace

LoadReport load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read annotation file " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
  if (!root.is_array()) throw FormatError(path + ": top level must be a list of scenes");
  const fs::path base = fs::path(path).parent_path();

  LoadReport report;
  for (std::size_t si = 0; si < root.size(); ++si) {
    const json& rec = root[si];
    SceneAnnotation scene;
    try {
      scene.image_id = id_string(rec.at("image_id"));
      scene.image_path = rec.at("image_path").get<std::string>();
      fs::path img = scene.image_path;
      if (img.is_relative()) img = base / img;
      scene.image = read_image(img.string());
    } catch (const std::exception& e) {
      ++report.skipped;
      report.warnings.push_back("scene record " + std::to_string(si) + " skipped: " + e.what());
      continue;
    }
    const std::size_t w = scene.image.width, h = scene.image.height;
    if (rec.contains("instances")) {
      for (const json& ir : rec["instances"]) {
        try {
          SceneText t;
          t.instance.box = parse_box(ir.at("bbox"));
          const double raw_area = t.instance.box.area();
          if (!clamp_to_image(t.instance.box, w, h)) throw FormatError("text box outside the image");
          // A mask area recorded against the unclamped box is rescaled to the
          // surviving part; a missing area means the mask fills the box.
          double mask = ir.contains("mask_area") && !ir["mask_area"].is_null() ? ir["mask_area"].get<double>() : raw_area;
          if (raw_area > 0 && raw_area != t.instance.box.area()) mask *= t.instance.box.area() / raw_area;
          t.instance.mask_area = geometry::clamp_mask_area(mask, t.instance.box);
          t.instance.transcription = ir.at("utf8_string").get<std::string>();
          t.instance.legible = ir.value("legible", true);
          t.occluded = ir.value("occluded", false);
          t.word_class = ir.value("word_class", -1);
          scene.texts.push_back(std::move(t));
        } catch (const std::exception& e) {
          ++report.skipped;
          report.warnings.push_back("scene " + scene.image_id + ": instance skipped: " + e.what());
        }
      }
    }
    if (rec.contains("objects")) {
      for (const json& orr : rec["objects"]) {
        try {
          geometry::DetectedObject o;
          o.box = parse_box(orr.at("bbox"));
          if (!clamp_to_image(o.box, w, h)) throw FormatError("object box outside the image");
          o.tag = orr.at("tag").get<std::string>();
          std::transform(o.tag.begin(), o.tag.end(), o.tag.begin(), [](unsigned char c) { return std::tolower(c); });
          if (o.tag.empty()) throw FormatError("empty object tag");
          o.detection_score = orr.value("score", 1.0);
          scene.objects.push_back(std::move(o));
        } catch (const std::exception& e) {
          ++report.skipped;
          report.warnings.push_back("scene " + scene.image_id + ": object skipped: " + e.what());
        }
      }
    }
    report.scenes.push_back(std::move(scene));
  }
  if (!root.empty() && report.scenes.empty()) {
    throw FormatError(path + ": every scene record violates the schema (" + std::to_string(report.skipped) + " skipped)");
  }
  return report;
}

void save_annotations(const std::string& path, std::vector<SceneAnnotation>& scenes) {
  const fs::path base = fs::path(path).parent_path();
  if (!base.empty()) fs::create_directories(base);
  bool made_image_dir = false;
  json root = json::array();
  for (auto& s : scenes) {
    if (!s.image.empty()) {
      if (!made_image_dir) {
        fs::create_directories(base / "images");
        made_image_dir = true;
      }
      s.image_path = "images/" + s.image_id + ".pgm";
      write_pgm((base / s.image_path).string(), s.image);
    }
    json rec;
    rec["image_id"] = s.image_id;
    rec["image_path"] = s.image_path;
    rec["instances"] = json::array();
    for (const auto& t : s.texts) {
      json ir;
      ir["bbox"] = box_json(t.instance.box);
      ir["mask_area"] = t.instance.mask_area;
      ir["utf8_string"] = t.instance.transcription;
      ir["legible"] = t.instance.legible;
      if (t.occluded) ir["occluded"] = true;
      if (t.word_class >= 0) ir["word_class"] = t.word_class;
      rec["instances"].push_back(std::move(ir));
    }
    rec["objects"] = json::array();
    for (const auto& o : s.objects) {
      rec["objects"].push_back({{"bbox", box_json(o.box)}, {"tag", o.tag}, {"score", o.detection_score}});
    }
    root.push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write annotation file " + path);
  out << root.dump(1) << '\n';
}

AssignmentMode parse_assignment_mode(const std::string& name) {
  if (name == "overlap") return AssignmentMode::kOverlap;
  if (name == "scene") return AssignmentMode::kScene;
  if (name == "none") return AssignmentMode::kNone;
  throw ConfigError("unknown semantics mode '" + name + "' (expected overlap, scene or none)");
}

std::string to_string(AssignmentMode mode) {
  switch (mode) {
    case AssignmentMode::kOverlap: return "overlap";
    case AssignmentMode::kScene: return "scene";
    case AssignmentMode::kNone: return "none";
  }
  return "none";
}

PixelRect crop_rect(const geometry::Box& box, std::size_t image_w, std::size_t image_h) {
  const auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  const std::size_t x0 = clampi(std::floor(box.x), image_w), y0 = clampi(std::floor(box.y), image_h);
  const std::size_t x1 = clampi(std::ceil(box.x + box.w), image_w), y1 = clampi(std::ceil(box.y + box.h), image_h);
  return PixelRect{x0, y0, x1 > x0 ? x1 - x0 : 0, y1 > y0 ? y1 - y0 : 0};
}

std::vector<Sample> crop_samples(const SceneAnnotation& scene, AssignmentMode mode, std::vector<std::string>* warnings) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < scene.texts.size(); ++i) {
    const SceneText& t = scene.texts[i];
    if (!t.instance.legible) continue;
    const std::string text = charset::normalize(t.instance.transcription);
    if (text.empty() || text.size() > charset::kMaxLength) continue;
    const PixelRect r = crop_rect(t.instance.box, scene.image.width, scene.image.height);
    if (r.w == 0 || r.h == 0) {
      if (warnings) warnings->push_back("scene " + scene.image_id + ": instance " + std::to_string(i) + " has a degenerate crop");
      continue;
    }
    Sample s;
    s.id = scene.image_id + "/" + std::to_string(i);
    s.scene_ref = scene.image_id;
    s.image = resize_keep_aspect(crop(scene.image, r.x0, r.y0, r.w, r.h), kCropWidth, kCropHeight);
    s.text = text;
    s.target = charset::encode(text);
    s.occluded = t.occluded;
    s.word_class = t.word_class;
    switch (mode) {
      case AssignmentMode::kOverlap:
        for (const auto& o : geometry::assign_overlap(t.instance, scene.objects)) s.tags.push_back({o.tag, 1.0});
        break;
      case AssignmentMode::kScene:
        for (const auto& wo : geometry::assign_scene(t.instance, scene.objects)) s.tags.push_back({wo.object.tag, wo.weight});
        break;
      case AssignmentMode::kNone:
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> crop_all(const std::vector<SceneAnnotation>& scenes, AssignmentMode mode, std::vector<std::string>* warnings) {
  std::vector<Sample> out;
  for (const auto& s : scenes) {
    auto part = crop_samples(s, mode, warnings);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace sstr
