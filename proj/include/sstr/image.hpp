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

#include <cstddef>
#include <string>
#include <vector>

namespace sstr {

// Grayscale image with intensities in [0, 1], row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}

  bool empty() const { return pixels.empty(); }
  float& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// 8-bit binary PGM (P5). Reading also accepts ASCII P2.
void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

// PNG of any color type, converted to gray.
GrayImage read_png(const std::string& path);

// Dispatches on file signature.
GrayImage read_image(const std::string& path);

// Quantizes to the 8-bit grid PGM stores, so in-memory scenes match what a
// save/load round trip produces.
void quantize8(GrayImage& image);

// Pixel rectangle [x0, x0+w) x [y0, y0+h); must lie inside the image.
GrayImage crop(const GrayImage& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);

// Bilinear resize with pixel-center alignment.
GrayImage resize_bilinear(const GrayImage& image, std::size_t w, std::size_t h);

// Aspect-preserving resize into w x h: scaled to fit, placed at the left and
// vertically centered, remaining area filled by replicating the edge pixels.
GrayImage resize_keep_aspect(const GrayImage& image, std::size_t w, std::size_t h);

}  // namespace sstr
