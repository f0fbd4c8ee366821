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

#include "sstr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "sstr/errors.hpp"

namespace sstr {

void write_pgm(const std::string& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path);
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError(path + ": not a PGM file");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(pnm_token(in));
    h = std::stoul(pnm_token(in));
    maxval = std::stoul(pnm_token(in));
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError(path + ": bad PGM dimensions");
  GrayImage img(w, h);
  const auto maxf = static_cast<float>(maxval);
  if (magic == "P2") {
    for (auto& p : img.pixels) {
      const std::string tok = pnm_token(in);
      if (tok.empty()) throw FormatError(path + ": truncated PGM data");
      p = static_cast<float>(std::stoul(tok)) / maxf;
    }
    return img;
  }
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(w * h * bpp);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError(path + ": truncated PGM data");
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bpp == 1 ? bytes[i] : (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
    img.pixels[i] = static_cast<float>(v) / maxf;
  }
  return img;
}

GrayImage read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw IoError("cannot open image " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": invalid PNG data");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  const std::size_t channels = rowbytes / w;
  GrayImage img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) img.at(x, y) = static_cast<float>(buf[y * rowbytes + x * channels]) / 255.0f;
  }
  return img;
}

GrayImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  in.close();
  if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
  return read_pgm(path);
}

void quantize8(GrayImage& image) {
  for (auto& p : image.pixels) p = static_cast<float>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)) / 255.0f;
}

GrayImage crop(const GrayImage& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || x0 + w > image.width || y0 + h > image.height) {
    throw DimensionError("crop rectangle outside the image");
  }
  GrayImage out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(image.pixels.begin() + static_cast<std::ptrdiff_t>((y0 + y) * image.width + x0), w,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, std::size_t w, std::size_t h) {
  GrayImage out(w, h);
  const double sx = static_cast<double>(image.width) / static_cast<double>(w);
  const double sy = static_cast<double>(image.height) / static_cast<double>(h);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double ay = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double ax = fx - static_cast<double>(x0);
      const double v = (1 - ay) * ((1 - ax) * image.at(x0, y0) + ax * image.at(x1, y0)) +
                       ay * ((1 - ax) * image.at(x0, y1) + ax * image.at(x1, y1));
      out.at(x, y) = static_cast<float>(v);
    }
  }
  return out;
}

GrayImage resize_keep_aspect(const GrayImage& image, std::size_t w, std::size_t h) {
  const double scale = std::min(static_cast<double>(w) / static_cast<double>(image.width),
                                static_cast<double>(h) / static_cast<double>(image.height));
  const auto rw = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(image.width * scale)), 1, w);
  const auto rh = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(image.height * scale)), 1, h);
  const GrayImage scaled = resize_bilinear(image, rw, rh);
  GrayImage out(w, h);
  const std::size_t top = (h - rh) / 2;
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = std::min(y < top ? 0 : y - top, rh - 1);
    for (std::size_t x = 0; x < w; ++x) out.at(x, y) = scaled.at(std::min(x, rw - 1), sy);
  }
  return out;
}

}  // namespace sstr
