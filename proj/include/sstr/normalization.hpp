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

// Spatial normalization of text crops: a small localization network
// predicts fiducial points, and a thin-plate spline through them defines
// the sampling grid that rectifies the crop.

#include <string>
#include <vector>

#include "sstr/nn.hpp"

namespace sstr {

enum class NormalizationMode { kIdentity, kAffine, kTps };

NormalizationMode parse_normalization_mode(const std::string& name);
std::string to_string(NormalizationMode mode);

inline constexpr std::size_t kDefaultFiducials = 20;
inline constexpr double kTpsRidge = 1e-6;

struct Point2 {
  double x = 0, y = 0;
};

// K/2 points evenly spaced along the top edge (y = -0.9) followed by K/2
// along the bottom edge (y = 0.9), x in [-0.9, 0.9].
std::vector<Point2> canonical_fiducials(std::size_t k = kDefaultFiducials);

// Precomputed TPS mapping for fixed target points and output size. The
// sampling grid is linear in the source points: grid = M * src.
class TpsGrid {
 public:
  TpsGrid() = default;
  // Throws NumericalError when the system for `dst` is singular.
  TpsGrid(const std::vector<Point2>& dst, std::size_t out_h, std::size_t out_w);

  // src [B,K,2] -> grid [B,out_h,out_w,2]. With affine_only, only the
  // affine part of the spline is used.
  Tensor operator()(const Tensor& src, bool affine_only = false) const;

  // Source position for one point in the output's normalized coordinates,
  // evaluated in double precision.
  Point2 map(const std::vector<Point2>& src, Point2 p, bool affine_only = false) const;

  std::size_t fiducials() const { return dst_.size(); }
  std::size_t out_h() const { return out_h_; }
  std::size_t out_w() const { return out_w_; }

 private:
  std::vector<Point2> dst_;
  std::size_t out_h_ = 0, out_w_ = 0;
  std::vector<double> inv_;  // (K+3) x K block of the inverted system
  Tensor full_;              // [HW, K]
  Tensor affine_;            // [HW, K]
};

// One-off grid for a single source/target pair: [1,out_h,out_w,2].
Tensor tps_grid(const std::vector<Point2>& src, const std::vector<Point2>& dst, std::size_t out_h, std::size_t out_w,
                bool affine_only = false);

// Corner-aligned identity grid [1,h,w,2].
Tensor identity_grid(std::size_t h, std::size_t w);

// conv/pool stack + two linear layers -> K points in (-1,1)^2. The last
// layer starts at zero weight with a bias that reproduces the canonical
// fiducials exactly through the tanh.
class Localizer {
 public:
  Localizer() = default;
  Localizer(std::size_t k, std::size_t in_h, std::size_t in_w, Rng& rng);

  Tensor operator()(const Tensor& images) const;  // [B,1,H,W] -> [B,K,2]
  void collect(ParamList& out, std::string_view prefix) const;

  Conv2d conv1, conv2, conv3;
  Linear fc1, fc2;
  std::size_t k = 0, in_h = 0, in_w = 0;
};

class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(NormalizationMode mode, std::size_t h, std::size_t w, Rng& rng, std::size_t k = kDefaultFiducials);

  // [B,1,H,W] -> [B,1,H,W]. Identity mode returns its input.
  Tensor operator()(const Tensor& images) const;
  Tensor fiducials(const Tensor& images) const;  // localizer output
  void collect(ParamList& out, std::string_view prefix) const;

  NormalizationMode mode() const { return mode_; }
  Localizer localizer;
  TpsGrid grid;

 private:
  NormalizationMode mode_ = NormalizationMode::kIdentity;
  std::size_t h_ = 0, w_ = 0;
};

}  // namespace sstr
