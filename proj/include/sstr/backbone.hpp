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

// Convolutional feature extractor: image [B,1,H,W] -> column features
// [B,L,D], one D-vector per horizontal slice of the image.

#include <string>
#include <vector>

#include <json.hpp>

#include "sstr/nn.hpp"

namespace sstr {

inline constexpr std::size_t kSeqLen = 26;

// Pooling applied after a conv3x3 + ReLU block:
//   "2x2"    kernel 2x2, stride 2x2
//   "2x2s21" kernel 2x2, stride 2x1, width padding 1
//   "2x1"    kernel 2x1, stride 2x1
//   "none"
struct BackboneBlock {
  std::size_t channels = 0;  // 0 means "feature_dim" (last block only)
  std::string pool = "none";
};

std::vector<BackboneBlock> default_depth_plan();
Pool2dParams pool_params(const std::string& pool);  // throws ConfigError

void to_json(nlohmann::json& j, const BackboneBlock& b);
void from_json(const nlohmann::json& j, BackboneBlock& b);

struct BackboneConfig {
  std::vector<BackboneBlock> depth_plan = default_depth_plan();
  std::size_t feature_dim = 64;
  std::size_t in_h = 32, in_w = 100;
  std::size_t seq_len = kSeqLen;
};

class Backbone {
 public:
  Backbone() = default;
  // Throws ConfigError when the plan does not reduce in_h x in_w to
  // 1 x seq_len with feature_dim output channels.
  Backbone(const BackboneConfig& cfg, Rng& rng);

  Tensor operator()(const Tensor& images) const;  // [B,1,H,W] -> [B,L,D]
  void collect(ParamList& out, std::string_view prefix) const;

  const BackboneConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return cfg_.feature_dim; }

  std::vector<Conv2d> convs;
  std::vector<Pool2dParams> pools;
  std::vector<bool> pooled;

 private:
  BackboneConfig cfg_;
};

}  // namespace sstr
