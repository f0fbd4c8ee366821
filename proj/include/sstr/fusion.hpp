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

// Visual/semantic fusion. For every visual column v_i and object row s_j an
// MLP scores the pair; a softmax over j turns the scores into weights, and
// the weighted sum of projected object rows is added back onto v_i:
//
//   a_ij = softmax_j(MLP([v_i; s_j]))
//   f_i  = v_i + W_out * sum_j a_ij * W_val * s_j
//
// Both projections are bias-free, so an all-zero S leaves V untouched.

#include <string>

#include "sstr/nn.hpp"

namespace sstr {

enum class FusionPlacement { kNone, kPreEncoder, kPreDecoder, kPostDecoder, kClsToken, kPreMemory };

FusionPlacement parse_fusion_placement(const std::string& name);
std::string to_string(FusionPlacement placement);

// Placements that run FusionNet (as opposed to cls_token/pre_memory, which
// use their own modules).
bool uses_fusion_net(FusionPlacement placement);

inline constexpr std::size_t kDefaultFusionHidden = 64;

class FusionNet {
 public:
  FusionNet() = default;
  FusionNet(std::size_t d, std::size_t e, std::size_t hidden, Rng& rng);

  // V [B,L,D], S [B,M,E] -> weights [B,L,M], rows summing to 1.
  Tensor relevancy(const Tensor& v, const Tensor& s) const;
  // -> F [B,L,D]. If `alpha` is given it receives the relevancy weights.
  Tensor fuse(const Tensor& v, const Tensor& s, Tensor* alpha = nullptr) const;

  void collect(ParamList& out, std::string_view prefix) const;

  std::size_t d() const { return d_; }
  std::size_t e() const { return e_; }
  std::size_t hidden() const { return hidden_; }

  Tensor mlp_weight;  // [D+E, H]; rows [0,D) act on v, rows [D,D+E) on s
  Tensor mlp_bias;    // [H]
  Linear score;       // H -> 1
  Linear value;       // E -> D, no bias
  Linear out;         // D -> D, no bias

 private:
  void check(const Tensor& v, const Tensor& s) const;
  std::size_t d_ = 0, e_ = 0, hidden_ = 0;
};

}  // namespace sstr
