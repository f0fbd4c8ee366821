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

#include "sstr/fusion.hpp"

#include <cmath>

#include "sstr/errors.hpp"

namespace sstr {

FusionPlacement parse_fusion_placement(const std::string& name) {
  if (name == "none") return FusionPlacement::kNone;
  if (name == "pre_encoder") return FusionPlacement::kPreEncoder;
  if (name == "pre_decoder") return FusionPlacement::kPreDecoder;
  if (name == "post_decoder") return FusionPlacement::kPostDecoder;
  if (name == "cls_token") return FusionPlacement::kClsToken;
  if (name == "pre_memory") return FusionPlacement::kPreMemory;
  throw ConfigError("unknown fusion.placement '" + name +
                    "' (expected none, pre_encoder, pre_decoder, post_decoder, cls_token or pre_memory)");
}

std::string to_string(FusionPlacement placement) {
  switch (placement) {
    case FusionPlacement::kNone: return "none";
    case FusionPlacement::kPreEncoder: return "pre_encoder";
    case FusionPlacement::kPreDecoder: return "pre_decoder";
    case FusionPlacement::kPostDecoder: return "post_decoder";
    case FusionPlacement::kClsToken: return "cls_token";
    case FusionPlacement::kPreMemory: return "pre_memory";
  }
  return "none";
}

bool uses_fusion_net(FusionPlacement placement) {
  return placement == FusionPlacement::kPreEncoder || placement == FusionPlacement::kPreDecoder ||
         placement == FusionPlacement::kPostDecoder;
}

FusionNet::FusionNet(std::size_t d, std::size_t e, std::size_t hidden, Rng& rng) : d_(d), e_(e), hidden_(hidden) {
  if (d == 0 || e == 0 || hidden == 0) throw ConfigError("fusion dimensions must be positive");
  const real bound = real(1) / std::sqrt(static_cast<real>(d + e));
  mlp_weight = uniform_param({d + e, hidden}, bound, rng);
  mlp_bias = uniform_param({hidden}, bound, rng);
  score = Linear(hidden, 1, true, rng);
  value = Linear(e, d, false, rng);
  out = Linear(d, d, false, rng);
}

void FusionNet::check(const Tensor& v, const Tensor& s) const {
  if (v.ndim() != 3 || v.dim(2) != d_ || s.ndim() != 3 || s.dim(2) != e_ || s.dim(0) != v.dim(0)) {
    throw DimensionError("fusion expects V [B,L," + std::to_string(d_) + "] and S [B,M," + std::to_string(e_) + "], got " +
                         shape_str(v.shape()) + " and " + shape_str(s.shape()));
  }
}

Tensor FusionNet::relevancy(const Tensor& v, const Tensor& s) const {
  check(v, s);
  const std::size_t b = v.dim(0), l = v.dim(1), m = s.dim(1);
  // MLP([v_i; s_j]) first layer = v_i W_v + s_j W_s + bias, evaluated once
  // per row and combined pairwise.
  const Tensor hv = linear(v, slice(mlp_weight, 0, 0, d_), mlp_bias);
  const Tensor hs = linear(s, slice(mlp_weight, 0, d_, e_), Tensor());
  const Tensor h = relu(pairwise_add(hv, hs));  // [B,L,M,H]
  return softmax(reshape(score(h), {b, l, m}), -1);
}

Tensor FusionNet::fuse(const Tensor& v, const Tensor& s, Tensor* alpha) const {
  const Tensor a = relevancy(v, s);
  if (alpha) *alpha = a;
  const Tensor context = bmm(a, value(s));  // [B,L,D]
  return add(v, out(context));
}

void FusionNet::collect(ParamList& params, std::string_view prefix) const {
  params.push_back({join_name(prefix, "mlp.weight"), mlp_weight});
  params.push_back({join_name(prefix, "mlp.bias"), mlp_bias});
  score.collect(params, join_name(prefix, "score"));
  value.collect(params, join_name(prefix, "value"));
  out.collect(params, join_name(prefix, "out"));
}

}  // namespace sstr
