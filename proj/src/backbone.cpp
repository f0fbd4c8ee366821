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

#include "sstr/backbone.hpp"

#include "sstr/errors.hpp"

namespace sstr {

std::vector<BackboneBlock> default_depth_plan() {
  return {{16, "2x2"}, {32, "2x2"}, {64, "2x2s21"}, {64, "2x1"}, {0, "2x1"}};
}

Pool2dParams pool_params(const std::string& pool) {
  if (pool == "2x2") return Pool2dParams{2, 2, 2, 2, 0, 0};
  if (pool == "2x2s21") return Pool2dParams{2, 2, 2, 1, 0, 1};
  if (pool == "2x1") return Pool2dParams{2, 1, 2, 1, 0, 0};
  throw ConfigError("unknown backbone pool '" + pool + "' (expected 2x2, 2x2s21, 2x1 or none)");
}

void to_json(nlohmann::json& j, const BackboneBlock& b) { j = nlohmann::json{{"channels", b.channels}, {"pool", b.pool}}; }

void from_json(const nlohmann::json& j, BackboneBlock& b) {
  b = BackboneBlock{};
  if (j.contains("channels")) j.at("channels").get_to(b.channels);
  if (j.contains("pool")) j.at("pool").get_to(b.pool);
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.depth_plan.empty()) throw ConfigError("backbone.depth_plan must have at least one block");
  if (cfg.feature_dim == 0) throw ConfigError("backbone.feature_dim must be positive");
  std::size_t h = cfg.in_h, w = cfg.in_w, c = 1;
  for (std::size_t i = 0; i < cfg.depth_plan.size(); ++i) {
    const auto& blk = cfg.depth_plan[i];
    const bool last = i + 1 == cfg.depth_plan.size();
    std::size_t out = blk.channels;
    if (out == 0) {
      if (!last) throw ConfigError("backbone block " + std::to_string(i) + " needs a channel count");
      out = cfg.feature_dim;
    }
    convs.emplace_back(c, out, 3, 1, rng);
    c = out;
    if (blk.pool == "none") {
      pools.emplace_back();
      pooled.push_back(false);
      continue;
    }
    const Pool2dParams p = pool_params(blk.pool);
    if (h + 2 * p.pad_h < p.kernel_h || w + 2 * p.pad_w < p.kernel_w) {
      throw ConfigError("backbone block " + std::to_string(i) + " pools a " + std::to_string(h) + "x" + std::to_string(w) +
                        " map below the kernel size");
    }
    h = (h + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
    w = (w + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
    pools.push_back(p);
    pooled.push_back(true);
  }
  if (h != 1 || w != cfg.seq_len || c != cfg.feature_dim) {
    throw ConfigError("backbone plan maps " + std::to_string(cfg.in_h) + "x" + std::to_string(cfg.in_w) + " to " +
                      std::to_string(c) + " channels at " + std::to_string(h) + "x" + std::to_string(w) + ", need " +
                      std::to_string(cfg.feature_dim) + " channels at 1x" + std::to_string(cfg.seq_len));
  }
}

Tensor Backbone::operator()(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != 1 || images.dim(2) != cfg_.in_h || images.dim(3) != cfg_.in_w) {
    throw DimensionError("backbone expects [B,1," + std::to_string(cfg_.in_h) + "," + std::to_string(cfg_.in_w) +
                         "], got " + shape_str(images.shape()));
  }
  Tensor x = images;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    x = relu(convs[i](x));
    if (pooled[i]) x = max_pool2d(x, pools[i]);
  }
  const std::size_t b = images.dim(0), d = cfg_.feature_dim, l = cfg_.seq_len;
  // [B,D,1,L] -> [B,L,D]
  return reshape(swap_axes12(reshape(x, {b, d, l, 1})), {b, l, d});
}

void Backbone::collect(ParamList& out, std::string_view prefix) const {
  for (std::size_t i = 0; i < convs.size(); ++i) convs[i].collect(out, join_name(prefix, "conv" + std::to_string(i)));
}

}  // namespace sstr
