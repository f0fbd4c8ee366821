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

#include "sstr/nn.hpp"

#include <cmath>

namespace sstr {

std::string join_name(std::string_view prefix, std::string_view name) {
  if (prefix.empty()) return std::string(name);
  std::string out(prefix);
  out += '.';
  out += name;
  return out;
}

Tensor uniform_param(Shape shape, real bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (auto& v : t.mutable_data()) v = static_cast<real>(dist(rng));
  return t;
}

Linear::Linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
  const real bound = real(1) / std::sqrt(static_cast<real>(in));
  weight = uniform_param({in, out}, bound, rng);
  if (with_bias) bias = uniform_param({out}, bound, rng);
}

void Linear::collect(ParamList& out, std::string_view prefix) const {
  out.push_back({join_name(prefix, "weight"), weight});
  if (bias.defined()) out.push_back({join_name(prefix, "bias"), bias});
}

LayerNorm::LayerNorm(std::size_t dim)
    : gamma(Tensor::full({dim}, real(1), true)), beta(Tensor::zeros({dim}, true)) {}

void LayerNorm::collect(ParamList& out, std::string_view prefix) const {
  out.push_back({join_name(prefix, "gamma"), gamma});
  out.push_back({join_name(prefix, "beta"), beta});
}

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t pad, Rng& rng) {
  // Kaiming-uniform for ReLU stacks.
  const real fan_in = static_cast<real>(in_ch * kernel * kernel);
  weight = uniform_param({out_ch, in_ch, kernel, kernel}, std::sqrt(real(6) / fan_in), rng);
  bias = Tensor::zeros({out_ch}, true);
  params.pad_h = params.pad_w = pad;
}

void Conv2d::collect(ParamList& out, std::string_view prefix) const {
  out.push_back({join_name(prefix, "weight"), weight});
  out.push_back({join_name(prefix, "bias"), bias});
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace sstr
