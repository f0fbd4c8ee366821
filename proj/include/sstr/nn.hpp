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

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sstr/ops.hpp"
#include "sstr/tensor.hpp"

namespace sstr {

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::string join_name(std::string_view prefix, std::string_view name);

// Uniform(-bound, bound) leaf tensor that requires grad.
Tensor uniform_param(Shape shape, real bound, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(ParamList& out, std::string_view prefix) const;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor weight;  // [in, out]
  Tensor bias;    // [out] or undefined
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
  void collect(ParamList& out, std::string_view prefix) const;

  Tensor gamma, beta;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t pad, Rng& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, params); }
  void collect(ParamList& out, std::string_view prefix) const;

  Tensor weight;  // [O, C, k, k]
  Tensor bias;    // [O]
  Conv2dParams params;
};

std::size_t parameter_count(const ParamList& params);

}  // namespace sstr
