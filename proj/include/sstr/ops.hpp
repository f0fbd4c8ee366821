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

// Differentiable tensor operations. Every op validates shapes and throws
// DimensionError naming the offending shapes. When a Tape is active and any
// input requires grad, the op records its backward pass on the tape.

#include <random>
#include <span>
#include <vector>

#include "sstr/tensor.hpp"

namespace sstr {

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Batched product: [B,m,k] x [B,k,n] -> [B,m,n], or with trans_b,
// [B,m,k] x [B,n,k]^T -> [B,m,n].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

// y = x W + b over the last axis of x. weight is [in,out]; bias may be
// undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x + y where y's shape is a trailing suffix of x's shape.
Tensor add_broadcast(const Tensor& x, const Tensor& y);

Tensor scale(const Tensor& x, real factor);

// Multiplies slice i along axis 0 by weights[i]. A zero weight yields an exact
// +0 slice.
Tensor scale_rows(const Tensor& x, std::span<const real> weights);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

// Max-subtracted softmax along `axis` (negative counts from the end).
Tensor softmax(const Tensor& x, int axis = -1);

// Mean negative log-likelihood over positions whose target != ignore_index.
// logits are [T,C] (leading axes are flattened). Returns 0 with zero gradient
// when every target is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index);

// Normalizes over the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps = real(1e-5));

// Rows of table [V,E] selected by indices -> [N,E].
Tensor embedding_lookup(const Tensor& table, std::span<const int> indices);

struct Conv2dParams {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

// x [B,C,H,W], weight [O,C,kh,kw], bias [O] (may be undefined) -> [B,O,Ho,Wo].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dParams params = {});

struct Pool2dParams {
  std::size_t kernel_h = 2, kernel_w = 2;
  std::size_t stride_h = 2, stride_w = 2;
  std::size_t pad_h = 0, pad_w = 0;  // padded cells never win the max
};

Tensor max_pool2d(const Tensor& x, Pool2dParams params = {});

// Samples image [B,C,H,W] at grid [B,Ho,Wo,2] of normalized (x,y) in [-1,1]
// (corner-aligned: -1 and 1 are the centers of the border pixels). Points
// outside the image read zero. Differentiable in both image and grid.
Tensor bilinear_sample(const Tensor& image, const Tensor& grid);

Tensor reshape(const Tensor& x, Shape shape);

// [A,B,C,D] -> [A,C,B,D]
Tensor swap_axes12(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout. p == 0 returns x unchanged.
Tensor dropout(const Tensor& x, real p, std::mt19937_64& rng);

// a [B,n,H], b [B,m,H] -> [B,n,m,H] with out[b,i,j] = a[b,i] + b[b,j].
Tensor pairwise_add(const Tensor& a, const Tensor& b);

}  // namespace sstr
