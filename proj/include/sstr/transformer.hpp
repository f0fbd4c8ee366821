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

// Pre-LN transformer encoder/decoder used as the sequence model.

#include <optional>

#include "sstr/nn.hpp"

namespace sstr {

// Dropout is active only when a generator is supplied.
struct RunMode {
  Rng* dropout_rng = nullptr;
  real dropout = real(0.1);

  bool training() const { return dropout_rng != nullptr && dropout > 0; }
};

Tensor maybe_dropout(const Tensor& x, const RunMode& mode);

// Additive mask [T,T]: 0 on and below the diagonal, a large negative value
// above it.
Tensor causal_mask(std::size_t t);

// Sinusoidal positional table [n, d].
Tensor positional_encoding(std::size_t n, std::size_t d);

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  // Queries have width `dim`; keys/values come from inputs of width `kdim`.
  MultiHeadAttention(std::size_t dim, std::size_t heads, std::size_t kdim, Rng& rng);

  // q [B,Tq,D], kv [B,Tk,kdim], optional additive mask [Tq,Tk] -> [B,Tq,D].
  // `weights` (if given) receives the head-averaged attention [B,Tq,Tk].
  Tensor operator()(const Tensor& q, const Tensor& kv, const Tensor& mask = Tensor(), Tensor* weights = nullptr) const;
  void collect(ParamList& out, std::string_view prefix) const;

  Linear wq, wk, wv, wo;
  std::size_t heads = 1;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(std::size_t dim, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const { return fc2(relu(fc1(x))); }
  void collect(ParamList& out, std::string_view prefix) const;

  Linear fc1, fc2;
};

class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(std::size_t dim, std::size_t heads, std::size_t ff, Rng& rng);
  Tensor operator()(const Tensor& x, const RunMode& mode) const;
  void collect(ParamList& out, std::string_view prefix) const;

  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ff;
};

class DecoderLayer {
 public:
  DecoderLayer() = default;
  // semantic_dim > 0 adds the pre-memory attention block over S.
  DecoderLayer(std::size_t dim, std::size_t heads, std::size_t ff, std::size_t semantic_dim, Rng& rng);

  // x [B,T,D] target states, memory [B,L,D]; s [B,M,E] is used only by the
  // pre-memory block.
  Tensor operator()(const Tensor& x, const Tensor& memory, const Tensor& mask, const Tensor& s,
                    const RunMode& mode, Tensor* sem_weights = nullptr) const;
  void collect(ParamList& out, std::string_view prefix) const;

  bool has_semantic_block() const { return sem_attn.has_value(); }

  LayerNorm ln1, ln2, ln3;
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ff;
  std::optional<LayerNorm> ln_sem;
  std::optional<MultiHeadAttention> sem_attn;
};

struct TransformerConfig {
  std::size_t n_enc = 2, n_dec = 2;
  std::size_t dim = 64, heads = 4;
  std::size_t ff = 0;  // 0 means 4 * dim
  real dropout = real(0.1);
  std::size_t semantic_dim = 0;  // nonzero enables pre-memory blocks

  std::size_t ff_dim() const { return ff ? ff : 4 * dim; }
};

class Transformer {
 public:
  Transformer() = default;
  Transformer(const TransformerConfig& cfg, std::size_t max_steps, Rng& rng);

  Tensor encode(const Tensor& f, const RunMode& mode) const;  // [B,L,D] -> [B,L,D]

  // Decoder states for a target-input sequence. `start` [B,D] replaces the
  // GO embedding at position 0 when defined. Throws LengthError beyond
  // max_steps tokens. `sem_weights` receives the last layer's pre-memory
  // attention [B,t,M] when that block exists.
  Tensor decode(const Tensor& memory, std::span<const int> tokens, std::size_t t, const Tensor& start,
                const Tensor& s, const RunMode& mode, Tensor* sem_weights = nullptr) const;  // tokens [B*t] -> [B,t,D]

  Tensor classify(const Tensor& states) const { return classifier(states); }

  void collect(ParamList& out, std::string_view prefix) const;
  const TransformerConfig& config() const { return cfg_; }
  std::size_t max_steps() const { return max_steps_; }

  Tensor token_embedding;  // [charset size, D]
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LayerNorm enc_norm, dec_norm;
  Linear classifier;

 private:
  TransformerConfig cfg_;
  std::size_t max_steps_ = 0;
  Tensor pe_;
};

}  // namespace sstr
