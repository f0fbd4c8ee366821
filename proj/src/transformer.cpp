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

#include "sstr/transformer.hpp"

#include <cmath>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"

namespace sstr {

namespace {

constexpr real kMaskValue = real(-1e9);

// [B,T,H*dh] -> [B*H,T,dh]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.dim(0), t = x.dim(1), dh = x.dim(2) / heads;
  return reshape(swap_axes12(reshape(x, {b, t, heads, dh})), {b * heads, t, dh});
}

// [B*H,T,dh] -> [B,T,H*dh]
Tensor merge_heads(const Tensor& x, std::size_t b, std::size_t heads) {
  const std::size_t t = x.dim(1), dh = x.dim(2);
  return reshape(swap_axes12(reshape(x, {b, heads, t, dh})), {b, t, heads * dh});
}

}  // namespace

Tensor maybe_dropout(const Tensor& x, const RunMode& mode) {
  return mode.training() ? dropout(x, mode.dropout, *mode.dropout_rng) : x;
}

Tensor causal_mask(std::size_t t) {
  Tensor m = Tensor::zeros({t, t});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i + 1; j < t; ++j) d[i * t + j] = kMaskValue;
  }
  return m;
}

Tensor positional_encoding(std::size_t n, std::size_t d) {
  Tensor pe = Tensor::zeros({n, d});
  auto p = pe.mutable_data();
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      p[pos * d + i] = static_cast<real>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d) p[pos * d + i + 1] = static_cast<real>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return pe;
}

MultiHeadAttention::MultiHeadAttention(std::size_t dim, std::size_t n_heads, std::size_t kdim, Rng& rng)
    : heads(n_heads) {
  if (n_heads == 0 || dim % n_heads) {
    throw ConfigError("model.dim (" + std::to_string(dim) + ") must be divisible by model.heads (" + std::to_string(n_heads) + ")");
  }
  wq = Linear(dim, dim, true, rng);
  wk = Linear(kdim, dim, true, rng);
  wv = Linear(kdim, dim, true, rng);
  wo = Linear(dim, dim, true, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& q, const Tensor& kv, const Tensor& mask, Tensor* weights) const {
  if (q.ndim() != 3 || kv.ndim() != 3 || q.dim(0) != kv.dim(0) || q.dim(2) != wq.in_features() ||
      kv.dim(2) != wk.in_features()) {
    throw DimensionError("attention got query " + shape_str(q.shape()) + " and key/value " + shape_str(kv.shape()));
  }
  const std::size_t b = q.dim(0), tq = q.dim(1), tk = kv.dim(1);
  const std::size_t dh = wq.out_features() / heads;
  const Tensor qh = split_heads(wq(q), heads);
  const Tensor kh = split_heads(wk(kv), heads);
  const Tensor vh = split_heads(wv(kv), heads);
  Tensor scores = scale(bmm(qh, kh, true), real(1) / std::sqrt(static_cast<real>(dh)));
  if (mask.defined()) scores = add_broadcast(scores, mask);
  const Tensor p = softmax(scores, -1);  // [B*H,Tq,Tk]
  if (weights) {
    Tensor avg = Tensor::zeros({b, tq, tk});
    auto out = avg.mutable_data();
    const auto src = p.data();
    for (std::size_t bi = 0; bi < b; ++bi) {
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < tq * tk; ++i) out[bi * tq * tk + i] += src[(bi * heads + h) * tq * tk + i] / static_cast<real>(heads);
      }
    }
    *weights = avg;
  }
  return wo(merge_heads(bmm(p, vh), b, heads));
}

void MultiHeadAttention::collect(ParamList& out, std::string_view prefix) const {
  wq.collect(out, join_name(prefix, "q"));
  wk.collect(out, join_name(prefix, "k"));
  wv.collect(out, join_name(prefix, "v"));
  wo.collect(out, join_name(prefix, "o"));
}

FeedForward::FeedForward(std::size_t dim, std::size_t hidden, Rng& rng)
    : fc1(dim, hidden, true, rng), fc2(hidden, dim, true, rng) {}

void FeedForward::collect(ParamList& out, std::string_view prefix) const {
  fc1.collect(out, join_name(prefix, "fc1"));
  fc2.collect(out, join_name(prefix, "fc2"));
}

EncoderLayer::EncoderLayer(std::size_t dim, std::size_t heads, std::size_t ff_dim, Rng& rng)
    : ln1(dim), ln2(dim), attn(dim, heads, dim, rng), ff(dim, ff_dim, rng) {}

Tensor EncoderLayer::operator()(const Tensor& x, const RunMode& mode) const {
  const Tensor h = ln1(x);
  Tensor y = add(x, maybe_dropout(attn(h, h), mode));
  return add(y, maybe_dropout(ff(ln2(y)), mode));
}

void EncoderLayer::collect(ParamList& out, std::string_view prefix) const {
  ln1.collect(out, join_name(prefix, "ln1"));
  attn.collect(out, join_name(prefix, "attn"));
  ln2.collect(out, join_name(prefix, "ln2"));
  ff.collect(out, join_name(prefix, "ff"));
}

DecoderLayer::DecoderLayer(std::size_t dim, std::size_t heads, std::size_t ff_dim, std::size_t semantic_dim, Rng& rng)
    : ln1(dim), ln2(dim), ln3(dim), self_attn(dim, heads, dim, rng), cross_attn(dim, heads, dim, rng), ff(dim, ff_dim, rng) {
  if (semantic_dim > 0) {
    ln_sem.emplace(dim);
    sem_attn.emplace(dim, heads, semantic_dim, rng);
  }
}

Tensor DecoderLayer::operator()(const Tensor& x, const Tensor& memory, const Tensor& mask, const Tensor& s,
                                const RunMode& mode, Tensor* sem_weights) const {
  const Tensor h = ln1(x);
  Tensor y = add(x, maybe_dropout(self_attn(h, h, mask), mode));
  if (sem_attn) {
    if (!s.defined()) throw InputError("pre-memory attention needs a semantic matrix");
    // Unmasked: an all-padding S is attended like any other input.
    y = add(y, maybe_dropout((*sem_attn)((*ln_sem)(y), s, Tensor(), sem_weights), mode));
  }
  y = add(y, maybe_dropout(cross_attn(ln2(y), memory), mode));
  return add(y, maybe_dropout(ff(ln3(y)), mode));
}

void DecoderLayer::collect(ParamList& out, std::string_view prefix) const {
  ln1.collect(out, join_name(prefix, "ln1"));
  self_attn.collect(out, join_name(prefix, "self_attn"));
  if (sem_attn) {
    ln_sem->collect(out, join_name(prefix, "ln_sem"));
    sem_attn->collect(out, join_name(prefix, "sem_attn"));
  }
  ln2.collect(out, join_name(prefix, "ln2"));
  cross_attn.collect(out, join_name(prefix, "cross_attn"));
  ln3.collect(out, join_name(prefix, "ln3"));
  ff.collect(out, join_name(prefix, "ff"));
}

Transformer::Transformer(const TransformerConfig& cfg, std::size_t max_steps, Rng& rng)
    : cfg_(cfg), max_steps_(max_steps) {
  if (cfg.dim == 0) throw ConfigError("model.dim must be positive");
  if (cfg.heads == 0 || cfg.dim % cfg.heads) {
    throw ConfigError("model.dim (" + std::to_string(cfg.dim) + ") must be divisible by model.heads (" + std::to_string(cfg.heads) + ")");
  }
  if (cfg.n_dec == 0) throw ConfigError("model.n_dec must be at least 1");
  token_embedding = uniform_param({static_cast<std::size_t>(charset::kSize), cfg.dim}, real(1), rng);
  for (std::size_t i = 0; i < cfg.n_enc; ++i) encoder.emplace_back(cfg.dim, cfg.heads, cfg.ff_dim(), rng);
  for (std::size_t i = 0; i < cfg.n_dec; ++i) decoder.emplace_back(cfg.dim, cfg.heads, cfg.ff_dim(), cfg.semantic_dim, rng);
  enc_norm = LayerNorm(cfg.dim);
  dec_norm = LayerNorm(cfg.dim);
  classifier = Linear(cfg.dim, static_cast<std::size_t>(charset::kSize), true, rng);
  pe_ = positional_encoding(std::max<std::size_t>(max_steps, 64), cfg.dim);
}

Tensor Transformer::encode(const Tensor& f, const RunMode& mode) const {
  if (f.ndim() != 3 || f.dim(2) != cfg_.dim || f.dim(1) > pe_.dim(0)) {
    throw DimensionError("encoder expects [B,L," + std::to_string(cfg_.dim) + "], got " + shape_str(f.shape()));
  }
  Tensor x = maybe_dropout(add_broadcast(f, slice(pe_, 0, 0, f.dim(1))), mode);
  for (const auto& layer : encoder) x = layer(x, mode);
  return enc_norm(x);
}

Tensor Transformer::decode(const Tensor& memory, std::span<const int> tokens, std::size_t t, const Tensor& start,
                           const Tensor& s, const RunMode& mode, Tensor* sem_weights) const {
  if (t == 0) throw LengthError("decoder needs at least the start position");
  if (t > max_steps_) {
    throw LengthError("decoder prefix of " + std::to_string(t) + " tokens exceeds the " + std::to_string(max_steps_) + "-step limit");
  }
  const std::size_t b = memory.dim(0), d = cfg_.dim;
  if (tokens.size() != b * t) throw DimensionError("decoder got " + std::to_string(tokens.size()) + " tokens for batch " + std::to_string(b) + " x " + std::to_string(t));
  Tensor x = reshape(embedding_lookup(token_embedding, tokens), {b, t, d});
  if (start.defined()) {
    const Tensor head = reshape(start, {b, 1, d});
    x = t > 1 ? concat({head, slice(x, 1, 1, t - 1)}, 1) : head;
  }
  x = maybe_dropout(add_broadcast(x, slice(pe_, 0, 0, t)), mode);
  const Tensor mask = causal_mask(t);
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    x = decoder[i](x, memory, mask, s, mode, i + 1 == decoder.size() ? sem_weights : nullptr);
  }
  return dec_norm(x);
}

void Transformer::collect(ParamList& out, std::string_view prefix) const {
  out.push_back({join_name(prefix, "token_embedding"), token_embedding});
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect(out, join_name(prefix, "encoder" + std::to_string(i)));
  enc_norm.collect(out, join_name(prefix, "enc_norm"));
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect(out, join_name(prefix, "decoder" + std::to_string(i)));
  dec_norm.collect(out, join_name(prefix, "dec_norm"));
  classifier.collect(out, join_name(prefix, "classifier"));
}

}  // namespace sstr
