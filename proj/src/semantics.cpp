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

#include "sstr/semantics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sstr/errors.hpp"

namespace sstr {

FrozenEmbeddings load_frozen_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embedding file " + path);
  FrozenEmbeddings out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag.empty()) continue;
    std::size_t n = 0;
    double v;
    while (ss >> v) {
      out.vectors.push_back(static_cast<real>(v));
      ++n;
    }
    if (!ss.eof() || n != kTagEmbedWidth) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected a tag and " + std::to_string(kTagEmbedWidth) +
                        " numbers, got " + std::to_string(n));
    }
    out.tags.push_back(tag);
  }
  return out;
}

void save_frozen_embeddings(const std::string& path, const FrozenEmbeddings& emb) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file " + path);
  out << std::setprecision(9);
  for (std::size_t i = 0; i < emb.tags.size(); ++i) {
    out << emb.tags[i];
    for (std::size_t j = 0; j < kTagEmbedWidth; ++j) out << ' ' << emb.vectors[i * kTagEmbedWidth + j];
    out << '\n';
  }
}

TagEmbedder::TagEmbedder(const std::vector<std::string>& vocabulary, std::size_t embed_dim, Rng& rng)
    : vocab_(vocabulary) {
  if (embed_dim == 0) throw ConfigError("semantics.embed_dim must be positive");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<int>(i) + 1).second) throw ConfigError("duplicate tag '" + vocab_[i] + "'");
  }
  table = uniform_param({vocab_.size() + 1, kTagEmbedWidth}, real(0.1), rng);
  projection = Linear(kTagEmbedWidth, embed_dim, true, rng);
}

TagEmbedder::TagEmbedder(const FrozenEmbeddings& frozen, std::size_t embed_dim, Rng& rng)
    : vocab_(frozen.tags), frozen_(true) {
  if (embed_dim == 0) throw ConfigError("semantics.embed_dim must be positive");
  if (frozen.vectors.size() != frozen.tags.size() * kTagEmbedWidth) throw FormatError("frozen embedding table is ragged");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<int>(i) + 1).second) throw FormatError("duplicate tag '" + vocab_[i] + "' in embedding file");
  }
  // UNK row stays zero for frozen tables.
  std::vector<real> data(kTagEmbedWidth, real(0));
  data.insert(data.end(), frozen.vectors.begin(), frozen.vectors.end());
  table = Tensor::from({vocab_.size() + 1, kTagEmbedWidth}, std::move(data));
  projection = Linear(kTagEmbedWidth, embed_dim, true, rng);
}

int TagEmbedder::index_of(const std::string& tag) const {
  const auto it = index_.find(tag);
  return it == index_.end() ? kUnkTag : it->second;
}

Tensor TagEmbedder::project(std::span<const int> indices) const {
  return projection(embedding_lookup(table, indices));
}

void TagEmbedder::collect(ParamList& out, std::string_view prefix) const {
  if (!frozen_) out.push_back({join_name(prefix, "table"), table});
  projection.collect(out, join_name(prefix, "projection"));
}

SemanticBatch build_semantic_batch(const std::vector<std::vector<TagWeight>>& tags, const TagEmbedder& embedder) {
  const std::size_t b = tags.size(), e = embedder.embed_dim();
  SemanticBatch out;
  if (b == 0) throw DimensionError("semantic batch must not be empty");
  // Every slot is embedded; padding slots get weight 0, which scale_rows
  // turns into exact zeros.
  std::vector<int> idx(b * kSemanticSlots, kUnkTag);
  std::vector<real> weights(b * kSemanticSlots, real(0));
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t n = std::min(kSemanticSlots, tags[i].size());
    out.valid_counts.push_back(n);
    for (std::size_t j = 0; j < n; ++j) {
      idx[i * kSemanticSlots + j] = embedder.index_of(tags[i][j].tag);
      weights[i * kSemanticSlots + j] = static_cast<real>(tags[i][j].weight);
    }
  }
  out.s = reshape(scale_rows(embedder.project(idx), weights), {b, kSemanticSlots, e});
  return out;
}

SemanticVector build_semantic_vector(const std::vector<TagWeight>& tags, const TagEmbedder& embedder) {
  SemanticBatch batch = build_semantic_batch({tags}, embedder);
  return {reshape(batch.s, {kSemanticSlots, embedder.embed_dim()}), batch.valid_counts[0]};
}

SemanticBatch empty_semantic_batch(std::size_t batch, std::size_t embed_dim) {
  return {Tensor::zeros({batch, kSemanticSlots, embed_dim}), std::vector<std::size_t>(batch, 0)};
}

std::vector<SimilarityRow> synonym_distance_report(const TagEmbedder& embedder,
                                                   const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<SimilarityRow> out;
  const std::size_t e = embedder.embed_dim();
  for (const auto& [a, b] : pairs) {
    const int ids[2] = {embedder.index_of(a), embedder.index_of(b)};
    const Tensor p = embedder.project(ids);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < e; ++k) {
      const double x = p[k], y = p[e + k];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    out.push_back({a, b, denom > 0 ? dot / denom : 0.0});
  }
  return out;
}

}  // namespace sstr
