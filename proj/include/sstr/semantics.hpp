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

// Object tags -> padded semantic matrix S [15, E]. Tags are looked up in a
// 768-wide embedding table (learned, or loaded frozen from a file), projected
// to E, and scaled by their assignment weight. Unused slots are exact zeros.

#include <map>
#include <string>
#include <vector>

#include "sstr/nn.hpp"
#include "sstr/scenedata.hpp"

namespace sstr {

inline constexpr std::size_t kSemanticSlots = 15;
inline constexpr std::size_t kTagEmbedWidth = 768;
inline constexpr int kUnkTag = 0;

struct FrozenEmbeddings {
  std::vector<std::string> tags;
  std::vector<real> vectors;  // tags.size() x kTagEmbedWidth
};

// Lines "tag v1 ... v768"; blank lines and lines starting with '#' are
// ignored. FormatError on a malformed row, IoError if unreadable.
FrozenEmbeddings load_frozen_embeddings(const std::string& path);
void save_frozen_embeddings(const std::string& path, const FrozenEmbeddings& emb);

class TagEmbedder {
 public:
  TagEmbedder() = default;
  // Learned table for `vocabulary` (index 0 is UNK).
  TagEmbedder(const std::vector<std::string>& vocabulary, std::size_t embed_dim, Rng& rng);
  // Frozen table from a file; only the projection is trained.
  TagEmbedder(const FrozenEmbeddings& frozen, std::size_t embed_dim, Rng& rng);

  int index_of(const std::string& tag) const;  // kUnkTag if unknown
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t embed_dim() const { return projection.out_features(); }
  bool frozen() const { return frozen_; }

  // Projected embeddings (no weight scaling) for the given indices: [N, E].
  Tensor project(std::span<const int> indices) const;

  void collect(ParamList& out, std::string_view prefix) const;

  Tensor table;  // [V+1, 768]
  Linear projection;

 private:
  std::vector<std::string> vocab_;  // without UNK
  std::map<std::string, int> index_;
  bool frozen_ = false;
};

struct SemanticVector {
  Tensor s;  // [15, E]
  std::size_t valid_count = 0;
};

struct SemanticBatch {
  Tensor s;  // [B, 15, E]
  std::vector<std::size_t> valid_counts;
};

// Keeps the first 15 tags (callers pass them in relevance order).
SemanticVector build_semantic_vector(const std::vector<TagWeight>& tags, const TagEmbedder& embedder);
SemanticBatch build_semantic_batch(const std::vector<std::vector<TagWeight>>& tags, const TagEmbedder& embedder);

// All-zero S for a batch (used when semantics are disabled).
SemanticBatch empty_semantic_batch(std::size_t batch, std::size_t embed_dim);

struct SimilarityRow {
  std::string a, b;
  double cosine = 0;
};

// Cosine similarity of projected embeddings for each pair.
std::vector<SimilarityRow> synonym_distance_report(const TagEmbedder& embedder,
                                                   const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace sstr
