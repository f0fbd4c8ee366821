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

// The full recognizer: normalization -> backbone -> (fusion) -> transformer
// encoder/decoder -> 39-way classifier.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sstr/backbone.hpp"
#include "sstr/fusion.hpp"
#include "sstr/normalization.hpp"
#include "sstr/scenedata.hpp"
#include "sstr/semantics.hpp"
#include "sstr/transformer.hpp"

namespace sstr {

struct ModelConfig {
  NormalizationMode normalization = NormalizationMode::kIdentity;
  std::size_t fiducials = kDefaultFiducials;
  BackboneConfig backbone;
  AssignmentMode semantics = AssignmentMode::kNone;
  std::size_t embed_dim = 32;
  std::string frozen_path;
  std::vector<std::string> tag_vocabulary;  // learned-table vocabulary
  FusionPlacement placement = FusionPlacement::kNone;
  std::size_t fusion_hidden = kDefaultFusionHidden;
  TransformerConfig transformer;

  void validate() const;  // ConfigError
  bool semantic() const { return placement != FusionPlacement::kNone; }
};

// Nested layout: normalization{mode,fiducials}, backbone{depth_plan,
// feature_dim}, semantics{mode,embed_dim,frozen_path,vocabulary},
// fusion{placement,hidden}, model{n_enc,n_dec,dim,heads,ff,dropout}.
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);  // missing keys keep defaults

struct Batch {
  Tensor images;                              // [B,1,32,100]
  std::vector<std::vector<TagWeight>> tags;   // per sample
  std::vector<int> inputs;                    // [B*26] GO, c1.., PAD
  std::vector<int> targets;                   // [B*26] c1.., EOS, PAD
  std::size_t size() const { return tags.size(); }
};

// Pixels mapped to [-1, 1].
Tensor images_tensor(const std::vector<const GrayImage*>& images);
Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices);
Batch make_batch(const std::vector<Sample>& samples);

struct ForwardTrace {
  Tensor relevancy;  // [B,L,15] from the fusion stage (FusionNet placements)
  Tensor memory_attention;  // [B,26,15] last pre-memory block (pre_memory)
  Tensor semantic;   // S [B,15,E]
};

struct Decoded {
  std::vector<std::vector<int>> tokens;  // per sample, without GO/EOS
  std::vector<std::string> text;
  ForwardTrace trace;
};

class Recognizer {
 public:
  Recognizer() = default;
  Recognizer(const ModelConfig& cfg, Rng& rng);

  // Teacher-forced logits [B,26,39].
  Tensor forward(const Batch& batch, const RunMode& mode, ForwardTrace* trace = nullptr) const;
  Tensor loss(const Batch& batch, const RunMode& mode) const;

  // Encoder memory (after any pre-decoder fusion) and S for a batch.
  struct Encoded {
    Tensor memory;
    Tensor s;
    Tensor start;
    ForwardTrace trace;
  };
  Encoded encode(const Tensor& images, const std::vector<std::vector<TagWeight>>& tags, const RunMode& mode) const;

  // Next-token logits [B,39] given token prefixes of equal length t (each
  // starting with GO). Throws LengthError when t > 26.
  Tensor decode_step(const Encoded& enc, std::span<const int> prefix, std::size_t t) const;

  // Batched greedy decoding; stops at EOS or after 26 steps.
  Decoded greedy_decode(const Tensor& images, const std::vector<std::vector<TagWeight>>& tags) const;

  ParamList parameters() const;
  const ModelConfig& config() const { return cfg_; }

  Normalizer normalizer;
  Backbone backbone;
  std::optional<TagEmbedder> embedder;
  std::optional<FusionNet> fusion;
  std::optional<Linear> cls_proj;
  Transformer transformer;

 private:
  Tensor semantic_matrix(const std::vector<std::vector<TagWeight>>& tags) const;
  Tensor cls_start(const Tensor& s, const std::vector<std::vector<TagWeight>>& tags) const;
  Tensor head(const Tensor& states, const Tensor& s, ForwardTrace* trace) const;
  ModelConfig cfg_;
};

}  // namespace sstr
