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

#include "sstr/model.hpp"

#include <algorithm>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"

namespace sstr {

using nlohmann::json;

void ModelConfig::validate() const {
  if (placement != FusionPlacement::kNone && semantics == AssignmentMode::kNone) {
    throw ConfigError("fusion.placement '" + to_string(placement) + "' needs semantics.mode overlap or scene");
  }
  if (transformer.dim != backbone.feature_dim) {
    throw ConfigError("model.dim (" + std::to_string(transformer.dim) + ") must equal backbone.feature_dim (" +
                      std::to_string(backbone.feature_dim) + ")");
  }
  if (semantic() && embed_dim == 0) throw ConfigError("semantics.embed_dim must be positive");
  if (!(transformer.dropout >= 0 && transformer.dropout < 1)) throw ConfigError("model.dropout must be in [0, 1)");
}

json model_config_to_json(const ModelConfig& c) {
  json j;
  j["normalization"] = {{"mode", to_string(c.normalization)}, {"fiducials", c.fiducials}};
  j["backbone"] = {{"depth_plan", c.backbone.depth_plan}, {"feature_dim", c.backbone.feature_dim}};
  j["semantics"] = {{"mode", to_string(c.semantics)},
                    {"embed_dim", c.embed_dim},
                    {"frozen_path", c.frozen_path},
                    {"vocabulary", c.tag_vocabulary}};
  j["fusion"] = {{"placement", to_string(c.placement)}, {"hidden", c.fusion_hidden}};
  j["model"] = {{"n_enc", c.transformer.n_enc}, {"n_dec", c.transformer.n_dec},   {"dim", c.transformer.dim},
                {"heads", c.transformer.heads}, {"ff", c.transformer.ff_dim()}, {"dropout", c.transformer.dropout}};
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    const auto section = [&](const char* name) -> const json& {
      static const json kEmpty = json::object();
      if (!j.contains(name)) return kEmpty;
      if (!j.at(name).is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
      return j.at(name);
    };
    const json& n = section("normalization");
    if (n.contains("mode")) c.normalization = parse_normalization_mode(n.at("mode").get<std::string>());
    if (n.contains("fiducials")) n.at("fiducials").get_to(c.fiducials);
    const json& b = section("backbone");
    if (b.contains("depth_plan")) b.at("depth_plan").get_to(c.backbone.depth_plan);
    if (b.contains("feature_dim")) b.at("feature_dim").get_to(c.backbone.feature_dim);
    const json& s = section("semantics");
    if (s.contains("mode")) c.semantics = parse_assignment_mode(s.at("mode").get<std::string>());
    if (s.contains("embed_dim")) s.at("embed_dim").get_to(c.embed_dim);
    if (s.contains("frozen_path") && !s.at("frozen_path").is_null()) s.at("frozen_path").get_to(c.frozen_path);
    if (s.contains("vocabulary")) s.at("vocabulary").get_to(c.tag_vocabulary);
    const json& f = section("fusion");
    if (f.contains("placement")) c.placement = parse_fusion_placement(f.at("placement").get<std::string>());
    if (f.contains("hidden")) f.at("hidden").get_to(c.fusion_hidden);
    const json& m = section("model");
    if (m.contains("n_enc")) m.at("n_enc").get_to(c.transformer.n_enc);
    if (m.contains("n_dec")) m.at("n_dec").get_to(c.transformer.n_dec);
    if (m.contains("dim")) m.at("dim").get_to(c.transformer.dim);
    else c.transformer.dim = c.backbone.feature_dim;
    if (m.contains("heads")) m.at("heads").get_to(c.transformer.heads);
    if (m.contains("ff")) m.at("ff").get_to(c.transformer.ff);
    if (m.contains("dropout")) {
      double d = 0;
      m.at("dropout").get_to(d);
      c.transformer.dropout = static_cast<real>(d);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

Tensor images_tensor(const std::vector<const GrayImage*>& images) {
  if (images.empty()) throw DimensionError("image batch must not be empty");
  const std::size_t h = images[0]->height, w = images[0]->width;
  std::vector<real> data;
  data.reserve(images.size() * h * w);
  for (const GrayImage* img : images) {
    if (img->height != h || img->width != w) throw DimensionError("images in a batch must share one size");
    for (float p : img->pixels) data.push_back(static_cast<real>((p - 0.5f) / 0.5f));
  }
  return Tensor::from({images.size(), 1, h, w}, std::move(data));
}

Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  Batch batch;
  std::vector<const GrayImage*> imgs;
  const std::size_t steps = charset::kMaxSteps;
  for (std::size_t i : indices) {
    const Sample& s = samples.at(i);
    if (s.target.empty() || s.target.size() > steps) throw LengthError("sample " + s.id + " has an invalid target length");
    imgs.push_back(&s.image);
    batch.tags.push_back(s.tags);
    batch.inputs.push_back(charset::kGo);
    for (std::size_t t = 0; t + 1 < steps; ++t) batch.inputs.push_back(t + 1 < s.target.size() ? s.target[t] : charset::kPad);
    for (std::size_t t = 0; t < steps; ++t) batch.targets.push_back(t < s.target.size() ? s.target[t] : charset::kPad);
  }
  batch.images = images_tensor(imgs);
  return batch;
}

Batch make_batch(const std::vector<Sample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(samples, idx);
}

Recognizer::Recognizer(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  normalizer = Normalizer(cfg.normalization, cfg.backbone.in_h, cfg.backbone.in_w, rng, cfg.fiducials);
  backbone = Backbone(cfg.backbone, rng);
  const std::size_t d = cfg.transformer.dim;
  TransformerConfig tcfg = cfg.transformer;
  tcfg.semantic_dim = 0;
  if (cfg.semantic()) {
    if (!cfg.frozen_path.empty()) {
      embedder.emplace(load_frozen_embeddings(cfg.frozen_path), cfg.embed_dim, rng);
    } else {
      embedder.emplace(cfg.tag_vocabulary, cfg.embed_dim, rng);
    }
    if (uses_fusion_net(cfg.placement)) fusion.emplace(d, cfg.embed_dim, cfg.fusion_hidden, rng);
    if (cfg.placement == FusionPlacement::kClsToken) cls_proj.emplace(cfg.embed_dim, d, true, rng);
    if (cfg.placement == FusionPlacement::kPreMemory) tcfg.semantic_dim = cfg.embed_dim;
  }
  transformer = Transformer(tcfg, charset::kMaxSteps, rng);
}

Tensor Recognizer::semantic_matrix(const std::vector<std::vector<TagWeight>>& tags) const {
  if (!embedder) return Tensor();
  return build_semantic_batch(tags, *embedder).s;
}

Tensor Recognizer::cls_start(const Tensor& s, const std::vector<std::vector<TagWeight>>& tags) const {
  if (!cls_proj) return Tensor();
  // Mean over valid rows as a [B,1,15] x [B,15,E] product.
  const std::size_t b = tags.size();
  std::vector<real> w(b * kSemanticSlots, real(0));
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t n = std::min(kSemanticSlots, tags[i].size());
    for (std::size_t j = 0; j < n; ++j) w[i * kSemanticSlots + j] = real(1) / static_cast<real>(n);
  }
  const Tensor pooled = bmm(Tensor::from({b, 1, kSemanticSlots}, std::move(w)), s);
  return (*cls_proj)(reshape(pooled, {b, cfg_.embed_dim}));
}

Recognizer::Encoded Recognizer::encode(const Tensor& images, const std::vector<std::vector<TagWeight>>& tags,
                                       const RunMode& mode) const {
  if (images.ndim() != 4 || images.dim(0) != tags.size()) {
    throw DimensionError("batch has " + std::to_string(tags.size()) + " tag lists for images " + shape_str(images.shape()));
  }
  Encoded enc;
  enc.s = semantic_matrix(tags);
  enc.trace.semantic = enc.s;
  Tensor v = backbone(normalizer(images));
  if (cfg_.placement == FusionPlacement::kPreEncoder) v = fusion->fuse(v, enc.s, &enc.trace.relevancy);
  enc.memory = transformer.encode(v, mode);
  if (cfg_.placement == FusionPlacement::kPreDecoder) enc.memory = fusion->fuse(enc.memory, enc.s, &enc.trace.relevancy);
  enc.start = cls_start(enc.s, tags);
  return enc;
}

Tensor Recognizer::head(const Tensor& states, const Tensor& s, ForwardTrace* trace) const {
  if (cfg_.placement == FusionPlacement::kPostDecoder) {
    Tensor alpha;
    Tensor fused = fusion->fuse(states, s, &alpha);
    if (trace) trace->relevancy = alpha;
    return transformer.classify(fused);
  }
  return transformer.classify(states);
}

Tensor Recognizer::forward(const Batch& batch, const RunMode& mode, ForwardTrace* trace) const {
  Encoded enc = encode(batch.images, batch.tags, mode);
  const bool pre_memory = cfg_.placement == FusionPlacement::kPreMemory;
  const Tensor states = transformer.decode(enc.memory, batch.inputs, charset::kMaxSteps, enc.start,
                                           pre_memory ? enc.s : Tensor(), mode,
                                           pre_memory ? &enc.trace.memory_attention : nullptr);
  Tensor logits = head(states, enc.s, &enc.trace);
  if (trace) *trace = enc.trace;
  return logits;
}

Tensor Recognizer::loss(const Batch& batch, const RunMode& mode) const {
  return cross_entropy(forward(batch, mode), batch.targets, charset::kPad);
}

Tensor Recognizer::decode_step(const Encoded& enc, std::span<const int> prefix, std::size_t t) const {
  const std::size_t b = enc.memory.dim(0);
  const Tensor states = transformer.decode(enc.memory, prefix, t, enc.start,
                                           cfg_.placement == FusionPlacement::kPreMemory ? enc.s : Tensor(), RunMode{});
  const Tensor last = slice(states, 1, t - 1, 1);
  return reshape(head(last, enc.s, nullptr), {b, static_cast<std::size_t>(charset::kSize)});
}

Decoded Recognizer::greedy_decode(const Tensor& images, const std::vector<std::vector<TagWeight>>& tags) const {
  const Encoded enc = encode(images, tags, RunMode{});
  const std::size_t b = images.dim(0), steps = charset::kMaxSteps, c = static_cast<std::size_t>(charset::kSize);
  Decoded out;
  out.tokens.assign(b, {});
  out.trace = enc.trace;
  std::vector<std::vector<int>> prefix(b, std::vector<int>{charset::kGo});
  std::vector<bool> done(b, false);
  std::size_t remaining = b;
  for (std::size_t t = 1; t <= steps && remaining > 0; ++t) {
    std::vector<int> flat;
    flat.reserve(b * t);
    for (const auto& p : prefix) flat.insert(flat.end(), p.begin(), p.end());
    const Tensor logits = decode_step(enc, flat, t);
    const auto d = logits.data();
    for (std::size_t i = 0; i < b; ++i) {
      const auto row = d.subspan(i * c, c);
      // GO and PAD are never emitted.
      int best = 0;
      for (int k = 1; k < charset::kSize; ++k) {
        if (k == charset::kGo || k == charset::kPad) continue;
        if (row[static_cast<std::size_t>(k)] > row[static_cast<std::size_t>(best)]) best = k;
      }
      prefix[i].push_back(best);
      if (done[i]) continue;
      if (best == charset::kEos) {
        done[i] = true;
        --remaining;
      } else {
        out.tokens[i].push_back(best);
      }
    }
  }
  for (const auto& tok : out.tokens) out.text.push_back(charset::decode(tok));
  return out;
}

ParamList Recognizer::parameters() const {
  ParamList p;
  normalizer.collect(p, "normalizer");
  backbone.collect(p, "backbone");
  if (embedder) embedder->collect(p, "semantics");
  if (fusion) fusion->collect(p, "fusion");
  if (cls_proj) cls_proj->collect(p, "cls_proj");
  transformer.collect(p, "transformer");
  return p;
}

}  // namespace sstr
