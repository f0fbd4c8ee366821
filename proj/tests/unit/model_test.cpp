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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"
#include "sstr/synth.hpp"
#include "test_util.hpp"

namespace sstr {
namespace {

using testing::random_tensor;

ModelConfig small_config(FusionPlacement placement) {
  ModelConfig c;
  c.backbone.feature_dim = 16;
  c.transformer.dim = 16;
  c.transformer.heads = 2;
  c.transformer.n_enc = 1;
  c.transformer.n_dec = 1;
  c.transformer.ff = 32;
  c.embed_dim = 8;
  c.fusion_hidden = 12;
  c.placement = placement;
  if (placement != FusionPlacement::kNone) {
    c.semantics = AssignmentMode::kOverlap;
    c.tag_vocabulary = synth::default_tags();
  }
  return c;
}

const std::vector<Sample>& samples() {
  static const std::vector<Sample> s = [] {
    std::vector<Sample> out;
    for (const auto& scene : synth::generate_dataset(21, 12, synth::SynthConfig())) {
      for (auto& x : crop_samples(scene, AssignmentMode::kScene)) out.push_back(std::move(x));
    }
    return out;
  }();
  return s;
}

const std::vector<FusionPlacement> kSemanticPlacements = {FusionPlacement::kPreEncoder, FusionPlacement::kPreDecoder,
                                                          FusionPlacement::kPostDecoder, FusionPlacement::kClsToken,
                                                          FusionPlacement::kPreMemory};

TEST(Transformer, CausalMaskShape) {
  const Tensor m = causal_mask(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (j > i) {
        EXPECT_LT(m[i * 4 + j], -1e8);
      } else {
        EXPECT_EQ(m[i * 4 + j], 0);
      }
    }
  }
}

TEST(Transformer, SinusoidalPositionClosedForm) {
  const Tensor pe = positional_encoding(30, 16);
  for (std::size_t p : {0u, 1u, 7u, 29u}) {
    for (std::size_t i = 0; i < 16; i += 2) {
      const double a = p / std::pow(10000.0, i / 16.0);
      EXPECT_NEAR(pe[p * 16 + i], std::sin(a), 1e-6);
      EXPECT_NEAR(pe[p * 16 + i + 1], std::cos(a), 1e-6);
    }
  }
}

TEST(Transformer, AttentionRowsSumToOneAndRespectMask) {
  Rng rng(1);
  const MultiHeadAttention mha(8, 2, 8, rng);
  const Tensor x = random_tensor({2, 5, 8}, rng, -1, 1);
  Tensor w;
  mha(x, x, causal_mask(5), &w);
  ASSERT_EQ(w.shape(), (Shape{2, 5, 5}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        const real v = w[(b * 5 + i) * 5 + j];
        if (j > i) EXPECT_EQ(v, 0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1, 1e-5);
    }
  }
}

TEST(Transformer, DecoderIsCausal) {
  Rng rng(2);
  TransformerConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  const Transformer tf(cfg, charset::kMaxSteps, rng);
  const Tensor memory = random_tensor({1, 26, 16}, rng, -1, 1);
  std::vector<int> a = {charset::kGo, 3, 4, 5, 6, 7}, b = a;
  b[4] = 20;
  b[5] = 30;
  const Tensor sa = tf.decode(memory, a, 6, Tensor(), Tensor(), RunMode{});
  const Tensor sb = tf.decode(memory, b, 6, Tensor(), Tensor(), RunMode{});
  for (std::size_t t = 0; t < 6; ++t) {
    double diff = 0;
    for (std::size_t k = 0; k < 16; ++k) diff += std::abs(sa[t * 16 + k] - sb[t * 16 + k]);
    if (t < 4) {
      EXPECT_EQ(diff, 0) << t;
    } else {
      EXPECT_GT(diff, 0) << t;
    }
  }
}

TEST(Transformer, TooManyStepsIsLengthError) {
  Rng rng(3);
  TransformerConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  const Transformer tf(cfg, charset::kMaxSteps, rng);
  const std::vector<int> tokens(27, 1);
  EXPECT_THROW(tf.decode(Tensor::zeros({1, 26, 8}), tokens, 27, Tensor(), Tensor(), RunMode{}), LengthError);
}

TEST(Recognizer, BatchOfOneMatchesBatched) {
  for (auto placement : {FusionPlacement::kNone, FusionPlacement::kPreEncoder, FusionPlacement::kClsToken,
                         FusionPlacement::kPreMemory}) {
    Rng rng(4);
    const Recognizer model(small_config(placement), rng);
    const std::size_t idx[] = {0, 1, 2};
    const Batch three = make_batch(samples(), idx);
    const Tensor all = model.forward(three, RunMode{});
    for (std::size_t i = 0; i < 3; ++i) {
      const Tensor one = model.forward(make_batch(samples(), std::span<const std::size_t>(&idx[i], 1)), RunMode{});
      const std::size_t n = one.size();
      for (std::size_t k = 0; k < n; ++k) ASSERT_NEAR(one[k], all[i * n + k], 1e-4) << to_string(placement);
    }
  }
}

TEST(Recognizer, GreedyAgreesWithTeacherForcing) {
  for (auto placement : {FusionPlacement::kNone, FusionPlacement::kPostDecoder, FusionPlacement::kPreMemory}) {
    Rng rng(5);
    const Recognizer model(small_config(placement), rng);
    const std::size_t idx[] = {3, 4};
    const Batch batch = make_batch(samples(), idx);
    const Decoded out = model.greedy_decode(batch.images, batch.tags);
    for (std::size_t i = 0; i < 2; ++i) {
      Sample forced = samples()[idx[i]];
      forced.target = out.tokens[i];
      forced.target.push_back(charset::kEos);
      forced.target.resize(std::min(forced.target.size(), charset::kMaxSteps));
      const Tensor logits = model.forward(make_batch({forced}), RunMode{});
      for (std::size_t t = 0; t < out.tokens[i].size(); ++t) {
        int best = 0;
        for (int k = 1; k < charset::kSize; ++k) {
          if (k == charset::kGo || k == charset::kPad) continue;
          if (logits[t * charset::kSize + k] > logits[t * charset::kSize + best]) best = k;
        }
        EXPECT_EQ(best, out.tokens[i][t]) << to_string(placement) << " step " << t;
      }
    }
  }
}

TEST(Recognizer, ImmediateEosGivesEmptyString) {
  Rng rng(6);
  Recognizer model(small_config(FusionPlacement::kNone), rng);
  model.transformer.classifier.bias.mutable_data()[charset::kEos] = 1e4;
  const std::size_t idx[] = {0, 1};
  const Batch batch = make_batch(samples(), idx);
  const Decoded out = model.greedy_decode(batch.images, batch.tags);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(out.tokens[i].empty());
    EXPECT_EQ(out.text[i], "");
  }
}

TEST(Recognizer, DecodingStopsAfter26Steps) {
  Rng rng(7);
  Recognizer model(small_config(FusionPlacement::kNone), rng);
  auto bias = model.transformer.classifier.bias.mutable_data();
  bias[charset::kEos] = -1e4;
  bias[12] = 1e4;
  const std::size_t idx[] = {0};
  const Batch batch = make_batch(samples(), idx);
  const Decoded out = model.greedy_decode(batch.images, batch.tags);
  EXPECT_EQ(out.tokens[0].size(), charset::kMaxSteps);
  EXPECT_EQ(out.text[0], std::string(charset::kMaxSteps, 'c'));
  const auto enc = model.encode(batch.images, batch.tags, RunMode{});
  const std::vector<int> prefix(27, charset::kGo);
  EXPECT_THROW(model.decode_step(enc, prefix, 27), LengthError);
}

TEST(Recognizer, NoPlacementIgnoresTagsBitwise) {
  Rng rng(8);
  const Recognizer model(small_config(FusionPlacement::kNone), rng);
  const std::size_t idx[] = {0, 1};
  Batch with = make_batch(samples(), idx), without = with;
  for (auto& t : without.tags) t.clear();
  with.tags[0] = {{"clock", 1.0}, {"menu", 0.5}};
  const Tensor a = model.forward(with, RunMode{}), b = model.forward(without, RunMode{});
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k], b[k]);
  EXPECT_FALSE(model.embedder.has_value());
  EXPECT_FALSE(model.fusion.has_value());
}

TEST(Recognizer, EverySemanticPlacementReactsToTags) {
  for (auto placement : kSemanticPlacements) {
    Rng rng(9);
    const Recognizer model(small_config(placement), rng);
    const std::size_t idx[] = {0};
    Batch a = make_batch(samples(), idx), b = a;
    a.tags[0] = {{"clock", 1.0}};
    b.tags[0] = {{"menu", 1.0}, {"jersey", 0.4}};
    ForwardTrace trace;
    const Tensor la = model.forward(a, RunMode{}, &trace), lb = model.forward(b, RunMode{});
    double diff = 0;
    for (std::size_t k = 0; k < la.size(); ++k) diff += std::abs(la[k] - lb[k]);
    EXPECT_GT(diff, 1e-4) << to_string(placement);
    ASSERT_TRUE(trace.semantic.defined());
    EXPECT_EQ(trace.semantic.shape(), (Shape{1, kSemanticSlots, 8}));
    if (uses_fusion_net(placement)) {
      EXPECT_TRUE(trace.relevancy.defined()) << to_string(placement);
    }
    if (placement == FusionPlacement::kPreMemory) {
      EXPECT_EQ(trace.memory_attention.shape(), (Shape{1, charset::kMaxSteps, kSemanticSlots}));
    }
  }
}

TEST(Recognizer, ClsTokenWithAllPaddingIsProjectionBias) {
  Rng rng(10);
  const Recognizer model(small_config(FusionPlacement::kClsToken), rng);
  const std::size_t idx[] = {0};
  Batch batch = make_batch(samples(), idx);
  batch.tags[0].clear();
  const auto enc = model.encode(batch.images, batch.tags, RunMode{});
  ASSERT_EQ(enc.start.shape(), (Shape{1, 16}));
  for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(enc.start[k], model.cls_proj->bias[k], 1e-7);
  const Tensor logits = model.forward(batch, RunMode{});
  for (std::size_t k = 0; k < logits.size(); ++k) ASSERT_TRUE(std::isfinite(logits[k]));
}

TEST(Recognizer, ParametersHaveUniqueNames) {
  for (auto placement : kSemanticPlacements) {
    Rng rng(11);
    const Recognizer model(small_config(placement), rng);
    std::set<std::string> names;
    for (const auto& p : model.parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  }
}

TEST(Recognizer, ConfigValidation) {
  ModelConfig c = small_config(FusionPlacement::kPreEncoder);
  c.semantics = AssignmentMode::kNone;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(FusionPlacement::kNone);
  c.transformer.dim = 32;
  EXPECT_THROW(c.validate(), ConfigError);
  const ModelConfig d = small_config(FusionPlacement::kPostDecoder);
  const ModelConfig e = model_config_from_json(model_config_to_json(d));
  EXPECT_EQ(model_config_to_json(e), model_config_to_json(d));
}

TEST(Recognizer, TeacherForcedLossIsFiniteAndNearUniformAtInit) {
  Rng rng(12);
  const Recognizer model(small_config(FusionPlacement::kPreEncoder), rng);
  const std::size_t idx[] = {0, 1, 2, 3};
  const real l = model.loss(make_batch(samples(), idx), RunMode{}).item();
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, std::log(39.0), 1.5);
}

}  // namespace
}  // namespace sstr
