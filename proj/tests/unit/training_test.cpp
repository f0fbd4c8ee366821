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

#include "sstr/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sstr/errors.hpp"
#include "sstr/eval.hpp"
#include "test_util.hpp"

namespace sstr {
namespace {

using testing::TempDir;
namespace fs = std::filesystem;

ExperimentConfig tiny_experiment(FusionPlacement placement = FusionPlacement::kPreEncoder) {
  ExperimentConfig c;
  c.seed = 5;
  c.model.backbone.feature_dim = 16;
  c.model.transformer.dim = 16;
  c.model.transformer.heads = 2;
  c.model.transformer.n_enc = 1;
  c.model.transformer.n_dec = 1;
  c.model.transformer.ff = 32;
  c.model.embed_dim = 8;
  c.model.fusion_hidden = 8;
  c.model.placement = placement;
  c.model.semantics = placement == FusionPlacement::kNone ? AssignmentMode::kNone : AssignmentMode::kOverlap;
  c.train.batch_size = 4;
  c.train.eval_every = 3;
  c.train.max_iters = 6;
  c.train.lr = 1e-3;
  return c;
}

std::vector<Sample> make_samples(std::uint64_t seed, std::size_t scenes) {
  std::vector<Sample> out;
  for (const auto& s : synth::generate_dataset(seed, scenes, synth::SynthConfig())) {
    for (auto& x : crop_samples(s, AssignmentMode::kOverlap)) out.push_back(std::move(x));
  }
  return out;
}

const std::vector<Sample>& train_samples() {
  static const auto s = make_samples(1, 6);
  return s;
}
const std::vector<Sample>& val_samples() {
  static const auto s = make_samples(2, 3);
  return s;
}

TEST(Plateau, HalvesOnceAfterPatiencePlusOneFlatEvals) {
  PlateauScheduler s(1e-3, 3, 0.5, 1e-6);
  EXPECT_EQ(s.observe(1.0), 1e-3);  // first value is the best so far
  EXPECT_EQ(s.observe(1.0), 1e-3);
  EXPECT_EQ(s.observe(1.0), 1e-3);
  EXPECT_EQ(s.observe(1.0), 5e-4);  // fourth flat evaluation
  EXPECT_EQ(s.bad_count(), 0u);
  EXPECT_EQ(s.observe(1.0), 5e-4);
}

TEST(Plateau, ImprovementResetsAndFloorHolds) {
  PlateauScheduler s(1e-3, 2, 0.1, 5e-5);
  s.observe(1.0);
  s.observe(2.0);
  s.observe(0.5);  // improvement
  EXPECT_EQ(s.bad_count(), 0u);
  s.observe(0.6);
  EXPECT_NEAR(s.observe(0.6), 1e-4, 1e-18);
  s.observe(0.7);
  EXPECT_EQ(s.observe(0.7), 5e-5);
  PlateauScheduler up(1.0, 1, 0.5, 0, PlateauScheduler::Direction::kMaximize);
  up.observe(10);
  EXPECT_EQ(up.observe(11), 1.0);
  EXPECT_EQ(up.observe(5), 0.5);
}

TEST(Hashing, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  const std::string h = config_hash(experiment_to_json(tiny_experiment()));
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, config_hash(experiment_to_json(tiny_experiment())));
  EXPECT_NE(h, config_hash(experiment_to_json(tiny_experiment(FusionPlacement::kNone))));
}

TEST(ExperimentConfig, JsonRoundTripAndUnknownKeys) {
  const ExperimentConfig a = tiny_experiment(FusionPlacement::kPostDecoder);
  const nlohmann::json j = experiment_to_json(a);
  EXPECT_EQ(experiment_to_json(experiment_from_json(j)), j);
  nlohmann::json bad = j;
  bad["train"]["learning_rate"] = 0.1;
  EXPECT_THROW(experiment_from_json(bad), ConfigError);
  bad = j;
  bad["extras"] = 1;
  EXPECT_THROW(experiment_from_json(bad), ConfigError);
  ExperimentConfig c = a;
  c.train.plateau_factor = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ExperimentConfig, LoadResolvesRelativePaths) {
  TempDir dir("cfg");
  fs::create_directories(dir.file("sub"));
  std::ofstream(dir.file("sub/exp.json")) << R"({"seed": 9, "data": {"train": "d/train.json"}, "train": {"lr": 0.002}})";
  const ExperimentConfig c = load_experiment(dir.file("sub/exp.json"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.lr, 0.002);
  EXPECT_EQ(fs::path(c.data.train), fs::path(dir.file("sub")) / "d/train.json");
  EXPECT_THROW(load_experiment(dir.file("none.json")), IoError);
  std::ofstream(dir.file("broken.json")) << "{";
  EXPECT_THROW(load_experiment(dir.file("broken.json")), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("ckpt");
  const ExperimentConfig cfg = tiny_experiment(FusionPlacement::kPreMemory);
  ExperimentConfig filled = cfg;
  filled.model.tag_vocabulary = collect_tag_vocabulary(train_samples());
  Rng rng(3);
  const Recognizer model(filled.model, rng);
  AdamW opt(model.parameters(), {});
  opt.set_steps(17);
  opt.first_moment(0)[0] = 0.25f;
  const Checkpoint a = make_checkpoint(experiment_to_json(filled), model, &opt, {42, 61.5, "abc", 0});
  save_checkpoint(dir.file("m.ckpt"), a);
  const Checkpoint b = load_checkpoint(dir.file("m.ckpt"));
  EXPECT_EQ(b.meta.iter, 42u);
  EXPECT_EQ(b.meta.val_acc, 61.5);
  EXPECT_EQ(b.meta.config_hash, "abc");
  EXPECT_EQ(b.meta.adam_steps, 17u);
  EXPECT_EQ(b.config, a.config);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  EXPECT_EQ(a.tensors.size(), 3 * model.parameters().size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    EXPECT_EQ(a.tensors[i].first, b.tensors[i].first);
    ASSERT_EQ(a.tensors[i].second.shape(), b.tensors[i].second.shape());
    for (std::size_t k = 0; k < a.tensors[i].second.size(); ++k) ASSERT_EQ(a.tensors[i].second[k], b.tensors[i].second[k]);
  }
  // A restored model decodes identically.
  const Recognizer restored = model_from_checkpoint(b);
  const std::size_t idx[] = {0, 1};
  const Batch batch = make_batch(train_samples(), idx);
  const Tensor la = model.forward(batch, RunMode{}), lb = restored.forward(batch, RunMode{});
  for (std::size_t k = 0; k < la.size(); ++k) ASSERT_EQ(la[k], lb[k]);
  AdamW opt2(restored.parameters(), {});
  restore_optimizer(b, opt2);
  EXPECT_EQ(opt2.first_moment(0)[0], 0.25f);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  TempDir dir("ckpt_bad");
  std::ofstream(dir.file("magic.ckpt")) << "NOPE1 and more bytes";
  EXPECT_THROW(load_checkpoint(dir.file("magic.ckpt")), FormatError);
  EXPECT_THROW(load_checkpoint(dir.file("absent.ckpt")), IoError);

  Rng rng(4);
  const ExperimentConfig cfg = tiny_experiment(FusionPlacement::kNone);
  const Recognizer model(cfg.model, rng);
  save_checkpoint(dir.file("ok.ckpt"), make_checkpoint(experiment_to_json(cfg), model, nullptr, {}));
  const auto size = fs::file_size(dir.file("ok.ckpt"));
  fs::copy_file(dir.file("ok.ckpt"), dir.file("cut.ckpt"));
  fs::resize_file(dir.file("cut.ckpt"), size - 100);
  EXPECT_THROW(load_checkpoint(dir.file("cut.ckpt")), FormatError);
  fs::resize_file(dir.file("cut.ckpt"), 8);
  EXPECT_THROW(load_checkpoint(dir.file("cut.ckpt")), FormatError);
}

TEST(Checkpoint, StrictLoadRequiresEveryParameter) {
  Rng rng(5);
  const ExperimentConfig base = tiny_experiment(FusionPlacement::kNone);
  ExperimentConfig sem = tiny_experiment(FusionPlacement::kPreDecoder);
  sem.model.tag_vocabulary = {"clock", "menu"};
  const Recognizer plain(base.model, rng), semantic(sem.model, rng);
  const Checkpoint c = make_checkpoint(experiment_to_json(base), plain, nullptr, {});
  EXPECT_THROW(load_parameters(c, semantic, true), FormatError);
  // Non-strict loading fills the shared parameters only.
  EXPECT_EQ(load_parameters(c, semantic, false), plain.parameters().size());
  EXPECT_EQ(semantic.backbone.convs[0].weight[3], plain.backbone.convs[0].weight[3]);
}

TEST(LogCsv, HeaderAndRows) {
  const std::string csv = format_log_csv({{250, 0.5, 12.25, 1e-3}, {500, 0.125, 50, 5e-4}});
  EXPECT_EQ(csv, "iter,loss,val_acc,lr\n250,0.5,12.25,0.001\n500,0.125,50,0.0005\n");
}

TEST(Train, DeterministicForSeedAndWritesArtifacts) {
  TempDir d1("train1"), d2("train2");
  const ExperimentConfig cfg = tiny_experiment();
  const TrainResult a = train(cfg, train_samples(), val_samples(), d1.path());
  const TrainResult b = train(cfg, train_samples(), val_samples(), d2.path());
  ASSERT_EQ(a.log, b.log);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log[0].iter, 3u);
  EXPECT_EQ(a.log[1].iter, 6u);
  EXPECT_EQ(a.iterations, 6u);
  ASSERT_EQ(a.best.tensors.size(), b.best.tensors.size());
  for (std::size_t i = 0; i < a.best.tensors.size(); ++i) {
    for (std::size_t k = 0; k < a.best.tensors[i].second.size(); ++k) {
      ASSERT_EQ(a.best.tensors[i].second[k], b.best.tensors[i].second[k]) << a.best.tensors[i].first;
    }
  }
  for (const char* f : {"best.ckpt", "last.ckpt", "log.csv"}) EXPECT_TRUE(fs::exists(d1.file(f))) << f;
  std::ifstream log(d1.file("log.csv"));
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "iter,loss,val_acc,lr");
  EXPECT_EQ(load_checkpoint(d1.file("last.ckpt")).meta.iter, 6u);
}

TEST(Train, BestCheckpointHoldsTheBestValidationAccuracy) {
  ExperimentConfig cfg = tiny_experiment(FusionPlacement::kNone);
  cfg.train.max_iters = 12;
  cfg.train.eval_every = 2;
  cfg.train.lr = 3e-3;
  const TrainResult r = train(cfg, train_samples(), val_samples());
  double best = -1;
  std::size_t best_iter = 0;
  for (const auto& row : r.log) {
    if (row.val_acc > best) {
      best = row.val_acc;
      best_iter = row.iter;
    }
  }
  EXPECT_EQ(r.best.meta.val_acc, best);
  EXPECT_EQ(r.best.meta.iter, best_iter);
  EXPECT_EQ(r.best.meta.config_hash, config_hash(r.best.config));
  // The stored weights reproduce the stored accuracy.
  const Recognizer m = model_from_checkpoint(r.best);
  EXPECT_EQ(evaluate(m, val_samples()).accuracy, best);
}

TEST(Train, ZeroIterationsEvaluatesOnce) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.train.max_iters = 0;
  const TrainResult r = train(cfg, train_samples(), val_samples());
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].iter, 0u);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(std::isfinite(r.log[0].loss));
  EXPECT_EQ(r.best.meta.iter, 0u);
  // Untrained weights equal a fresh model built from the same seed.
  Rng rng(cfg.seed);
  ExperimentConfig filled = cfg;
  filled.model.tag_vocabulary = collect_tag_vocabulary(train_samples());
  const Recognizer fresh(filled.model, rng);
  const auto params = fresh.parameters();
  EXPECT_EQ(r.best.tensors[0].first, params[0].name);
  for (std::size_t k = 0; k < params[0].tensor.size(); ++k) ASSERT_EQ(r.best.tensors[0].second[k], params[0].tensor[k]);
}

TEST(Train, EarlyStopsAfterPatienceWithoutImprovement) {
  ExperimentConfig cfg = tiny_experiment(FusionPlacement::kNone);
  cfg.train.max_iters = 60;
  cfg.train.eval_every = 1;
  cfg.train.lr = 1e-9;  // nothing changes, so accuracy never improves
  cfg.train.early_stop_patience = 2;
  const TrainResult r = train(cfg, train_samples(), val_samples());
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.log.size(), 3u);
}

TEST(Train, NonFiniteLossWritesDiagnostic) {
  TempDir dir("nan");
  std::vector<Sample> poisoned = train_samples();
  for (auto& s : poisoned) s.image.pixels[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train(tiny_experiment(), poisoned, val_samples(), dir.path()), NumericalError);
  std::ifstream in(dir.file("diagnostic.json"));
  ASSERT_TRUE(in.good());
  const nlohmann::json d = nlohmann::json::parse(in);
  EXPECT_EQ(d["iter"], 1);
  EXPECT_EQ(d["loss"], "nan");
  EXPECT_EQ(d["batch"].size(), 4u);
  EXPECT_EQ(d["config_hash"].get<std::string>().size(), 16u);
}

TEST(Train, EmptySetsAreInputErrors) {
  EXPECT_THROW(train(tiny_experiment(), {}, val_samples()), InputError);
  EXPECT_THROW(train(tiny_experiment(), train_samples(), {}), InputError);
}

TEST(Vocabulary, SortedUniqueTagsOfTrainingSet) {
  const auto v = collect_tag_vocabulary(train_samples());
  EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
  EXPECT_EQ(std::adjacent_find(v.begin(), v.end()), v.end());
  EXPECT_FALSE(v.empty());
}

}  // namespace
}  // namespace sstr
