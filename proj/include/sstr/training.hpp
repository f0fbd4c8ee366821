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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sstr/model.hpp"
#include "sstr/synth.hpp"

namespace sstr {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t eval_every = 200;
  std::size_t max_iters = 3000;
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  double lr_floor = 1e-6;
  std::size_t early_stop_patience = 10;
  std::size_t val_limit = 0;  // evaluate on at most this many samples (0 = all)
  std::string warm_start;     // checkpoint to initialize matching parameters from
};

struct DataConfig {
  std::string train, val, test;  // annotation JSON paths
  std::size_t n_train = 2000, n_val = 200, n_test = 500;  // scene counts for gen-data
  synth::SynthConfig synth;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  TrainConfig train;
  ModelConfig model;

  void validate() const;  // ConfigError
};

// `{seed, data{train,val,test,n_train,n_val,n_test,synth}, train{...},
// normalization, backbone, semantics, fusion, model}`; missing keys keep
// their defaults and unknown top-level keys are rejected.
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);  // IoError / ConfigError

// FNV-1a over the canonical (sorted-key, compact) JSON dump.
std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const nlohmann::json& j);

// Decoupled-weight-decay Adam over a parameter list. Moments are kept per
// parameter name.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  };
  AdamW() = default;
  AdamW(ParamList params, Options opts);

  // Applies one update with the gradients currently stored on the params.
  // Parameters with no gradient are treated as having a zero gradient.
  void step(double lr);
  void zero_grad();

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const ParamList& params() const { return params_; }
  std::vector<real>& first_moment(std::size_t i) { return m_[i]; }
  std::vector<real>& second_moment(std::size_t i) { return v_[i]; }
  const std::vector<real>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<real>& second_moment(std::size_t i) const { return v_[i]; }
  const Options& options() const { return opts_; }

 private:
  ParamList params_;
  Options opts_;
  std::vector<std::vector<real>> m_, v_;
  std::uint64_t t_ = 0;
};

// Global L2 norm of all gradients; scales them down to max_norm if larger.
double clip_grad_norm(const ParamList& params, double max_norm);

// Multiplies the rate by `factor` once the monitored value has failed to
// improve for `patience` consecutive observations (then starts counting
// again); never goes below `floor`.
class PlateauScheduler {
 public:
  enum class Direction { kMinimize, kMaximize };
  PlateauScheduler(double lr, std::size_t patience, double factor, double floor,
                   Direction dir = Direction::kMinimize);

  double observe(double metric);  // returns the rate to use next
  double lr() const { return lr_; }
  std::size_t bad_count() const { return bad_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_, floor_;
  Direction dir_;
  std::optional<double> best_;
  std::size_t bad_ = 0;
};

struct CheckpointMeta {
  std::uint64_t iter = 0;
  double val_acc = 0;
  std::string config_hash;
  std::uint64_t adam_steps = 0;
};

struct Checkpoint {
  nlohmann::json config;  // full experiment config
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // parameters, then "adam.m/..", "adam.v/.." moments
};

// Binary layout (little-endian):
//   "SSTR1" | u64 len | config JSON | u64 len | meta JSON | u32 count |
//   count x { u32 name_len | name | u32 ndim | ndim x u64 dim | float32 data }
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // IoError / FormatError

// Snapshot of a model (and optionally its optimizer state).
Checkpoint make_checkpoint(const nlohmann::json& config, const Recognizer& model, const AdamW* opt, CheckpointMeta meta);

// Copies tensors whose names and shapes match into the model; returns the
// number of parameters restored. With `strict`, every model parameter must
// be present.
std::size_t load_parameters(const Checkpoint& ckpt, const Recognizer& model, bool strict);
void restore_optimizer(const Checkpoint& ckpt, AdamW& opt);

// Model built from the checkpoint's config with its weights loaded.
Recognizer model_from_checkpoint(const Checkpoint& ckpt);

struct LogRow {
  std::size_t iter = 0;
  double loss = 0;
  double val_acc = 0;
  double lr = 0;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

std::string format_log_csv(const std::vector<LogRow>& rows);
void write_log_csv(const std::string& path, const std::vector<LogRow>& rows);

struct TrainResult {
  Checkpoint best;
  std::vector<LogRow> log;
  std::size_t iterations = 0;
  bool early_stopped = false;
};

struct TrainHooks {
  std::function<void(const LogRow&)> on_eval;
};

// Vocabulary of every tag attached to the samples, sorted.
std::vector<std::string> collect_tag_vocabulary(const std::vector<Sample>& samples);

// Teacher-forced cross-entropy training with periodic validation, plateau
// LR schedule on the training loss, early stopping on validation accuracy,
// and best-checkpoint tracking. If out_dir is nonempty, writes
// best.ckpt, last.ckpt and log.csv there.
TrainResult train(const ExperimentConfig& cfg, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir = "", const TrainHooks& hooks = {});

}  // namespace sstr
