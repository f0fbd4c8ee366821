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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "sstr/errors.hpp"
#include "sstr/eval.hpp"

namespace sstr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[] = "SSTR1";
constexpr std::size_t kMagicLen = 5;

json train_to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"eval_every", t.eval_every},
              {"max_iters", t.max_iters},
              {"lr", t.lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"eps", t.eps},
              {"weight_decay", t.weight_decay},
              {"grad_clip", t.grad_clip},
              {"plateau_patience", t.plateau_patience},
              {"plateau_factor", t.plateau_factor},
              {"lr_floor", t.lr_floor},
              {"early_stop_patience", t.early_stop_patience},
              {"val_limit", t.val_limit},
              {"warm_start", t.warm_start}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) j.at(key).get_to(out);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

TrainConfig train_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config section 'train' must be an object");
  check_keys(j,
             {"batch_size", "eval_every", "max_iters", "lr", "beta1", "beta2", "eps", "weight_decay", "grad_clip",
              "plateau_patience", "plateau_factor", "lr_floor", "early_stop_patience", "val_limit", "warm_start"},
             "train");
  TrainConfig t;
  read_opt(j, "batch_size", t.batch_size);
  read_opt(j, "eval_every", t.eval_every);
  read_opt(j, "max_iters", t.max_iters);
  read_opt(j, "lr", t.lr);
  read_opt(j, "beta1", t.beta1);
  read_opt(j, "beta2", t.beta2);
  read_opt(j, "eps", t.eps);
  read_opt(j, "weight_decay", t.weight_decay);
  read_opt(j, "grad_clip", t.grad_clip);
  read_opt(j, "plateau_patience", t.plateau_patience);
  read_opt(j, "plateau_factor", t.plateau_factor);
  read_opt(j, "lr_floor", t.lr_floor);
  read_opt(j, "early_stop_patience", t.early_stop_patience);
  read_opt(j, "val_limit", t.val_limit);
  read_opt(j, "warm_start", t.warm_start);
  return t;
}

DataConfig data_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config section 'data' must be an object");
  check_keys(j, {"train", "val", "test", "n_train", "n_val", "n_test", "synth"}, "data");
  DataConfig d;
  read_opt(j, "train", d.train);
  read_opt(j, "val", d.val);
  read_opt(j, "test", d.test);
  read_opt(j, "n_train", d.n_train);
  read_opt(j, "n_val", d.n_val);
  read_opt(j, "n_test", d.n_test);
  if (j.contains("synth")) d.synth = j.at("synth").get<synth::SynthConfig>();
  return d;
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError(path + ": truncated checkpoint");
  return v;
}

std::string read_bytes(std::istream& in, std::uint64_t n, const std::string& path) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError(path + ": truncated checkpoint");
  return s;
}

Tensor vector_tensor(const Shape& shape, const std::vector<real>& values) { return Tensor::from(shape, values); }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  const TrainConfig& t = train;
  if (t.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (t.eval_every == 0) throw ConfigError("train.eval_every must be positive");
  if (!(t.lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(t.beta1 >= 0 && t.beta1 < 1) || !(t.beta2 >= 0 && t.beta2 < 1)) throw ConfigError("train.beta1/beta2 must be in [0, 1)");
  if (!(t.eps > 0)) throw ConfigError("train.eps must be positive");
  if (!(t.weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(t.grad_clip >= 0)) throw ConfigError("train.grad_clip must be non-negative");
  if (!(t.plateau_factor > 0 && t.plateau_factor < 1)) throw ConfigError("train.plateau_factor must be in (0, 1)");
  if (t.plateau_patience == 0) throw ConfigError("train.plateau_patience must be positive");
  if (!(t.lr_floor >= 0)) throw ConfigError("train.lr_floor must be non-negative");
  if (t.early_stop_patience == 0) throw ConfigError("train.early_stop_patience must be positive");
  model.validate();
}

json experiment_to_json(const ExperimentConfig& c) {
  json j = model_config_to_json(c.model);
  j["seed"] = c.seed;
  j["data"] = {{"train", c.data.train}, {"val", c.data.val},       {"test", c.data.test},
               {"n_train", c.data.n_train}, {"n_val", c.data.n_val}, {"n_test", c.data.n_test},
               {"synth", c.data.synth}};
  j["train"] = train_to_json(c.train);
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  check_keys(j, {"seed", "data", "train", "normalization", "backbone", "semantics", "fusion", "model"}, "the config");
  ExperimentConfig c;
  try {
    read_opt(j, "seed", c.seed);
    if (j.contains("data")) c.data = data_from_json(j.at("data"));
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.model = model_config_from_json(j);
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  ExperimentConfig c = experiment_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.data.train, &c.data.val, &c.data.test, &c.train.warm_start, &c.model.frozen_path}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

AdamW::AdamW(ParamList params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), real(0));
    v_.emplace_back(p.tensor.size(), real(0));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = opts_.beta1, b2 = opts_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * opts_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    auto w = p.mutable_data();
    const auto g = p.grad();
    const bool has_grad = p.has_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = has_grad ? static_cast<double>(g[k]) : 0.0;
      double wk = static_cast<double>(w[k]) * decay;
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<real>(mk);
      v[k] = static_cast<real>(vk);
      wk -= lr * (mk / c1) / (std::sqrt(vk / c2) + opts_.eps);
      w[k] = static_cast<real>(wk);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    for (real g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-6);
    for (const auto& p : params) {
      Tensor t = p.tensor;
      if (!t.has_grad()) continue;
      for (real& g : t.mutable_grad()) g = static_cast<real>(g * s);
    }
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double factor, double floor, Direction dir)
    : lr_(lr), patience_(patience), factor_(factor), floor_(floor), dir_(dir) {}

double PlateauScheduler::observe(double metric) {
  const bool better = !best_ || (dir_ == Direction::kMinimize ? metric < *best_ : metric > *best_);
  if (better) {
    best_ = metric;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ = std::max(floor_, lr_ * factor_);
    bad_ = 0;
  }
  return lr_;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, kMagicLen);
  const std::string cfg = ckpt.config.dump();
  write_u64(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const std::string meta = json{{"iter", ckpt.meta.iter},
                                {"val_acc", ckpt.meta.val_acc},
                                {"config_hash", ckpt.meta.config_hash},
                                {"adam_steps", ckpt.meta.adam_steps}}
                               .dump();
  write_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) write_u64(out, d);
    std::vector<float> buf(t.data().begin(), t.data().end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) throw FormatError(path + ": not a checkpoint (bad magic)");
  Checkpoint ck;
  try {
    ck.config = json::parse(read_bytes(in, read_pod<std::uint64_t>(in, path), path));
    const json meta = json::parse(read_bytes(in, read_pod<std::uint64_t>(in, path), path));
    ck.meta.iter = meta.value("iter", std::uint64_t{0});
    ck.meta.val_acc = meta.value("val_acc", 0.0);
    ck.meta.config_hash = meta.value("config_hash", std::string());
    ck.meta.adam_steps = meta.value("adam_steps", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw FormatError(path + ": corrupt checkpoint header: " + e.what());
  }
  const auto count = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_bytes(in, read_pod<std::uint32_t>(in, path), path);
    const auto ndim = read_pod<std::uint32_t>(in, path);
    if (ndim > 8) throw FormatError(path + ": tensor '" + name + "' has " + std::to_string(ndim) + " dimensions");
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(read_pod<std::uint64_t>(in, path));
    const std::size_t n = numel(shape);
    if (n > (std::size_t{1} << 32)) throw FormatError(path + ": tensor '" + name + "' is implausibly large");
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw FormatError(path + ": truncated checkpoint");
    ck.tensors.emplace_back(std::move(name), Tensor::from(shape, std::vector<real>(buf.begin(), buf.end())));
  }
  return ck;
}

Checkpoint make_checkpoint(const json& config, const Recognizer& model, const AdamW* opt, CheckpointMeta meta) {
  Checkpoint ck;
  ck.config = config;
  const ParamList params = model.parameters();
  for (const auto& p : params) ck.tensors.emplace_back(p.name, p.tensor.detach().clone());
  if (opt) {
    meta.adam_steps = opt->steps();
    const AdamW& o = *opt;
    for (std::size_t i = 0; i < o.params().size(); ++i) {
      const auto& p = o.params()[i];
      ck.tensors.emplace_back("adam.m/" + p.name, vector_tensor(p.tensor.shape(), o.first_moment(i)));
      ck.tensors.emplace_back("adam.v/" + p.name, vector_tensor(p.tensor.shape(), o.second_moment(i)));
    }
  }
  ck.meta = meta;
  return ck;
}

std::size_t load_parameters(const Checkpoint& ckpt, const Recognizer& model, bool strict) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name.emplace(name, &t);
  std::size_t restored = 0;
  for (const auto& p : model.parameters()) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end() || it->second->shape() != p.tensor.shape()) {
      if (strict) {
        throw FormatError(it == by_name.end() ? "checkpoint lacks parameter '" + p.name + "'"
                                              : "checkpoint parameter '" + p.name + "' has shape " +
                                                    shape_str(it->second->shape()) + ", model expects " +
                                                    shape_str(p.tensor.shape()));
      }
      continue;
    }
    Tensor dst = p.tensor;
    std::copy(it->second->data().begin(), it->second->data().end(), dst.mutable_data().begin());
    ++restored;
  }
  return restored;
}

void restore_optimizer(const Checkpoint& ckpt, AdamW& opt) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name.emplace(name, &t);
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const std::string& name = opt.params()[i].name;
    const auto m = by_name.find("adam.m/" + name);
    const auto v = by_name.find("adam.v/" + name);
    if (m == by_name.end() || v == by_name.end()) throw FormatError("checkpoint lacks optimizer state for '" + name + "'");
    if (m->second->size() != opt.first_moment(i).size() || v->second->size() != opt.second_moment(i).size()) {
      throw FormatError("optimizer state for '" + name + "' has the wrong size");
    }
    std::copy(m->second->data().begin(), m->second->data().end(), opt.first_moment(i).begin());
    std::copy(v->second->data().begin(), v->second->data().end(), opt.second_moment(i).begin());
  }
  opt.set_steps(ckpt.meta.adam_steps);
}

Recognizer model_from_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig cfg = model_config_from_json(ckpt.config);
  Rng rng(0);
  Recognizer model(cfg, rng);
  load_parameters(ckpt, model, true);
  return model;
}

std::string format_log_csv(const std::vector<LogRow>& rows) {
  std::ostringstream out;
  out << "iter,loss,val_acc,lr\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << format_number(r.loss) << ',' << format_number(r.val_acc) << ',' << format_number(r.lr) << '\n';
  }
  return out.str();
}

void write_log_csv(const std::string& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << format_log_csv(rows);
}

std::vector<std::string> collect_tag_vocabulary(const std::vector<Sample>& samples) {
  std::set<std::string> tags;
  for (const auto& s : samples) {
    for (const auto& t : s.tags) tags.insert(t.tag);
  }
  return {tags.begin(), tags.end()};
}

TrainResult train(const ExperimentConfig& cfg_in, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir, const TrainHooks& hooks) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.model.semantic() && cfg.model.frozen_path.empty() && cfg.model.tag_vocabulary.empty()) {
    cfg.model.tag_vocabulary = collect_tag_vocabulary(train_set);
  }
  cfg.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (val_set.empty()) throw InputError("validation set is empty");
  const TrainConfig& tc = cfg.train;
  const json config_json = experiment_to_json(cfg);
  const std::string hash = config_hash(config_json);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  Rng init_rng(cfg.seed);
  Recognizer model(cfg.model, init_rng);
  if (!tc.warm_start.empty()) load_parameters(load_checkpoint(tc.warm_start), model, false);
  AdamW opt(model.parameters(), {tc.beta1, tc.beta2, tc.eps, tc.weight_decay});
  PlateauScheduler sched(tc.lr, tc.plateau_patience, tc.plateau_factor, tc.lr_floor);

  std::vector<Sample> val(val_set.begin(),
                          val_set.begin() + static_cast<std::ptrdiff_t>(tc.val_limit ? std::min(tc.val_limit, val_set.size()) : val_set.size()));

  Rng shuffle_rng(cfg.seed ^ 0x5348554646ULL);
  Rng dropout_rng(cfg.seed ^ 0x44524f50ULL);
  RunMode train_mode;
  train_mode.dropout_rng = &dropout_rng;
  train_mode.dropout = cfg.model.transformer.dropout;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainResult result;
  double best_acc = -1;
  std::size_t since_best = 0;
  double loss_sum = 0;
  std::size_t loss_n = 0;
  double lr = tc.lr;

  const auto run_eval = [&](std::size_t iter, double mean_loss) -> bool {
    const double acc = evaluate(model, val).accuracy;
    LogRow row{iter, mean_loss, acc, lr};
    result.log.push_back(row);
    if (hooks.on_eval) hooks.on_eval(row);
    if (acc > best_acc) {
      best_acc = acc;
      since_best = 0;
      result.best = make_checkpoint(config_json, model, &opt, {iter, acc, hash, 0});
      if (!out_dir.empty()) save_checkpoint(out_dir + "/best.ckpt", result.best);
    } else {
      ++since_best;
    }
    if (!out_dir.empty()) write_log_csv(out_dir + "/log.csv", result.log);
    lr = sched.observe(mean_loss);
    return since_best >= tc.early_stop_patience;
  };

  if (tc.max_iters == 0) {
    // Evaluation only; the logged loss is the validation loss.
    double vl = 0;
    for (std::size_t s = 0; s < val.size(); s += tc.batch_size) {
      std::vector<std::size_t> idx(std::min(tc.batch_size, val.size() - s));
      std::iota(idx.begin(), idx.end(), s);
      vl += static_cast<double>(model.loss(make_batch(val, idx), RunMode{}).item()) * static_cast<double>(idx.size());
    }
    run_eval(0, vl / static_cast<double>(val.size()));
  }

  for (std::size_t iter = 1; iter <= tc.max_iters; ++iter) {
    std::vector<std::size_t> idx;
    while (idx.size() < tc.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
      if (idx.size() == train_set.size()) break;
    }
    const Batch batch = make_batch(train_set, idx);
    double loss_value = 0;
    {
      Tape tape;
      const Tensor loss = model.loss(batch, train_mode);
      loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        if (!out_dir.empty()) {
          std::ofstream diag(out_dir + "/diagnostic.json");
          diag << json{{"iter", iter}, {"loss", std::isnan(loss_value) ? "nan" : "inf"}, {"lr", lr}, {"config_hash", hash},
                       {"batch", [&] {
                          json ids = json::array();
                          for (std::size_t i : idx) ids.push_back(train_set[i].id);
                          return ids;
                        }()}}
                      .dump(1)
               << '\n';
        }
        throw NumericalError("training loss became non-finite at iteration " + std::to_string(iter) +
                             " (lr " + format_number(lr) + "); try a lower train.lr or train.grad_clip");
      }
      tape.backward(loss);
    }
    clip_grad_norm(opt.params(), tc.grad_clip);
    opt.step(lr);
    opt.zero_grad();
    loss_sum += loss_value;
    ++loss_n;
    result.iterations = iter;

    if (iter % tc.eval_every == 0 || iter == tc.max_iters) {
      const bool stop = run_eval(iter, loss_sum / static_cast<double>(loss_n));
      loss_sum = 0;
      loss_n = 0;
      if (stop) {
        result.early_stopped = true;
        break;
      }
    }
  }

  if (!out_dir.empty()) {
    save_checkpoint(out_dir + "/last.ckpt",
                    make_checkpoint(config_json, model, &opt, {result.iterations, result.log.back().val_acc, hash, 0}));
  }
  return result;
}

}  // namespace sstr
