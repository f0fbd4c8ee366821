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

#include "sstr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "sstr/errors.hpp"
#include "sstr/eval.hpp"
#include "sstr/training.hpp"

namespace sstr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad invocation detected after parsing (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "Experiment config JSON")->required();
  cmd->add_option("--seed", c.seed, "Overrides the config seed");
  auto* o = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) o->required();
}

ExperimentConfig load_config(const Common& c) {
  if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
  ExperimentConfig cfg = load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void ensure_out(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(1) << '\n';
}

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<Sample> load_split(const std::string& path, const std::string& split, AssignmentMode mode, std::ostream& err) {
  if (path.empty()) throw ConfigError("data." + split + " is not set in the config");
  LoadReport rep = load_annotations(path);
  std::vector<std::string> warnings = rep.warnings;
  std::vector<Sample> samples = crop_all(rep.scenes, mode, &warnings);
  if (rep.skipped || !warnings.empty()) {
    err << path << ": skipped " << rep.skipped << " malformed records, " << warnings.size() << " warnings\n";
  }
  if (samples.empty()) throw InputError(path + " yields no usable text samples");
  return samples;
}

std::string split_path(const ExperimentConfig& cfg, const std::string& split) {
  if (split == "train") return cfg.data.train;
  if (split == "val") return cfg.data.val;
  if (split == "test") return cfg.data.test;
  throw UsageError("--split must be train, val or test");
}

std::vector<TagWeight> parse_tags(const std::string& list) {
  std::vector<TagWeight> tags;
  std::size_t pos = 0;
  while (pos < list.size()) {
    const std::size_t end = std::min(list.find(',', pos), list.size());
    const std::string item = list.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    TagWeight t;
    const std::size_t colon = item.find(':');
    t.tag = item.substr(0, colon);
    if (colon != std::string::npos) {
      try {
        t.weight = std::stod(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw UsageError("bad tag weight in '" + item + "'");
      }
    }
    std::transform(t.tag.begin(), t.tag.end(), t.tag.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    tags.push_back(t);
  }
  return tags;
}

int cmd_gen_data(const Common& c, std::ostream& out) {
  ExperimentConfig cfg = load_config(c);
  ensure_out(c.out);
  const struct {
    const char* name;
    std::size_t count;
    std::string* path;
  } splits[] = {{"train", cfg.data.n_train, &cfg.data.train},
                {"val", cfg.data.n_val, &cfg.data.val},
                {"test", cfg.data.n_test, &cfg.data.test}};
  std::uint64_t k = 0;
  for (const auto& s : splits) {
    const std::uint64_t split_seed = cfg.seed * 3 + k++;
    std::vector<SceneAnnotation> scenes = synth::generate_dataset(split_seed, s.count, cfg.data.synth, std::string(s.name) + "_");
    const fs::path dir = fs::path(c.out) / s.name;
    fs::create_directories(dir);
    save_annotations((dir / "annotations.json").string(), scenes);
    std::size_t words = 0;
    for (const auto& sc : scenes) words += sc.texts.size();
    *s.path = (fs::path(s.name) / "annotations.json").string();
    out << s.name << ": " << scenes.size() << " scenes, " << words << " words\n";
  }
  // A config that points at the generated splits.
  write_json((fs::path(c.out) / "config.json").string(), experiment_to_json(cfg));
  return kExitOk;
}

int cmd_train(const Common& c, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(c);
  const std::vector<Sample> tr = load_split(cfg.data.train, "train", cfg.model.semantics, err);
  const std::vector<Sample> va = load_split(cfg.data.val, "val", cfg.model.semantics, err);
  TrainHooks hooks;
  hooks.on_eval = [&](const LogRow& r) {
    out << "iter " << r.iter << " loss " << fmt(r.loss, 4) << " val_acc " << fmt(r.val_acc) << " lr " << r.lr << '\n';
    out.flush();
  };
  ensure_out(c.out);
  const TrainResult res = train(cfg, tr, va, c.out, hooks);
  write_json((fs::path(c.out) / "config.json").string(), res.best.config);
  out << "best val_acc " << fmt(res.best.meta.val_acc) << " at iter " << res.best.meta.iter
      << (res.early_stopped ? " (early stop)" : "") << '\n';
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& ckpt_path, const std::string& split, const std::string& data,
             std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(c);
  const Recognizer model = model_from_checkpoint(load_checkpoint(ckpt_path));
  const std::string path = data.empty() ? split_path(cfg, split) : data;
  const std::vector<Sample> samples = load_split(path, split, model.config().semantics, err);
  const EvalResult res = evaluate(model, samples);
  ensure_out(c.out);
  save_eval_result((fs::path(c.out) / "eval.json").string(), res);
  std::size_t ok = 0;
  for (const auto& r : res.records) ok += r.correct;
  out << "accuracy " << fmt(res.accuracy) << " (" << ok << "/" << res.records.size() << ")\n";
  out << "occluded accuracy " << fmt(res.occluded_accuracy) << " (" << res.occluded_count << " occluded)\n";
  return kExitOk;
}

int cmd_infer(const Common& c, const std::string& ckpt_path, const std::string& image, const std::string& tags,
              std::ostream& out) {
  load_config(c);
  const Recognizer model = model_from_checkpoint(load_checkpoint(ckpt_path));
  GrayImage img = read_image(image);
  if (img.width != kCropWidth || img.height != kCropHeight) img = resize_keep_aspect(img, kCropWidth, kCropHeight);
  const Decoded dec = model.greedy_decode(images_tensor({&img}), {parse_tags(tags)});
  out << dec.text[0] << '\n';
  if (!c.out.empty()) {
    ensure_out(c.out);
    write_json((fs::path(c.out) / "infer.json").string(), json{{"image", image}, {"prediction", dec.text[0]}});
  }
  return kExitOk;
}

int cmd_compare(const Common& c, const std::string& base, const std::string& cand, std::ostream& out) {
  load_config(c);
  const ComparisonReport rep = compare(load_eval_result(base), load_eval_result(cand));
  ensure_out(c.out);
  write_json((fs::path(c.out) / "compare.json").string(), json(rep));
  out << "corrected " << rep.corrected << " broken " << rep.broken << " net " << rep.net << '\n';
  out << "correction rate " << fmt(rep.correction_rate) << " (" << rep.corrected << "/" << rep.baseline_failures << ")\n";
  out << "accuracy " << fmt(rep.baseline_accuracy) << " -> " << fmt(rep.candidate_accuracy) << '\n';
  return kExitOk;
}

int cmd_dump_attention(const Common& c, const std::string& ckpt_path, const std::string& split, const std::string& sample_id,
                       std::size_t limit, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(c);
  const Recognizer model = model_from_checkpoint(load_checkpoint(ckpt_path));
  if (model.config().placement == FusionPlacement::kNone) {
    throw ConfigError("dump-attention needs a model with a semantic fusion placement; " + ckpt_path + " uses placement 'none'");
  }
  const std::vector<Sample> samples = load_split(split_path(cfg, split), split, model.config().semantics, err);
  json reports = json::array();
  for (const auto& s : samples) {
    if (!sample_id.empty() && s.id != sample_id) continue;
    reports.push_back(json(dump_attention(model, s)));
    if (sample_id.empty() && reports.size() >= limit) break;
  }
  if (!sample_id.empty() && reports.empty()) throw InputError("no sample with id '" + sample_id + "'");
  ensure_out(c.out);
  write_json((fs::path(c.out) / "attention.json").string(), reports);
  out << "wrote " << reports.size() << " attention reports\n";
  return kExitOk;
}

int cmd_aggregate(const Common& c, const std::vector<std::string>& runs, std::ostream& out) {
  load_config(c);
  std::vector<RunSummary> summaries;
  for (const auto& r : runs) {
    const fs::path eval_path = fs::path(r) / "eval.json";
    const fs::path ckpt_path = fs::path(r) / "best.ckpt";
    if (fs::exists(eval_path)) {
      summaries.push_back({r, load_eval_result(eval_path.string()).accuracy});
    } else if (fs::exists(ckpt_path)) {
      summaries.push_back({r, load_checkpoint(ckpt_path.string()).meta.val_acc});
    } else {
      throw IoError(r + " has neither eval.json nor best.ckpt");
    }
  }
  const AggregateReport rep = aggregate_runs(summaries);
  ensure_out(c.out);
  write_json((fs::path(c.out) / "aggregate.json").string(), json(rep));
  out << "median " << rep.median.path << " accuracy " << fmt(rep.median.accuracy) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene text recognition with object-tag semantics", "sstr"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, split = "test", data, image, tags, baseline, candidate, sample_id;
  std::size_t limit = 20;
  std::vector<std::string> runs;

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic train/val/test scenes");
  add_common(gen, common, true);
  auto* trn = app.add_subcommand("train", "Train a recognizer");
  add_common(trn, common, true);
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(evl, common, true);
  evl->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evl->add_option("--split", split, "train, val or test");
  evl->add_option("--data", data, "Annotation file overriding the split");
  auto* inf = app.add_subcommand("infer", "Recognize one cropped word image");
  add_common(inf, common, false);
  inf->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  inf->add_option("--image", image, "PGM or PNG word crop")->required();
  inf->add_option("--tags", tags, "Object tags as tag[:weight],...");
  auto* cmp = app.add_subcommand("compare", "Compare two evaluation reports");
  add_common(cmp, common, true);
  cmp->add_option("--baseline", baseline, "Baseline eval.json")->required();
  cmp->add_option("--candidate", candidate, "Candidate eval.json")->required();
  auto* dmp = app.add_subcommand("dump-attention", "Write per-sample object relevancy reports");
  add_common(dmp, common, true);
  dmp->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  dmp->add_option("--split", split, "train, val or test");
  dmp->add_option("--sample", sample_id, "Only this sample id");
  dmp->add_option("--limit", limit, "Number of samples to dump");
  auto* agg = app.add_subcommand("aggregate-runs", "Pick the median-accuracy run across seeds");
  add_common(agg, common, true);
  agg->add_option("--runs", runs, "Run directories")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, out);
    if (trn->parsed()) return cmd_train(common, out, err);
    if (evl->parsed()) return cmd_eval(common, checkpoint, split, data, out, err);
    if (inf->parsed()) return cmd_infer(common, checkpoint, image, tags, out);
    if (cmp->parsed()) return cmd_compare(common, baseline, candidate, out);
    if (dmp->parsed()) return cmd_dump_attention(common, checkpoint, split, sample_id, limit, out, err);
    if (agg->parsed()) return cmd_aggregate(common, runs, out);
  } catch (const UsageError& e) {
    err << "sstr: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "sstr: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sstr
