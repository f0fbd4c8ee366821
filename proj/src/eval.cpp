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

#include "sstr/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "sstr/charset.hpp"
#include "sstr/errors.hpp"

namespace sstr {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double percent(std::size_t num, std::size_t den) {
  return den ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

// Mean over columns of a [1,L,M] weight tensor.
std::vector<double> column_mean(const Tensor& w, std::size_t batch_index) {
  const std::size_t l = w.dim(1), m = w.dim(2);
  std::vector<double> out(m, 0.0);
  const auto d = w.data();
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j] += d[(batch_index * l + i) * m + j];
  }
  for (auto& v : out) v /= static_cast<double>(l);
  return out;
}

}  // namespace

bool word_match(const std::string& pred, const std::string& gt) { return lower(pred) == lower(gt); }

double word_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts) {
  if (preds.size() != gts.size()) {
    throw InputError("word_accuracy: " + std::to_string(preds.size()) + " predictions vs " + std::to_string(gts.size()) + " ground truths");
  }
  if (preds.empty()) throw InputError("word_accuracy needs at least one sample");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += word_match(preds[i], gts[i]) ? 1 : 0;
  return percent(ok, preds.size());
}

void EvalResult::finalize() {
  std::size_t ok = 0, occ = 0, occ_ok = 0;
  for (const auto& r : records) {
    ok += r.correct;
    if (r.occluded) {
      ++occ;
      occ_ok += r.correct;
    }
  }
  accuracy = percent(ok, records.size());
  occluded_count = occ;
  occluded_accuracy = percent(occ_ok, occ);
}

void to_json(json& j, const EvalResult& r) {
  json recs = json::array();
  for (const auto& x : r.records) {
    json o = {{"id", x.id}, {"gt", x.gt}, {"pred", x.pred}, {"correct", x.correct}, {"occluded", x.occluded}, {"word_class", x.word_class}};
    if (!x.relevancy.empty()) {
      o["relevancy"] = x.relevancy;
      o["valid_slots"] = x.valid_slots;
    }
    recs.push_back(std::move(o));
  }
  j = json{{"accuracy", r.accuracy},
           {"occluded_accuracy", r.occluded_accuracy},
           {"occluded_count", r.occluded_count},
           {"samples", r.records.size()},
           {"records", std::move(recs)}};
}

void from_json(const json& j, EvalResult& r) {
  r = EvalResult{};
  for (const auto& o : j.at("records")) {
    EvalRecord x;
    x.id = o.at("id").get<std::string>();
    x.gt = o.at("gt").get<std::string>();
    x.pred = o.at("pred").get<std::string>();
    x.correct = o.at("correct").get<bool>();
    x.occluded = o.value("occluded", false);
    x.word_class = o.value("word_class", -1);
    if (o.contains("relevancy")) o.at("relevancy").get_to(x.relevancy);
    x.valid_slots = o.value("valid_slots", std::size_t{0});
    r.records.push_back(std::move(x));
  }
  r.finalize();
}

EvalResult load_eval_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read evaluation report " + path);
  try {
    json j;
    in >> j;
    return j.get<EvalResult>();
  } catch (const json::exception& e) {
    throw FormatError(path + ": not an evaluation report: " + e.what());
  }
}

void save_eval_result(const std::string& path, const EvalResult& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << json(r).dump(1) << '\n';
}

EvalResult evaluate(const Recognizer& model, const std::vector<Sample>& samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("evaluation batch size must be positive");
  EvalResult result;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - start);
    std::vector<const GrayImage*> imgs;
    std::vector<std::vector<TagWeight>> tags;
    for (std::size_t i = 0; i < n; ++i) {
      imgs.push_back(&samples[start + i].image);
      tags.push_back(samples[start + i].tags);
    }
    const Decoded dec = model.greedy_decode(images_tensor(imgs), tags);
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& s = samples[start + i];
      EvalRecord r;
      r.id = s.id;
      r.gt = s.text;
      r.pred = dec.text[i];
      r.correct = word_match(r.pred, r.gt);
      r.occluded = s.occluded;
      r.word_class = s.word_class;
      if (dec.trace.relevancy.defined()) {
        r.relevancy = column_mean(dec.trace.relevancy, i);
        r.valid_slots = std::min(kSemanticSlots, s.tags.size());
      }
      result.records.push_back(std::move(r));
    }
  }
  result.finalize();
  return result;
}

ComparisonReport compare(const EvalResult& baseline, const EvalResult& candidate) {
  std::map<std::string, const EvalRecord*> base;
  for (const auto& r : baseline.records) {
    if (!base.emplace(r.id, &r).second) throw InputError("duplicate sample id '" + r.id + "' in baseline results");
  }
  if (candidate.records.size() != base.size()) {
    throw InputError("baseline has " + std::to_string(base.size()) + " samples, candidate has " + std::to_string(candidate.records.size()));
  }
  ComparisonReport rep;
  std::set<std::string> seen;
  std::size_t base_ok = 0, cand_ok = 0;
  for (const auto& c : candidate.records) {
    const auto it = base.find(c.id);
    if (it == base.end()) throw InputError("sample '" + c.id + "' is missing from the baseline results");
    if (!seen.insert(c.id).second) throw InputError("duplicate sample id '" + c.id + "' in candidate results");
    const bool b = it->second->correct;
    base_ok += b;
    cand_ok += c.correct;
    if (b) {
      ++rep.baseline_successes;
      if (!c.correct) ++rep.broken;
    } else {
      ++rep.baseline_failures;
      if (c.correct) ++rep.corrected;
    }
    if (c.occluded) {
      ++rep.occluded.total;
      rep.occluded.baseline_correct += b;
      rep.occluded.candidate_correct += c.correct;
    }
  }
  rep.samples = candidate.records.size();
  rep.net = static_cast<long long>(rep.corrected) - static_cast<long long>(rep.broken);
  rep.correction_rate = percent(rep.corrected, rep.baseline_failures);
  rep.break_rate = percent(rep.broken, rep.baseline_successes);
  rep.baseline_accuracy = percent(base_ok, rep.samples);
  rep.candidate_accuracy = percent(cand_ok, rep.samples);
  return rep;
}

void to_json(json& j, const ComparisonReport& r) {
  j = json{{"samples", r.samples},
           {"corrected", r.corrected},
           {"broken", r.broken},
           {"net", r.net},
           {"baseline_failures", r.baseline_failures},
           {"baseline_successes", r.baseline_successes},
           {"correction_rate", r.correction_rate},
           {"break_rate", r.break_rate},
           {"baseline_accuracy", r.baseline_accuracy},
           {"candidate_accuracy", r.candidate_accuracy},
           {"occluded",
            {{"total", r.occluded.total},
             {"baseline_correct", r.occluded.baseline_correct},
             {"candidate_correct", r.occluded.candidate_correct},
             {"baseline_accuracy", percent(r.occluded.baseline_correct, r.occluded.total)},
             {"candidate_accuracy", percent(r.occluded.candidate_correct, r.occluded.total)}}}};
}

AttentionReport summarize_attention(const std::vector<TagWeight>& tags, const std::vector<double>& slot_weights) {
  AttentionReport rep;
  const std::size_t valid = std::min({kSemanticSlots, tags.size(), slot_weights.size()});
  std::vector<AttentionRow> rows;
  for (std::size_t j = 0; j < valid; ++j) rows.push_back({tags[j].tag, slot_weights[j]});
  for (std::size_t j = valid; j < slot_weights.size(); ++j) rep.padding += slot_weights[j];
  std::stable_sort(rows.begin(), rows.end(), [](const AttentionRow& a, const AttentionRow& b) { return a.weight > b.weight; });
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (j < kAttentionTopK) {
      rep.objects.push_back(rows[j]);
    } else {
      rep.other += rows[j].weight;
    }
  }
  return rep;
}

std::vector<double> slot_relevancy(const Recognizer& model, const Sample& sample, std::string* prediction) {
  const FusionPlacement placement = model.config().placement;
  if (placement == FusionPlacement::kNone) {
    throw ConfigError("relevancy dumps need a semantic fusion placement; this model uses placement 'none'");
  }
  const Tensor images = images_tensor({&sample.image});
  const Decoded dec = model.greedy_decode(images, {sample.tags});
  if (prediction) *prediction = dec.text[0];
  if (placement == FusionPlacement::kPreEncoder || placement == FusionPlacement::kPreDecoder) {
    return column_mean(dec.trace.relevancy, 0);
  }
  const std::size_t valid = std::min(kSemanticSlots, sample.tags.size());
  if (placement == FusionPlacement::kClsToken) {
    std::vector<double> w(kSemanticSlots, 0.0);
    if (valid == 0) {
      // The zero pool: all weight sits on padding.
      for (auto& v : w) v = 1.0 / static_cast<double>(kSemanticSlots);
    } else {
      for (std::size_t j = 0; j < valid; ++j) w[j] = 1.0 / static_cast<double>(valid);
    }
    return w;
  }
  // post_decoder / pre_memory weights depend on the decoder input, so
  // re-run the decoder teacher-forced on the prediction.
  Sample forced = sample;
  forced.text = dec.text[0];
  forced.target = charset::encode(forced.text);
  if (forced.target.size() > charset::kMaxSteps) forced.target.resize(charset::kMaxSteps);
  ForwardTrace trace;
  model.forward(make_batch({forced}), RunMode{}, &trace);
  return column_mean(placement == FusionPlacement::kPostDecoder ? trace.relevancy : trace.memory_attention, 0);
}

AttentionReport dump_attention(const Recognizer& model, const Sample& sample) {
  std::string pred;
  const std::vector<double> w = slot_relevancy(model, sample, &pred);
  AttentionReport rep = summarize_attention(sample.tags, w);
  rep.sample_id = sample.id;
  rep.prediction = pred;
  return rep;
}

void to_json(json& j, const AttentionReport& r) {
  json objs = json::array();
  for (const auto& o : r.objects) objs.push_back({{"tag", o.tag}, {"weight", o.weight}});
  j = json{{"sample_id", r.sample_id}, {"prediction", r.prediction}, {"objects", std::move(objs)}, {"other", r.other},
           {"padding", r.padding}};
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AggregateReport aggregate_runs(std::vector<RunSummary> runs) {
  if (runs.empty()) throw InputError("aggregate-runs needs at least one run");
  std::stable_sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) { return a.accuracy < b.accuracy; });
  AggregateReport rep;
  rep.median = runs[(runs.size() - 1) / 2];
  rep.runs = std::move(runs);
  return rep;
}

void to_json(json& j, const AggregateReport& r) {
  json runs = json::array();
  for (const auto& x : r.runs) runs.push_back({{"path", x.path}, {"accuracy", x.accuracy}});
  j = json{{"runs", std::move(runs)}, {"median", {{"path", r.median.path}, {"accuracy", r.median.accuracy}}}};
}

}  // namespace sstr
