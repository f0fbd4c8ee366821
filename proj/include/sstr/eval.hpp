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

// Word-level metrics, baseline/candidate comparison, and relevancy dumps.

#include <string>
#include <vector>

#include <json.hpp>

#include "sstr/model.hpp"

namespace sstr {

// Case-insensitive exact-match rate in percent. InputError on length
// mismatch or empty input.
double word_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts);

bool word_match(const std::string& pred, const std::string& gt);

struct EvalRecord {
  std::string id;
  std::string gt;
  std::string pred;
  bool correct = false;
  bool occluded = false;
  int word_class = -1;
  // Mean-over-columns relevancy per semantic slot (empty without fusion).
  std::vector<double> relevancy;
  std::size_t valid_slots = 0;
};

struct EvalResult {
  std::vector<EvalRecord> records;
  double accuracy = 0;           // percent, over all records
  double occluded_accuracy = 0;  // percent over occluded records (0 if none)
  std::size_t occluded_count = 0;

  // Recomputes the aggregates from the records.
  void finalize();
};

void to_json(nlohmann::json& j, const EvalResult& r);
void from_json(const nlohmann::json& j, EvalResult& r);
EvalResult load_eval_result(const std::string& path);
void save_eval_result(const std::string& path, const EvalResult& r);

// Greedy-decodes every sample in batches.
EvalResult evaluate(const Recognizer& model, const std::vector<Sample>& samples, std::size_t batch_size = 64);

struct SubsetCounts {
  std::size_t total = 0;
  std::size_t baseline_correct = 0;
  std::size_t candidate_correct = 0;
};

struct ComparisonReport {
  std::size_t samples = 0;
  std::size_t corrected = 0;  // candidate right, baseline wrong
  std::size_t broken = 0;     // candidate wrong, baseline right
  long long net = 0;          // corrected - broken
  std::size_t baseline_failures = 0;
  std::size_t baseline_successes = 0;
  double correction_rate = 0;  // corrected / baseline_failures, percent
  double break_rate = 0;       // broken / baseline_successes, percent
  double baseline_accuracy = 0;
  double candidate_accuracy = 0;
  SubsetCounts occluded;
};

// InputError unless both results cover the same sample ids.
ComparisonReport compare(const EvalResult& baseline, const EvalResult& candidate);
void to_json(nlohmann::json& j, const ComparisonReport& r);

struct AttentionRow {
  std::string tag;
  double weight = 0;
};

struct AttentionReport {
  std::string sample_id;
  std::string prediction;
  std::vector<AttentionRow> objects;  // top 5 by weight
  double other = 0;                   // sum over objects beyond the top 5
  double padding = 0;                 // total weight on padding slots
};

inline constexpr std::size_t kAttentionTopK = 5;

// Builds the report from per-slot weights (already averaged over columns).
AttentionReport summarize_attention(const std::vector<TagWeight>& tags, const std::vector<double>& slot_weights);

// Per-slot relevancy of one sample. ConfigError for placement none.
std::vector<double> slot_relevancy(const Recognizer& model, const Sample& sample, std::string* prediction = nullptr);
AttentionReport dump_attention(const Recognizer& model, const Sample& sample);
void to_json(nlohmann::json& j, const AttentionReport& r);

struct RunSummary {
  std::string path;
  double accuracy = 0;
};

struct AggregateReport {
  std::vector<RunSummary> runs;  // sorted by accuracy
  RunSummary median;             // lower median for an even count
};

AggregateReport aggregate_runs(std::vector<RunSummary> runs);
void to_json(nlohmann::json& j, const AggregateReport& r);

// Median of a nonempty list (mean of the middle pair for even counts).
double median(std::vector<double> values);

}  // namespace sstr
