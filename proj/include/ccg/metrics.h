/*
 * Copyright 2026 The CCG Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CCG_METRICS_H_
#define CCG_METRICS_H_

// Accuracy per novelty level and triplet consistency: the fraction of
// triplets whose pp, pw and ww members are all answered correctly.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccg/synth_task.h"
#include "json.hpp"

namespace ccg {

// Sample id -> predicted answer.
using Predictions = std::unordered_map<std::string, std::string>;

// Ground truth for one evaluated sample.
struct LabeledItem {
  std::string id;
  Level level = Level::kTrain;
  std::optional<std::string> triplet_id;
  std::string answer;
};

// Trimmed, lower-cased form used for answer comparison.
std::string NormalizeAnswer(const std::string& answer);
inline std::string BoolAnswer(bool value) { return value ? "yes" : "no"; }

int Correctness(bool prediction, bool answer);
int Correctness(const std::string& prediction, const std::string& answer);

std::vector<LabeledItem> LabeledItemsFrom(const std::vector<Sample>& samples);

// Throws DataError if a prediction is missing, UsageError if the level has
// no samples.
double LevelAccuracy(const Predictions& predictions,
                     const std::vector<LabeledItem>& items, Level level);

struct ConsistencyResult {
  double value = 0.0;
  std::size_t triplet_count = 0;
};

// Throws DataError naming the triplet when a member is absent from `items`
// or lacks a prediction; UsageError if there are no triplets.
ConsistencyResult Consistency(const Predictions& predictions,
                              const std::vector<LabeledItem>& items);

struct EvalReport {
  double overall_accuracy = 0.0;
  double accuracy_pp = 0.0;
  double accuracy_pw = 0.0;
  double accuracy_ww = 0.0;
  double consistency = 0.0;
  std::size_t triplet_count = 0;
  std::size_t count_pp = 0;
  std::size_t count_pw = 0;
  std::size_t count_ww = 0;
  // Accuracy on in-distribution held-out samples, when evaluated.
  std::optional<double> iid_accuracy;

  bool operator==(const EvalReport&) const = default;
};

EvalReport Evaluate(const Predictions& predictions,
                    const std::vector<LabeledItem>& items);

// Report fields plus `config` (embedded for provenance).
nlohmann::json ReportToJson(const EvalReport& report,
                            const nlohmann::json& config);
EvalReport ReportFromJson(const nlohmann::json& doc);
// "metric,value" header then one row per metric.
std::string ReportCsv(const EvalReport& report);
// Writes JSON and, when csv_path is non-empty, CSV.
void EmitReport(const EvalReport& report, const nlohmann::json& config,
                const std::string& json_path, const std::string& csv_path);

// JSON-lines {"id": str, "answer": str|bool}.
Predictions LoadPredictions(const std::string& path);
// JSON-lines with at least {"id","level","triplet_id","answer"}; the full
// dataset schema is accepted as well.
std::vector<LabeledItem> LoadLabeledItems(const std::string& path);

}  // namespace ccg

#endif  // CCG_METRICS_H_
