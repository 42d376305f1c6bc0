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


#ifndef CCG_CLI_H_
#define CCG_CLI_H_

// Command-line front end: gen-data, train, eval, score, ablate.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
// failure.

#include <cstdint>
#include <string>
#include <vector>

#include "ccg/metrics.h"
#include "ccg/mlo.h"
#include "ccg/synth_task.h"
#include "json.hpp"

namespace ccg {

// Settings of the synthetic data generator.
struct DataConfig {
  std::uint64_t world_seed = 0;
  WorldConfig world;
  DatasetCounts counts;
};

// Keys "world_seed", "num_train", "num_triplets", "num_iid",
// "blacklist_size" overlaid on `base`.
DataConfig DataConfigFromJson(const nlohmann::json& doc, DataConfig base = {});
nlohmann::json DataConfigToJson(const DataConfig& config);

struct Corpus {
  World world;
  Datasets data;
};

// The world depends only on world_seed; the datasets on `seed`.
Corpus GenerateCorpus(const DataConfig& config, std::uint64_t seed);

// "yes" when the predicted probability is at least 0.5.
Predictions PredictAnswers(const CompositionModel& model,
                           const std::vector<Sample>& samples,
                           const Vocabulary& vocab);

// Test-set metrics plus held-out IID accuracy when `iid` is non-empty.
EvalReport EvaluateModel(const CompositionModel& model, const Corpus& corpus);

struct AblationCell {
  TrainMode mode = TrainMode::kBaseline;
  std::optional<MetaOrder> order;  // unset for modes without an order
  std::uint64_t seed = 0;
  EvalReport report;
};

// The four compared configurations in table order.
std::vector<TrainConfig> AblationConfigs(const TrainConfig& base);

// Trains and evaluates every configuration on every seed; rows are sorted by
// (mode, order, seed).
std::vector<AblationCell> RunAblation(const TrainConfig& base,
                                      const DataConfig& data,
                                      const std::vector<std::uint64_t>& seeds);

std::string AblationCsv(const std::vector<AblationCell>& cells);
nlohmann::json AblationJson(const std::vector<AblationCell>& cells,
                            const TrainConfig& base, const DataConfig& data);

int Dispatch(int argc, const char* const* argv);

}  // namespace ccg

#endif  // CCG_CLI_H_
