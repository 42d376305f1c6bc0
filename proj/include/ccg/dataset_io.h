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

#ifndef CCG_DATASET_IO_H_
#define CCG_DATASET_IO_H_

// JSON-lines dataset files (one Sample per line) and the world/vocabulary
// file. Unknown per-record fields are kept and written back.

#include <iosfwd>
#include <string>
#include <vector>

#include "ccg/synth_task.h"
#include "json.hpp"

namespace ccg {

inline constexpr int kSchemaVersion = 1;

nlohmann::json SampleToJson(const Sample& sample);
// Throws DataError describing the first schema violation.
Sample SampleFromJson(const nlohmann::json& record, const Vocabulary& vocab);

// One compact JSON object per line, keys in sorted order.
std::string SerializeDataset(const std::vector<Sample>& samples);
void WriteDataset(const std::string& path, const std::vector<Sample>& samples);

// `source` names the input in error messages ("<source>:<line>: ...").
std::vector<Sample> ParseDataset(std::istream& in, const Vocabulary& vocab,
                                 const std::string& source);
std::vector<Sample> LoadDataset(const std::string& path,
                                const Vocabulary& vocab);

// {"sizes":[...], "colors":[...], "shapes":[...], "blacklist":[[shape,color],...],
//  "world_config":{...}}
nlohmann::json WorldToJson(const World& world);
World WorldFromJson(const nlohmann::json& doc);

nlohmann::json ReadJsonFile(const std::string& path);
void WriteJsonFile(const std::string& path, const nlohmann::json& doc);
void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace ccg

#endif  // CCG_DATASET_IO_H_
