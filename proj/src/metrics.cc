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

#include "ccg/metrics.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "ccg/dataset_io.h"
#include "ccg/errors.h"

namespace ccg {
namespace {

using nlohmann::json;

const std::string& Lookup(const Predictions& predictions,
                          const LabeledItem& item) {
  auto it = predictions.find(item.id);
  if (it == predictions.end()) {
    std::string msg = "missing prediction for sample " + item.id;
    if (item.triplet_id) msg += " (triplet " + *item.triplet_id + ")";
    throw DataError(msg);
  }
  return it->second;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string AnswerString(const json& value, const std::string& where) {
  if (value.is_boolean()) return BoolAnswer(value.get<bool>());
  if (value.is_string()) return value.get<std::string>();
  throw DataError(where + ": \"answer\" must be a string or boolean");
}

template <typename F>
void ForEachJsonLine(const std::string& path, F f) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) throw DataError(where + ": expected an object");
    f(record, where);
  }
}

}  // namespace

std::string NormalizeAnswer(const std::string& answer) {
  const auto begin = answer.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = answer.find_last_not_of(" \t\r\n");
  std::string out = answer.substr(begin, end - begin + 1);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

int Correctness(bool prediction, bool answer) {
  return prediction == answer ? 1 : 0;
}

int Correctness(const std::string& prediction, const std::string& answer) {
  return NormalizeAnswer(prediction) == NormalizeAnswer(answer) ? 1 : 0;
}

std::vector<LabeledItem> LabeledItemsFrom(const std::vector<Sample>& samples) {
  std::vector<LabeledItem> items;
  items.reserve(samples.size());
  for (const Sample& s : samples) {
    items.push_back({s.id, s.level, s.triplet_id, BoolAnswer(s.answer)});
  }
  return items;
}

double LevelAccuracy(const Predictions& predictions,
                     const std::vector<LabeledItem>& items, Level level) {
  std::size_t n = 0;
  std::size_t correct = 0;
  for (const LabeledItem& item : items) {
    if (item.level != level) continue;
    ++n;
    correct += static_cast<std::size_t>(
        Correctness(Lookup(predictions, item), item.answer));
  }
  if (n == 0) {
    throw UsageError(std::string("no samples at level ") + LevelName(level));
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

ConsistencyResult Consistency(const Predictions& predictions,
                              const std::vector<LabeledItem>& items) {
  struct Members {
    const LabeledItem* pp = nullptr;
    const LabeledItem* pw = nullptr;
    const LabeledItem* ww = nullptr;
  };
  std::map<std::string, Members> triplets;
  for (const LabeledItem& item : items) {
    if (!item.triplet_id) continue;
    Members& m = triplets[*item.triplet_id];
    switch (item.level) {
      case Level::kPhrasePhrase:
        m.pp = &item;
        break;
      case Level::kPhraseWord:
        m.pw = &item;
        break;
      case Level::kWordWord:
        m.ww = &item;
        break;
      case Level::kTrain:
        break;
    }
  }
  if (triplets.empty()) throw UsageError("no triplets to score");
  std::size_t consistent = 0;
  for (const auto& [tid, m] : triplets) {
    if (!m.pp || !m.pw || !m.ww) throw DataError("incomplete triplet " + tid);
    consistent += static_cast<std::size_t>(
        Correctness(Lookup(predictions, *m.pp), m.pp->answer) *
        Correctness(Lookup(predictions, *m.pw), m.pw->answer) *
        Correctness(Lookup(predictions, *m.ww), m.ww->answer));
  }
  return {static_cast<double>(consistent) / static_cast<double>(triplets.size()),
          triplets.size()};
}

EvalReport Evaluate(const Predictions& predictions,
                    const std::vector<LabeledItem>& items) {
  EvalReport report;
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  for (const LabeledItem& item : items) {
    if (item.level == Level::kTrain) continue;
    ++evaluated;
    correct += static_cast<std::size_t>(
        Correctness(Lookup(predictions, item), item.answer));
    report.count_pp += item.level == Level::kPhrasePhrase;
    report.count_pw += item.level == Level::kPhraseWord;
    report.count_ww += item.level == Level::kWordWord;
  }
  if (evaluated == 0) throw UsageError("no pp/pw/ww samples to evaluate");
  report.overall_accuracy =
      static_cast<double>(correct) / static_cast<double>(evaluated);
  report.accuracy_pp = LevelAccuracy(predictions, items, Level::kPhrasePhrase);
  report.accuracy_pw = LevelAccuracy(predictions, items, Level::kPhraseWord);
  report.accuracy_ww = LevelAccuracy(predictions, items, Level::kWordWord);
  const ConsistencyResult cons = Consistency(predictions, items);
  report.consistency = cons.value;
  report.triplet_count = cons.triplet_count;
  return report;
}

json ReportToJson(const EvalReport& report, const json& config) {
  json doc = {{"overall_accuracy", report.overall_accuracy},
              {"accuracy", {{"pp", report.accuracy_pp},
                            {"pw", report.accuracy_pw},
                            {"ww", report.accuracy_ww}}},
              {"consistency", report.consistency},
              {"triplet_count", report.triplet_count},
              {"sample_counts", {{"pp", report.count_pp},
                                 {"pw", report.count_pw},
                                 {"ww", report.count_ww}}},
              {"config", config}};
  if (report.iid_accuracy) doc["iid_accuracy"] = *report.iid_accuracy;
  return doc;
}

EvalReport ReportFromJson(const json& doc) {
  try {
    EvalReport r;
    r.overall_accuracy = doc.at("overall_accuracy").get<double>();
    r.accuracy_pp = doc.at("accuracy").at("pp").get<double>();
    r.accuracy_pw = doc.at("accuracy").at("pw").get<double>();
    r.accuracy_ww = doc.at("accuracy").at("ww").get<double>();
    r.consistency = doc.at("consistency").get<double>();
    r.triplet_count = doc.at("triplet_count").get<std::size_t>();
    r.count_pp = doc.at("sample_counts").at("pp").get<std::size_t>();
    r.count_pw = doc.at("sample_counts").at("pw").get<std::size_t>();
    r.count_ww = doc.at("sample_counts").at("ww").get<std::size_t>();
    if (auto it = doc.find("iid_accuracy"); it != doc.end()) {
      r.iid_accuracy = it->get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string ReportCsv(const EvalReport& report) {
  std::string csv = "metric,value\n";
  csv += "overall_accuracy," + FormatDouble(report.overall_accuracy) + "\n";
  csv += "accuracy_pp," + FormatDouble(report.accuracy_pp) + "\n";
  csv += "accuracy_pw," + FormatDouble(report.accuracy_pw) + "\n";
  csv += "accuracy_ww," + FormatDouble(report.accuracy_ww) + "\n";
  csv += "consistency," + FormatDouble(report.consistency) + "\n";
  csv += "triplet_count," + std::to_string(report.triplet_count) + "\n";
  if (report.iid_accuracy) {
    csv += "iid_accuracy," + FormatDouble(*report.iid_accuracy) + "\n";
  }
  return csv;
}

void EmitReport(const EvalReport& report, const json& config,
                const std::string& json_path, const std::string& csv_path) {
  WriteJsonFile(json_path, ReportToJson(report, config));
  if (!csv_path.empty()) WriteTextFile(csv_path, ReportCsv(report));
}

Predictions LoadPredictions(const std::string& path) {
  Predictions predictions;
  ForEachJsonLine(path, [&](const json& record, const std::string& where) {
    auto id = record.find("id");
    auto answer = record.find("answer");
    if (id == record.end() || !id->is_string()) {
      throw DataError(where + ": missing string \"id\"");
    }
    if (answer == record.end()) throw DataError(where + ": missing \"answer\"");
    predictions[id->get<std::string>()] = AnswerString(*answer, where);
  });
  return predictions;
}

std::vector<LabeledItem> LoadLabeledItems(const std::string& path) {
  std::vector<LabeledItem> items;
  ForEachJsonLine(path, [&](const json& record, const std::string& where) {
    LabeledItem item;
    auto id = record.find("id");
    if (id == record.end() || !id->is_string()) {
      throw DataError(where + ": missing string \"id\"");
    }
    item.id = id->get<std::string>();
    auto level = record.find("level");
    const auto parsed = level != record.end() && level->is_string()
                            ? ParseLevel(level->get<std::string>())
                            : std::nullopt;
    if (!parsed) throw DataError(where + ": missing or invalid \"level\"");
    item.level = *parsed;
    if (auto tid = record.find("triplet_id");
        tid != record.end() && !tid->is_null()) {
      if (!tid->is_string()) {
        throw DataError(where + ": \"triplet_id\" must be string|null");
      }
      item.triplet_id = tid->get<std::string>();
    }
    auto answer = record.find("answer");
    if (answer == record.end()) throw DataError(where + ": missing \"answer\"");
    item.answer = AnswerString(*answer, where);
    items.push_back(std::move(item));
  });
  return items;
}

}  // namespace ccg
