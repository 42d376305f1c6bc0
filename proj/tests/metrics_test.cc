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


#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ccg/errors.h"
#include "ccg/metrics.h"
#include "gtest/gtest.h"

namespace ccg {
namespace {

// n triplets t0..t{n-1}, answers drawn from rng.
std::vector<LabeledItem> MakeTriplets(int n, std::mt19937_64& rng) {
  std::vector<LabeledItem> items;
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < n; ++t) {
    const std::string tid = "t" + std::to_string(t);
    for (Level level : {Level::kPhrasePhrase, Level::kPhraseWord, Level::kWordWord}) {
      items.push_back({tid + "-" + LevelName(level), level, tid,
                       BoolAnswer(coin(rng))});
    }
  }
  return items;
}

Predictions AllCorrect(const std::vector<LabeledItem>& items) {
  Predictions p;
  for (const LabeledItem& item : items) p[item.id] = item.answer;
  return p;
}

std::string Flip(const std::string& answer) {
  return answer == "yes" ? "no" : "yes";
}

TEST(CorrectnessTest, Examples) {
  EXPECT_EQ(Correctness(true, true), 1);
  EXPECT_EQ(Correctness(false, true), 0);
  EXPECT_EQ(Correctness(std::string(" Yes"), std::string("yes")), 1);
  EXPECT_EQ(Correctness(std::string("NO\n"), std::string("no")), 1);
  EXPECT_EQ(Correctness(std::string("yes please"), std::string("yes")), 0);
  EXPECT_EQ(NormalizeAnswer("  MaYbE \t"), "maybe");
}

TEST(LevelAccuracyTest, Examples) {
  std::vector<LabeledItem> items;
  Predictions p;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "s" + std::to_string(i);
    items.push_back({id, Level::kWordWord, std::nullopt, "yes"});
    p[id] = i < 5 ? "yes" : "no";
  }
  EXPECT_EQ(LevelAccuracy(p, items, Level::kWordWord), 0.5);
  EXPECT_EQ(LevelAccuracy(AllCorrect(items), items, Level::kWordWord), 1.0);
  EXPECT_THROW(LevelAccuracy(p, items, Level::kPhrasePhrase), UsageError);
  p.erase("s3");
  EXPECT_THROW(LevelAccuracy(p, items, Level::kWordWord), DataError);
}

TEST(ConsistencyTest, AllCorrectIsOne) {
  std::mt19937_64 rng(1);
  const std::vector<LabeledItem> items = MakeTriplets(5, rng);
  const ConsistencyResult c = Consistency(AllCorrect(items), items);
  EXPECT_EQ(c.value, 1.0);
  EXPECT_EQ(c.triplet_count, 5u);
}

TEST(ConsistencyTest, TwoOfThreeTriplets) {
  std::mt19937_64 rng(2);
  const std::vector<LabeledItem> items = MakeTriplets(3, rng);
  Predictions p = AllCorrect(items);
  p["t1-pw"] = Flip(p["t1-pw"]);
  EXPECT_EQ(Consistency(p, items).value, 2.0 / 3.0);
}

TEST(ConsistencyTest, IncompleteTripletIsNamed) {
  std::mt19937_64 rng(3);
  std::vector<LabeledItem> items = MakeTriplets(4, rng);
  const Predictions p = AllCorrect(items);
  items.erase(std::remove_if(items.begin(), items.end(),
                             [](const LabeledItem& i) { return i.id == "t2-ww"; }),
              items.end());
  try {
    Consistency(p, items);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("t2"), std::string::npos) << e.what();
  }
  Predictions missing = AllCorrect(MakeTriplets(4, rng));
  missing.erase("t0-pp");
  EXPECT_THROW(Consistency(missing, MakeTriplets(4, rng)), DataError);
  EXPECT_THROW(Consistency({}, std::vector<LabeledItem>{}), UsageError);
}

// Enumeration oracle written against the raw items.
double EnumeratedConsistency(const Predictions& p,
                             const std::vector<LabeledItem>& items) {
  std::map<std::string, std::vector<const LabeledItem*>> groups;
  for (const LabeledItem& i : items) groups[*i.triplet_id].push_back(&i);
  int good = 0;
  for (const auto& [tid, members] : groups) {
    int prod = 1;
    for (const LabeledItem* m : members) {
      prod *= p.at(m->id) == m->answer ? 1 : 0;
    }
    good += prod;
  }
  return static_cast<double>(good) / static_cast<double>(groups.size());
}

TEST(ConsistencyTest, RandomPredictionSetsMatchOracles) {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution wrong(0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<LabeledItem> items = MakeTriplets(n, rng);
    Predictions p = AllCorrect(items);
    for (auto& [id, answer] : p) {
      if (wrong(rng)) answer = Flip(answer);
    }
    const double expected = EnumeratedConsistency(p, items);
    const EvalReport report = Evaluate(p, items);
    ASSERT_DOUBLE_EQ(report.consistency, expected) << "trial " << trial;

    // Independent recount of every level and the overall rate.
    std::map<Level, std::pair<int, int>> hits;
    int total_hits = 0;
    for (const LabeledItem& i : items) {
      const int ok = p.at(i.id) == i.answer;
      hits[i.level].first += ok;
      ++hits[i.level].second;
      total_hits += ok;
    }
    auto rate = [&](Level l) {
      return static_cast<double>(hits[l].first) / hits[l].second;
    };
    ASSERT_DOUBLE_EQ(report.accuracy_pp, rate(Level::kPhrasePhrase));
    ASSERT_DOUBLE_EQ(report.accuracy_pw, rate(Level::kPhraseWord));
    ASSERT_DOUBLE_EQ(report.accuracy_ww, rate(Level::kWordWord));
    ASSERT_DOUBLE_EQ(report.overall_accuracy,
                     static_cast<double>(total_hits) / items.size());
    EXPECT_EQ(report.count_pp, static_cast<std::size_t>(n));
    EXPECT_EQ(report.triplet_count, static_cast<std::size_t>(n));

    // The indicator product never exceeds any single factor.
    EXPECT_LE(report.consistency, report.accuracy_pp);
    EXPECT_LE(report.consistency, report.accuracy_pw);
    EXPECT_LE(report.consistency, report.accuracy_ww);

    // Sample order does not matter.
    std::shuffle(items.begin(), items.end(), rng);
    ASSERT_EQ(Evaluate(p, items), report);
  }
}

TEST(ConsistencyTest, SingleFlipCostsOneTriplet) {
  std::mt19937_64 rng(5);
  const int n = 8;
  const std::vector<LabeledItem> items = MakeTriplets(n, rng);
  for (const LabeledItem& item : items) {
    Predictions p = AllCorrect(items);
    p[item.id] = Flip(p[item.id]);
    EXPECT_DOUBLE_EQ(Consistency(p, items).value, 1.0 - 1.0 / n) << item.id;
  }
}

TEST(ReportTest, JsonRoundTripAndCsv) {
  EvalReport r;
  r.overall_accuracy = 0.7;
  r.accuracy_pp = 0.1 + 0.2;
  r.accuracy_pw = 2.0 / 3.0;
  r.accuracy_ww = 1.0;
  r.consistency = 0.25;
  r.triplet_count = 4;
  r.count_pp = r.count_pw = r.count_ww = 4;
  const nlohmann::json config = {{"mode", "mlo"}, {"seed", 3}};
  const nlohmann::json doc = ReportToJson(r, config);
  EXPECT_EQ(doc["config"], config);
  EXPECT_EQ(ReportFromJson(nlohmann::json::parse(doc.dump())), r);

  std::istringstream csv(ReportCsv(r));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "metric,value");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 6);

  r.iid_accuracy = 0.5;
  EXPECT_EQ(ReportFromJson(ReportToJson(r, config)), r);
}

class FileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("ccg_metrics_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string Write(const std::string& name, const std::string& text) {
    const std::string path = (dir_ / name).string();
    std::ofstream(path) << text;
    return path;
  }
  std::filesystem::path dir_;
};

TEST_F(FileTest, ExternalFilesAreScored) {
  const std::string truth = Write(
      "truth.jsonl",
      R"({"id":"a","level":"pp","triplet_id":"t","answer":"yes"}
{"id":"b","level":"pw","triplet_id":"t","answer":"no"}
{"id":"c","level":"ww","triplet_id":"t","answer":true}
)");
  const std::string preds = Write("preds.jsonl",
                                  R"({"id":"a","answer":" YES"}
{"id":"b","answer":false}
{"id":"c","answer":"Yes"}
)");
  const EvalReport r = Evaluate(LoadPredictions(preds), LoadLabeledItems(truth));
  EXPECT_EQ(r.consistency, 1.0);
  EXPECT_EQ(r.overall_accuracy, 1.0);
}

TEST_F(FileTest, MalformedLinesNameTheirPosition) {
  const std::string preds = Write("p.jsonl", "{\"id\":\"a\",\"answer\":\"yes\"}\n{\"id\":\"b\"}\n");
  try {
    LoadPredictions(preds);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  const std::string truth = Write("t.jsonl", "{\"id\":\"a\",\"level\":\"xx\",\"answer\":\"yes\"}\n");
  EXPECT_THROW(LoadLabeledItems(truth), DataError);
  EXPECT_THROW(LoadPredictions((dir_ / "absent.jsonl").string()), DataError);
}

}  // namespace
}  // namespace ccg
