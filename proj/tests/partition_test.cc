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
#include <map>
#include <random>
#include <set>
#include <vector>

#include "ccg/errors.h"
#include "ccg/partition.h"
#include "ccg/synth_task.h"
#include "gtest/gtest.h"

namespace ccg {
namespace {

Sample WithPhrases(std::vector<int> lengths) {
  Sample s;
  s.phrase_lengths = std::move(lengths);
  return s;
}

std::vector<Sample> FromLengths(const std::vector<int>& lengths) {
  std::vector<Sample> out;
  for (int l : lengths) out.push_back(WithPhrases({l}));
  return out;
}

TEST(LongestPhraseLengthTest, Examples) {
  EXPECT_EQ(LongestPhraseLength(WithPhrases({2, 3})), 3);
  EXPECT_EQ(LongestPhraseLength(WithPhrases({1})), 1);
  EXPECT_THROW(LongestPhraseLength(WithPhrases({})), DataError);
}

TEST(LongestPhraseLengthTest, SyntheticPhrasePhraseQuery) {
  const World world = GenerateWorld(WorldConfig{}, 0);
  const Vocabulary& v = world.vocab;
  Sample s;
  s.query = {DescriptorFromItems(v, {v.SizeId(0), v.ColorId(1), v.ShapeId(2)}),
             DescriptorFromItems(v, {v.ColorId(3), v.ShapeId(4)})};
  s.phrase_lengths = {3, 2};
  EXPECT_EQ(LongestPhraseLength(s), 3);
}

TEST(CountByLengthTest, SmallExample) {
  const ComplexityProfile p =
      CountByLength(FromLengths({1, 2, 3, 3, 1, 2, 3, 1, 2, 3}));
  EXPECT_EQ(p.count_by_length, (std::map<int, std::size_t>{{1, 3}, {2, 3}, {3, 4}}));
  EXPECT_EQ(p.cumulative, (std::map<int, std::size_t>{{1, 3}, {2, 6}, {3, 10}}));
  EXPECT_EQ(p.total, 10u);
}

TEST(CountByLengthTest, SingleLength) {
  const ComplexityProfile p = CountByLength(FromLengths({2, 2, 2, 2}));
  EXPECT_EQ(p.count_by_length, (std::map<int, std::size_t>{{2, 4}}));
}

TEST(CountByLengthTest, EmptyDatasetIsRejected) {
  EXPECT_THROW(CountByLength(std::vector<Sample>{}), UsageError);
}

TEST(AssignBucketsTest, WorkedExample) {
  const ValidationPartition part =
      AssignBuckets(ProfileFromCounts({{1, 3}, {2, 3}, {3, 4}}), 2);
  EXPECT_EQ(part.bucket_sizes, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(part.bucket_of_length, (std::map<int, int>{{1, 0}, {2, 1}, {3, 1}}));
  ASSERT_TRUE(part.length_ranges[0].has_value());
  EXPECT_EQ(*part.length_ranges[0], (std::pair<int, int>{1, 1}));
  EXPECT_EQ(*part.length_ranges[1], (std::pair<int, int>{2, 3}));
}

TEST(AssignBucketsTest, OneBucketTakesEverything) {
  const std::vector<Sample> data = FromLengths({3, 1, 2, 2});
  const ValidationPartition part = AssignBuckets(CountByLength(data), 1);
  EXPECT_EQ(part.members, (std::vector<std::vector<std::size_t>>{{0, 1, 2, 3}}));
}

TEST(AssignBucketsTest, MoreBucketsThanLengthsLeavesSomeEmpty) {
  const ValidationPartition part =
      AssignBuckets(ProfileFromCounts({{1, 5}, {2, 5}}), 4);
  EXPECT_EQ(part.bucket_sizes, (std::vector<std::size_t>{0, 5, 0, 5}));
  EXPECT_EQ(part.EmptyBuckets(), (std::vector<int>{0, 2}));
  EXPECT_FALSE(part.length_ranges[0].has_value());
}

TEST(AssignBucketsTest, RejectsNonPositiveK) {
  const ComplexityProfile p = ProfileFromCounts({{1, 1}});
  EXPECT_THROW(AssignBuckets(p, 0), UsageError);
  EXPECT_THROW(AssignBuckets(p, -2), UsageError);
}

TEST(BucketForCumulativeTest, LastClassLandsInLastBucket) {
  EXPECT_EQ(BucketForCumulative(10, 10, 2), 2);
  EXPECT_EQ(BucketForCumulative(10, 10, 7), 7);
  EXPECT_EQ(BucketForCumulative(1, 10, 3), 1);
  EXPECT_EQ(BucketForCumulative(4, 10, 3), 1);
  EXPECT_EQ(BucketForCumulative(5, 10, 3), 2);
}

// Checks every structural invariant of `part` against the raw lengths.
void ExpectInvariants(const std::vector<int>& lengths,
                      const ValidationPartition& part, int k) {
  const std::size_t n = lengths.size();
  ASSERT_EQ(part.members.size(), static_cast<std::size_t>(k));

  // Disjoint cover at the index level.
  std::vector<int> seen(n, 0);
  for (int b = 0; b < k; ++b) {
    EXPECT_EQ(part.members[b].size(), part.bucket_sizes[b]);
    for (std::size_t i : part.members[b]) {
      ASSERT_LT(i, n);
      ++seen[i];
      EXPECT_EQ(part.bucket_of_sample[i], b);
    }
  }
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], 1) << "sample " << i;

  // Atomicity and order.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (lengths[a] == lengths[b]) {
        ASSERT_EQ(part.bucket_of_sample[a], part.bucket_of_sample[b]);
      } else if (lengths[a] < lengths[b]) {
        ASSERT_LE(part.bucket_of_sample[a], part.bucket_of_sample[b]);
      }
    }
  }
  int previous_max = 0;
  for (int b = 0; b < k; ++b) {
    if (!part.length_ranges[b]) continue;
    EXPECT_GT(part.length_ranges[b]->first, previous_max);
    previous_max = part.length_ranges[b]->second;
  }
}

// Class index of the last class in buckets <= i, for each i < K - 1, under
// the class-to-bucket map `assign` (nondecreasing, 0-based).
std::vector<int> Boundaries(const std::vector<int>& assign, int k) {
  std::vector<int> out;
  for (int i = 0; i + 1 < k; ++i) {
    int last = -1;
    for (std::size_t c = 0; c < assign.size(); ++c) {
      if (assign[c] <= i) last = static_cast<int>(c);
    }
    out.push_back(last);
  }
  return out;
}

// Class index holding the ideal i*N/K quantile.
std::vector<int> IdealClasses(const std::vector<std::size_t>& counts, int k) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  std::vector<int> out;
  for (int i = 1; i < k; ++i) {
    std::size_t cum = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      cum += counts[c];
      if (cum * k >= static_cast<std::size_t>(i) * total) {
        out.push_back(static_cast<int>(c));
        break;
      }
    }
  }
  return out;
}

bool Balanced(const std::vector<int>& assign,
              const std::vector<std::size_t>& counts, int k) {
  const std::vector<int> got = Boundaries(assign, k);
  const std::vector<int> ideal = IdealClasses(counts, k);
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (std::abs(got[i] - ideal[i]) > 1) return false;
  }
  return true;
}

// Every nondecreasing map from `classes` classes into `k` buckets.
void EnumerateMonotone(int classes, int k, std::vector<int>& prefix,
                       std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == classes) {
    out.push_back(prefix);
    return;
  }
  const int lo = prefix.empty() ? 0 : prefix.back();
  for (int b = lo; b < k; ++b) {
    prefix.push_back(b);
    EnumerateMonotone(classes, k, prefix, out);
    prefix.pop_back();
  }
}

TEST(AssignBucketsTest, RandomProfilesSatisfyAllInvariants) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = std::uniform_int_distribution<int>(1, 8)(rng);
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    // Distinct sorted lengths with random gaps.
    std::vector<int> class_length;
    int l = 0;
    for (int c = 0; c < classes; ++c) {
      l += std::uniform_int_distribution<int>(1, 3)(rng);
      class_length.push_back(l);
    }
    std::vector<std::size_t> counts;
    std::vector<int> lengths;
    for (int c = 0; c < classes; ++c) {
      counts.push_back(std::uniform_int_distribution<std::size_t>(1, 12)(rng));
      for (std::size_t j = 0; j < counts.back(); ++j) {
        lengths.push_back(class_length[c]);
      }
    }
    std::shuffle(lengths.begin(), lengths.end(), rng);

    const std::vector<Sample> data = FromLengths(lengths);
    const ValidationPartition part = AssignBuckets(CountByLength(data), k);
    ExpectInvariants(lengths, part, k);

    std::vector<int> assign;
    for (int len : class_length) assign.push_back(part.bucket_of_length.at(len));

    // The produced assignment is among the brute-force balanced placements.
    std::vector<std::vector<int>> all;
    std::vector<int> prefix;
    EnumerateMonotone(classes, k, prefix, all);
    std::set<std::vector<int>> balanced;
    for (const auto& a : all) {
      if (Balanced(a, counts, k)) balanced.insert(a);
    }
    ASSERT_TRUE(balanced.count(assign))
        << "trial " << trial << " k " << k << " classes " << classes;
  }
}

TEST(AssignBucketsTest, DefaultTrainingSetMatchesRecountOracle) {
  const World world = GenerateWorld(WorldConfig{}, 0);
  const Datasets data = GenerateDatasets(world, DatasetCounts{}, 0);
  const ComplexityProfile profile = CountByLength(data.train);

  // Independent single-pass recount.
  std::map<int, std::size_t> counts;
  for (const Sample& s : data.train) {
    int longest = 0;
    for (int l : s.phrase_lengths) longest = std::max(longest, l);
    ++counts[longest];
  }
  EXPECT_EQ(profile.count_by_length, counts);
  EXPECT_EQ((std::vector<int>{1, 2, 3}),
            (std::vector<int>{counts.begin()->first, std::next(counts.begin())->first,
                              counts.rbegin()->first}));

  const int k = 3;
  const ValidationPartition part = AssignBuckets(profile, k);
  // Exhaustive check of the closed-form rule: c(L) by direct count.
  std::vector<std::size_t> expected(k, 0);
  const std::size_t n = data.train.size();
  for (const auto& [len, count] : counts) {
    std::size_t cum = 0;
    for (const Sample& s : data.train) {
      if (LongestPhraseLength(s) <= len) ++cum;
    }
    const std::size_t bucket =
        std::min<std::size_t>(k, (cum - 1) * k / n + 1);
    expected[bucket - 1] += count;
  }
  EXPECT_EQ(part.bucket_sizes, expected);
  for (int b = 0; b < k; ++b) EXPECT_GT(part.bucket_sizes[b], 0u);
  EXPECT_EQ(*part.length_ranges[0], (std::pair<int, int>{1, 1}));
  EXPECT_EQ(*part.length_ranges[1], (std::pair<int, int>{2, 2}));
  EXPECT_EQ(*part.length_ranges[2], (std::pair<int, int>{3, 3}));
}

}  // namespace
}  // namespace ccg
