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

#ifndef CCG_PARTITION_H_
#define CCG_PARTITION_H_

// Complexity-ordered validation buckets carved out of the training set.
//
// Complexity of a sample is the word count of its longest phrase. Length
// classes are kept whole and assigned to K buckets by cumulative count:
//
//   bucket(L) = min(K, floor((c(L) - 1) * K / N) + 1)
//
// where c(L) is the number of samples with longest phrase <= L and N the
// training set size. Buckets are returned 0-based.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ccg/synth_task.h"

namespace ccg {

// Throws DataError when the sample carries no phrase annotations.
int LongestPhraseLength(const Sample& sample);

struct ComplexityProfile {
  // Longest-phrase length of each sample, in dataset order. Empty for
  // profiles built from counts alone.
  std::vector<int> sample_lengths;
  std::map<int, std::size_t> count_by_length;
  std::map<int, std::size_t> cumulative;
  std::size_t total = 0;
};

// Throws UsageError on an empty dataset.
ComplexityProfile CountByLength(std::span<const Sample> samples);
ComplexityProfile ProfileFromCounts(const std::map<int, std::size_t>& counts);

struct ValidationPartition {
  int num_buckets = 0;
  // Sample indices per bucket (empty for count-only profiles).
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> bucket_sizes;
  // Inclusive [min, max] longest-phrase length per bucket; nullopt if empty.
  std::vector<std::optional<std::pair<int, int>>> length_ranges;
  std::map<int, int> bucket_of_length;
  // Per-sample bucket, parallel to the profiled dataset.
  std::vector<int> bucket_of_sample;

  std::vector<int> EmptyBuckets() const;
};

// 1-based bucket for a length class with cumulative count `cumulative`.
int BucketForCumulative(std::size_t cumulative, std::size_t total, int k);

// Throws UsageError when k < 1.
ValidationPartition AssignBuckets(const ComplexityProfile& profile, int k);

}  // namespace ccg

#endif  // CCG_PARTITION_H_
