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

#include "ccg/partition.h"

#include <algorithm>

#include "ccg/errors.h"

namespace ccg {

int LongestPhraseLength(const Sample& sample) {
  if (sample.phrase_lengths.empty()) {
    throw DataError("sample " + sample.id + " has no phrase annotations");
  }
  return *std::max_element(sample.phrase_lengths.begin(),
                           sample.phrase_lengths.end());
}

ComplexityProfile ProfileFromCounts(const std::map<int, std::size_t>& counts) {
  ComplexityProfile profile;
  for (const auto& [length, n] : counts) {
    if (n == 0) continue;
    profile.count_by_length[length] = n;
    profile.total += n;
    profile.cumulative[length] = profile.total;
  }
  if (profile.total == 0) throw UsageError("empty complexity profile");
  return profile;
}

ComplexityProfile CountByLength(std::span<const Sample> samples) {
  if (samples.empty()) throw UsageError("cannot profile an empty dataset");
  std::vector<int> lengths;
  lengths.reserve(samples.size());
  std::map<int, std::size_t> counts;
  for (const Sample& s : samples) {
    lengths.push_back(LongestPhraseLength(s));
    ++counts[lengths.back()];
  }
  ComplexityProfile profile = ProfileFromCounts(counts);
  profile.sample_lengths = std::move(lengths);
  return profile;
}

int BucketForCumulative(std::size_t cumulative, std::size_t total, int k) {
  const std::size_t raw =
      (cumulative - 1) * static_cast<std::size_t>(k) / total + 1;
  return static_cast<int>(std::min<std::size_t>(raw, static_cast<std::size_t>(k)));
}

std::vector<int> ValidationPartition::EmptyBuckets() const {
  std::vector<int> empty;
  for (int i = 0; i < num_buckets; ++i) {
    if (bucket_sizes[static_cast<std::size_t>(i)] == 0) empty.push_back(i);
  }
  return empty;
}

ValidationPartition AssignBuckets(const ComplexityProfile& profile, int k) {
  if (k < 1) throw UsageError("number of buckets must be >= 1");
  ValidationPartition p;
  p.num_buckets = k;
  p.members.assign(static_cast<std::size_t>(k), {});
  p.bucket_sizes.assign(static_cast<std::size_t>(k), 0);
  p.length_ranges.assign(static_cast<std::size_t>(k), std::nullopt);
  for (const auto& [length, c] : profile.cumulative) {
    const int bucket = BucketForCumulative(c, profile.total, k) - 1;
    p.bucket_of_length[length] = bucket;
    const auto b = static_cast<std::size_t>(bucket);
    p.bucket_sizes[b] += profile.count_by_length.at(length);
    auto& range = p.length_ranges[b];
    if (!range) {
      range = std::pair{length, length};
    } else {
      range->first = std::min(range->first, length);
      range->second = std::max(range->second, length);
    }
  }
  p.bucket_of_sample.reserve(profile.sample_lengths.size());
  for (std::size_t i = 0; i < profile.sample_lengths.size(); ++i) {
    const int bucket = p.bucket_of_length.at(profile.sample_lengths[i]);
    p.bucket_of_sample.push_back(bucket);
    p.members[static_cast<std::size_t>(bucket)].push_back(i);
  }
  return p;
}

}  // namespace ccg
