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

#ifndef CCG_SYNTH_TASK_H_
#define CCG_SYNTH_TASK_H_

// Synthetic grounded-composition QA world.
//
// A query is one or two descriptors ("small red ball", "cube"); a scene is a
// handful of (size, color, shape) objects; the answer is whether every
// descriptor is matched by some object. A set of (shape, color) item pairs is
// held out: no training query ever mentions both items, and the test set is
// built from triplets of pp/pw/ww queries that each contain exactly one held
// out pair.

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace ccg {

enum class ItemKind { kSize, kColor, kShape };

// Item ids are dense: sizes first, then colors, then shapes.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> sizes, std::vector<std::string> colors,
             std::vector<std::string> shapes);

  int num_sizes() const { return static_cast<int>(sizes_.size()); }
  int num_colors() const { return static_cast<int>(colors_.size()); }
  int num_shapes() const { return static_cast<int>(shapes_.size()); }
  int num_items() const { return num_sizes() + num_colors() + num_shapes(); }

  int SizeId(int index) const { return index; }
  int ColorId(int index) const { return num_sizes() + index; }
  int ShapeId(int index) const { return num_sizes() + num_colors() + index; }

  bool IsValid(int item) const { return item >= 0 && item < num_items(); }
  ItemKind KindOf(int item) const;
  // Position of the item within its kind.
  int IndexOf(int item) const;
  const std::string& Name(int item) const;

  const std::vector<std::string>& sizes() const { return sizes_; }
  const std::vector<std::string>& colors() const { return colors_; }
  const std::vector<std::string>& shapes() const { return shapes_; }

  // Number of distinct (size, color, shape) combinations.
  int NumObjectKinds() const { return num_sizes() * num_colors() * num_shapes(); }

 private:
  std::vector<std::string> sizes_;
  std::vector<std::string> colors_;
  std::vector<std::string> shapes_;
};

struct SceneObject {
  int size = 0;   // item id
  int color = 0;  // item id
  int shape = 0;  // item id

  bool operator==(const SceneObject&) const = default;
};

using Scene = std::vector<SceneObject>;

struct Descriptor {
  std::optional<int> size;
  std::optional<int> color;
  std::optional<int> shape;

  // Present items in size, color, shape order.
  std::vector<int> Items() const;
  int length() const {
    return static_cast<int>(size.has_value()) + color.has_value() +
           shape.has_value();
  }
  bool Matches(const SceneObject& object) const;

  bool operator==(const Descriptor&) const = default;
};

// Builds a descriptor from item ids; throws DataError on an invalid id, a
// repeated kind, or an empty list.
Descriptor DescriptorFromItems(const Vocabulary& vocab,
                               const std::vector<int>& items);

enum class Level { kTrain, kPhrasePhrase, kPhraseWord, kWordWord };

const char* LevelName(Level level);
// Accepts "train", "pp", "pw", "ww".
std::optional<Level> ParseLevel(const std::string& name);

using ItemPair = std::pair<int, int>;

// Unordered pair with first <= second.
inline ItemPair MakePair(int a, int b) {
  return a <= b ? ItemPair{a, b} : ItemPair{b, a};
}

struct Sample {
  std::string id;
  Level level = Level::kTrain;
  std::optional<std::string> triplet_id;
  std::vector<Descriptor> query;
  std::vector<int> phrase_lengths;
  Scene scene;
  bool answer = false;
  std::optional<ItemPair> novel_composition;
  // Unknown fields found on load, written back verbatim.
  nlohmann::json extra = nlohmann::json::object();
};

struct Triplet {
  std::string triplet_id;
  // Indices into the owning test set.
  std::size_t pp = 0;
  std::size_t pw = 0;
  std::size_t ww = 0;
  Descriptor p1;
  Descriptor p2;
  int w1 = 0;  // shape, head of p1
  int w2 = 0;  // color, modifier in p2
};

struct WorldConfig {
  int num_sizes = 3;
  int num_colors = 6;
  int num_shapes = 6;
  int blacklist_size = 8;
  int min_objects = 2;
  int max_objects = 6;
};

struct World {
  WorldConfig config;
  Vocabulary vocab;
  // Held-out (shape, color) item pairs.
  std::vector<ItemPair> blacklist;

  bool IsBlacklisted(int a, int b) const;
};

// Deterministic in `seed`. Every shape and color keeps at least two
// non-held-out partners, so all items stay trainable. Throws UsageError when
// the requested blacklist cannot satisfy that reserve.
World GenerateWorld(const WorldConfig& config, std::uint64_t seed);

struct DatasetCounts {
  int train = 20000;
  int triplets = 200;
  // In-distribution held-out samples (same generator as training).
  int iid = 2000;
};

struct Datasets {
  std::vector<Sample> train;
  std::vector<Sample> iid;
  std::vector<Sample> test;
  std::vector<Triplet> triplets;
};

// Throws DataError if the counts cannot be reached within a rejection budget
// of 100x the requested sample count.
Datasets GenerateDatasets(const World& world, const DatasetCounts& counts,
                          std::uint64_t seed);

// True iff every descriptor is matched by at least one object (descriptors may
// share an object).
bool OracleAnswer(const Scene& scene, const std::vector<Descriptor>& query);

// All unordered pairs of distinct items mentioned anywhere in the query.
std::set<ItemPair> QueryItemPairs(const std::vector<Descriptor>& query);

std::set<ItemPair> CoOccurrences(const std::vector<Sample>& samples);

// Rebuilds triplets from level/triplet_id annotations of a test set.
// Throws DataError if any triplet lacks one of its three members.
std::vector<Triplet> CollectTriplets(const std::vector<Sample>& test);

}  // namespace ccg

#endif  // CCG_SYNTH_TASK_H_
