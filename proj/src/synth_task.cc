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

#include "ccg/synth_task.h"

#include <algorithm>
#include <map>
#include <sstream>

#include "ccg/errors.h"

namespace ccg {
namespace {

using Rng = std::mt19937_64;

Rng MakeRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

int Uniform(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<std::string> DefaultNames(const std::vector<std::string>& base,
                                      int count, const std::string& prefix) {
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) {
    names.push_back(i < static_cast<int>(base.size())
                        ? base[i]
                        : prefix + std::to_string(i));
  }
  return names;
}

SceneObject RandomObject(const Vocabulary& vocab, Rng& rng) {
  return {vocab.SizeId(Uniform(rng, 0, vocab.num_sizes() - 1)),
          vocab.ColorId(Uniform(rng, 0, vocab.num_colors() - 1)),
          vocab.ShapeId(Uniform(rng, 0, vocab.num_shapes() - 1))};
}

// An object satisfying `d`, other attributes random.
SceneObject PlantMatch(const Descriptor& d, const Vocabulary& vocab, Rng& rng) {
  SceneObject obj = RandomObject(vocab, rng);
  if (d.size) obj.size = *d.size;
  if (d.color) obj.color = *d.color;
  if (d.shape) obj.shape = *d.shape;
  return obj;
}

int OtherOfKind(int item, const Vocabulary& vocab, Rng& rng) {
  const ItemKind kind = vocab.KindOf(item);
  const int count = kind == ItemKind::kSize    ? vocab.num_sizes()
                    : kind == ItemKind::kColor ? vocab.num_colors()
                                               : vocab.num_shapes();
  if (count < 2) return item;
  const int base = item - vocab.IndexOf(item);
  int other = vocab.IndexOf(item);
  while (other == vocab.IndexOf(item)) other = Uniform(rng, 0, count - 1);
  return base + other;
}

// Matches `d` on all present attributes but one.
SceneObject PlantNearMiss(const Descriptor& d, const Vocabulary& vocab,
                          Rng& rng) {
  SceneObject obj = PlantMatch(d, vocab, rng);
  const std::vector<int> items = d.Items();
  const int flip = items[Uniform(rng, 0, static_cast<int>(items.size()) - 1)];
  switch (vocab.KindOf(flip)) {
    case ItemKind::kSize:
      obj.size = OtherOfKind(flip, vocab, rng);
      break;
    case ItemKind::kColor:
      obj.color = OtherOfKind(flip, vocab, rng);
      break;
    case ItemKind::kShape:
      obj.shape = OtherOfKind(flip, vocab, rng);
      break;
  }
  return obj;
}

// One proposal for a scene whose answer should be `target`; the caller
// verifies with OracleAnswer and retries.
Scene ProposeScene(const std::vector<Descriptor>& query, bool target,
                   const World& world, Rng& rng) {
  const Vocabulary& vocab = world.vocab;
  const int n = Uniform(rng, std::max<int>(world.config.min_objects,
                                           static_cast<int>(query.size())),
                        world.config.max_objects);
  Scene scene;
  if (target) {
    for (const Descriptor& d : query) scene.push_back(PlantMatch(d, vocab, rng));
  } else if (Uniform(rng, 0, 1) == 1) {
    // Hard negative: every descriptor is nearly satisfied.
    for (const Descriptor& d : query) {
      scene.push_back(PlantNearMiss(d, vocab, rng));
    }
    // With two descriptors, let one of them be truly present.
    if (query.size() == 2 && Uniform(rng, 0, 1) == 1) {
      scene[Uniform(rng, 0, 1)] =
          PlantMatch(query[Uniform(rng, 0, 1)], vocab, rng);
    }
  }
  while (static_cast<int>(scene.size()) < n) {
    scene.push_back(RandomObject(vocab, rng));
  }
  std::shuffle(scene.begin(), scene.end(), rng);
  return scene;
}

// Phrase length is uniform over 1..3, then the kinds are a uniform subset of
// that size.
Descriptor RandomDescriptor(const Vocabulary& vocab, Rng& rng) {
  static constexpr int kMasks[3][3] = {{1, 2, 4}, {3, 5, 6}, {7, 7, 7}};
  const int mask = kMasks[Uniform(rng, 0, 2)][Uniform(rng, 0, 2)];
  Descriptor d;
  if (mask & 1) d.size = vocab.SizeId(Uniform(rng, 0, vocab.num_sizes() - 1));
  if (mask & 2) d.color = vocab.ColorId(Uniform(rng, 0, vocab.num_colors() - 1));
  if (mask & 4) d.shape = vocab.ShapeId(Uniform(rng, 0, vocab.num_shapes() - 1));
  return d;
}

std::vector<int> PhraseLengths(const std::vector<Descriptor>& query) {
  std::vector<int> lengths;
  for (const Descriptor& d : query) lengths.push_back(d.length());
  return lengths;
}

std::string Padded(int value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) {
    s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  }
  return s;
}

// Draws in-distribution samples (no held-out pair in the query).
std::vector<Sample> GenerateInDistribution(const World& world, int count,
                                           const std::string& id_prefix,
                                           Rng& rng) {
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  const long budget = 100L * std::max(count, 1);
  long attempts = 0;
  std::bernoulli_distribution coin(0.5);
  while (static_cast<int>(samples.size()) < count) {
    if (++attempts > budget) {
      throw DataError("in-distribution generation exceeded rejection budget");
    }
    std::vector<Descriptor> query{RandomDescriptor(world.vocab, rng)};
    if (coin(rng)) {
      Descriptor second = RandomDescriptor(world.vocab, rng);
      if (second == query[0]) continue;
      query.push_back(second);
    }
    bool held_out = false;
    for (const auto& [a, b] : QueryItemPairs(query)) {
      held_out = held_out || world.IsBlacklisted(a, b);
    }
    if (held_out) continue;
    const bool target = coin(rng);
    Scene scene = ProposeScene(query, target, world, rng);
    // Retrying with the same target keeps the answers unbiased.
    for (int retry = 0; retry < 20 && OracleAnswer(scene, query) != target;
         ++retry) {
      scene = ProposeScene(query, target, world, rng);
    }
    if (OracleAnswer(scene, query) != target) continue;

    Sample s;
    s.id = id_prefix + Padded(static_cast<int>(samples.size()), 6);
    s.level = Level::kTrain;
    s.phrase_lengths = PhraseLengths(query);
    s.query = std::move(query);
    s.scene = std::move(scene);
    s.answer = target;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<bool> BalancedTargets(int count, Rng& rng) {
  std::vector<bool> targets(static_cast<std::size_t>(count), false);
  for (int i = 0; i < count / 2; ++i) targets[static_cast<std::size_t>(i)] = true;
  if (count % 2 == 1) targets.back() = std::bernoulli_distribution(0.5)(rng);
  std::shuffle(targets.begin(), targets.end(), rng);
  return targets;
}

struct TripletPlan {
  Descriptor p1;
  Descriptor p2;
};

// Whether every item pair in `query` other than `novel` was seen in training.
bool OnlyNovel(const std::vector<Descriptor>& query, const ItemPair& novel,
               const std::set<ItemPair>& seen) {
  bool has_novel = false;
  for (const ItemPair& pair : QueryItemPairs(query)) {
    if (pair == novel) {
      has_novel = true;
    } else if (!seen.count(pair)) {
      return false;
    }
  }
  return has_novel;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> sizes,
                       std::vector<std::string> colors,
                       std::vector<std::string> shapes)
    : sizes_(std::move(sizes)),
      colors_(std::move(colors)),
      shapes_(std::move(shapes)) {}

ItemKind Vocabulary::KindOf(int item) const {
  if (!IsValid(item)) {
    throw DataError("unknown vocabulary item " + std::to_string(item));
  }
  if (item < num_sizes()) return ItemKind::kSize;
  if (item < num_sizes() + num_colors()) return ItemKind::kColor;
  return ItemKind::kShape;
}

int Vocabulary::IndexOf(int item) const {
  switch (KindOf(item)) {
    case ItemKind::kSize:
      return item;
    case ItemKind::kColor:
      return item - num_sizes();
    case ItemKind::kShape:
      return item - num_sizes() - num_colors();
  }
  return -1;
}

const std::string& Vocabulary::Name(int item) const {
  switch (KindOf(item)) {
    case ItemKind::kSize:
      return sizes_[static_cast<std::size_t>(IndexOf(item))];
    case ItemKind::kColor:
      return colors_[static_cast<std::size_t>(IndexOf(item))];
    case ItemKind::kShape:
      break;
  }
  return shapes_[static_cast<std::size_t>(IndexOf(item))];
}

std::vector<int> Descriptor::Items() const {
  std::vector<int> items;
  if (size) items.push_back(*size);
  if (color) items.push_back(*color);
  if (shape) items.push_back(*shape);
  return items;
}

bool Descriptor::Matches(const SceneObject& object) const {
  return (!size || *size == object.size) && (!color || *color == object.color) &&
         (!shape || *shape == object.shape);
}

Descriptor DescriptorFromItems(const Vocabulary& vocab,
                               const std::vector<int>& items) {
  if (items.empty()) throw DataError("empty descriptor");
  Descriptor d;
  for (int item : items) {
    std::optional<int>* slot = nullptr;
    switch (vocab.KindOf(item)) {
      case ItemKind::kSize:
        slot = &d.size;
        break;
      case ItemKind::kColor:
        slot = &d.color;
        break;
      case ItemKind::kShape:
        slot = &d.shape;
        break;
    }
    if (slot->has_value()) {
      throw DataError("descriptor repeats an item kind");
    }
    *slot = item;
  }
  return d;
}

const char* LevelName(Level level) {
  switch (level) {
    case Level::kTrain:
      return "train";
    case Level::kPhrasePhrase:
      return "pp";
    case Level::kPhraseWord:
      return "pw";
    case Level::kWordWord:
      return "ww";
  }
  return "?";
}

std::optional<Level> ParseLevel(const std::string& name) {
  if (name == "train") return Level::kTrain;
  if (name == "pp") return Level::kPhrasePhrase;
  if (name == "pw") return Level::kPhraseWord;
  if (name == "ww") return Level::kWordWord;
  return std::nullopt;
}

bool World::IsBlacklisted(int a, int b) const {
  for (const auto& [shape, color] : blacklist) {
    if ((a == shape && b == color) || (a == color && b == shape)) return true;
  }
  return false;
}

World GenerateWorld(const WorldConfig& config, std::uint64_t seed) {
  if (config.num_sizes < 1 || config.num_colors < 2 || config.num_shapes < 2) {
    throw UsageError("world needs >=1 size, >=2 colors and >=2 shapes");
  }
  if (config.min_objects < 1 || config.max_objects < config.min_objects ||
      config.max_objects < 2) {
    throw UsageError("invalid object count range");
  }
  if (config.blacklist_size < 0) throw UsageError("negative blacklist size");
  const int capacity = std::min(config.num_shapes * (config.num_colors - 2),
                                config.num_colors * (config.num_shapes - 2));
  if (config.blacklist_size > capacity) {
    std::ostringstream msg;
    msg << "blacklist size " << config.blacklist_size
        << " infeasible: at most " << capacity
        << " pairs can be held out while every shape and color keeps two "
           "trainable partners";
    throw UsageError(msg.str());
  }

  World world;
  world.config = config;
  world.vocab = Vocabulary(
      DefaultNames({"small", "medium", "large"}, config.num_sizes, "size"),
      DefaultNames({"red", "green", "blue", "yellow", "purple", "white"},
                   config.num_colors, "color"),
      DefaultNames({"ball", "cube", "cone", "ring", "star", "disk"},
                   config.num_shapes, "shape"));
  const Vocabulary& vocab = world.vocab;

  std::vector<ItemPair> candidates;
  for (int s = 0; s < config.num_shapes; ++s) {
    for (int c = 0; c < config.num_colors; ++c) {
      candidates.emplace_back(vocab.ShapeId(s), vocab.ColorId(c));
    }
  }
  Rng rng = MakeRng(seed, 0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::map<int, int> remaining;  // item -> trainable partners left
    for (int s = 0; s < config.num_shapes; ++s) {
      remaining[vocab.ShapeId(s)] = config.num_colors;
    }
    for (int c = 0; c < config.num_colors; ++c) {
      remaining[vocab.ColorId(c)] = config.num_shapes;
    }
    world.blacklist.clear();
    for (const auto& [shape, color] : candidates) {
      if (static_cast<int>(world.blacklist.size()) == config.blacklist_size) {
        break;
      }
      if (remaining[shape] <= 2 || remaining[color] <= 2) continue;
      --remaining[shape];
      --remaining[color];
      world.blacklist.emplace_back(shape, color);
    }
    if (static_cast<int>(world.blacklist.size()) == config.blacklist_size) {
      return world;
    }
  }
  throw UsageError("could not place the requested blacklist");
}

Datasets GenerateDatasets(const World& world, const DatasetCounts& counts,
                          std::uint64_t seed) {
  if (counts.train < 1 || counts.triplets < 0 || counts.iid < 0) {
    throw UsageError("invalid dataset counts");
  }
  if (counts.triplets > 0 && world.blacklist.empty()) {
    throw UsageError("triplets requested but the blacklist is empty");
  }
  Datasets out;
  Rng train_rng = MakeRng(seed, 1);
  out.train = GenerateInDistribution(world, counts.train, "train-", train_rng);
  Rng iid_rng = MakeRng(seed, 2);
  out.iid = GenerateInDistribution(world, counts.iid, "iid-", iid_rng);

  const std::set<ItemPair> seen = CoOccurrences(out.train);
  std::set<std::vector<int>> seen_phrases;
  for (const Sample& s : out.train) {
    for (const Descriptor& d : s.query) seen_phrases.insert(d.Items());
  }

  // All admissible (p1, p2) choices per held-out pair.
  const Vocabulary& vocab = world.vocab;
  std::vector<std::vector<TripletPlan>> plans(
      counts.triplets > 0 ? world.blacklist.size() : 0);
  for (std::size_t b = 0; b < plans.size(); ++b) {
    const auto [w1, w2] = world.blacklist[b];
    const ItemPair novel = MakePair(w1, w2);
    std::vector<Descriptor> p1_options;
    std::vector<Descriptor> p2_options;
    for (const std::vector<int>& items : seen_phrases) {
      const Descriptor d = DescriptorFromItems(vocab, items);
      if (d.length() >= 2 && d.shape == w1) p1_options.push_back(d);
      if (d.length() == 2 && d.color == w2 && d.shape) p2_options.push_back(d);
    }
    for (const Descriptor& p1 : p1_options) {
      const Descriptor bare{std::nullopt, w2, std::nullopt};
      if (!OnlyNovel({p1, bare}, novel, seen)) continue;
      for (const Descriptor& p2 : p2_options) {
        if (OnlyNovel({p1, p2}, novel, seen)) plans[b].push_back({p1, p2});
      }
    }
    if (plans[b].empty()) {
      throw DataError("no admissible triplet construction for held-out pair (" +
                      vocab.Name(w1) + ", " + vocab.Name(w2) + ")");
    }
  }

  Rng test_rng = MakeRng(seed, 3);
  const std::vector<bool> pp_targets = BalancedTargets(counts.triplets, test_rng);
  const std::vector<bool> pw_targets = BalancedTargets(counts.triplets, test_rng);
  const std::vector<bool> ww_targets = BalancedTargets(counts.triplets, test_rng);
  const long budget = 100L * 3 * std::max(counts.triplets, 1);
  long attempts = 0;
  auto make_scene = [&](const std::vector<Descriptor>& query, bool target) {
    while (true) {
      if (++attempts > budget) {
        throw DataError("triplet generation exceeded rejection budget");
      }
      Scene scene = ProposeScene(query, target, world, test_rng);
      if (OracleAnswer(scene, query) == target) return scene;
    }
  };

  for (int t = 0; t < counts.triplets; ++t) {
    const std::size_t b = static_cast<std::size_t>(t) % world.blacklist.size();
    const auto [w1, w2] = world.blacklist[b];
    const TripletPlan& plan = plans[b][static_cast<std::size_t>(
        Uniform(test_rng, 0, static_cast<int>(plans[b].size()) - 1))];
    const std::string tid = "t" + Padded(t, 4);
    const std::size_t ti = static_cast<std::size_t>(t);

    auto push = [&](Level level, std::vector<Descriptor> query, bool target) {
      Sample s;
      s.id = tid + "-" + LevelName(level);
      s.level = level;
      s.triplet_id = tid;
      s.phrase_lengths = PhraseLengths(query);
      s.scene = make_scene(query, target);
      s.query = std::move(query);
      s.answer = target;
      s.novel_composition = MakePair(w1, w2);
      out.test.push_back(std::move(s));
      return out.test.size() - 1;
    };

    Triplet triplet;
    triplet.triplet_id = tid;
    triplet.p1 = plan.p1;
    triplet.p2 = plan.p2;
    triplet.w1 = w1;
    triplet.w2 = w2;
    triplet.pp = push(Level::kPhrasePhrase, {plan.p1, plan.p2}, pp_targets[ti]);
    triplet.pw = push(Level::kPhraseWord,
                      {plan.p1, Descriptor{std::nullopt, w2, std::nullopt}},
                      pw_targets[ti]);
    triplet.ww = push(Level::kWordWord,
                      {Descriptor{std::nullopt, w2, w1}}, ww_targets[ti]);
    out.triplets.push_back(std::move(triplet));
  }
  return out;
}

bool OracleAnswer(const Scene& scene, const std::vector<Descriptor>& query) {
  return std::all_of(query.begin(), query.end(), [&](const Descriptor& d) {
    return std::any_of(scene.begin(), scene.end(),
                       [&](const SceneObject& o) { return d.Matches(o); });
  });
}

std::set<ItemPair> QueryItemPairs(const std::vector<Descriptor>& query) {
  std::vector<int> items;
  for (const Descriptor& d : query) {
    const std::vector<int> di = d.Items();
    items.insert(items.end(), di.begin(), di.end());
  }
  std::set<ItemPair> pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (items[i] != items[j]) pairs.insert(MakePair(items[i], items[j]));
    }
  }
  return pairs;
}

std::set<ItemPair> CoOccurrences(const std::vector<Sample>& samples) {
  std::set<ItemPair> pairs;
  for (const Sample& s : samples) {
    const std::set<ItemPair> q = QueryItemPairs(s.query);
    pairs.insert(q.begin(), q.end());
  }
  return pairs;
}

std::vector<Triplet> CollectTriplets(const std::vector<Sample>& test) {
  struct Members {
    std::optional<std::size_t> pp, pw, ww;
  };
  std::map<std::string, Members> groups;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Sample& s = test[i];
    if (!s.triplet_id) continue;
    Members& m = groups[*s.triplet_id];
    switch (s.level) {
      case Level::kPhrasePhrase:
        m.pp = i;
        break;
      case Level::kPhraseWord:
        m.pw = i;
        break;
      case Level::kWordWord:
        m.ww = i;
        break;
      case Level::kTrain:
        break;
    }
  }
  std::vector<Triplet> triplets;
  for (const auto& [tid, m] : groups) {
    if (!m.pp || !m.pw || !m.ww) {
      throw DataError("incomplete triplet " + tid);
    }
    Triplet t;
    t.triplet_id = tid;
    t.pp = *m.pp;
    t.pw = *m.pw;
    t.ww = *m.ww;
    const Sample& pp = test[t.pp];
    if (pp.query.size() == 2) {
      t.p1 = pp.query[0];
      t.p2 = pp.query[1];
      if (t.p1.shape) t.w1 = *t.p1.shape;
      if (t.p2.color) t.w2 = *t.p2.color;
    }
    triplets.push_back(std::move(t));
  }
  return triplets;
}

}  // namespace ccg
