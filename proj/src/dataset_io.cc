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

#include "ccg/dataset_io.h"

#include <fstream>
#include <sstream>

#include "ccg/errors.h"

namespace ccg {
namespace {

using nlohmann::json;

const char* const kKnownKeys[] = {"id",     "level",          "triplet_id",
                                  "query",  "phrase_lengths", "scene",
                                  "answer", "novel_composition",
                                  "schema_version"};

bool IsKnownKey(const std::string& key) {
  for (const char* k : kKnownKeys) {
    if (key == k) return true;
  }
  return false;
}

const json& Require(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw DataError(std::string("missing field \"") + key + "\"");
  }
  return *it;
}

int ItemOf(const json& value, const Vocabulary& vocab, ItemKind kind,
           const char* what) {
  if (!value.is_number_integer()) {
    throw DataError(std::string(what) + " must be an integer item id");
  }
  const int id = value.get<int>();
  if (!vocab.IsValid(id) || vocab.KindOf(id) != kind) {
    throw DataError(std::string(what) + " has invalid item id " +
                    std::to_string(id));
  }
  return id;
}

}  // namespace

json SampleToJson(const Sample& sample) {
  json record = sample.extra.is_object() ? sample.extra : json::object();
  record["id"] = sample.id;
  record["level"] = LevelName(sample.level);
  record["triplet_id"] =
      sample.triplet_id ? json(*sample.triplet_id) : json(nullptr);
  json query = json::array();
  for (const Descriptor& d : sample.query) query.push_back(d.Items());
  record["query"] = std::move(query);
  record["phrase_lengths"] = sample.phrase_lengths;
  json scene = json::array();
  for (const SceneObject& o : sample.scene) {
    scene.push_back({o.size, o.color, o.shape});
  }
  record["scene"] = std::move(scene);
  record["answer"] = sample.answer;
  record["novel_composition"] =
      sample.novel_composition
          ? json::array({sample.novel_composition->first,
                         sample.novel_composition->second})
          : json(nullptr);
  record["schema_version"] = kSchemaVersion;
  return record;
}

Sample SampleFromJson(const json& record, const Vocabulary& vocab) {
  if (!record.is_object()) throw DataError("record is not a JSON object");
  const json& version = Require(record, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw DataError("schema_version mismatch: expected " +
                    std::to_string(kSchemaVersion) + ", got " + version.dump());
  }
  Sample s;
  const json& id = Require(record, "id");
  if (!id.is_string()) throw DataError("\"id\" must be a string");
  s.id = id.get<std::string>();

  const json& level = Require(record, "level");
  const auto parsed =
      level.is_string() ? ParseLevel(level.get<std::string>()) : std::nullopt;
  if (!parsed) throw DataError("invalid \"level\": " + level.dump());
  s.level = *parsed;

  if (auto it = record.find("triplet_id"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("\"triplet_id\" must be string|null");
    s.triplet_id = it->get<std::string>();
  }

  const json& query = Require(record, "query");
  if (!query.is_array() || query.empty()) {
    throw DataError("\"query\" must be a nonempty array of descriptors");
  }
  for (const json& d : query) {
    if (!d.is_array()) throw DataError("descriptor must be an array");
    std::vector<int> items;
    for (const json& item : d) {
      if (!item.is_number_integer()) {
        throw DataError("descriptor items must be integers");
      }
      items.push_back(item.get<int>());
    }
    s.query.push_back(DescriptorFromItems(vocab, items));
  }

  if (auto it = record.find("phrase_lengths"); it != record.end()) {
    if (!it->is_array()) throw DataError("\"phrase_lengths\" must be an array");
    for (const json& len : *it) {
      if (!len.is_number_integer() || len.get<int>() < 1) {
        throw DataError("\"phrase_lengths\" entries must be positive integers");
      }
      s.phrase_lengths.push_back(len.get<int>());
    }
  }

  const json& scene = Require(record, "scene");
  if (!scene.is_array() || scene.empty()) {
    throw DataError("\"scene\" must be a nonempty array of objects");
  }
  for (const json& o : scene) {
    if (!o.is_array() || o.size() != 3) {
      throw DataError("scene object must be [size_id,color_id,shape_id]");
    }
    s.scene.push_back({ItemOf(o[0], vocab, ItemKind::kSize, "scene size"),
                       ItemOf(o[1], vocab, ItemKind::kColor, "scene color"),
                       ItemOf(o[2], vocab, ItemKind::kShape, "scene shape")});
  }

  const json& answer = Require(record, "answer");
  if (!answer.is_boolean()) throw DataError("\"answer\" must be a boolean");
  s.answer = answer.get<bool>();

  if (auto it = record.find("novel_composition");
      it != record.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer()) {
      throw DataError("\"novel_composition\" must be [item_id,item_id]|null");
    }
    s.novel_composition = ItemPair{(*it)[0].get<int>(), (*it)[1].get<int>()};
  }

  for (const auto& [key, value] : record.items()) {
    if (!IsKnownKey(key)) s.extra[key] = value;
  }
  return s;
}

std::string SerializeDataset(const std::vector<Sample>& samples) {
  std::string out;
  for (const Sample& s : samples) {
    out += SampleToJson(s).dump();
    out += '\n';
  }
  return out;
}

void WriteDataset(const std::string& path, const std::vector<Sample>& samples) {
  WriteTextFile(path, SerializeDataset(samples));
}

std::vector<Sample> ParseDataset(std::istream& in, const Vocabulary& vocab,
                                 const std::string& source) {
  std::vector<Sample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      samples.push_back(SampleFromJson(json::parse(line), vocab));
    } catch (const json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::vector<Sample> LoadDataset(const std::string& path,
                                const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ParseDataset(in, vocab, path);
}

json WorldToJson(const World& world) {
  json blacklist = json::array();
  for (const auto& [shape, color] : world.blacklist) {
    blacklist.push_back({shape, color});
  }
  const WorldConfig& c = world.config;
  return {{"sizes", world.vocab.sizes()},
          {"colors", world.vocab.colors()},
          {"shapes", world.vocab.shapes()},
          {"blacklist", std::move(blacklist)},
          {"world_config",
           {{"num_sizes", c.num_sizes},
            {"num_colors", c.num_colors},
            {"num_shapes", c.num_shapes},
            {"blacklist_size", c.blacklist_size},
            {"min_objects", c.min_objects},
            {"max_objects", c.max_objects}}}};
}

World WorldFromJson(const json& doc) {
  try {
    World world;
    world.vocab = Vocabulary(doc.at("sizes").get<std::vector<std::string>>(),
                             doc.at("colors").get<std::vector<std::string>>(),
                             doc.at("shapes").get<std::vector<std::string>>());
    WorldConfig& c = world.config;
    c.num_sizes = world.vocab.num_sizes();
    c.num_colors = world.vocab.num_colors();
    c.num_shapes = world.vocab.num_shapes();
    if (auto it = doc.find("world_config"); it != doc.end()) {
      c.min_objects = it->value("min_objects", c.min_objects);
      c.max_objects = it->value("max_objects", c.max_objects);
    }
    if (auto it = doc.find("blacklist"); it != doc.end()) {
      for (const json& pair : *it) {
        world.blacklist.emplace_back(pair.at(0).get<int>(),
                                     pair.at(1).get<int>());
      }
    }
    c.blacklist_size = static_cast<int>(world.blacklist.size());
    return world;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed vocabulary file: ") + e.what());
  }
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
}

void WriteJsonFile(const std::string& path, const json& doc) {
  WriteTextFile(path, doc.dump(2) + "\n");
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace ccg
