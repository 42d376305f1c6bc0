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

#include "ccg/cli.h"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "ccg/dataset_io.h"
#include "ccg/errors.h"

namespace ccg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kVocabFile[] = "vocabulary.json";
constexpr char kTrainFile[] = "train.jsonl";
constexpr char kIidFile[] = "iid.jsonl";
constexpr char kTestFile[] = "test.jsonl";

// Flag values shared by the subcommands; only flags actually given override
// the config file.
struct Flags {
  std::string config_path;
  std::string out;
  std::string data_dir;
  std::string model_path;
  std::string predictions;
  std::string triplets;
  std::string seeds = "5";
  std::uint64_t seed = 0;
  std::string mode;
  std::string order;
  int k = 0;
  int tp = 0;
  int tm = 0;
  double lr_theta = 0.0;
  double lr_omega = 0.0;
  int neumann_j = 0;
  double neumann_alpha = 0.0;
  int rounds = 0;
  int patience = 0;
};

struct Options {
  CLI::Option* seed = nullptr;
  CLI::Option* mode = nullptr;
  CLI::Option* order = nullptr;
  CLI::Option* k = nullptr;
  CLI::Option* tp = nullptr;
  CLI::Option* tm = nullptr;
  CLI::Option* lr_theta = nullptr;
  CLI::Option* lr_omega = nullptr;
  CLI::Option* neumann_j = nullptr;
  CLI::Option* neumann_alpha = nullptr;
  CLI::Option* rounds = nullptr;
  CLI::Option* patience = nullptr;
};

bool Given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

void AddTrainFlags(CLI::App& cmd, Flags& f, Options& o) {
  o.mode = cmd.add_option("--mode", f.mode, "baseline | mwn-sim | mlo");
  o.order = cmd.add_option("--order", f.order, "s2c | c2s");
  o.k = cmd.add_option("--k", f.k, "number of validation buckets");
  o.tp = cmd.add_option("--tp", f.tp, "parameter steps per round");
  o.tm = cmd.add_option("--tm", f.tm, "meta steps per bucket per round");
  o.lr_theta = cmd.add_option("--lr-theta", f.lr_theta, "model learning rate");
  o.lr_omega = cmd.add_option("--lr-omega", f.lr_omega, "meta learning rate");
  o.neumann_j = cmd.add_option("--neumann-j", f.neumann_j, "Neumann terms");
  o.neumann_alpha =
      cmd.add_option("--neumann-alpha", f.neumann_alpha, "Neumann step");
  o.rounds = cmd.add_option("--rounds", f.rounds, "outer rounds");
  o.patience = cmd.add_option("--patience", f.patience, "early-stop patience");
}

json LoadConfigFile(const std::string& path) {
  if (path.empty()) return json::object();
  json doc = ReadJsonFile(path);
  if (!doc.is_object()) throw DataError(path + ": config must be a JSON object");
  return doc;
}

TrainConfig EffectiveTrainConfig(const json& file, const Flags& f,
                                 const Options& o) {
  TrainConfig c = TrainConfigFromJson(file);
  if (Given(o.seed)) c.seed = f.seed;
  if (Given(o.mode)) {
    const auto mode = ParseTrainMode(f.mode);
    if (!mode) throw UsageError("unknown --mode: " + f.mode);
    c.mode = *mode;
  }
  if (Given(o.order)) {
    const auto order = ParseMetaOrder(f.order);
    if (!order) throw UsageError("unknown --order: " + f.order);
    c.order = *order;
  }
  if (Given(o.k)) c.k = f.k;
  if (Given(o.tp)) c.tp = f.tp;
  if (Given(o.tm)) c.tm = f.tm;
  if (Given(o.lr_theta)) c.lr_theta = f.lr_theta;
  if (Given(o.lr_omega)) c.lr_omega = f.lr_omega;
  if (Given(o.neumann_j)) c.neumann_j = f.neumann_j;
  if (Given(o.neumann_alpha)) c.neumann_alpha = f.neumann_alpha;
  if (Given(o.rounds)) c.rounds = f.rounds;
  if (Given(o.patience)) c.patience = f.patience;
  c.Validate();
  return c;
}

void EnsureDir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::string Join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

Corpus LoadCorpus(const std::string& dir, DataConfig* data_config) {
  const std::string vocab_path = Join(dir, kVocabFile);
  const json manifest = ReadJsonFile(vocab_path);
  Corpus corpus;
  try {
    corpus.world = WorldFromJson(manifest);
    if (data_config != nullptr) {
      *data_config = DataConfigFromJson(manifest.value("config", json::object()));
    }
  } catch (const json::exception& e) {
    throw DataError(vocab_path + ": " + e.what());
  }
  const Vocabulary& vocab = corpus.world.vocab;
  corpus.data.train = LoadDataset(Join(dir, kTrainFile), vocab);
  if (fs::exists(Join(dir, kIidFile))) {
    corpus.data.iid = LoadDataset(Join(dir, kIidFile), vocab);
  }
  corpus.data.test = LoadDataset(Join(dir, kTestFile), vocab);
  corpus.data.triplets = CollectTriplets(corpus.data.test);
  return corpus;
}

std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  try {
    if (text.find(',') == std::string::npos) {
      const long long n = std::stoll(text);
      if (n < 1) throw UsageError("--seeds must be >= 1");
      for (long long s = 0; s < n; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      std::stringstream in(text);
      std::string item;
      while (std::getline(in, item, ',')) seeds.push_back(std::stoull(item));
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const UsageError*>(&e) != nullptr) throw;
    throw UsageError("--seeds expects a count or a comma-separated list");
  }
  return seeds;
}

json ModelToJson(const TrainResult& result, const TrainConfig& config,
                 const json& data_config) {
  json nets = json::array();
  for (const ad::ParamSet& omega : result.state.omegas) {
    nets.push_back(ParamSetToJson(omega));
  }
  return {{"config", TrainConfigToJson(config)},
          {"data", data_config},
          {"seed", config.seed},
          {"params", ParamSetToJson(result.model.params)},
          {"meta_nets", std::move(nets)}};
}

int GenData(const json& file, const Flags& f, const Options& o) {
  DataConfig data = DataConfigFromJson(file);
  const std::uint64_t seed =
      Given(o.seed) ? f.seed : file.value("seed", std::uint64_t{0});
  EnsureDir(f.out);
  const Corpus corpus = GenerateCorpus(data, seed);
  WriteDataset(Join(f.out, kTrainFile), corpus.data.train);
  WriteDataset(Join(f.out, kIidFile), corpus.data.iid);
  WriteDataset(Join(f.out, kTestFile), corpus.data.test);
  json vocab_doc = WorldToJson(corpus.world);
  vocab_doc["config"] = DataConfigToJson(data);
  vocab_doc["seed"] = seed;
  WriteJsonFile(Join(f.out, kVocabFile), vocab_doc);
  std::cout << "wrote " << corpus.data.train.size() << " train, "
            << corpus.data.iid.size() << " iid, " << corpus.data.test.size()
            << " test samples to " << f.out << "\n";
  return 0;
}

int Train(const json& file, const Flags& f, const Options& o) {
  const TrainConfig config = EffectiveTrainConfig(file, f, o);
  DataConfig data = DataConfigFromJson(file);
  Corpus corpus = f.data_dir.empty() ? GenerateCorpus(data, config.seed)
                                     : LoadCorpus(f.data_dir, &data);
  EnsureDir(f.out);
  const TrainResult result =
      Run(config, corpus.data.train, corpus.world.vocab,
          [](const RoundRecord& r) {
            std::cerr << "round " << r.round << " train_loss " << r.train_loss
                      << "\n";
          });
  json data_json = DataConfigToJson(data);
  if (!f.data_dir.empty()) data_json["data_dir"] = f.data_dir;
  WriteJsonFile(Join(f.out, "model.json"), ModelToJson(result, config, data_json));
  json history = HistoryToJson(result.state, result.partition, config);
  history["data"] = data_json;
  WriteJsonFile(Join(f.out, "history.json"), history);
  return 0;
}

int Eval(const Flags& f) {
  if (f.model_path.empty()) throw UsageError("--model is required");
  const json doc = ReadJsonFile(f.model_path);
  TrainConfig config;
  DataConfig data;
  CompositionModel model;
  try {
    config = TrainConfigFromJson(doc.at("config"));
    data = DataConfigFromJson(doc.value("data", json::object()));
    model.params = ParamSetFromJson(doc.at("params"));
  } catch (const json::exception& e) {
    throw DataError(f.model_path + ": " + e.what());
  }
  const Corpus corpus = f.data_dir.empty() ? GenerateCorpus(data, config.seed)
                                           : LoadCorpus(f.data_dir, nullptr);
  model.dims = DimsFor(corpus.world.vocab, config.model);
  const EvalReport report = EvaluateModel(model, corpus);
  EnsureDir(f.out);
  json provenance = TrainConfigToJson(config);
  provenance["data"] = DataConfigToJson(data);
  provenance["model"] = f.model_path;
  EmitReport(report, provenance, Join(f.out, "report.json"),
             Join(f.out, "report.csv"));
  if (!f.predictions.empty()) {
    std::string lines;
    const Predictions predictions =
        PredictAnswers(model, corpus.data.test, corpus.world.vocab);
    for (const Sample& s : corpus.data.test) {
      lines += json{{"id", s.id}, {"answer", predictions.at(s.id)}}.dump() + "\n";
    }
    WriteTextFile(f.predictions, lines);
  }
  std::cout << ReportCsv(report);
  return 0;
}

int Score(const Flags& f) {
  if (f.predictions.empty() || f.triplets.empty()) {
    throw UsageError("score requires --predictions and --triplets");
  }
  const Predictions predictions = LoadPredictions(f.predictions);
  const std::vector<LabeledItem> items = LoadLabeledItems(f.triplets);
  const EvalReport report = Evaluate(predictions, items);
  const json provenance = {{"predictions", f.predictions},
                           {"triplets", f.triplets}};
  if (!f.out.empty()) {
    EnsureDir(f.out);
    EmitReport(report, provenance, Join(f.out, "report.json"),
               Join(f.out, "report.csv"));
  }
  std::cout << ReportCsv(report);
  return 0;
}

int Ablate(const json& file, const Flags& f, const Options& o) {
  const TrainConfig base = EffectiveTrainConfig(file, f, o);
  const DataConfig data = DataConfigFromJson(file);
  const std::vector<std::uint64_t> seeds = ParseSeeds(f.seeds);
  EnsureDir(f.out);
  const std::vector<AblationCell> cells = RunAblation(base, data, seeds);
  WriteTextFile(Join(f.out, "ablation.csv"), AblationCsv(cells));
  json doc = AblationJson(cells, base, data);
  doc["seeds"] = seeds;
  WriteJsonFile(Join(f.out, "ablation.json"), doc);
  std::cout << AblationCsv(cells);
  return 0;
}

int RunCommand(int argc, const char* const* argv) {
  CLI::App app{"Multilevel optimization for compositional generalization"};
  app.require_subcommand(1);
  Flags f;
  Options o;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic task");
  auto* train = app.add_subcommand("train", "train one model");
  auto* eval = app.add_subcommand("eval", "evaluate a trained model");
  auto* score = app.add_subcommand("score", "score external predictions");
  auto* ablate = app.add_subcommand("ablate", "compare training modes");

  for (CLI::App* cmd : {gen, train, eval, score, ablate}) {
    cmd->add_option("--out", f.out, "output directory");
  }
  for (CLI::App* cmd : {gen, train, ablate}) {
    cmd->add_option("--config", f.config_path, "flat JSON config")
        ->check(CLI::ExistingFile);
  }
  o.seed = gen->add_option("--seed", f.seed, "random seed");
  Options train_opts;
  train_opts.seed = train->add_option("--seed", f.seed, "random seed");
  AddTrainFlags(*train, f, train_opts);
  Options ablate_opts;
  AddTrainFlags(*ablate, f, ablate_opts);
  ablate->add_option("--seeds", f.seeds, "seed count or comma-separated list");
  train->add_option("--data", f.data_dir, "directory written by gen-data");
  eval->add_option("--data", f.data_dir, "directory written by gen-data");
  eval->add_option("--model", f.model_path, "model.json from train");
  eval->add_option("--predictions", f.predictions, "write test predictions");
  score->add_option("--predictions", f.predictions, "JSON-lines predictions");
  score->add_option("--triplets", f.triplets, "JSON-lines labeled samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (gen->parsed()) return GenData(LoadConfigFile(f.config_path), f, o);
  if (train->parsed()) return Train(LoadConfigFile(f.config_path), f, train_opts);
  if (eval->parsed()) return Eval(f);
  if (score->parsed()) return Score(f);
  return Ablate(LoadConfigFile(f.config_path), f, ablate_opts);
}

}  // namespace

DataConfig DataConfigFromJson(const json& doc, DataConfig base) {
  if (!doc.is_object()) throw DataError("data config must be a JSON object");
  try {
    base.world_seed = doc.value("world_seed", base.world_seed);
    base.counts.train = doc.value("num_train", base.counts.train);
    base.counts.triplets = doc.value("num_triplets", base.counts.triplets);
    base.counts.iid = doc.value("num_iid", base.counts.iid);
    base.world.blacklist_size =
        doc.value("blacklist_size", base.world.blacklist_size);
  } catch (const json::exception& e) {
    throw DataError(std::string("data config: ") + e.what());
  }
  return base;
}

json DataConfigToJson(const DataConfig& c) {
  return {{"world_seed", c.world_seed},
          {"num_train", c.counts.train},
          {"num_triplets", c.counts.triplets},
          {"num_iid", c.counts.iid},
          {"blacklist_size", c.world.blacklist_size}};
}

Corpus GenerateCorpus(const DataConfig& config, std::uint64_t seed) {
  Corpus corpus;
  corpus.world = GenerateWorld(config.world, config.world_seed);
  corpus.data = GenerateDatasets(corpus.world, config.counts, seed);
  return corpus;
}

Predictions PredictAnswers(const CompositionModel& model,
                           const std::vector<Sample>& samples,
                           const Vocabulary& vocab) {
  Predictions out;
  if (samples.empty()) return out;
  ad::NoGradGuard no_grad;
  const EncodedBatch batch = EncodeBatch(samples, vocab);
  const Tensor p = Predict(model.params.Constants(), batch).value();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[samples[batch.source_index[i]].id] = BoolAnswer(p[i] >= 0.5);
  }
  return out;
}

EvalReport EvaluateModel(const CompositionModel& model, const Corpus& corpus) {
  const Vocabulary& vocab = corpus.world.vocab;
  EvalReport report = Evaluate(PredictAnswers(model, corpus.data.test, vocab),
                               LabeledItemsFrom(corpus.data.test));
  if (!corpus.data.iid.empty()) {
    const Predictions iid = PredictAnswers(model, corpus.data.iid, vocab);
    std::size_t correct = 0;
    for (const Sample& s : corpus.data.iid) {
      correct += static_cast<std::size_t>(
          Correctness(iid.at(s.id), BoolAnswer(s.answer)));
    }
    report.iid_accuracy =
        static_cast<double>(correct) / static_cast<double>(corpus.data.iid.size());
  }
  return report;
}

std::vector<TrainConfig> AblationConfigs(const TrainConfig& base) {
  std::vector<TrainConfig> configs;
  auto add = [&](TrainMode mode, MetaOrder order) {
    TrainConfig c = base;
    c.mode = mode;
    c.order = order;
    configs.push_back(c);
  };
  add(TrainMode::kBaseline, MetaOrder::kSimpleToComplex);
  add(TrainMode::kMwnSimultaneous, MetaOrder::kSimpleToComplex);
  add(TrainMode::kMlo, MetaOrder::kSimpleToComplex);
  add(TrainMode::kMlo, MetaOrder::kComplexToSimple);
  return configs;
}

std::vector<AblationCell> RunAblation(const TrainConfig& base,
                                      const DataConfig& data,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationCell> cells;
  for (std::uint64_t seed : seeds) {
    const Corpus corpus = GenerateCorpus(data, seed);
    for (TrainConfig config : AblationConfigs(base)) {
      config.seed = seed;
      config.Validate();
      const TrainResult result =
          Run(config, corpus.data.train, corpus.world.vocab);
      AblationCell cell;
      cell.mode = config.mode;
      if (config.mode == TrainMode::kMlo) cell.order = config.order;
      cell.seed = seed;
      cell.report = EvaluateModel(result.model, corpus);
      cells.push_back(std::move(cell));
    }
  }
  std::sort(cells.begin(), cells.end(),
            [](const AblationCell& a, const AblationCell& b) {
              const int ao = a.order ? static_cast<int>(*a.order) : -1;
              const int bo = b.order ? static_cast<int>(*b.order) : -1;
              return std::make_tuple(static_cast<int>(a.mode), ao, a.seed) <
                     std::make_tuple(static_cast<int>(b.mode), bo, b.seed);
            });
  return cells;
}

std::string AblationCsv(const std::vector<AblationCell>& cells) {
  std::ostringstream out;
  out.precision(17);
  out << "mode,order,seed,overall_accuracy,accuracy_pp,accuracy_pw,"
         "accuracy_ww,consistency,iid_accuracy\n";
  for (const AblationCell& c : cells) {
    const EvalReport& r = c.report;
    out << TrainModeName(c.mode) << ","
        << (c.order ? MetaOrderName(*c.order) : "-") << "," << c.seed << ","
        << r.overall_accuracy << "," << r.accuracy_pp << "," << r.accuracy_pw
        << "," << r.accuracy_ww << "," << r.consistency << ",";
    if (r.iid_accuracy) out << *r.iid_accuracy;
    out << "\n";
  }
  return out.str();
}

json AblationJson(const std::vector<AblationCell>& cells,
                  const TrainConfig& base, const DataConfig& data) {
  json rows = json::array();
  for (const AblationCell& c : cells) {
    const EvalReport& r = c.report;
    rows.push_back({{"mode", TrainModeName(c.mode)},
                    {"order", c.order ? json(MetaOrderName(*c.order)) : json()},
                    {"seed", c.seed},
                    {"overall_accuracy", r.overall_accuracy},
                    {"accuracy_pp", r.accuracy_pp},
                    {"accuracy_pw", r.accuracy_pw},
                    {"accuracy_ww", r.accuracy_ww},
                    {"consistency", r.consistency},
                    {"iid_accuracy", r.iid_accuracy ? json(*r.iid_accuracy) : json()}});
  }
  json config = TrainConfigToJson(base);
  config.erase("mode");
  config.erase("order");
  config.erase("seed");
  return {{"config", std::move(config)},
          {"data", DataConfigToJson(data)},
          {"rows", std::move(rows)}};
}

int Dispatch(int argc, const char* const* argv) {
  try {
    return RunCommand(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ccg
