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

#include "ccg/models.h"

#include <cmath>
#include <random>
#include <sstream>

#include "ccg/errors.h"

namespace ccg {
namespace {

Tensor UniformTensor(std::size_t rows, std::size_t cols, double bound,
                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(rows * cols);
  for (double& x : data) x = dist(rng);
  return Tensor(rows, cols, std::move(data));
}

void AddLinear(ad::ParamSet& params, const std::string& name, int fan_in,
               int fan_out, std::mt19937_64& rng) {
  const auto in = static_cast<std::size_t>(fan_in);
  const auto out = static_cast<std::size_t>(fan_out);
  params.Set(name + ".weight",
             UniformTensor(in, out, 1.0 / std::sqrt(static_cast<double>(fan_in)),
                           rng));
  params.Set(name + ".bias", Tensor(1, out, 0.0));
}

ad::Var Linear(const ad::ParamSet& params, const std::string& name,
               const ad::Var& x) {
  return ad::AddRow(ad::MatMul(x, params.Get(name + ".weight")),
                    params.Get(name + ".bias"));
}

}  // namespace

ModelDims DimsFor(const Vocabulary& vocab, const ModelConfig& config) {
  if (config.embedding_dim < 1 || config.hidden_dim < 1 ||
      config.meta_width < 1) {
    throw UsageError("model dimensions must be positive");
  }
  return {vocab.num_items(), config.embedding_dim, vocab.NumObjectKinds(),
          config.hidden_dim};
}

CompositionModel InitCompositionModel(const Vocabulary& vocab,
                                      const ModelConfig& config,
                                      std::uint64_t seed) {
  CompositionModel model;
  model.dims = DimsFor(vocab, config);
  std::mt19937_64 rng(seed);
  const ModelDims& d = model.dims;
  model.params.Set("embedding",
                   UniformTensor(static_cast<std::size_t>(d.vocab_size),
                                 static_cast<std::size_t>(d.embedding_dim), 1.0,
                                 rng));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.input_dim()));
  const auto h = static_cast<std::size_t>(d.hidden_dim);
  model.params.Set("hidden.query_weight",
                   UniformTensor(static_cast<std::size_t>(d.feature_dim()), h,
                                 bound, rng));
  model.params.Set("hidden.scene_weight",
                   UniformTensor(static_cast<std::size_t>(d.scene_dim), h,
                                 bound, rng));
  model.params.Set("hidden.bias", Tensor(1, h, 0.0));
  AddLinear(model.params, "output", d.hidden_dim, 1, rng);
  return model;
}

MetaWeightNet InitMetaWeightNet(int feature_dim, int width,
                                std::uint64_t seed) {
  if (feature_dim < 1 || width < 1) {
    throw UsageError("meta-weight-net dimensions must be positive");
  }
  MetaWeightNet net;
  std::mt19937_64 rng(seed);
  AddLinear(net.params, "fc1", feature_dim, width, rng);
  AddLinear(net.params, "fc2", width, width, rng);
  AddLinear(net.params, "fc3", width, 1, rng);
  return net;
}

int SceneSlot(const Vocabulary& vocab, const SceneObject& object) {
  return (vocab.IndexOf(object.size) * vocab.num_colors() +
          vocab.IndexOf(object.color)) *
             vocab.num_shapes() +
         vocab.IndexOf(object.shape);
}

EncodedBatch EncodeBatch(const std::vector<Sample>& samples,
                         std::span<const std::size_t> indices,
                         const Vocabulary& vocab) {
  const std::size_t n = indices.size();
  const auto v = static_cast<std::size_t>(vocab.num_items());
  const auto s = static_cast<std::size_t>(vocab.NumObjectKinds());
  std::vector<double> first(n * v, 0.0), second(n * v, 0.0), scene(n * s, 0.0),
      labels(n, 0.0);
  EncodedBatch batch;
  batch.source_index.assign(indices.begin(), indices.end());
  for (std::size_t row = 0; row < n; ++row) {
    const Sample& sample = samples.at(indices[row]);
    if (sample.query.empty() || sample.query.size() > 2) {
      throw DataError("sample " + sample.id +
                      ": query must have one or two descriptors");
    }
    for (std::size_t slot = 0; slot < sample.query.size(); ++slot) {
      std::vector<double>& target = slot == 0 ? first : second;
      const std::vector<int> items = sample.query[slot].Items();
      for (int item : items) {
        if (!vocab.IsValid(item)) {
          throw DataError("sample " + sample.id + ": unknown item " +
                          std::to_string(item));
        }
        target[row * v + static_cast<std::size_t>(item)] +=
            1.0 / static_cast<double>(items.size());
      }
    }
    for (const SceneObject& o : sample.scene) {
      scene[row * s + static_cast<std::size_t>(SceneSlot(vocab, o))] = 1.0;
    }
    labels[row] = sample.answer ? 1.0 : 0.0;
  }
  batch.first_slot = SparseMatrix::FromDense(Tensor(n, v, std::move(first)));
  batch.second_slot = SparseMatrix::FromDense(Tensor(n, v, std::move(second)));
  batch.scene = SparseMatrix::FromDense(Tensor(n, s, std::move(scene)));
  batch.labels = Tensor(n, 1, std::move(labels));
  return batch;
}

EncodedBatch EncodeBatch(const std::vector<Sample>& samples,
                         const Vocabulary& vocab) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return EncodeBatch(samples, all, vocab);
}

ad::Var QueryFeatures(const ad::ParamSet& params, const EncodedBatch& batch) {
  const ad::Var& embedding = params.Get("embedding");
  return ad::ConcatCols(
      ad::SparseMatMul(batch.first_slot, embedding),
      ad::SparseMatMul(batch.second_slot, embedding));
}

Tensor DetachedQueryFeatures(const ad::ParamSet& params,
                             const EncodedBatch& batch) {
  ad::NoGradGuard no_grad;
  return QueryFeatures(params.Constants(), batch).value();
}

ad::Var Predict(const ad::ParamSet& params, const EncodedBatch& batch) {
  // [query | scene] W + b, with W split by input block.
  const ad::Var pre = ad::Add(
      ad::MatMul(QueryFeatures(params, batch), params.Get("hidden.query_weight")),
      ad::SparseMatMul(batch.scene, params.Get("hidden.scene_weight")));
  const ad::Var hidden =
      ad::Relu(ad::AddRow(pre, params.Get("hidden.bias")));
  return ad::Sigmoid(Linear(params, "output", hidden));
}

ad::Var SampleLosses(const ad::ParamSet& params, const EncodedBatch& batch) {
  return ad::BinaryCrossEntropy(Predict(params, batch), batch.labels);
}

ad::Var MetaWeights(const ad::ParamSet& omega, const ad::Var& features) {
  const ad::Var h1 = ad::Relu(Linear(omega, "fc1", features));
  const ad::Var h2 = ad::Relu(Linear(omega, "fc2", h1));
  return ad::Sigmoid(Linear(omega, "fc3", h2));
}

std::vector<double> EncodeQuery(const Sample& sample,
                                const CompositionModel& model,
                                const Vocabulary& vocab) {
  const std::vector<Sample> one{sample};
  return DetachedQueryFeatures(model.params, EncodeBatch(one, vocab)).data();
}

double ModelForward(const Sample& sample, const CompositionModel& model,
                    const Vocabulary& vocab) {
  const std::vector<Sample> one{sample};
  ad::NoGradGuard no_grad;
  return Predict(model.params, EncodeBatch(one, vocab)).value().item();
}

double SampleLoss(const Sample& sample, const CompositionModel& model,
                  const Vocabulary& vocab) {
  const std::vector<Sample> one{sample};
  ad::NoGradGuard no_grad;
  return SampleLosses(model.params, EncodeBatch(one, vocab)).value().item();
}

double WeightForward(int bucket, std::span<const double> feature,
                     std::span<const MetaWeightNet> nets) {
  if (bucket < 0 || bucket >= static_cast<int>(nets.size())) {
    std::ostringstream msg;
    msg << "meta-weight-net index " << bucket << " out of range [0,"
        << nets.size() << ")";
    throw UsageError(msg.str());
  }
  const ad::ParamSet& omega = nets[static_cast<std::size_t>(bucket)].params;
  const std::size_t expected = omega.Value("fc1.weight").rows();
  if (feature.size() != expected) {
    std::ostringstream msg;
    msg << "feature dimension " << feature.size() << " != " << expected;
    throw UsageError(msg.str());
  }
  ad::NoGradGuard no_grad;
  return MetaWeights(omega, ad::Constant(Tensor::Row(feature))).value().item();
}

nlohmann::json ParamSetToJson(const ad::ParamSet& params) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, var] : params.entries()) {
    doc[name] = {{"shape", {var.rows(), var.cols()}},
                 {"data", var.value().data()}};
  }
  return doc;
}

ad::ParamSet ParamSetFromJson(const nlohmann::json& doc) {
  ad::ParamSet params;
  try {
    for (const auto& [name, entry] : doc.items()) {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw DataError("parameter " + name + ": bad shape");
      params.Set(name, Tensor(shape[0], shape[1],
                              entry.at("data").get<std::vector<double>>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parameter set: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed parameter set: ") + e.what());
  }
  return params;
}

}  // namespace ccg
