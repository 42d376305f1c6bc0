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

#ifndef CCG_MODELS_H_
#define CCG_MODELS_H_

// The task model and the per-bucket meta-weight-nets.
//
// Task model: each query slot (first and second descriptor) is encoded as the
// mean embedding of its items, the two slot encodings are concatenated with a
// multi-hot scene vector over (size, color, shape) combinations, and a
// two-layer perceptron with a sigmoid output predicts P(answer = yes).
//
// Meta-weight-net: three fully connected layers (feature -> m -> m -> 1) with
// ReLU between them and a sigmoid on top, mapping a query feature to a sample
// weight in (0,1).

#include <cstdint>
#include <span>
#include <vector>

#include "ccg/autodiff.h"
#include "ccg/synth_task.h"
#include "ccg/tensor.h"
#include "json.hpp"

namespace ccg {

struct ModelConfig {
  int embedding_dim = 16;
  int hidden_dim = 64;
  int meta_width = 32;
};

// Dimensions derived from the vocabulary and config.
struct ModelDims {
  int vocab_size = 0;
  int embedding_dim = 0;
  int scene_dim = 0;
  int hidden_dim = 0;

  int feature_dim() const { return 2 * embedding_dim; }
  int input_dim() const { return feature_dim() + scene_dim; }
};

ModelDims DimsFor(const Vocabulary& vocab, const ModelConfig& config);

struct CompositionModel {
  ModelDims dims;
  ad::ParamSet params;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights (embeddings use fan-in 1),
// zero biases.
CompositionModel InitCompositionModel(const Vocabulary& vocab,
                                      const ModelConfig& config,
                                      std::uint64_t seed);

struct MetaWeightNet {
  ad::ParamSet params;
};

MetaWeightNet InitMetaWeightNet(int feature_dim, int width, std::uint64_t seed);

// Dense batch view of a list of samples.
struct EncodedBatch {
  SparseMatrix first_slot;   // [N, vocab] row i averages descriptor 1's items
  SparseMatrix second_slot;  // [N, vocab] zero row without a descriptor 2
  SparseMatrix scene;        // [N, scene_dim] multi-hot object kinds
  Tensor labels;       // [N, 1]
  std::vector<std::size_t> source_index;

  std::size_t size() const { return labels.rows(); }
};

// Throws DataError on queries with more than two descriptors.
EncodedBatch EncodeBatch(const std::vector<Sample>& samples,
                         std::span<const std::size_t> indices,
                         const Vocabulary& vocab);
EncodedBatch EncodeBatch(const std::vector<Sample>& samples,
                         const Vocabulary& vocab);

// Index of an object kind in the scene vector.
int SceneSlot(const Vocabulary& vocab, const SceneObject& object);

// [N, 2*embedding_dim] slot-mean query features (differentiable in params).
ad::Var QueryFeatures(const ad::ParamSet& params, const EncodedBatch& batch);
// Same values with no link to params.
Tensor DetachedQueryFeatures(const ad::ParamSet& params,
                             const EncodedBatch& batch);
// [N, 1] probabilities.
ad::Var Predict(const ad::ParamSet& params, const EncodedBatch& batch);
// [N, 1] binary cross-entropy against the labels.
ad::Var SampleLosses(const ad::ParamSet& params, const EncodedBatch& batch);

// [N, 1] weights from one meta-weight-net applied to [N, feature_dim] features.
ad::Var MetaWeights(const ad::ParamSet& omega, const ad::Var& features);

// Single-sample conveniences.
std::vector<double> EncodeQuery(const Sample& sample,
                                const CompositionModel& model,
                                const Vocabulary& vocab);
double ModelForward(const Sample& sample, const CompositionModel& model,
                    const Vocabulary& vocab);
double SampleLoss(const Sample& sample, const CompositionModel& model,
                  const Vocabulary& vocab);
// Weight of the `bucket`-th (0-based) net for one feature vector. Throws
// UsageError if the bucket is out of range or the feature has the wrong size.
double WeightForward(int bucket, std::span<const double> feature,
                     std::span<const MetaWeightNet> nets);

// {"shape":[r,c], "data":[...]} per parameter.
nlohmann::json ParamSetToJson(const ad::ParamSet& params);
ad::ParamSet ParamSetFromJson(const nlohmann::json& doc);

}  // namespace ccg

#endif  // CCG_MODELS_H_
