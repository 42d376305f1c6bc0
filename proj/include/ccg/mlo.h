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

#ifndef CCG_MLO_H_
#define CCG_MLO_H_

// Multilevel optimization of the task model and K meta-weight-nets.
//
// One outer round:
//   1. parameter optimization: T_p gradient steps on the weighted training
//      loss  sum_i sum_{d in bucket i} w_d * loss(theta; d)  with all nets
//      frozen; the result is taken as theta*.
//   2. meta optimization: each net omega_i takes T_m steps on the gradient of
//      its bucket's (unweighted) loss at theta*. That gradient goes through
//      the best response theta*(omega) and is approximated with the implicit
//      function theorem:
//        d L_v / d omega_i = - (d L_v/d theta) H^-1 (d^2 L_t / d theta d omega_i)
//      with H^-1 applied by a truncated Neumann series.
//
// Modes: `baseline` (all weights 1, no meta step), `mwn-simultaneous` (nets
// updated in interleaved order against one shared theta*), `mlo` (nets
// updated one bucket at a time, simple-to-complex or reversed; before each
// bucket after the first, theta* is re-derived as the best response to the
// nets updated so far).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccg/autodiff.h"
#include "ccg/models.h"
#include "ccg/partition.h"
#include "ccg/synth_task.h"
#include "json.hpp"

namespace ccg {

enum class TrainMode { kBaseline, kMwnSimultaneous, kMlo };
enum class MetaOrder { kSimpleToComplex, kComplexToSimple };

const char* TrainModeName(TrainMode mode);
const char* MetaOrderName(MetaOrder order);
// Accepts "baseline", "mwn-sim" / "mwn-simultaneous", "mlo".
std::optional<TrainMode> ParseTrainMode(const std::string& name);
// Accepts "s2c", "c2s".
std::optional<MetaOrder> ParseMetaOrder(const std::string& name);

struct TrainConfig {
  int k = 3;
  int tp = 10;
  int tm = 1;
  double lr_theta = 2.5e-4;
  double lr_omega = 1e-3;
  int neumann_j = 3;
  // Defaults to lr_theta.
  std::optional<double> neumann_alpha;
  int rounds = 30;
  int patience = 5;
  // 0 selects full-batch gradient descent.
  int batch_size = 0;
  // Steps used to re-derive theta* between buckets in mlo mode (0 disables).
  std::optional<int> refresh_steps;
  bool normalize_weights = false;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kMlo;
  MetaOrder order = MetaOrder::kSimpleToComplex;
  ModelConfig model;

  double alpha() const { return neumann_alpha.value_or(lr_theta); }
  int refresh() const { return refresh_steps.value_or(tp); }
  // Throws UsageError on violated invariants.
  void Validate() const;
};

// Flat key space: "k", "tp", "tm", "lr_theta", "lr_omega", "neumann_j",
// "neumann_alpha", "rounds", "patience", "batch_size", "refresh_steps",
// "normalize_weights", "seed", "mode", "order", "embedding_dim",
// "hidden_dim", "meta_width". Unknown keys are ignored by the parser.
nlohmann::json TrainConfigToJson(const TrainConfig& config);
// Overlays the keys present in `doc` onto `base`.
TrainConfig TrainConfigFromJson(const nlohmann::json& doc,
                                TrainConfig base = {});

// Training samples grouped by validation bucket.
struct BucketedBatch {
  std::vector<EncodedBatch> buckets;

  std::size_t size() const;
};

BucketedBatch MakeBucketedBatch(const std::vector<Sample>& samples,
                                std::span<const std::size_t> indices,
                                const ValidationPartition& partition,
                                const Vocabulary& vocab);

// Weighted training loss. Baseline mode uses weight 1 for every sample.
// Meta-weight-net inputs are query features detached from theta. When
// `only_bucket` is set the sum is restricted to that bucket (valid only
// without weight normalization).
ad::Var WeightedTrainLoss(const ad::ParamSet& theta,
                          std::span<const ad::ParamSet> omegas,
                          const BucketedBatch& batch, TrainMode mode,
                          bool normalize_weights,
                          std::optional<int> only_bucket = std::nullopt);

// Unweighted summed loss of one bucket.
ad::Var BucketLoss(const ad::ParamSet& theta, const EncodedBatch& bucket);

// `steps` plain gradient-descent steps on loss_fn.
ad::ParamSet GradientDescent(const ad::LossFn& loss_fn, ad::ParamSet start,
                             double lr, int steps);

// Hessian-vector products of a fixed loss at a fixed point; the first
// backward pass is recorded once and reused across Apply calls.
class HessianVectorOperator {
 public:
  HessianVectorOperator(const ad::LossFn& loss_fn, const ad::ParamSet& point);
  std::vector<double> Apply(std::span<const double> v) const;
  std::size_t dim() const { return dim_; }
  int calls() const { return calls_; }

 private:
  std::vector<ad::Var> vars_;
  std::vector<ad::Var> grads_;
  std::size_t dim_ = 0;
  mutable int calls_ = 0;
};

using HvpFn = std::function<std::vector<double>(std::span<const double>)>;

// alpha * sum_{j=0..J} (I - alpha H)^j v with exactly J calls to hvp.
std::vector<double> NeumannIhvp(const HvpFn& hvp, std::span<const double> v,
                                double alpha, int j);

// Implicit-function hypergradient of val_loss(theta*(omega)) w.r.t. omega.
// `hessian_loss` is the full inner objective in theta (omega held fixed);
// `coupling_loss` is any function with the same mixed partial
// d^2/(d theta d omega) as the inner objective.
std::vector<double> ImplicitHypergradient(const ad::LossFn& hessian_loss,
                                          const ad::CoupledLossFn& coupling_loss,
                                          const ad::LossFn& val_loss,
                                          const ad::ParamSet& theta_star,
                                          const ad::ParamSet& omega,
                                          double alpha, int j);

struct RoundRecord {
  int round = 0;
  double train_loss = 0.0;
  std::vector<double> bucket_val_loss;  // mean unweighted loss per bucket
  std::vector<double> bucket_mean_weight;
  std::vector<int> trace;  // 1-based bucket per meta update this round
};

struct TrainState {
  ad::ParamSet theta;
  std::vector<ad::ParamSet> omegas;
  int round = 0;
  // 1-based bucket index of every meta update, in call order.
  std::vector<int> trace;
  std::vector<RoundRecord> history;
};

// Everything the optimizer needs about the training data.
struct TrainingData {
  const std::vector<Sample>* samples = nullptr;
  const Vocabulary* vocab = nullptr;
  ValidationPartition partition;
  BucketedBatch full;  // whole training set, by bucket
};

TrainingData PrepareTrainingData(const std::vector<Sample>& train,
                                 const Vocabulary& vocab, int k);

TrainState InitTrainState(const TrainConfig& config, const ModelDims& dims,
                          const Vocabulary& vocab);

// Gradient of bucket `bucket`'s validation loss w.r.t. omegas[bucket] at
// theta_star. Other nets are constants.
std::vector<double> BucketHypergradient(int bucket,
                                        const ad::ParamSet& theta_star,
                                        std::span<const ad::ParamSet> omegas,
                                        const BucketedBatch& train_batch,
                                        const TrainingData& data,
                                        const TrainConfig& config);

// T_p descent steps on the weighted loss with nets frozen.
ad::ParamSet ParameterOptimization(const ad::ParamSet& theta,
                                   std::span<const ad::ParamSet> omegas,
                                   const BucketedBatch& batch,
                                   const TrainConfig& config, int steps);

// Meta phase of one round; appends to state.trace and returns this round's
// trace.
std::vector<int> MetaOptimization(TrainState& state, const TrainingData& data,
                                  const BucketedBatch& train_batch,
                                  const TrainConfig& config);

// Deterministic sub-seed for an independent random stream.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

struct TrainResult {
  // Inference artifact (no meta-weight-nets): theta after the round with the
  // lowest mean bucket validation loss.
  CompositionModel model;
  TrainState state;
  ValidationPartition partition;
};

// Optional per-round progress sink.
using RoundCallback = std::function<void(const RoundRecord&)>;

TrainResult Run(const TrainConfig& config, const std::vector<Sample>& train,
                const Vocabulary& vocab, const RoundCallback& on_round = {});

nlohmann::json HistoryToJson(const TrainState& state,
                             const ValidationPartition& partition,
                             const TrainConfig& config);

}  // namespace ccg

#endif  // CCG_MLO_H_
