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

#include "ccg/mlo.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ccg/errors.h"

namespace ccg {
namespace {

using nlohmann::json;

ad::ParamSet Step(const ad::ParamSet& params, std::span<const double> grad,
                  double lr) {
  std::vector<double> flat = params.Flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * grad[i];
  return params.Unflatten(flat);
}

std::vector<ad::ParamSet> ConstantsOf(std::span<const ad::ParamSet> sets) {
  std::vector<ad::ParamSet> out;
  out.reserve(sets.size());
  for (const ad::ParamSet& s : sets) out.push_back(s.Constants());
  return out;
}

// Non-empty buckets in meta-update order.
std::vector<int> BucketOrder(const ValidationPartition& partition,
                             MetaOrder order) {
  std::vector<int> buckets;
  for (int b = 0; b < partition.num_buckets; ++b) {
    if (partition.bucket_sizes[static_cast<std::size_t>(b)] > 0) {
      buckets.push_back(b);
    }
  }
  if (order == MetaOrder::kComplexToSimple) {
    std::reverse(buckets.begin(), buckets.end());
  }
  return buckets;
}

template <typename T>
void ReadKey(const json& doc, const char* key, T& out) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("config key \"") + key + "\" has wrong type");
  }
}

// Per-bucket mean unweighted loss and mean weight over the full training set.
void Summarize(const TrainState& state, const TrainingData& data,
               const TrainConfig& config, RoundRecord& record) {
  ad::NoGradGuard no_grad;
  const ad::ParamSet theta = state.theta.Constants();
  double weighted = 0.0;
  std::size_t total = 0;
  for (std::size_t b = 0; b < data.full.buckets.size(); ++b) {
    const EncodedBatch& batch = data.full.buckets[b];
    if (batch.size() == 0) {
      record.bucket_val_loss.push_back(0.0);
      record.bucket_mean_weight.push_back(0.0);
      continue;
    }
    const Tensor losses = SampleLosses(theta, batch).value();
    double loss_sum = 0.0;
    for (double l : losses.data()) loss_sum += l;
    double weight_mean = 1.0;
    double weighted_sum = loss_sum;
    if (config.mode != TrainMode::kBaseline) {
      const Tensor w =
          MetaWeights(state.omegas[b].Constants(),
                      ad::Constant(DetachedQueryFeatures(theta, batch)))
              .value();
      weighted_sum = 0.0;
      weight_mean = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        weighted_sum += w[i] * losses[i];
        weight_mean += w[i];
      }
      weight_mean /= static_cast<double>(w.size());
    }
    const auto n = static_cast<double>(batch.size());
    record.bucket_val_loss.push_back(loss_sum / n);
    record.bucket_mean_weight.push_back(weight_mean);
    weighted += weighted_sum;
    total += batch.size();
  }
  record.train_loss = weighted / static_cast<double>(total);
}

// Seeded sampler of training mini-batches (whole epochs, reshuffled).
class BatchStream {
 public:
  BatchStream(const TrainingData& data, int batch_size, std::uint64_t seed)
      : data_(data),
        batch_size_(static_cast<std::size_t>(batch_size)),
        rng_(seed) {}

  const BucketedBatch& Next() {
    if (batch_size_ == 0) return data_.full;
    const std::size_t n = data_.samples->size();
    if (order_.empty() || cursor_ >= n) {
      order_.resize(n);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const std::size_t end = std::min(n, cursor_ + batch_size_);
    current_ = MakeBucketedBatch(
        *data_.samples,
        std::span<const std::size_t>(order_.data() + cursor_, end - cursor_),
        data_.partition, *data_.vocab);
    cursor_ = end;
    return current_;
  }

  const BucketedBatch& Current() const {
    return batch_size_ == 0 ? data_.full : current_;
  }

 private:
  const TrainingData& data_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  BucketedBatch current_;
};

}  // namespace

const char* TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline:
      return "baseline";
    case TrainMode::kMwnSimultaneous:
      return "mwn-sim";
    case TrainMode::kMlo:
      return "mlo";
  }
  return "?";
}

const char* MetaOrderName(MetaOrder order) {
  return order == MetaOrder::kSimpleToComplex ? "s2c" : "c2s";
}

std::optional<TrainMode> ParseTrainMode(const std::string& name) {
  if (name == "baseline") return TrainMode::kBaseline;
  if (name == "mwn-sim" || name == "mwn-simultaneous") {
    return TrainMode::kMwnSimultaneous;
  }
  if (name == "mlo") return TrainMode::kMlo;
  return std::nullopt;
}

std::optional<MetaOrder> ParseMetaOrder(const std::string& name) {
  if (name == "s2c") return MetaOrder::kSimpleToComplex;
  if (name == "c2s") return MetaOrder::kComplexToSimple;
  return std::nullopt;
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw UsageError(msg); };
  if (k < 1) fail("k must be >= 1");
  if (tp < 1) fail("tp must be >= 1");
  if (mode == TrainMode::kBaseline ? tm < 0 : tm < 1) {
    fail("tm must be >= 1 (>= 0 in baseline mode)");
  }
  if (!(lr_theta > 0.0) || !(lr_omega > 0.0)) fail("learning rates must be > 0");
  if (neumann_j < 0) fail("neumann_j must be >= 0");
  if (!(alpha() > 0.0)) fail("neumann_alpha must be > 0");
  if (rounds < 1) fail("rounds must be >= 1");
  if (patience < 1) fail("patience must be >= 1");
  if (batch_size < 0) fail("batch_size must be >= 0");
  if (refresh() < 0) fail("refresh_steps must be >= 0");
  if (model.embedding_dim < 1 || model.hidden_dim < 1 || model.meta_width < 1) {
    fail("model dimensions must be >= 1");
  }
}

json TrainConfigToJson(const TrainConfig& c) {
  return {{"k", c.k},
          {"tp", c.tp},
          {"tm", c.tm},
          {"lr_theta", c.lr_theta},
          {"lr_omega", c.lr_omega},
          {"neumann_j", c.neumann_j},
          {"neumann_alpha", c.alpha()},
          {"rounds", c.rounds},
          {"patience", c.patience},
          {"batch_size", c.batch_size},
          {"refresh_steps", c.refresh()},
          {"normalize_weights", c.normalize_weights},
          {"seed", c.seed},
          {"mode", TrainModeName(c.mode)},
          {"order", MetaOrderName(c.order)},
          {"embedding_dim", c.model.embedding_dim},
          {"hidden_dim", c.model.hidden_dim},
          {"meta_width", c.model.meta_width}};
}

TrainConfig TrainConfigFromJson(const json& doc, TrainConfig base) {
  if (!doc.is_object()) throw DataError("config must be a JSON object");
  ReadKey(doc, "k", base.k);
  ReadKey(doc, "tp", base.tp);
  ReadKey(doc, "tm", base.tm);
  ReadKey(doc, "lr_theta", base.lr_theta);
  ReadKey(doc, "lr_omega", base.lr_omega);
  ReadKey(doc, "neumann_j", base.neumann_j);
  if (doc.contains("neumann_alpha") && !doc["neumann_alpha"].is_null()) {
    double alpha = 0.0;
    ReadKey(doc, "neumann_alpha", alpha);
    base.neumann_alpha = alpha;
  }
  ReadKey(doc, "rounds", base.rounds);
  ReadKey(doc, "patience", base.patience);
  ReadKey(doc, "batch_size", base.batch_size);
  if (doc.contains("refresh_steps") && !doc["refresh_steps"].is_null()) {
    int steps = 0;
    ReadKey(doc, "refresh_steps", steps);
    base.refresh_steps = steps;
  }
  ReadKey(doc, "normalize_weights", base.normalize_weights);
  ReadKey(doc, "seed", base.seed);
  if (doc.contains("mode")) {
    std::string mode;
    ReadKey(doc, "mode", mode);
    const auto parsed = ParseTrainMode(mode);
    if (!parsed) throw UsageError("unknown mode: " + mode);
    base.mode = *parsed;
  }
  if (doc.contains("order")) {
    std::string order;
    ReadKey(doc, "order", order);
    const auto parsed = ParseMetaOrder(order);
    if (!parsed) throw UsageError("unknown order: " + order);
    base.order = *parsed;
  }
  ReadKey(doc, "embedding_dim", base.model.embedding_dim);
  ReadKey(doc, "hidden_dim", base.model.hidden_dim);
  ReadKey(doc, "meta_width", base.model.meta_width);
  return base;
}

std::size_t BucketedBatch::size() const {
  std::size_t n = 0;
  for (const EncodedBatch& b : buckets) n += b.size();
  return n;
}

BucketedBatch MakeBucketedBatch(const std::vector<Sample>& samples,
                                std::span<const std::size_t> indices,
                                const ValidationPartition& partition,
                                const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> groups(
      static_cast<std::size_t>(partition.num_buckets));
  for (std::size_t idx : indices) {
    if (idx >= partition.bucket_of_sample.size()) {
      throw UsageError("sample " +
                       (idx < samples.size() ? samples[idx].id
                                             : std::to_string(idx)) +
                       " has no bucket assignment");
    }
    groups[static_cast<std::size_t>(partition.bucket_of_sample[idx])]
        .push_back(idx);
  }
  BucketedBatch batch;
  for (const auto& group : groups) {
    batch.buckets.push_back(EncodeBatch(samples, group, vocab));
  }
  return batch;
}

ad::Var WeightedTrainLoss(const ad::ParamSet& theta,
                          std::span<const ad::ParamSet> omegas,
                          const BucketedBatch& batch, TrainMode mode,
                          bool normalize_weights,
                          std::optional<int> only_bucket) {
  const bool weighted = mode != TrainMode::kBaseline;
  if (weighted && omegas.size() != batch.buckets.size()) {
    throw UsageError("need one meta-weight-net per bucket");
  }
  const bool normalize = weighted && normalize_weights;
  if (normalize && only_bucket) {
    throw UsageError("bucket-restricted loss is undefined with normalization");
  }
  ad::Var total;
  ad::Var weight_sum;
  std::size_t count = 0;
  auto accumulate = [](ad::Var& acc, const ad::Var& term) {
    acc = acc.defined() ? ad::Add(acc, term) : term;
  };
  for (std::size_t b = 0; b < batch.buckets.size(); ++b) {
    if (only_bucket && static_cast<std::size_t>(*only_bucket) != b) continue;
    const EncodedBatch& bucket = batch.buckets[b];
    if (bucket.size() == 0) continue;
    const ad::Var losses = SampleLosses(theta, bucket);
    if (!weighted) {
      accumulate(total, ad::Sum(losses));
    } else {
      const ad::Var features =
          ad::Constant(DetachedQueryFeatures(theta, bucket));
      const ad::Var w = MetaWeights(omegas[b], features);
      accumulate(total, ad::Dot(w, losses));
      if (normalize) accumulate(weight_sum, ad::Sum(w));
    }
    count += bucket.size();
  }
  if (!total.defined()) return ad::Constant(Tensor::Scalar(0.0));
  if (normalize) {
    total = ad::Div(ad::Scale(total, static_cast<double>(count)), weight_sum);
  }
  return total;
}

ad::Var BucketLoss(const ad::ParamSet& theta, const EncodedBatch& bucket) {
  if (bucket.size() == 0) return ad::Constant(Tensor::Scalar(0.0));
  return ad::Sum(SampleLosses(theta, bucket));
}

ad::ParamSet GradientDescent(const ad::LossFn& loss_fn, ad::ParamSet start,
                             double lr, int steps) {
  ad::ParamSet params = start.FreshLeaves();
  for (int s = 0; s < steps; ++s) {
    const ad::Var loss = loss_fn(params);
    const std::vector<double> grad = ad::Backward(loss, params).Flatten();
    params = Step(params, grad, lr);
  }
  return params;
}

HessianVectorOperator::HessianVectorOperator(const ad::LossFn& loss_fn,
                                             const ad::ParamSet& point) {
  ad::GradModeGuard recording(true);
  const ad::ParamSet leaves = point.FreshLeaves();
  vars_ = leaves.Vars();
  dim_ = leaves.ParameterCount();
  grads_ = ad::Grad(loss_fn(leaves), vars_, /*create_graph=*/true);
}

std::vector<double> HessianVectorOperator::Apply(
    std::span<const double> v) const {
  if (v.size() != dim_) {
    std::ostringstream msg;
    msg << "HVP: vector length " << v.size() << " != " << dim_;
    throw UsageError(msg.str());
  }
  ++calls_;
  ad::GradModeGuard recording(true);
  ad::Var contracted;
  std::size_t offset = 0;
  for (const ad::Var& g : grads_) {
    const std::size_t n = g.value().size();
    ad::Var term = ad::Dot(
        g, ad::Constant(Tensor(g.rows(), g.cols(),
                               std::vector<double>(v.begin() + offset,
                                                   v.begin() + offset + n))));
    offset += n;
    contracted = contracted.defined() ? ad::Add(contracted, term) : term;
  }
  const std::vector<ad::Var> hv = ad::Grad(contracted, vars_, false);
  std::vector<double> out;
  out.reserve(dim_);
  for (const ad::Var& h : hv) {
    out.insert(out.end(), h.value().data().begin(), h.value().data().end());
  }
  return out;
}

std::vector<double> NeumannIhvp(const HvpFn& hvp, std::span<const double> v,
                                double alpha, int j) {
  if (!(alpha > 0.0)) throw UsageError("Neumann step must be > 0");
  if (j < 0) throw UsageError("Neumann depth must be >= 0");
  std::vector<double> term(v.begin(), v.end());
  std::vector<double> acc(v.begin(), v.end());
  for (int step = 0; step < j; ++step) {
    const std::vector<double> h = hvp(term);
    if (h.size() != term.size()) throw UsageError("HVP changed dimension");
    for (std::size_t i = 0; i < term.size(); ++i) {
      term[i] -= alpha * h[i];
      acc[i] += term[i];
      if (!std::isfinite(acc[i])) {
        throw NumericError("non-finite value in Neumann iteration");
      }
    }
  }
  for (double& x : acc) x *= alpha;
  return acc;
}

std::vector<double> ImplicitHypergradient(const ad::LossFn& hessian_loss,
                                          const ad::CoupledLossFn& coupling_loss,
                                          const ad::LossFn& val_loss,
                                          const ad::ParamSet& theta_star,
                                          const ad::ParamSet& omega,
                                          double alpha, int j) {
  std::vector<double> v;
  {
    ad::GradModeGuard recording(true);
    const ad::ParamSet leaves = theta_star.FreshLeaves();
    v = ad::Backward(val_loss(leaves), leaves).Flatten();
  }
  const HessianVectorOperator hessian(hessian_loss, theta_star);
  const std::vector<double> ihvp = NeumannIhvp(
      [&](std::span<const double> u) { return hessian.Apply(u); }, v, alpha, j);
  std::vector<double> grad = ad::MixedVjp(coupling_loss, theta_star, omega, ihvp);
  for (double& g : grad) {
    g = -g;
    if (!std::isfinite(g)) throw NumericError("non-finite hypergradient");
  }
  return grad;
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined input.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainingData PrepareTrainingData(const std::vector<Sample>& train,
                                 const Vocabulary& vocab, int k) {
  TrainingData data;
  data.samples = &train;
  data.vocab = &vocab;
  data.partition = AssignBuckets(CountByLength(train), k);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  data.full = MakeBucketedBatch(train, all, data.partition, vocab);
  return data;
}

TrainState InitTrainState(const TrainConfig& config, const ModelDims& dims,
                          const Vocabulary& vocab) {
  TrainState state;
  state.theta =
      InitCompositionModel(vocab, config.model, DeriveSeed(config.seed, 0))
          .params;
  for (int b = 0; b < config.k; ++b) {
    state.omegas.push_back(
        InitMetaWeightNet(dims.feature_dim(), config.model.meta_width,
                          DeriveSeed(config.seed, 100 + static_cast<std::uint64_t>(b)))
            .params);
  }
  return state;
}

std::vector<double> BucketHypergradient(int bucket,
                                        const ad::ParamSet& theta_star,
                                        std::span<const ad::ParamSet> omegas,
                                        const BucketedBatch& train_batch,
                                        const TrainingData& data,
                                        const TrainConfig& config) {
  if (bucket < 0 || bucket >= static_cast<int>(omegas.size())) {
    throw UsageError("bucket index out of range");
  }
  const std::vector<ad::ParamSet> frozen = ConstantsOf(omegas);
  const auto b = static_cast<std::size_t>(bucket);

  const ad::LossFn hessian_loss = [&](const ad::ParamSet& theta) {
    return WeightedTrainLoss(theta, frozen, train_batch, config.mode,
                             config.normalize_weights);
  };
  const ad::CoupledLossFn coupling_loss = [&](const ad::ParamSet& theta,
                                              const ad::ParamSet& omega) {
    std::vector<ad::ParamSet> nets = frozen;
    nets[b] = omega;
    if (config.normalize_weights) {
      return WeightedTrainLoss(theta, nets, train_batch, config.mode, true);
    }
    return WeightedTrainLoss(theta, nets, train_batch, config.mode, false,
                             bucket);
  };
  const ad::LossFn val_loss = [&](const ad::ParamSet& theta) {
    return BucketLoss(theta, data.full.buckets[b]);
  };
  return ImplicitHypergradient(hessian_loss, coupling_loss, val_loss,
                               theta_star, omegas[b], config.alpha(),
                               config.neumann_j);
}

ad::ParamSet ParameterOptimization(const ad::ParamSet& theta,
                                   std::span<const ad::ParamSet> omegas,
                                   const BucketedBatch& batch,
                                   const TrainConfig& config, int steps) {
  const std::vector<ad::ParamSet> frozen = ConstantsOf(omegas);
  return GradientDescent(
      [&](const ad::ParamSet& params) {
        return WeightedTrainLoss(params, frozen, batch, config.mode,
                                 config.normalize_weights);
      },
      theta, config.lr_theta, steps);
}

std::vector<int> MetaOptimization(TrainState& state, const TrainingData& data,
                                  const BucketedBatch& train_batch,
                                  const TrainConfig& config) {
  std::vector<int> trace;
  if (config.mode == TrainMode::kBaseline) return trace;
  const std::vector<int> order = BucketOrder(data.partition, config.order);

  auto update = [&](int bucket, const ad::ParamSet& theta_star) {
    const std::vector<double> grad = BucketHypergradient(
        bucket, theta_star, state.omegas, train_batch, data, config);
    ad::ParamSet& omega = state.omegas[static_cast<std::size_t>(bucket)];
    omega = Step(omega, grad, config.lr_omega);
    trace.push_back(bucket + 1);
  };

  if (config.mode == TrainMode::kMwnSimultaneous) {
    const ad::ParamSet theta_star = state.theta;
    for (int t = 0; t < config.tm; ++t) {
      for (int bucket : order) update(bucket, theta_star);
    }
  } else {
    ad::ParamSet theta_star = state.theta;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
      if (idx > 0 && config.refresh() > 0) {
        // Best response to the nets already updated this phase.
        theta_star = ParameterOptimization(theta_star, state.omegas,
                                           train_batch, config,
                                           config.refresh());
      }
      for (int t = 0; t < config.tm; ++t) update(order[idx], theta_star);
    }
  }
  state.trace.insert(state.trace.end(), trace.begin(), trace.end());
  return trace;
}

TrainResult Run(const TrainConfig& config, const std::vector<Sample>& train,
                const Vocabulary& vocab, const RoundCallback& on_round) {
  config.Validate();
  TrainingData data = PrepareTrainingData(train, vocab, config.k);
  for (int b : data.partition.EmptyBuckets()) {
    std::cerr << "warning: validation bucket " << b + 1
              << " is empty; its meta-weight-net will not be updated\n";
  }
  const ModelDims dims = DimsFor(vocab, config.model);
  TrainState state = InitTrainState(config, dims, vocab);
  BatchStream stream(data, config.batch_size, DeriveSeed(config.seed, 7));

  double best = std::numeric_limits<double>::infinity();
  ad::ParamSet best_theta = state.theta;
  int since_best = 0;
  for (int round = 1; round <= config.rounds; ++round) {
    state.round = round;
    if (config.batch_size == 0) {
      state.theta = ParameterOptimization(state.theta, state.omegas, data.full,
                                          config, config.tp);
    } else {
      for (int s = 0; s < config.tp; ++s) {
        state.theta = ParameterOptimization(state.theta, state.omegas,
                                            stream.Next(), config, 1);
      }
    }
    RoundRecord record;
    record.round = round;
    record.trace = MetaOptimization(state, data, stream.Current(), config);
    Summarize(state, data, config, record);
    state.history.push_back(record);
    if (on_round) on_round(record);

    double mean_val = 0.0;
    int nonempty = 0;
    for (std::size_t b = 0; b < record.bucket_val_loss.size(); ++b) {
      if (data.partition.bucket_sizes[b] == 0) continue;
      mean_val += record.bucket_val_loss[b];
      ++nonempty;
    }
    mean_val /= std::max(nonempty, 1);
    if (!std::isfinite(mean_val)) throw NumericError("validation loss diverged");
    if (mean_val < best) {
      best = mean_val;
      best_theta = state.theta;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  TrainResult result;
  result.model.dims = dims;
  result.model.params = best_theta;
  result.state = std::move(state);
  result.partition = std::move(data.partition);
  return result;
}

json HistoryToJson(const TrainState& state,
                   const ValidationPartition& partition,
                   const TrainConfig& config) {
  json rounds = json::array();
  for (const RoundRecord& r : state.history) {
    rounds.push_back({{"round", r.round},
                      {"train_loss", r.train_loss},
                      {"bucket_val_loss", r.bucket_val_loss},
                      {"bucket_mean_weight", r.bucket_mean_weight},
                      {"trace", r.trace}});
  }
  json ranges = json::array();
  for (const auto& range : partition.length_ranges) {
    ranges.push_back(range ? json::array({range->first, range->second})
                           : json(nullptr));
  }
  return {{"config", TrainConfigToJson(config)},
          {"seed", config.seed},
          {"partition",
           {{"bucket_sizes", partition.bucket_sizes},
            {"length_ranges", std::move(ranges)}}},
          {"rounds", std::move(rounds)},
          {"trace", state.trace}};
}

}  // namespace ccg
