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


#include <cmath>
#include <random>

#include "ccg/autodiff.h"
#include "ccg/errors.h"
#include "ccg/models.h"
#include "ccg/synth_task.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace ccg {
namespace {

using ::ccg::testing::FiniteDifference;
using ::ccg::testing::RandomTensor;
using ::ccg::testing::RelativeError;

Vocabulary TinyVocab() { return Vocabulary({"small"}, {"red"}, {"ball"}); }

Vocabulary DefaultVocab() {
  return GenerateWorld(WorldConfig{}, 0).vocab;
}

Sample MakeSample(const Vocabulary& vocab, std::vector<std::vector<int>> query,
                  std::vector<SceneObject> scene, bool answer) {
  Sample s;
  s.id = "s";
  for (const auto& items : query) {
    s.query.push_back(DescriptorFromItems(vocab, items));
    s.phrase_lengths.push_back(static_cast<int>(items.size()));
  }
  s.scene = std::move(scene);
  s.answer = answer;
  return s;
}

// Random valid sample over `vocab`.
Sample RandomSample(const Vocabulary& vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(0, vocab.num_sizes() - 1);
  std::uniform_int_distribution<int> color(0, vocab.num_colors() - 1);
  std::uniform_int_distribution<int> shape(0, vocab.num_shapes() - 1);
  std::uniform_int_distribution<int> objects(2, 6);
  std::bernoulli_distribution coin(0.5);
  Sample s;
  s.id = "r";
  const int descriptors = coin(rng) ? 2 : 1;
  for (int d = 0; d < descriptors; ++d) {
    Descriptor desc;
    desc.color = vocab.ColorId(color(rng));
    if (coin(rng)) desc.shape = vocab.ShapeId(shape(rng));
    if (coin(rng)) desc.size = vocab.SizeId(size(rng));
    s.phrase_lengths.push_back(desc.length());
    s.query.push_back(desc);
  }
  const int n = objects(rng);
  for (int i = 0; i < n; ++i) {
    s.scene.push_back({vocab.SizeId(size(rng)), vocab.ColorId(color(rng)),
                       vocab.ShapeId(shape(rng))});
  }
  s.answer = OracleAnswer(s.scene, s.query);
  return s;
}

TEST(EncodeQueryTest, SlotMeanOfEmbeddings) {
  const Vocabulary vocab = TinyVocab();
  CompositionModel model = InitCompositionModel(vocab, {2, 1, 1}, 0);
  // Rows: small, red, ball.
  model.params.Set("embedding", Tensor::FromRows({{9, 9}, {1, 3}, {3, 1}}));
  const Sample s = MakeSample(vocab, {{1, 2}}, {{0, 1, 2}}, true);
  EXPECT_EQ(EncodeQuery(s, model, vocab), (std::vector<double>{2, 2, 0, 0}));
}

TEST(EncodeQueryTest, FixedDimensionAndDeterminism) {
  const Vocabulary vocab = DefaultVocab();
  const CompositionModel model = InitCompositionModel(vocab, {}, 4);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Sample s = RandomSample(vocab, rng);
    const std::vector<double> a = EncodeQuery(s, model, vocab);
    EXPECT_EQ(a.size(), 32u);
    EXPECT_EQ(a, EncodeQuery(s, model, vocab));
    if (s.query.size() == 1) {
      for (std::size_t k = 16; k < 32; ++k) EXPECT_EQ(a[k], 0.0);
    }
  }
}

TEST(EncodeQueryTest, UnknownItemIsRejected) {
  const Vocabulary vocab = TinyVocab();
  const CompositionModel model = InitCompositionModel(vocab, {2, 2, 2}, 0);
  Sample s = MakeSample(vocab, {{1}}, {{0, 1, 2}}, true);
  s.query[0].color = 17;
  EXPECT_THROW(EncodeQuery(s, model, vocab), DataError);
  Sample three = MakeSample(vocab, {{0}, {1}, {2}}, {{0, 1, 2}}, true);
  EXPECT_THROW(ModelForward(three, model, vocab), DataError);
}

TEST(ModelForwardTest, ZeroClassifierGivesHalf) {
  const Vocabulary vocab = DefaultVocab();
  CompositionModel model = InitCompositionModel(vocab, {}, 1);
  for (const std::string name : {"output.weight", "output.bias"}) {
    const Tensor& t = model.params.Value(name);
    model.params.Set(name, Tensor(t.rows(), t.cols(), 0.0));
  }
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(ModelForward(RandomSample(vocab, rng), model, vocab), 0.5);
  }
}

TEST(ModelForwardTest, OutputStaysInOpenUnitInterval) {
  const Vocabulary vocab = DefaultVocab();
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 1000; ++draw) {
    CompositionModel model = InitCompositionModel(vocab, {4, 4, 4}, draw);
    // Blow up the weights so the logits saturate.
    const std::vector<double> flat = model.params.Flatten();
    std::vector<double> scaled(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) scaled[i] = 50.0 * flat[i];
    model.params = model.params.Unflatten(scaled);
    const double p = ModelForward(RandomSample(vocab, rng), model, vocab);
    ASSERT_GT(p, 0.0);
    ASSERT_LT(p, 1.0);
  }
}

CompositionModel MicroModel(const Vocabulary& vocab) {
  CompositionModel model = InitCompositionModel(vocab, {1, 1, 1}, 0);
  model.params.Set("embedding", Tensor::Column(std::vector<double>{0.5, -1.0, 2.0}));
  model.params.Set("hidden.query_weight", Tensor::Column(std::vector<double>{0.8, -0.3}));
  model.params.Set("hidden.scene_weight", Tensor::Scalar(0.4));
  model.params.Set("hidden.bias", Tensor::Scalar(-0.1));
  model.params.Set("output.weight", Tensor::Scalar(1.5));
  model.params.Set("output.bias", Tensor::Scalar(-0.2));
  return model;
}

TEST(ModelForwardTest, MicroModelMatchesHandComputation) {
  // slot 1 = mean(-1, 2) = 0.5; hidden = relu(0.5*0.8 + 0*(-0.3) + 1*0.4 - 0.1)
  // = 0.7; logit = 0.7*1.5 - 0.2 = 0.85.
  const Vocabulary vocab = TinyVocab();
  const CompositionModel model = MicroModel(vocab);
  EXPECT_EQ(model.params.ParameterCount(), 9u);
  const Sample s = MakeSample(vocab, {{1, 2}}, {{0, 1, 2}}, true);
  EXPECT_NEAR(ModelForward(s, model, vocab), 0.7005671424739729, 1e-10);
  EXPECT_NEAR(SampleLoss(s, model, vocab), 0.35586506844219595, 1e-10);
}

TEST(SampleLossTest, HalfPredictionGivesLog2) {
  const Vocabulary vocab = TinyVocab();
  CompositionModel model = MicroModel(vocab);
  model.params.Set("output.weight", Tensor::Scalar(0.0));
  model.params.Set("output.bias", Tensor::Scalar(0.0));
  const Sample s = MakeSample(vocab, {{2}}, {{0, 1, 2}}, true);
  EXPECT_NEAR(SampleLoss(s, model, vocab), std::log(2.0), 1e-15);
}

TEST(SampleLossTest, DecreasesMonotonicallyTowardTheAnswer) {
  const Vocabulary vocab = TinyVocab();
  CompositionModel model = MicroModel(vocab);
  const Sample s = MakeSample(vocab, {{2}}, {{0, 1, 2}}, true);
  double previous = INFINITY;
  for (double bias = -5.0; bias <= 20.0; bias += 0.5) {
    model.params.Set("output.bias", Tensor::Scalar(bias));
    const double loss = SampleLoss(s, model, vocab);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-6);
}

TEST(SampleLossTest, GradientMatchesFiniteDifferences) {
  const Vocabulary vocab = DefaultVocab();
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const CompositionModel model = InitCompositionModel(vocab, {3, 4, 2}, seed);
    std::vector<Sample> samples;
    for (int i = 0; i < 6; ++i) samples.push_back(RandomSample(vocab, rng));
    const EncodedBatch batch = EncodeBatch(samples, vocab);
    const ad::LossFn loss = [&](const ad::ParamSet& p) {
      return ad::Sum(SampleLosses(p, batch));
    };
    const ad::ParamSet leaves = model.params.FreshLeaves();
    const std::vector<double> analytic =
        ad::Backward(loss(leaves), leaves).Flatten();
    ASSERT_LT(RelativeError(analytic, FiniteDifference(loss, model.params)),
              1e-4)
        << "seed " << seed;
  }
}

MetaWeightNet HandNet() {
  MetaWeightNet net = InitMetaWeightNet(2, 2, 0);
  net.params.Set("fc1.weight", Tensor::FromRows({{0.5, -1.0}, {2.0, 0.25}}));
  net.params.Set("fc1.bias", Tensor::FromRows({{0.1, -0.2}}));
  net.params.Set("fc2.weight", Tensor::FromRows({{1.0, -0.5}, {0.3, 0.7}}));
  net.params.Set("fc2.bias", Tensor::FromRows({{0.0, 0.05}}));
  net.params.Set("fc3.weight", Tensor::Column(std::vector<double>{2.0, -1.0}));
  net.params.Set("fc3.bias", Tensor::Scalar(-0.4));
  return net;
}

TEST(WeightForwardTest, HandSetTwoUnitNet) {
  // h1 = relu((0.6, -1.2)) = (0.6, 0); h2 = relu((0.6, -0.25)) = (0.6, 0);
  // logit = 1.2 - 0.4 = 0.8.
  const std::vector<MetaWeightNet> nets{HandNet()};
  EXPECT_NEAR(WeightForward(0, std::vector<double>{1, 0}, nets),
              0.6899744811276125, 1e-10);
}

TEST(WeightForwardTest, ZeroNetGivesHalf) {
  MetaWeightNet net = InitMetaWeightNet(4, 3, 9);
  net.params = net.params.Unflatten(
      std::vector<double>(net.params.ParameterCount(), 0.0));
  const std::vector<MetaWeightNet> nets{net};
  EXPECT_EQ(WeightForward(0, std::vector<double>{1, -2, 3, 4}, nets), 0.5);
}

TEST(WeightForwardTest, UsesExactlyTheSelectedNet) {
  MetaWeightNet zero = InitMetaWeightNet(2, 2, 0);
  zero.params = zero.params.Unflatten(
      std::vector<double>(zero.params.ParameterCount(), 0.0));
  const std::vector<MetaWeightNet> nets{zero, HandNet(), zero};
  const std::vector<double> f{1, 0};
  EXPECT_EQ(WeightForward(0, f, nets), 0.5);
  EXPECT_NEAR(WeightForward(1, f, nets), 0.6899744811276125, 1e-10);
  EXPECT_THROW(WeightForward(3, f, nets), UsageError);
  EXPECT_THROW(WeightForward(-1, f, nets), UsageError);
  EXPECT_THROW(WeightForward(0, std::vector<double>{1, 0, 0}, nets), UsageError);
}

TEST(WeightForwardTest, OutputInOpenIntervalAndPure) {
  std::mt19937_64 rng(7);
  for (int draw = 0; draw < 300; ++draw) {
    const std::vector<MetaWeightNet> nets{InitMetaWeightNet(6, 5, draw)};
    const std::vector<double> f = RandomTensor(1, 6, rng, -3, 3).data();
    const double w = WeightForward(0, f, nets);
    ASSERT_GT(w, 0.0);
    ASSERT_LT(w, 1.0);
    ASSERT_EQ(w, WeightForward(0, f, nets));
  }
}

TEST(MetaWeightNetTest, NetsNeverShareParameters) {
  const MetaWeightNet a = InitMetaWeightNet(32, 32, 1);
  const MetaWeightNet b = InitMetaWeightNet(32, 32, 2);
  EXPECT_EQ(a.params.Names(), b.params.Names());
  EXPECT_NE(a.params.Flatten(), b.params.Flatten());
  EXPECT_EQ(a.params.Value("fc1.weight").rows(), 32u);
  EXPECT_EQ(a.params.Value("fc3.weight").cols(), 1u);
}

TEST(MetaWeightNetTest, FeaturesCarryNoGradientToTheModel) {
  const Vocabulary vocab = DefaultVocab();
  const CompositionModel model = InitCompositionModel(vocab, {}, 3);
  const MetaWeightNet net = InitMetaWeightNet(32, 32, 3);
  std::mt19937_64 rng(3);
  std::vector<Sample> samples;
  for (int i = 0; i < 8; ++i) samples.push_back(RandomSample(vocab, rng));
  const EncodedBatch batch = EncodeBatch(samples, vocab);
  const ad::ParamSet theta = model.params.FreshLeaves();
  const ad::Var weights = MetaWeights(
      net.params, ad::Constant(DetachedQueryFeatures(theta, batch)));
  for (double g : ad::Backward(ad::Sum(weights), theta).Flatten()) {
    ASSERT_EQ(g, 0.0);
  }
}

TEST(InitTest, SeededAndScaledByFanIn) {
  const Vocabulary vocab = DefaultVocab();
  const CompositionModel a = InitCompositionModel(vocab, {}, 5);
  const CompositionModel b = InitCompositionModel(vocab, {}, 5);
  EXPECT_EQ(a.params.Flatten(), b.params.Flatten());
  const double bound = 1.0 / std::sqrt(static_cast<double>(a.dims.input_dim()));
  for (double w : a.params.Value("hidden.scene_weight").data()) {
    ASSERT_LE(std::abs(w), bound);
  }
  for (double w : a.params.Value("hidden.bias").data()) ASSERT_EQ(w, 0.0);
  for (double w : a.params.Value("embedding").data()) ASSERT_LE(std::abs(w), 1.0);
}

TEST(ParamSetJsonTest, RoundTripIsBitExact) {
  const CompositionModel model = InitCompositionModel(DefaultVocab(), {}, 6);
  const std::string text = ParamSetToJson(model.params).dump();
  const ad::ParamSet back = ParamSetFromJson(nlohmann::json::parse(text));
  EXPECT_EQ(back.Names(), model.params.Names());
  EXPECT_EQ(back.Flatten(), model.params.Flatten());
  EXPECT_EQ(ParamSetToJson(back).dump(), text);
}

TEST(ParamSetJsonTest, MalformedDocumentIsDataError) {
  EXPECT_THROW(ParamSetFromJson(nlohmann::json::parse(
                   R"({"w": {"shape": [2, 2], "data": [1, 2, 3]}})")),
               DataError);
  EXPECT_THROW(ParamSetFromJson(nlohmann::json::parse(R"({"w": {"shape": [2]}})")),
               DataError);
}

}  // namespace
}  // namespace ccg
