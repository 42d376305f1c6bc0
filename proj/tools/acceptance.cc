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


// Acceptance suite: one PASS/FAIL line per criterion.
//
//   ccg_acceptance [--seeds N] [--config train.json] [--only 1,2,...]
//
// Criteria 1-7 are exact property checks. Criteria 8-11 share one ablation
// (baseline, mwn-sim, mlo s2c, mlo c2s) over N seeds of the default world.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "Eigen/Dense"
#include "ccg/autodiff.h"
#include "ccg/cli.h"
#include "ccg/dataset_io.h"
#include "ccg/metrics.h"
#include "ccg/mlo.h"
#include "ccg/models.h"
#include "ccg/partition.h"
#include "ccg/synth_task.h"

namespace ccg {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double RelError(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8);
}

std::vector<double> CentralDifference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Sample RandomSample(const Vocabulary& v, std::mt19937_64& rng) {
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  Sample s;
  s.id = "r";
  const int descriptors = 1 + pick(2);
  for (int d = 0; d < descriptors; ++d) {
    Descriptor desc;
    const int mask = 1 + pick(7);
    if (mask & 1) desc.size = v.SizeId(pick(v.num_sizes()));
    if (mask & 2) desc.color = v.ColorId(pick(v.num_colors()));
    if (mask & 4) desc.shape = v.ShapeId(pick(v.num_shapes()));
    s.query.push_back(desc);
    s.phrase_lengths.push_back(desc.length());
  }
  const int n = 2 + pick(5);
  for (int i = 0; i < n; ++i) {
    s.scene.push_back({v.SizeId(pick(v.num_sizes())), v.ColorId(pick(v.num_colors())),
                       v.ShapeId(pick(v.num_shapes()))});
  }
  s.answer = OracleAnswer(s.scene, s.query);
  return s;
}

Outcome Criterion1() {
  const auto start = Clock::now();
  const Vocabulary vocab = GenerateWorld(WorldConfig{}, 0).vocab;
  double worst_fd = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const CompositionModel model =
        InitCompositionModel(vocab, {3, 4, 2}, static_cast<std::uint64_t>(seed));
    std::vector<Sample> samples;
    for (int i = 0; i < 6; ++i) samples.push_back(RandomSample(vocab, rng));
    const EncodedBatch batch = EncodeBatch(samples, vocab);
    const ad::LossFn loss = [&](const ad::ParamSet& p) {
      return ad::Sum(SampleLosses(p, batch));
    };
    const ad::ParamSet leaves = model.params.FreshLeaves();
    const std::vector<double> analytic = ad::Backward(loss(leaves), leaves).Flatten();
    const std::vector<double> fd = CentralDifference(
        [&](const std::vector<double>& flat) {
          ad::NoGradGuard no_grad;
          return loss(model.params.Unflatten(flat).Constants()).value().item();
        },
        model.params.Flatten(), 1e-5);
    worst_fd = std::max(worst_fd, RelError(analytic, fd));
  }
  // f = 0.5 * sum d_i x_i^2 has Hessian diag(d).
  double worst_hvp = 0.0;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 7);
    std::vector<double> d(n), x(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = u(rng);
      x[i] = u(rng);
      v[i] = u(rng);
    }
    ad::ParamSet p;
    p.Set("x", Tensor::Column(x));
    const Tensor dt = Tensor::Column(d);
    const std::vector<double> hv = ad::Hvp(
        [&](const ad::ParamSet& q) {
          const ad::Var& xv = q.Get("x");
          return ad::Scale(ad::Sum(ad::Mul(ad::Constant(dt), ad::Mul(xv, xv))), 0.5);
        },
        p, v);
    for (std::size_t i = 0; i < n; ++i) {
      worst_hvp = std::max(worst_hvp, std::abs(hv[i] - d[i] * v[i]));
    }
  }
  const double secs = Seconds(start);
  return {worst_fd < 1e-4 && worst_hvp < 1e-8 && secs < 30.0,
          Fmt("max FD rel err %.2e over 100 seeds (< 1e-4); max HVP err %.2e (< 1e-8); %.1f s (< 30 s)",
              worst_fd, worst_hvp, secs)};
}

Outcome Criterion2() {
  // L_t = (theta - omega)^2, L_v = theta^2, at omega = 3.
  const ad::CoupledLossFn toy = [](const ad::ParamSet& t, const ad::ParamSet& o) {
    const ad::Var d = ad::Sub(t.Get("theta"), o.Get("omega"));
    return ad::Mul(d, d);
  };
  ad::ParamSet omega;
  omega.Set("omega", Tensor::Scalar(3.0));
  ad::ParamSet theta_star;
  theta_star.Set("theta", Tensor::Scalar(3.0));
  const double toy_grad =
      ImplicitHypergradient(
          [&](const ad::ParamSet& t) { return toy(t, omega.Constants()); }, toy,
          [](const ad::ParamSet& t) { return ad::Mul(t.Get("theta"), t.Get("theta")); },
          theta_star, omega, 0.25, 60)[0];
  const bool toy_ok = std::abs(toy_grad - 6.0) < 1e-3;

  // Random quadratics: L_t = 0.5 t'At - t'B w, L_v = 0.5 |t - c|^2.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  const int n = 3;
  const int m = 2;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd mm(n, n);
    for (int i = 0; i < n * n; ++i) mm(i / n, i % n) = u(rng);
    const Eigen::MatrixXd ae = mm.transpose() * mm + Eigen::MatrixXd::Identity(n, n);
    Tensor a(n, n, 0.0), b(n, m, 0.0), c(n, 1, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = ae(i, j);
      for (int j = 0; j < m; ++j) b(i, j) = u(rng);
      c(i, 0) = u(rng);
    }
    std::vector<double> w0(m);
    for (double& w : w0) w = u(rng);
    const double lmax =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ae).eigenvalues().maxCoeff();
    const double lr = 0.9 / lmax;

    const ad::CoupledLossFn inner = [&](const ad::ParamSet& t, const ad::ParamSet& o) {
      const ad::Var& th = t.Get("theta");
      return ad::Sub(ad::Scale(ad::Dot(th, ad::MatMul(ad::Constant(a), th)), 0.5),
                     ad::Dot(th, ad::MatMul(ad::Constant(b), o.Get("omega"))));
    };
    const ad::LossFn outer = [&](const ad::ParamSet& t) {
      const ad::Var d = ad::Sub(t.Get("theta"), ad::Constant(c));
      return ad::Scale(ad::Dot(d, d), 0.5);
    };
    auto solve = [&](const std::vector<double>& w) {
      ad::ParamSet o;
      o.Set("omega", Tensor::Column(w));
      ad::ParamSet start;
      start.Set("theta", Tensor(n, 1, 0.0));
      return GradientDescent(
          [&](const ad::ParamSet& t) { return inner(t, o.Constants()); }, start,
          lr, 3000);
    };
    ad::ParamSet o;
    o.Set("omega", Tensor::Column(w0));
    const std::vector<double> ift = ImplicitHypergradient(
        [&](const ad::ParamSet& t) { return inner(t, o.Constants()); }, inner,
        outer, solve(w0), o, lr, 200);
    const std::vector<double> fd = CentralDifference(
        [&](const std::vector<double>& w) {
          return outer(solve(w).Constants()).value().item();
        },
        w0, 1e-4);
    worst = std::max(worst, RelError(ift, fd));
  }
  return {toy_ok && worst < 0.1,
          Fmt("toy hypergradient %.6f (closed form 6); random quadratics max rel err %.2e over 20 (< 0.1)",
              toy_grad, worst)};
}

std::vector<double> DenseNeumann(const Eigen::MatrixXd& h, const std::vector<double>& v,
                                 double alpha, int j, int* calls) {
  return NeumannIhvp(
      [&](std::span<const double> x) {
        ++*calls;
        const Eigen::VectorXd r =
            h * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
        return std::vector<double>(r.data(), r.data() + r.size());
      },
      v, alpha, j);
}

Outcome Criterion3() {
  int calls = 0;
  const std::vector<double> v{1.0, -2.0, 0.5};
  const std::vector<double> id =
      DenseNeumann(Eigen::MatrixXd::Identity(3, 3), v, 0.5, 3, &calls);
  bool exact = calls == 3;
  for (std::size_t i = 0; i < v.size(); ++i) exact = exact && id[i] == 0.9375 * v[i];

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 6;
    Eigen::MatrixXd mm(n, n);
    for (int i = 0; i < n * n; ++i) mm(i / n, i % n) = u(rng);
    const Eigen::MatrixXd h = mm.transpose() * mm + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const double lmax =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().maxCoeff();
    std::vector<double> rhs(static_cast<std::size_t>(n));
    for (double& x : rhs) x = u(rng);
    const std::vector<double> got = DenseNeumann(h, rhs, 0.9 / lmax, 200, &calls);
    const Eigen::VectorXd exact_solve =
        h.ldlt().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n));
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - exact_solve(i)));
  }
  return {exact && worst < 1e-3,
          Fmt("H=I, alpha=0.5, J=3 gives 0.9375 v %s; random SPD (J=200) max abs err %.2e (< 1e-3)",
              exact ? "exactly" : "NOT exactly", worst)};
}

Outcome Criterion4() {
  const ValidationPartition worked =
      AssignBuckets(ProfileFromCounts({{1, 3}, {2, 3}, {3, 4}}), 2);
  const bool worked_ok = worked.bucket_sizes == std::vector<std::size_t>{3, 7};

  std::mt19937_64 rng(2024);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = std::uniform_int_distribution<int>(1, 10)(rng);
    const int k = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<int> class_length;
    std::vector<std::size_t> counts;
    std::vector<Sample> samples;
    int len = 0;
    for (int c = 0; c < classes; ++c) {
      len += std::uniform_int_distribution<int>(1, 3)(rng);
      class_length.push_back(len);
      counts.push_back(std::uniform_int_distribution<std::size_t>(1, 20)(rng));
      for (std::size_t i = 0; i < counts.back(); ++i) {
        Sample s;
        s.phrase_lengths = {len};
        samples.push_back(s);
      }
    }
    std::shuffle(samples.begin(), samples.end(), rng);
    const ValidationPartition part = AssignBuckets(CountByLength(samples), k);
    bool ok = true;
    // Disjoint cover.
    std::vector<int> seen(samples.size(), 0);
    for (const auto& members : part.members) {
      for (std::size_t i : members) ++seen[i];
    }
    ok = ok && std::all_of(seen.begin(), seen.end(), [](int x) { return x == 1; });
    // Atomicity and order.
    std::map<int, std::set<int>> buckets_of_len;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      buckets_of_len[samples[i].phrase_lengths[0]].insert(part.bucket_of_sample[i]);
    }
    int prev = -1;
    for (const auto& [l, bs] : buckets_of_len) {
      ok = ok && bs.size() == 1 && *bs.begin() >= prev;
      prev = *bs.begin();
    }
    // Balance: every boundary within one length class of the ideal quantile,
    // checked against all admissible boundary placements.
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    for (int i = 1; i < k; ++i) {
      int last = -1;
      for (int c = 0; c < classes; ++c) {
        if (part.bucket_of_length.at(class_length[c]) <= i - 1) last = c;
      }
      int ideal = 0;
      std::size_t cum = 0;
      for (int c = 0; c < classes; ++c) {
        cum += counts[c];
        if (cum * static_cast<std::size_t>(k) >= static_cast<std::size_t>(i) * total) {
          ideal = c;
          break;
        }
      }
      ok = ok && std::abs(last - ideal) <= 1;
    }
    failures += ok ? 0 : 1;
  }
  return {worked_ok && failures == 0,
          Fmt("worked example sizes {%zu,%zu} (want {3,7}); invariant failures %d of 1000 profiles",
              worked.bucket_sizes[0], worked.bucket_sizes.size() > 1 ? worked.bucket_sizes[1] : 0,
              failures)};
}

Outcome Criterion5() {
  const World world = GenerateWorld(WorldConfig{}, 0);
  const Datasets data = GenerateDatasets(world, {300, 0, 0}, 5);
  auto trace = [&](TrainMode mode, MetaOrder order, int k, int tm) {
    TrainConfig c;
    c.k = k;
    c.tp = 1;
    c.tm = tm;
    c.lr_theta = 1e-3;
    c.lr_omega = 1e-3;
    c.neumann_j = 1;
    c.rounds = 1;
    c.mode = mode;
    c.order = order;
    c.model = {4, 8, 4};
    return Run(c, data.train, world.vocab).state.trace;
  };
  const std::vector<int> s2c = trace(TrainMode::kMlo, MetaOrder::kSimpleToComplex, 3, 2);
  const std::vector<int> c2s = trace(TrainMode::kMlo, MetaOrder::kComplexToSimple, 3, 2);
  const std::vector<int> sim =
      trace(TrainMode::kMwnSimultaneous, MetaOrder::kSimpleToComplex, 3, 2);
  const std::vector<int> base = trace(TrainMode::kBaseline, MetaOrder::kSimpleToComplex, 3, 2);
  const bool ok = s2c == std::vector<int>{1, 1, 2, 2, 3, 3} &&
                  c2s == std::vector<int>{3, 3, 2, 2, 1, 1} &&
                  sim == std::vector<int>{1, 2, 3, 1, 2, 3} && base.empty();
  auto str = [](const std::vector<int>& t) {
    std::string s;
    for (int x : t) s += std::to_string(x);
    return s;
  };
  return {ok, "K=3, T_m=2: s2c " + str(s2c) + ", c2s " + str(c2s) + ", mwn-sim " +
                  str(sim) + ", baseline '" + str(base) + "'"};
}

Outcome Criterion6() {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution wrong(0.3);
  int mismatches = 0;
  int bound_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<LabeledItem> items;
    Predictions p;
    std::vector<std::array<bool, 3>> correct(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      const std::string tid = "t" + std::to_string(t);
      int li = 0;
      for (Level level : {Level::kPhrasePhrase, Level::kPhraseWord, Level::kWordWord}) {
        const std::string id = tid + LevelName(level);
        const std::string answer = BoolAnswer(coin(rng));
        const bool ok = !wrong(rng);
        items.push_back({id, level, tid, answer});
        p[id] = ok ? answer : (answer == "yes" ? "no" : "yes");
        correct[static_cast<std::size_t>(t)][static_cast<std::size_t>(li++)] = ok;
      }
    }
    int good = 0;
    for (const auto& c : correct) good += c[0] && c[1] && c[2];
    const EvalReport r = Evaluate(p, items);
    if (r.consistency != static_cast<double>(good) / n) ++mismatches;
    if (r.consistency > r.accuracy_pp || r.consistency > r.accuracy_pw ||
        r.consistency > r.accuracy_ww) {
      ++bound_violations;
    }
  }
  std::vector<LabeledItem> three;
  Predictions p3;
  for (int t = 0; t < 3; ++t) {
    const std::string tid = "t" + std::to_string(t);
    for (Level level : {Level::kPhrasePhrase, Level::kPhraseWord, Level::kWordWord}) {
      three.push_back({tid + LevelName(level), level, tid, "yes"});
      p3[tid + LevelName(level)] = "yes";
    }
  }
  p3["t2pw"] = "no";
  const double two_thirds = Consistency(p3, three).value;
  return {mismatches == 0 && bound_violations == 0 && two_thirds == 2.0 / 3.0,
          Fmt("oracle mismatches %d/1000; bound violations %d; 2-of-3 case %.17g",
              mismatches, bound_violations, two_thirds)};
}

Outcome Criterion7() {
  const World world = GenerateWorld(WorldConfig{}, 0);
  const Datasets data = GenerateDatasets(world, DatasetCounts{}, 0);
  std::size_t leaks = 0;
  for (const Sample& s : data.train) {
    for (const ItemPair& p : QueryItemPairs(s.query)) {
      leaks += world.IsBlacklisted(p.first, p.second) ? 1 : 0;
    }
  }
  std::size_t contained = 0;
  for (const Triplet& t : data.triplets) {
    const Sample& pp = data.test[t.pp];
    const Sample& pw = data.test[t.pw];
    const Sample& ww = data.test[t.ww];
    const Descriptor bare_w2{std::nullopt, t.w2, std::nullopt};
    const bool ok = t.p1.shape == t.w1 && t.p1.length() >= 2 && t.p2.color == t.w2 &&
                    t.p2.length() >= 2 &&
                    pp.query == std::vector<Descriptor>{t.p1, t.p2} &&
                    pw.query == std::vector<Descriptor>{t.p1, bare_w2} &&
                    ww.query == std::vector<Descriptor>{{std::nullopt, t.w2, t.w1}} &&
                    world.IsBlacklisted(t.w1, t.w2);
    contained += ok ? 1 : 0;
  }
  return {leaks == 0 && contained == data.triplets.size() && !data.triplets.empty(),
          Fmt("blacklisted co-occurrences in %zu training samples: %zu; containment holds in %zu/%zu triplets",
              data.train.size(), leaks, contained, data.triplets.size())};
}

struct AblationSummary {
  std::map<std::string, std::vector<double>> consistency;
  std::map<std::string, std::vector<double>> iid;
  double slowest_run = 0.0;
};

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

AblationSummary RunAblationTimed(const TrainConfig& base, int seeds) {
  AblationSummary out;
  const DataConfig data;
  for (int seed = 0; seed < seeds; ++seed) {
    const Corpus corpus = GenerateCorpus(data, static_cast<std::uint64_t>(seed));
    for (TrainConfig config : AblationConfigs(base)) {
      config.seed = static_cast<std::uint64_t>(seed);
      const auto start = Clock::now();
      const TrainResult result = Run(config, corpus.data.train, corpus.world.vocab);
      const double secs = Seconds(start);
      const EvalReport report = EvaluateModel(result.model, corpus);
      std::string name = TrainModeName(config.mode);
      if (config.mode == TrainMode::kMlo) name += std::string("-") + MetaOrderName(config.order);
      out.consistency[name].push_back(report.consistency);
      out.iid[name].push_back(report.iid_accuracy.value_or(0.0));
      out.slowest_run = std::max(out.slowest_run, secs);
      std::cout << Fmt("  seed %d %-12s consistency %.4f pp %.3f pw %.3f ww %.3f iid %.4f rounds %zu %.1f s",
                       seed, name.c_str(), report.consistency, report.accuracy_pp,
                       report.accuracy_pw, report.accuracy_ww,
                       report.iid_accuracy.value_or(0.0), result.state.history.size(), secs)
                << std::endl;
    }
  }
  return out;
}

// Training settings shared by every mode in the ablation.
TrainConfig AcceptanceConfig() {
  TrainConfig c;
  c.batch_size = 1000;
  c.lr_theta = 2e-3;
  c.tp = 60;
  c.lr_omega = 1e-3;
  c.rounds = 30;
  c.patience = 5;
  return c;
}

void Report(int id, const Outcome& o, int* failed) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  "
            << o.detail << std::endl;
  if (!o.pass) ++*failed;
}

int Main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  int seeds = 5;
  std::string config_path;
  std::vector<int> only;
  app.add_option("--seeds", seeds, "ablation seeds (>= 5 for the criteria)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "JSON overlay for the ablation config")
      ->check(CLI::ExistingFile);
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };

  int failed = 0;
  const std::vector<std::pair<int, Outcome (*)()>> exact = {
      {1, Criterion1}, {2, Criterion2}, {3, Criterion3}, {4, Criterion4},
      {5, Criterion5}, {6, Criterion6}, {7, Criterion7}};
  for (const auto& [id, fn] : exact) {
    if (wanted(id)) Report(id, fn(), &failed);
  }

  if (!(wanted(8) || wanted(9) || wanted(10) || wanted(11))) return failed == 0 ? 0 : 1;
  TrainConfig base = AcceptanceConfig();
  if (!config_path.empty()) base = TrainConfigFromJson(ReadJsonFile(config_path), base);
  std::cout << "ablation config " << TrainConfigToJson(base).dump() << std::endl;
  const AblationSummary s = RunAblationTimed(base, seeds);
  const double mlo = 100.0 * Mean(s.consistency.at("mlo-s2c"));
  const double c2s = 100.0 * Mean(s.consistency.at("mlo-c2s"));
  const double sim = 100.0 * Mean(s.consistency.at("mwn-sim"));
  const double baseline = 100.0 * Mean(s.consistency.at("baseline"));
  const double iid_mlo = 100.0 * Mean(s.iid.at("mlo-s2c"));
  const double iid_base = 100.0 * Mean(s.iid.at("baseline"));
  const bool enough = seeds >= 5 && s.slowest_run < 600.0;
  const std::string setting =
      Fmt(" [%d seeds, slowest run %.0f s]", seeds, s.slowest_run);

  if (wanted(8)) {
    Report(8, {enough && mlo - baseline >= 1.0,
               Fmt("mean consistency mlo-s2c %.2f vs baseline %.2f (margin %+.2f, need >= +1.00)",
                   mlo, baseline, mlo - baseline) + setting},
           &failed);
  }
  if (wanted(9)) {
    // The middle row may tie either neighbour within half a point.
    Report(9, {enough && mlo >= sim - 0.5 && sim >= baseline - 0.5,
               Fmt("mlo-s2c %.2f >= mwn-sim %.2f >= baseline %.2f (0.5 tie allowed around mwn-sim)", mlo,
                   sim, baseline) + setting},
           &failed);
  }
  if (wanted(10)) {
    Report(10, {enough && mlo - c2s >= 0.5,
                Fmt("mean consistency mlo-s2c %.2f vs mlo-c2s %.2f (margin %+.2f, need >= +0.50)",
                    mlo, c2s, mlo - c2s) + setting},
           &failed);
  }
  if (wanted(11)) {
    Report(11, {enough && std::abs(iid_mlo - iid_base) <= 1.0,
                Fmt("IID accuracy mlo-s2c %.2f vs baseline %.2f (|diff| %.2f, need <= 1.00)",
                    iid_mlo, iid_base, std::abs(iid_mlo - iid_base)) + setting},
           &failed);
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace ccg

int main(int argc, char** argv) { return ccg::Main(argc, argv); }
