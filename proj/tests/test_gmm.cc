// tests/test_gmm.cc

// Copyright 2026  The alignsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "alignsv/gmm.h"
#include "alignsv/hmm.h"
#include "oracles.h"

namespace alignsv {
namespace {

Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, Rng* rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(*rng);
  return m;
}

PhraseGmm RandomGmm(int comps, int dim, Rng* rng) {
  std::uniform_real_distribution<double> w(0.1, 1.0), var(0.2, 3.0);
  PhraseGmm g;
  g.phrase_id = "p";
  g.weights.resize(comps);
  for (int c = 0; c < comps; ++c) g.weights(c) = w(*rng);
  g.weights /= g.weights.sum();
  g.means = RandomMatrix(comps, dim, rng, 2.0);
  g.variances.resize(comps, dim);
  for (Eigen::Index i = 0; i < g.variances.size(); ++i) g.variances.data()[i] = var(*rng);
  return g;
}

Matrix RandomPosteriors(Eigen::Index frames, Eigen::Index comps, Rng* rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix p(frames, comps);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(*rng);
  for (Eigen::Index t = 0; t < frames; ++t) p.row(t) /= p.row(t).sum();
  return p;
}

TEST_SUITE("gmm") {

TEST_CASE("posteriors match Bayes rule") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const int comps = 1 + static_cast<int>(seed % 4);
    PhraseGmm g = RandomGmm(comps, 3, &rng);
    Matrix x = RandomMatrix(3, 7, &rng, 1.5);
    Matrix post = GmmPosteriors(g, x);
    Matrix ref = oracle::BayesPosteriors(g.weights, g.means, g.variances, x);
    CHECK((post - ref).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((post.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("posteriors in degenerate cases") {
  Rng rng(3);
  PhraseGmm one = RandomGmm(1, 2, &rng);
  CHECK((GmmPosteriors(one, RandomMatrix(2, 10, &rng, 50.0)).array() == 1.0).all());

  PhraseGmm twin = RandomGmm(2, 2, &rng);
  twin.weights << 0.5, 0.5;
  twin.means.row(1) = twin.means.row(0);
  twin.variances.row(1) = twin.variances.row(0);
  CHECK((GmmPosteriors(twin, RandomMatrix(2, 10, &rng)).array() == 0.5).all());

  // Far from every mean the log domain still gives a proper distribution.
  PhraseGmm g = RandomGmm(3, 2, &rng);
  Matrix far = Matrix::Constant(2, 4, 1e3);
  Matrix p = GmmPosteriors(g, far);
  CHECK(p.allFinite());
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("one component reproduces the sample statistics") {
  Rng rng(12);
  std::vector<NamedFeatures> utts{{"a", RandomMatrix(3, 40, &rng, 2.0)},
                                  {"b", RandomMatrix(3, 25, &rng, 2.0)}};
  GmmTrainOptions opts;
  opts.num_components = 1;
  opts.iterations = 3;
  opts.variance_floor = 1e-6;
  PhraseGmm g = TrainGmm("p", utts, opts).gmm;
  Matrix all(3, 65);
  all << utts[0].features, utts[1].features;
  Vector mean = all.rowwise().mean();
  Vector var = (all.colwise() - mean).array().square().rowwise().mean();
  CHECK(g.weights(0) == doctest::Approx(1.0));
  CHECK((g.means.row(0).transpose() - mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((g.variances.row(0).transpose() - var).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("two separated clusters are recovered") {
  Rng rng(21);
  std::normal_distribution<double> nd;
  Matrix truth(2, 2);
  truth << -4.0, 1.0, 3.0, -2.0;
  std::vector<NamedFeatures> utts;
  for (int u = 0; u < 4; ++u) {
    Matrix f(2, 200);
    for (int t = 0; t < 200; ++t) {
      const int c = t % 2;
      for (int d = 0; d < 2; ++d) f(d, t) = truth(c, d) + 0.5 * nd(rng);
    }
    utts.push_back({"u" + std::to_string(u), f});
  }
  GmmTrainOptions opts;
  opts.num_components = 2;
  opts.seed = 5;
  GmmTrainResult r = TrainGmm("p", utts, opts);
  for (int c = 0; c < 2; ++c) {
    double best = 1e9;
    for (int k = 0; k < 2; ++k) best = std::min(best, (r.gmm.means.row(k) - truth.row(c)).norm());
    CHECK(best <= 0.1);
  }
  CHECK(r.gmm.weights.minCoeff() > 0.45);
}

TEST_CASE("EM log-likelihood never drops") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    std::vector<NamedFeatures> utts;
    for (int u = 0; u < 3; ++u) utts.push_back({"u" + std::to_string(u), RandomMatrix(4, 60, &rng)});
    GmmTrainOptions opts;
    opts.num_components = 6;
    opts.iterations = 15;
    opts.seed = seed;
    GmmTrainResult r = TrainGmm("p", utts, opts);
    REQUIRE(r.log_likelihoods.size() >= 2);
    for (size_t i = 1; i < r.log_likelihoods.size(); ++i)
      CHECK(r.log_likelihoods[i] >= r.log_likelihoods[i - 1] - 1e-6);
    r.gmm.Validate();
    // Same seed, same model.
    CHECK(TrainGmm("p", utts, opts).gmm.means == r.gmm.means);
  }
}

TEST_CASE("training needs enough frames") {
  Rng rng(1);
  std::vector<NamedFeatures> utts{{"a", RandomMatrix(2, 30, &rng)}};
  GmmTrainOptions opts;
  opts.num_components = 4;
  CHECK_THROWS_AS(TrainGmm("p", utts, opts), InputError);
}

TEST_CASE("MAP pooling hand example") {
  Matrix x(1, 2);
  x << 2, 4;
  Matrix post(2, 2);
  post << 1, 0, 0.5, 0.5;
  Matrix mu = Matrix::Zero(1, 2);
  Matrix sv = MapPool(x, post, mu, 1.0);
  CHECK(sv(0, 0) == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(sv(0, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("MAP pooling limits") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x = RandomMatrix(3, 12, &rng);
    Matrix post = RandomPosteriors(12, 4, &rng);
    Matrix mu = RandomMatrix(3, 4, &rng);
    Vector n = post.colwise().sum().transpose();
    Matrix data = x * post;
    for (int c = 0; c < 4; ++c) data.col(c) /= n(c);
    CHECK((MapPool(x, post, mu, 0.0) - data).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((MapPool(x, post, mu, 1e12) - mu).cwiseAbs().maxCoeff() <= 1e-6);
    // Every slice sits on the segment between the data mean and the prior.
    const double tau = 3.0;
    Matrix sv = MapPool(x, post, mu, tau);
    for (int c = 0; c < 4; ++c) {
      const double w = n(c) / (n(c) + tau);
      CHECK((sv.col(c) - (w * data.col(c) + (1 - w) * mu.col(c))).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("a component without mass returns the prior exactly") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x = RandomMatrix(4, 10, &rng);
    Matrix post = RandomPosteriors(10, 3, &rng);
    post.col(1).setZero();
    for (Eigen::Index t = 0; t < 10; ++t) post.row(t) /= post.row(t).sum();
    Matrix mu = RandomMatrix(4, 3, &rng);
    for (double tau : {0.5, 10.0, 1e3}) {
      Matrix sv = MapPool(x, post, mu, tau);
      CHECK(sv.col(1) == mu.col(1));
    }
    CHECK_THROWS_AS(MapPool(x, post, mu, 0.0), DomainError);
  }
}

TEST_CASE("hard posteriors with no prior equal state pooling") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    StateSequence q{0, 0, 1, 1, 1, 2, 3, 3};
    Matrix a = BuildAlignmentMatrix(q, 4);
    Matrix x = RandomMatrix(5, 8, &rng);
    Matrix mu = RandomMatrix(5, 4, &rng);
    CHECK(MapPool(x, a, mu, 0.0) == HmmPool(x, a));
    Matrix up = RandomMatrix(5, 4, &rng);
    CHECK((MapPoolBackward(x, a, mu, 0.0, up) - HmmPoolBackward(x, a, up)).cwiseAbs().maxCoeff() <=
          1e-15);
  }
}

TEST_CASE("MAP pooling backward") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Matrix x = RandomMatrix(3, 6, &rng);
    Matrix post = RandomPosteriors(6, 3, &rng);
    Matrix mu = RandomMatrix(3, 3, &rng);
    Matrix up = RandomMatrix(3, 3, &rng);
    const double tau = 0.5 + static_cast<double>(seed % 7);
    Matrix grad = MapPoolBackward(x, post, mu, tau, up);
    auto f = [&] { return (MapPool(x, post, mu, tau).array() * up.array()).sum(); };
    CHECK(oracle::RelativeError(grad, oracle::NumericGradient<Matrix>(f, &x)) <= 1e-4);
  }
  Rng rng(1);
  Matrix x = RandomMatrix(3, 6, &rng);
  Matrix post = RandomPosteriors(6, 3, &rng);
  Matrix g = MapPoolBackward(x, post, Matrix::Zero(3, 3), 1e12, Matrix::Ones(3, 3));
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-11);
}

TEST_CASE("running mean") {
  Rng rng(5);
  Matrix x = RandomMatrix(2, 6, &rng);
  Matrix post = RandomPosteriors(6, 3, &rng);
  Vector n = post.colwise().sum().transpose();
  Matrix f = x * post;
  for (int c = 0; c < 3; ++c) f.col(c) /= n(c);
  std::vector<PosteriorBatchItem> batch{{&x, &post}};

  RunningMean full;
  full.mean = RandomMatrix(2, 3, &rng);
  full.beta = 1.0;
  full.initialized = true;
  UpdateRunningMean(&full, batch);
  CHECK((full.mean - f).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(full.batches == 1);

  Matrix ones = Matrix::Ones(1, 4);
  Matrix hard = Matrix::Zero(4, 1);
  hard.col(0).setOnes();
  RunningMean small;
  small.mean = Matrix::Zero(1, 1);
  small.beta = 0.1;
  small.initialized = true;
  std::vector<PosteriorBatchItem> b1{{&ones, &hard}};
  UpdateRunningMean(&small, b1);
  CHECK(small.mean(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  for (int b = 2; b <= 30; ++b) {
    UpdateRunningMean(&small, b1);
    CHECK(std::abs(small.mean(0, 0) - (1.0 - std::pow(0.9, b))) <= 1e-12);
  }

  // An empty component keeps its value.
  Matrix skew = post;
  skew.col(2).setZero();
  std::vector<PosteriorBatchItem> b2{{&x, &skew}};
  RunningMean keep = full;
  UpdateRunningMean(&keep, b2);
  CHECK(keep.mean.col(2) == full.mean.col(2));

  CHECK_THROWS_AS(UpdateRunningMean(&keep, std::span<const PosteriorBatchItem>()), InputError);

  RunningMean lazy = RunningMean::Uninitialized(2, 3, 0.01);
  UpdateRunningMean(&lazy, batch);
  CHECK(lazy.initialized);
  CHECK((lazy.mean - f).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("evaluation leaves the running mean alone") {
  Rng rng(7);
  PhraseGmm g = RandomGmm(3, 2, &rng);
  RunningMean rm = RunningMean::FromGmm(g, 0.01);
  CHECK(rm.mean == g.means.transpose());
  Matrix x = RandomMatrix(2, 9, &rng);
  Matrix post = GmmPosteriors(g, x);
  Matrix a = MapPool(x, post, rm.mean, 10.0);
  Matrix b = MapPool(x, GmmPosteriors(g, x), rm.mean, 10.0);
  CHECK(a == b);
}

}  // TEST_SUITE

}  // namespace
}  // namespace alignsv
