// tests/test_layers.cc

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

#include "alignsv/layers.h"
#include "oracles.h"

namespace alignsv {
namespace {

Matrix RandomMatrix(int rows, int cols, Rng* rng) {
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(*rng);
  return m;
}

Vector RandomVector(int n, Rng* rng) { return RandomMatrix(n, 1, rng).col(0); }

Conv1dLayer RandomConv(int in, int out, int k, Rng* rng) {
  Conv1dLayer layer(in, out, k);
  layer.params.weights = RandomMatrix(out, in * k, rng);
  layer.params.bias = RandomVector(out, rng);
  return layer;
}

TEST_SUITE("layers") {

TEST_CASE("conv1d identity kernel returns the input") {
  Rng rng(1);
  Conv1dLayer layer(3, 3, 1);
  layer.params.weights = Matrix::Identity(3, 3);
  Matrix x = RandomMatrix(3, 7, &rng);
  CHECK(Conv1dForward(layer, x) == x);
  Matrix up = RandomMatrix(3, 7, &rng);
  CHECK(Conv1dBackward(layer, x, up).input == up);
}

TEST_CASE("conv1d sums a zero-padded window") {
  Conv1dLayer layer(1, 1, 3);
  layer.params.weights << 1, 1, 1;
  Matrix x(1, 3);
  x << 1, 2, 3;
  Matrix y = Conv1dForward(layer, x);
  CHECK(y(0, 0) == 3.0);
  CHECK(y(0, 1) == 6.0);
  CHECK(y(0, 2) == 5.0);
}

TEST_CASE("conv1d on zero input yields the bias everywhere") {
  Rng rng(2);
  Conv1dLayer layer = RandomConv(2, 4, 5, &rng);
  Matrix y = Conv1dForward(layer, Matrix::Zero(2, 6));
  for (int t = 0; t < 6; ++t) CHECK((y.col(t) - layer.params.bias).norm() == 0.0);
}

TEST_CASE("conv1d weight layout follows the time offset") {
  // Weight on column j reads input frame t + j - 1 for k = 3.
  Conv1dLayer layer(1, 1, 3);
  layer.params.weights << 0, 0, 1;
  Matrix x(1, 4);
  x << 1, 2, 3, 4;
  Matrix y = Conv1dForward(layer, x);
  CHECK(y(0, 0) == 2.0);
  CHECK(y(0, 3) == 0.0);
}

TEST_CASE("conv1d keeps the number of frames") {
  Rng rng(3);
  for (int t : {1, 2, 3, 10}) {
    for (int k : {1, 3, 5, 7}) {
      Conv1dLayer layer = RandomConv(2, 3, k, &rng);
      CHECK(Conv1dForward(layer, RandomMatrix(2, t, &rng)).cols() == t);
    }
  }
}

TEST_CASE("conv1d shape errors") {
  Conv1dLayer layer(2, 3, 3);
  CHECK_THROWS_AS(Conv1dForward(layer, Matrix::Zero(3, 5)), ShapeError);
  CHECK_THROWS_AS(Conv1dBackward(layer, Matrix::Zero(2, 5), Matrix::Zero(3, 4)), ShapeError);
  CHECK_THROWS_AS(Conv1dLayer(2, 3, 4), ShapeError);
}

TEST_CASE("conv1d zero upstream gives zero gradients") {
  Rng rng(4);
  Conv1dLayer layer = RandomConv(2, 3, 3, &rng);
  Conv1dGrads g = Conv1dBackward(layer, RandomMatrix(2, 5, &rng), Matrix::Zero(3, 5));
  CHECK(g.input.norm() == 0.0);
  CHECK(g.weights.norm() == 0.0);
  CHECK(g.bias.norm() == 0.0);
}

TEST_CASE("conv1d backward matches finite differences") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Conv1dLayer layer = RandomConv(2, 3, 3, &rng);
    Matrix x = RandomMatrix(2, 5, &rng);
    Matrix up = RandomMatrix(3, 5, &rng);
    auto f = [&] { return (Conv1dForward(layer, x).array() * up.array()).sum(); };
    Conv1dGrads g = Conv1dBackward(layer, x, up);
    CHECK(oracle::RelativeError(g.input, oracle::NumericGradient<Matrix>(f, &x)) <= 1e-4);
    CHECK(oracle::RelativeError(g.weights,
                                oracle::NumericGradient<Matrix>(f, &layer.params.weights)) <=
          1e-4);
    CHECK(oracle::RelativeError(g.bias, oracle::NumericGradient<Vector>(f, &layer.params.bias)) <=
          1e-4);
  }
}

TEST_CASE("dense backward matches finite differences") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    DenseLayer layer(4, 3);
    layer.params.weights = RandomMatrix(3, 4, &rng);
    layer.params.bias = RandomVector(3, &rng);
    Vector x = RandomVector(4, &rng), up = RandomVector(3, &rng);
    auto f = [&] { return DenseForward(layer, x).dot(up); };
    DenseGrads g = DenseBackward(layer, x, up);
    CHECK(oracle::RelativeError(g.input, oracle::NumericGradient<Vector>(f, &x)) <= 1e-4);
    CHECK(oracle::RelativeError(g.weights,
                                oracle::NumericGradient<Matrix>(f, &layer.params.weights)) <=
          1e-4);
    CHECK(oracle::RelativeError(g.bias, oracle::NumericGradient<Vector>(f, &layer.params.bias)) <=
          1e-4);
  }
}

TEST_CASE("relu") {
  Vector x(4);
  x << -1.0, 0.0, 0.5, 2.0;
  Vector y = ReluForward(x);
  CHECK(y(0) == 0.0);
  CHECK(y(3) == 2.0);
  Vector g = ReluBackward(x, Vector::Ones(4));
  CHECK(g(0) == 0.0);
  CHECK(g(1) == 0.0);
  CHECK(g(2) == 1.0);
}

TEST_CASE("sigmoid and softmax") {
  CHECK(Sigmoid(0.0) == 0.5);
  for (double x : {-700.0, -30.0, -1.0, 1.0, 30.0}) {
    CHECK(Sigmoid(x) > 0.0);
    CHECK(Sigmoid(x) < 1.0);
  }
  CHECK(Sigmoid(-1.5) + Sigmoid(1.5) == doctest::Approx(1.0).epsilon(1e-15));
  Vector z = Vector::Zero(2);
  Vector p = Softmax(z);
  CHECK(p(0) == 0.5);
  CHECK(p(1) == 0.5);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Vector v = RandomVector(7, &rng) * 50.0;
    CHECK(std::abs(Softmax(v).sum() - 1.0) <= 1e-12);
  }
  Vector big(2);
  big << 1000.0, 1000.0;
  CHECK(Softmax(big)(0) == doctest::Approx(0.5));
}

TEST_CASE("cosine similarity") {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(CosineSimilarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(CosineSimilarity(a, b) == 0.0);
  Vector c(2);
  c << 1, 1;
  CHECK(std::abs(CosineSimilarity(c, a) - 0.7071067811865476) <= 1e-6);
  CHECK_THROWS_AS(CosineSimilarity(Vector::Zero(2), a), DomainError);
  CHECK_THROWS_AS(CosineSimilarity(Vector::Ones(3), a), ShapeError);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    Vector u = RandomVector(5, &rng), v = RandomVector(5, &rng);
    const double lambda = std::exp(RandomVector(1, &rng)(0) * 3.0);
    CHECK(std::abs(CosineSimilarity(u, v) - CosineSimilarity(lambda * u, v)) <= 1e-12);
    CHECK(CosineSimilarity(u, v) == CosineSimilarity(v, u));
  }
}

TEST_CASE("cosine backward closed forms") {
  Vector a(2), b(2);
  a << 2, 0;
  b << 0, 3;
  CosineGrads g = CosineSimilarityBackward(a, b, 1.0);
  CHECK((g.a - b / (a.norm() * b.norm())).norm() <= 1e-15);
  CosineGrads self = CosineSimilarityBackward(a, a, 1.0);
  CHECK(std::abs(self.a.dot(a)) <= 1e-15);
  CosineGrads zero = CosineSimilarityBackward(a, b, 0.0);
  CHECK(zero.a.norm() == 0.0);
  CHECK(zero.b.norm() == 0.0);
  CHECK_THROWS_AS(CosineSimilarityBackward(Vector::Zero(2), b, 1.0), DomainError);
}

TEST_CASE("cosine backward matches finite differences") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Vector a = RandomVector(6, &rng), b = RandomVector(6, &rng);
    const double up = 1.7;
    auto f = [&] { return up * CosineSimilarity(a, b); };
    CosineGrads g = CosineSimilarityBackward(a, b, up);
    CHECK(oracle::RelativeError(g.a, oracle::NumericGradient<Vector>(f, &a)) <= 1e-4);
    CHECK(oracle::RelativeError(g.b, oracle::NumericGradient<Vector>(f, &b)) <= 1e-4);
  }
}

TEST_CASE("adam") {
  std::vector<double> value = {1.0}, grad = {0.0};
  std::vector<ParamSlot> slots = {{value, grad}};
  AdamState state;
  state.learning_rate = 0.1;
  AdamStep(slots, &state);
  CHECK(value[0] == 1.0);
  CHECK(state.step == 1);

  // First step moves by lr * g / (|g| + eps) after bias correction.
  value = {0.0};
  grad = {1.0};
  AdamState fresh;
  fresh.learning_rate = 0.1;
  AdamStep(slots, &fresh);
  CHECK(value[0] == doctest::Approx(-0.1).epsilon(1e-6));

  value = {0.0};
  grad = {-0.3};
  AdamState many;
  for (int i = 0; i < 50; ++i) {
    AdamStep(slots, &many);
    CHECK(many.step == i + 1);
  }
  CHECK(value[0] > 0.0);
}

TEST_CASE("adam is deterministic and checks shapes") {
  auto run = [] {
    std::vector<double> v = {0.5, -0.2}, g = {0.1, 0.3};
    std::vector<ParamSlot> s = {{v, g}};
    AdamState st;
    for (int i = 0; i < 10; ++i) AdamStep(s, &st);
    return v;
  };
  CHECK(run() == run());
  std::vector<double> v = {1.0}, g = {1.0}, v2 = {1.0, 2.0}, g2 = {1.0, 1.0};
  std::vector<ParamSlot> s = {{v, g}};
  AdamState st;
  AdamStep(s, &st);
  std::vector<ParamSlot> other = {{v2, g2}};
  CHECK_THROWS_AS(AdamStep(other, &st), ShapeError);
}

TEST_CASE("layer params keep gradient shapes") {
  LayerParams p(3, 4);
  CHECK(p.weights_grad.rows() == 3);
  CHECK(p.weights_grad.cols() == 4);
  CHECK_THROWS_AS(p.Accumulate(Matrix::Zero(4, 3), Vector::Zero(3)), ShapeError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace alignsv
