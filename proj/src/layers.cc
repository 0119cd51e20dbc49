// src/layers.cc

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

#include "alignsv/layers.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace alignsv {

LayerParams::LayerParams(Eigen::Index rows, Eigen::Index cols)
    : weights(Matrix::Zero(rows, cols)),
      bias(Vector::Zero(rows)),
      weights_grad(Matrix::Zero(rows, cols)),
      bias_grad(Vector::Zero(rows)) {}

void LayerParams::ZeroGrad() {
  weights_grad.setZero(weights.rows(), weights.cols());
  bias_grad.setZero(bias.size());
}

void LayerParams::Accumulate(const Matrix& dw, const Vector& db) {
  if (dw.rows() != weights.rows() || dw.cols() != weights.cols() ||
      db.size() != bias.size())
    throw ShapeError("gradient shape does not match parameter shape");
  weights_grad += dw;
  bias_grad += db;
}

void InitGlorot(LayerParams* params, double fan_in, double fan_out, Rng* rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < params->weights.size(); ++i)
    params->weights.data()[i] = dist(*rng);
  params->bias.setZero();
  params->ZeroGrad();
}

Conv1dLayer::Conv1dLayer(int in, int out, int k)
    : in_channels(in), out_channels(out), kernel(k), params(out, in * k) {
  if (in <= 0 || out <= 0) throw ShapeError("conv1d: channel counts must be positive");
  if (k <= 0 || k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
}

namespace {

Matrix Im2Col(const Matrix& input, int kernel) {
  const Eigen::Index channels = input.rows(), frames = input.cols();
  const int half = (kernel - 1) / 2;
  Matrix cols = Matrix::Zero(channels * kernel, frames);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int j = 0; j < kernel; ++j) {
      const int shift = j - half;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min<Eigen::Index>(frames, frames - shift);
      if (t1 > t0)
        cols.row(c * kernel + j).segment(t0, t1 - t0) =
            input.row(c).segment(t0 + shift, t1 - t0);
    }
  }
  return cols;
}

void CheckConvInput(const Conv1dLayer& layer, const Matrix& input) {
  if (input.rows() != layer.in_channels)
    throw ShapeError("conv1d: input has " + std::to_string(input.rows()) +
                     " channels, kernel expects " +
                     std::to_string(layer.in_channels));
  if (input.cols() < 1) throw ShapeError("conv1d: empty input");
}

}  // namespace

Matrix Conv1dForward(const Conv1dLayer& layer, const Matrix& input) {
  CheckConvInput(layer, input);
  Matrix out = layer.params.weights * Im2Col(input, layer.kernel);
  out.colwise() += layer.params.bias;
  return out;
}

Conv1dGrads Conv1dBackward(const Conv1dLayer& layer, const Matrix& input,
                           const Matrix& upstream) {
  CheckConvInput(layer, input);
  if (upstream.rows() != layer.out_channels || upstream.cols() != input.cols())
    throw ShapeError("conv1d backward: upstream gradient shape mismatch");
  const Matrix cols = Im2Col(input, layer.kernel);
  Conv1dGrads g;
  g.weights = upstream * cols.transpose();
  g.bias = upstream.rowwise().sum();
  const Matrix dcols = layer.params.weights.transpose() * upstream;
  const Eigen::Index frames = input.cols();
  const int half = (layer.kernel - 1) / 2;
  g.input = Matrix::Zero(input.rows(), frames);
  for (Eigen::Index c = 0; c < input.rows(); ++c) {
    for (int j = 0; j < layer.kernel; ++j) {
      const int shift = j - half;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min<Eigen::Index>(frames, frames - shift);
      if (t1 > t0)
        g.input.row(c).segment(t0 + shift, t1 - t0) +=
            dcols.row(c * layer.kernel + j).segment(t0, t1 - t0);
    }
  }
  return g;
}

DenseLayer::DenseLayer(int in, int out) : params(out, in) {
  if (in <= 0 || out <= 0) throw ShapeError("dense: dimensions must be positive");
}

Vector DenseForward(const DenseLayer& layer, const Vector& input) {
  if (input.size() != layer.in_dim())
    throw ShapeError("dense: input dimension " + std::to_string(input.size()) +
                     " != " + std::to_string(layer.in_dim()));
  return layer.params.weights * input + layer.params.bias;
}

DenseGrads DenseBackward(const DenseLayer& layer, const Vector& input,
                         const Vector& upstream) {
  if (input.size() != layer.in_dim() || upstream.size() != layer.out_dim())
    throw ShapeError("dense backward: shape mismatch");
  DenseGrads g;
  g.input = layer.params.weights.transpose() * upstream;
  g.weights = upstream * input.transpose();
  g.bias = upstream;
  return g;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector Softmax(const Vector& v) {
  if (v.size() == 0) throw ShapeError("softmax: empty input");
  Vector out = (v.array() - v.maxCoeff()).exp();
  out /= out.sum();
  return out;
}

double LogSumExp(std::span<const double> v) {
  if (v.empty()) throw ShapeError("log-sum-exp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

void CheckCosineArgs(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw ShapeError("cosine: dimension mismatch " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  if (a.squaredNorm() == 0.0 || b.squaredNorm() == 0.0)
    throw DomainError("cosine: zero vector (degenerate embedding)");
}

}  // namespace

double CosineSimilarity(const Vector& a, const Vector& b) {
  CheckCosineArgs(a, b);
  const double s = a.dot(b) / (a.norm() * b.norm());
  return std::clamp(s, -1.0, 1.0);
}

CosineGrads CosineSimilarityBackward(const Vector& a, const Vector& b,
                                     double upstream) {
  CheckCosineArgs(a, b);
  const double na = a.norm(), nb = b.norm();
  const double s = a.dot(b) / (na * nb);
  CosineGrads g;
  g.a = upstream * (b / (na * nb) - s * a / (na * na));
  g.b = upstream * (a / (na * nb) - s * b / (nb * nb));
  return g;
}

void AppendSlots(LayerParams* params, std::vector<ParamSlot>* out) {
  out->push_back({std::span<double>(params->weights.data(), params->weights.size()),
                  std::span<double>(params->weights_grad.data(),
                                    params->weights_grad.size())});
  out->push_back({std::span<double>(params->bias.data(), params->bias.size()),
                  std::span<double>(params->bias_grad.data(), params->bias_grad.size())});
}

void AdamStep(std::span<const ParamSlot> params, AdamState* state) {
  if (state->first_moment.empty()) {
    for (const ParamSlot& p : params) {
      state->first_moment.emplace_back(p.value.size(), 0.0);
      state->second_moment.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state->first_moment.size() != params.size())
    throw ShapeError("adam: parameter count changed between steps");
  ++state->step;
  const double b1 = state->beta1, b2 = state->beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state->step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state->step));
  for (size_t i = 0; i < params.size(); ++i) {
    const ParamSlot& p = params[i];
    std::vector<double>& m = state->first_moment[i];
    std::vector<double>& v = state->second_moment[i];
    if (m.size() != p.value.size() || p.grad.size() != p.value.size())
      throw ShapeError("adam: moment buffer shape mismatch");
    for (size_t j = 0; j < m.size(); ++j) {
      const double g = p.grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / c1, v_hat = v[j] / c2;
      p.value[j] -= state->learning_rate * m_hat / (std::sqrt(v_hat) + state->epsilon);
    }
  }
}

}  // namespace alignsv
