// include/alignsv/layers.h

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

#ifndef ALIGNSV_LAYERS_H_
#define ALIGNSV_LAYERS_H_

#include <span>
#include <vector>

#include "alignsv/common.h"

namespace alignsv {

// Trainable weights of one layer plus gradient accumulators of the same
// shapes. Backward functions return gradients; Accumulate() adds them in.
struct LayerParams {
  Matrix weights;
  Vector bias;
  Matrix weights_grad;
  Vector bias_grad;

  LayerParams() = default;
  LayerParams(Eigen::Index rows, Eigen::Index cols);

  void ZeroGrad();
  void Accumulate(const Matrix& dw, const Vector& db);
};

// Glorot-uniform weights, zero bias.
void InitGlorot(LayerParams* params, double fan_in, double fan_out, Rng* rng);

// 1-D convolution over time with same-length zero padding. Weights are
// stored as out_channels x (in_channels * kernel); column c * kernel + j
// multiplies input channel c at time offset j - (kernel - 1) / 2.
struct Conv1dLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  LayerParams params;

  Conv1dLayer() = default;
  Conv1dLayer(int in, int out, int k);
};

struct Conv1dGrads {
  Matrix input;
  Matrix weights;
  Vector bias;
};

Matrix Conv1dForward(const Conv1dLayer& layer, const Matrix& input);
Conv1dGrads Conv1dBackward(const Conv1dLayer& layer, const Matrix& input,
                           const Matrix& upstream);

// y = W x + b.
struct DenseLayer {
  LayerParams params;

  DenseLayer() = default;
  DenseLayer(int in, int out);
  int in_dim() const { return static_cast<int>(params.weights.cols()); }
  int out_dim() const { return static_cast<int>(params.weights.rows()); }
};

struct DenseGrads {
  Vector input;
  Matrix weights;
  Vector bias;
};

Vector DenseForward(const DenseLayer& layer, const Vector& input);
DenseGrads DenseBackward(const DenseLayer& layer, const Vector& input,
                         const Vector& upstream);

template <typename Derived>
auto ReluForward(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(0.0).eval();
}

// Gradient is zero where the forward input was <= 0.
template <typename Derived, typename Derived2>
auto ReluBackward(const Eigen::MatrixBase<Derived>& input,
                  const Eigen::MatrixBase<Derived2>& upstream) {
  if (input.rows() != upstream.rows() || input.cols() != upstream.cols())
    throw ShapeError("relu backward: shape mismatch");
  return (input.array() > 0.0).select(upstream, 0.0).eval();
}

double Sigmoid(double x);
Vector Softmax(const Vector& v);
double LogSumExp(std::span<const double> v);

double CosineSimilarity(const Vector& a, const Vector& b);

struct CosineGrads {
  Vector a;
  Vector b;
};

CosineGrads CosineSimilarityBackward(const Vector& a, const Vector& b,
                                     double upstream);

// Contiguous view of one parameter tensor and its gradient.
struct ParamSlot {
  std::span<double> value;
  std::span<double> grad;
};

void AppendSlots(LayerParams* params, std::vector<ParamSlot>* out);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update over every slot. Moment buffers are sized
// on the first call and must keep matching afterwards.
void AdamStep(std::span<const ParamSlot> params, AdamState* state);

}  // namespace alignsv

#endif  // ALIGNSV_LAYERS_H_
