// include/alignsv/gmm.h

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

#ifndef ALIGNSV_GMM_H_
#define ALIGNSV_GMM_H_

#include <span>
#include <string>
#include <vector>

#include "alignsv/common.h"
#include "alignsv/supervector.h"

namespace alignsv {

// Diagonal-covariance mixture trained for one phrase.
struct PhraseGmm {
  std::string phrase_id;
  Vector weights;    // C
  Matrix means;      // C x D
  Matrix variances;  // C x D

  int num_components() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
  void Validate() const;
};

struct GmmTrainOptions {
  int num_components = 64;
  int iterations = 20;
  int kmeans_iterations = 5;
  double variance_floor = 1e-3;
  uint64_t seed = 0;
};

struct GmmTrainResult {
  PhraseGmm gmm;
  // Data log-likelihood before the first EM update and after each one.
  std::vector<double> log_likelihoods;
};

// EM from a k-means start seeded with random frames. Needs at least
// 10 * C frames in total.
GmmTrainResult TrainGmm(const std::string& phrase_id,
                        std::span<const NamedFeatures> utterances,
                        const GmmTrainOptions& opts);

// T x C values of log w_c + log N(x_t; mu_c, Sigma_c).
Matrix GmmJointLogLikes(const PhraseGmm& gmm, const Matrix& x);
double GmmLogLikelihood(const PhraseGmm& gmm, const Matrix& x);

// T x C posteriors gamma_t(c), rows sum to one.
Matrix GmmPosteriors(const PhraseGmm& gmm, const Matrix& x);

// Per-component prior mean for MAP pooling, kept as D x C and updated once
// per training batch: mu <- (1 - beta) mu + beta f.
struct RunningMean {
  Matrix mean;  // D x C
  double beta = 0.01;
  long batches = 0;
  // False until a first value exists; the first update then copies f.
  bool initialized = false;

  static RunningMean FromGmm(const PhraseGmm& gmm, double beta);
  static RunningMean Uninitialized(int dim, int components, double beta);
};

struct PosteriorBatchItem {
  const Matrix* features;    // D x T
  const Matrix* posteriors;  // T x C
};

// f is the posterior-weighted mean of all batch frames per component;
// components with no mass in the batch keep their previous value.
void UpdateRunningMean(RunningMean* rm, std::span<const PosteriorBatchItem> batch);

// D x C supervector slices
//   (sum_t x_t gamma_t(c) + tau mu_c) / (sum_t gamma_t(c) + tau),
// evaluated as the convex combination n/(n+tau) * data mean + tau/(n+tau) * mu
// so a component with zero mass returns mu_c exactly.
Matrix MapPool(const Matrix& x, const Matrix& posteriors, const Matrix& prior_mean,
               double tau);
// Gradient wrt x only; posteriors and the prior mean are constants.
Matrix MapPoolBackward(const Matrix& x, const Matrix& posteriors,
                       const Matrix& prior_mean, double tau, const Matrix& upstream);

}  // namespace alignsv

#endif  // ALIGNSV_GMM_H_
