// src/gmm.cc

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

#include "alignsv/gmm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "alignsv/layers.h"

namespace alignsv {

void PhraseGmm::Validate() const {
  const int c = num_components();
  if (c < 1 || dim() < 1) throw ValidationError("gmm: empty model");
  if (weights.size() != c || variances.rows() != c || variances.cols() != dim())
    throw ValidationError("gmm: inconsistent parameter shapes");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
    throw ValidationError("gmm: weights are not a probability vector");
  if (!(variances.array() > 0.0).all()) throw ValidationError("gmm: non-positive variance");
}

Matrix GmmJointLogLikes(const PhraseGmm& gmm, const Matrix& x) {
  if (x.rows() != gmm.dim())
    throw ShapeError("gmm: feature dim " + std::to_string(x.rows()) + " != model dim " +
                     std::to_string(gmm.dim()));
  const int comps = gmm.num_components();
  Matrix out(x.cols(), comps);
  for (int c = 0; c < comps; ++c) {
    const Eigen::ArrayXd mean = gmm.means.row(c).transpose().array();
    const Eigen::ArrayXd inv_var = gmm.variances.row(c).transpose().array().inverse();
    const double norm = std::log(gmm.weights(c)) -
                        0.5 * (gmm.variances.row(c).array() * 2.0 * std::numbers::pi).log().sum();
    for (Eigen::Index t = 0; t < x.cols(); ++t)
      out(t, c) = norm - 0.5 * ((x.col(t).array() - mean).square() * inv_var).sum();
  }
  return out;
}

namespace {

double RowLogSumExp(const Matrix& m, Eigen::Index t) {
  return LogSumExp(std::span<const double>(m.row(t).data(), m.cols()));
}

}  // namespace

double GmmLogLikelihood(const PhraseGmm& gmm, const Matrix& x) {
  const Matrix joint = GmmJointLogLikes(gmm, x);
  double total = 0.0;
  for (Eigen::Index t = 0; t < joint.rows(); ++t) total += RowLogSumExp(joint, t);
  return total;
}

Matrix GmmPosteriors(const PhraseGmm& gmm, const Matrix& x) {
  Matrix post = GmmJointLogLikes(gmm, x);
  for (Eigen::Index t = 0; t < post.rows(); ++t) {
    const double lse = RowLogSumExp(post, t);
    post.row(t) = (post.row(t).array() - lse).exp();
    post.row(t) /= post.row(t).sum();
  }
  return post;
}

GmmTrainResult TrainGmm(const std::string& phrase_id,
                        std::span<const NamedFeatures> utterances,
                        const GmmTrainOptions& opts) {
  const int comps = opts.num_components;
  if (comps < 1) throw ConfigError("gmm: component count must be positive");
  if (utterances.empty()) throw InputError("gmm: no utterances for phrase '" + phrase_id + "'");
  const Eigen::Index dim = utterances[0].features.rows();
  Eigen::Index total = 0;
  for (const NamedFeatures& u : utterances) {
    if (u.features.rows() != dim)
      throw ShapeError("utterance '" + u.id + "' has inconsistent feature dim");
    total += u.features.cols();
  }
  if (total < 10 * static_cast<Eigen::Index>(comps))
    throw InputError("gmm for phrase '" + phrase_id + "': " + std::to_string(total) +
                     " frames, need at least " + std::to_string(10 * comps));

  // Frames as columns of one matrix.
  Matrix data(dim, total);
  {
    Eigen::Index off = 0;
    for (const NamedFeatures& u : utterances) {
      data.middleCols(off, u.features.cols()) = u.features;
      off += u.features.cols();
    }
  }
  const double floor = opts.variance_floor;
  const Vector global_mean = data.rowwise().mean();
  const Vector global_var =
      ((data.colwise() - global_mean).array().square().rowwise().mean()).matrix().cwiseMax(floor);

  // k-means start from C distinct random frames.
  Rng rng = SubStream(opts.seed, "gmm-init:" + phrase_id);
  std::vector<Eigen::Index> order(total);
  std::iota(order.begin(), order.end(), 0);
  for (int c = 0; c < comps; ++c) {
    std::uniform_int_distribution<Eigen::Index> pick(c, total - 1);
    std::swap(order[c], order[pick(rng)]);
  }
  Matrix centers(comps, dim);
  for (int c = 0; c < comps; ++c) centers.row(c) = data.col(order[c]).transpose();
  std::vector<int> assign(total, 0);
  for (int it = 0; it < opts.kmeans_iterations; ++it) {
    for (Eigen::Index t = 0; t < total; ++t) {
      Eigen::Index best = 0;
      (centers.rowwise() - data.col(t).transpose()).rowwise().squaredNorm().minCoeff(&best);
      assign[t] = static_cast<int>(best);
    }
    Matrix sums = Matrix::Zero(comps, dim);
    Vector counts = Vector::Zero(comps);
    for (Eigen::Index t = 0; t < total; ++t) {
      sums.row(assign[t]) += data.col(t).transpose();
      counts(assign[t]) += 1.0;
    }
    for (int c = 0; c < comps; ++c)
      if (counts(c) > 0.0) centers.row(c) = sums.row(c) / counts(c);
  }

  GmmTrainResult result;
  PhraseGmm& gmm = result.gmm;
  gmm.phrase_id = phrase_id;
  gmm.means = centers;
  gmm.variances = global_var.transpose().replicate(comps, 1);
  gmm.weights = Vector::Constant(comps, 1.0 / comps);

  for (int it = 0; it <= opts.iterations; ++it) {
    // E-step.
    Matrix joint = GmmJointLogLikes(gmm, data);
    double loglike = 0.0;
    for (Eigen::Index t = 0; t < total; ++t) {
      const double lse = RowLogSumExp(joint, t);
      loglike += lse;
      joint.row(t) = (joint.row(t).array() - lse).exp();
    }
    result.log_likelihoods.push_back(loglike);
    if (it == opts.iterations) break;
    // M-step.
    const Vector occ = joint.colwise().sum().transpose();
    const Matrix first = joint.transpose() * data.transpose();                   // C x D
    const Matrix second = joint.transpose() * data.transpose().array().square().matrix();
    for (int c = 0; c < comps; ++c) {
      gmm.weights(c) = occ(c) / static_cast<double>(total);
      if (occ(c) <= 0.0) continue;
      gmm.means.row(c) = first.row(c) / occ(c);
      gmm.variances.row(c) =
          (second.row(c) / occ(c) - gmm.means.row(c).array().square().matrix()).cwiseMax(floor);
    }
    gmm.weights /= gmm.weights.sum();
  }
  return result;
}

RunningMean RunningMean::FromGmm(const PhraseGmm& gmm, double beta) {
  RunningMean rm;
  rm.mean = gmm.means.transpose();
  rm.beta = beta;
  rm.initialized = true;
  return rm;
}

RunningMean RunningMean::Uninitialized(int dim, int components, double beta) {
  RunningMean rm;
  rm.mean = Matrix::Zero(dim, components);
  rm.beta = beta;
  rm.initialized = false;
  return rm;
}

void UpdateRunningMean(RunningMean* rm, std::span<const PosteriorBatchItem> batch) {
  if (batch.empty()) throw InputError("running mean update: empty batch");
  if (!(rm->beta > 0.0 && rm->beta <= 1.0))
    throw ConfigError("running mean: beta must be in (0, 1]");
  const Eigen::Index dim = rm->mean.rows(), comps = rm->mean.cols();
  Matrix sums = Matrix::Zero(dim, comps);
  Vector occ = Vector::Zero(comps);
  for (const PosteriorBatchItem& item : batch) {
    if (item.features->rows() != dim || item.posteriors->cols() != comps ||
        item.posteriors->rows() != item.features->cols())
      throw ShapeError("running mean update: batch item shape mismatch");
    sums += *item.features * *item.posteriors;
    occ += item.posteriors->colwise().sum().transpose();
  }
  for (Eigen::Index c = 0; c < comps; ++c) {
    if (!(occ(c) > 0.0)) continue;
    const Vector f = sums.col(c) / occ(c);
    if (rm->initialized)
      rm->mean.col(c) = (1.0 - rm->beta) * rm->mean.col(c) + rm->beta * f;
    else
      rm->mean.col(c) = f;
  }
  rm->initialized = true;
  ++rm->batches;
}

namespace {

Vector CheckMapArgs(const Matrix& x, const Matrix& posteriors, const Matrix& prior_mean,
                    double tau) {
  if (!(tau >= 0.0)) throw InputError("map pooling: relevance factor must be >= 0");
  if (posteriors.rows() != x.cols())
    throw ShapeError("map pooling: posteriors have " + std::to_string(posteriors.rows()) +
                     " frames, features have " + std::to_string(x.cols()));
  if (prior_mean.rows() != x.rows() || prior_mean.cols() != posteriors.cols())
    throw ShapeError("map pooling: prior mean shape mismatch");
  Vector occ = posteriors.colwise().sum().transpose();
  if (tau == 0.0)
    for (Eigen::Index c = 0; c < occ.size(); ++c)
      if (!(occ(c) > 0.0))
        throw DomainError("map pooling: tau = 0 with empty component " + std::to_string(c));
  return occ;
}

}  // namespace

Matrix MapPool(const Matrix& x, const Matrix& posteriors, const Matrix& prior_mean,
               double tau) {
  const Vector occ = CheckMapArgs(x, posteriors, prior_mean, tau);
  Matrix slices = x * posteriors;
  for (Eigen::Index c = 0; c < slices.cols(); ++c) {
    const double n = occ(c);
    const double data_weight = n / (n + tau);
    const double prior_weight = tau / (n + tau);
    if (n > 0.0)
      slices.col(c) = data_weight * (slices.col(c) / n) + prior_weight * prior_mean.col(c);
    else
      slices.col(c) = prior_weight * prior_mean.col(c);
  }
  return slices;
}

Matrix MapPoolBackward(const Matrix& x, const Matrix& posteriors, const Matrix& prior_mean,
                       double tau, const Matrix& upstream) {
  const Vector occ = CheckMapArgs(x, posteriors, prior_mean, tau);
  if (upstream.rows() != x.rows() || upstream.cols() != posteriors.cols())
    throw ShapeError("map pooling backward: upstream gradient shape mismatch");
  const Vector scale = (occ.array() + tau).inverse().matrix();
  return (upstream * scale.asDiagonal()) * posteriors.transpose();
}

}  // namespace alignsv
