// src/hmm.cc

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

#include "alignsv/hmm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace alignsv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Means, variances and self-loop probabilities from a hard segmentation.
PhraseHmm Estimate(const std::string& phrase_id,
                   std::span<const NamedFeatures> utts,
                   const std::vector<StateSequence>& align, int num_states,
                   const HmmTrainOptions& opts) {
  const int dim = static_cast<int>(utts[0].features.rows());
  Matrix sum = Matrix::Zero(num_states, dim), sumsq = Matrix::Zero(num_states, dim);
  Vector count = Vector::Zero(num_states);
  for (size_t u = 0; u < utts.size(); ++u) {
    const Matrix& f = utts[u].features;
    for (Eigen::Index t = 0; t < f.cols(); ++t) {
      const int q = align[u][t];
      sum.row(q) += f.col(t).transpose();
      sumsq.row(q) += f.col(t).array().square().matrix().transpose();
      count(q) += 1.0;
    }
  }
  PhraseHmm hmm;
  hmm.phrase_id = phrase_id;
  hmm.means.resize(num_states, dim);
  hmm.variances.resize(num_states, dim);
  hmm.self_loop.resize(num_states);
  const double n_utts = static_cast<double>(utts.size());
  for (int q = 0; q < num_states; ++q) {
    hmm.means.row(q) = sum.row(q) / count(q);
    hmm.variances.row(q) =
        (sumsq.row(q) / count(q) - hmm.means.row(q).array().square().matrix())
            .cwiseMax(opts.variance_floor);
    // Every utterance leaves each non-final state exactly once.
    const double p = (count(q) - n_utts) / count(q);
    hmm.self_loop(q) = q + 1 == num_states
                           ? 1.0
                           : std::clamp(p, opts.transition_floor, 1.0 - opts.transition_floor);
  }
  return hmm;
}

}  // namespace

void PhraseHmm::Validate() const {
  const int q = num_states();
  if (q < 1 || dim() < 1) throw ValidationError("hmm: empty model");
  if (variances.rows() != q || variances.cols() != dim() || self_loop.size() != q)
    throw ValidationError("hmm: inconsistent parameter shapes");
  if (!(variances.array() > 0.0).all()) throw ValidationError("hmm: non-positive variance");
  for (int i = 0; i + 1 < q; ++i)
    if (!(self_loop(i) >= 0.0 && self_loop(i) <= 1.0))
      throw ValidationError("hmm: self-loop probability outside [0, 1]");
  if (self_loop(q - 1) != 1.0) throw ValidationError("hmm: final self-loop must be 1");
}

Matrix EmissionLogLikes(const PhraseHmm& hmm, const Matrix& features) {
  if (features.rows() != hmm.dim())
    throw ShapeError("hmm: feature dim " + std::to_string(features.rows()) +
                     " != model dim " + std::to_string(hmm.dim()));
  const int num_states = hmm.num_states();
  Matrix out(features.cols(), num_states);
  for (int q = 0; q < num_states; ++q) {
    const Eigen::ArrayXd mean = hmm.means.row(q).transpose().array();
    const Eigen::ArrayXd var = hmm.variances.row(q).transpose().array();
    const double norm = -0.5 * (var * 2.0 * std::numbers::pi).log().sum();
    for (Eigen::Index t = 0; t < features.cols(); ++t)
      out(t, q) = norm - 0.5 * ((features.col(t).array() - mean).square() / var).sum();
  }
  return out;
}

ViterbiResult ViterbiDecodeLogLikes(const PhraseHmm& hmm, const Matrix& loglikes) {
  const int num_states = hmm.num_states();
  const Eigen::Index frames = loglikes.rows();
  if (loglikes.cols() != num_states) throw ShapeError("viterbi: log-likelihood shape mismatch");
  if (frames < num_states)
    throw InputError("viterbi: " + std::to_string(frames) + " frames cannot cover " +
                     std::to_string(num_states) + " states");
  std::vector<double> log_stay(num_states), log_adv(num_states);
  for (int q = 0; q < num_states; ++q) {
    log_stay[q] = std::log(hmm.self_loop(q));
    log_adv[q] = std::log1p(-hmm.self_loop(q));
  }
  Matrix delta = Matrix::Constant(frames, num_states, kNegInf);
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> from_lower(
      frames, num_states);
  from_lower.setZero();
  delta(0, 0) = loglikes(0, 0);
  for (Eigen::Index t = 1; t < frames; ++t) {
    const int top = static_cast<int>(std::min<Eigen::Index>(t, num_states - 1));
    for (int q = 0; q <= top; ++q) {
      const double stay = delta(t - 1, q) + log_stay[q];
      const double adv = q > 0 ? delta(t - 1, q - 1) + log_adv[q - 1] : kNegInf;
      // Ties go to the lower predecessor.
      if (q > 0 && adv >= stay) {
        delta(t, q) = adv + loglikes(t, q);
        from_lower(t, q) = 1;
      } else {
        delta(t, q) = stay + loglikes(t, q);
      }
    }
  }
  ViterbiResult result;
  result.log_prob = delta(frames - 1, num_states - 1);
  if (!std::isfinite(result.log_prob))
    throw DomainError("viterbi: no finite-probability path");
  result.states.resize(frames);
  int q = num_states - 1;
  for (Eigen::Index t = frames - 1; t >= 0; --t) {
    result.states[t] = q;
    if (t > 0 && from_lower(t, q)) --q;
  }
  return result;
}

ViterbiResult ViterbiDecode(const PhraseHmm& hmm, const Matrix& features) {
  return ViterbiDecodeLogLikes(hmm, EmissionLogLikes(hmm, features));
}

bool IsValidStateSequence(const StateSequence& q, int num_states) {
  if (q.empty() || q.front() != 0 || q.back() != num_states - 1) return false;
  for (size_t t = 1; t < q.size(); ++t)
    if (q[t] != q[t - 1] && q[t] != q[t - 1] + 1) return false;
  return true;
}

HmmTrainResult TrainHmm(const std::string& phrase_id,
                        std::span<const NamedFeatures> utterances,
                        const HmmTrainOptions& opts) {
  const int num_states = opts.num_states;
  if (num_states < 1) throw ConfigError("hmm: state count must be positive");
  if (utterances.size() < 2)
    throw InputError("hmm training for phrase '" + phrase_id +
                     "' needs at least 2 utterances");
  const Eigen::Index dim = utterances[0].features.rows();
  for (const NamedFeatures& u : utterances) {
    if (u.features.cols() < num_states)
      throw InputError("utterance '" + u.id + "' has " +
                       std::to_string(u.features.cols()) + " frames, fewer than " +
                       std::to_string(num_states) + " states");
    if (u.features.rows() != dim)
      throw ShapeError("utterance '" + u.id + "' has inconsistent feature dim");
  }

  std::vector<StateSequence> align(utterances.size());
  for (size_t u = 0; u < utterances.size(); ++u) {
    const Eigen::Index frames = utterances[u].features.cols();
    align[u].resize(frames);
    for (Eigen::Index t = 0; t < frames; ++t)
      align[u][t] = static_cast<int>(t * num_states / frames);
  }

  HmmTrainResult result;
  for (int it = 0; it < std::max(1, opts.iterations); ++it) {
    result.hmm = Estimate(phrase_id, utterances, align, num_states, opts);
    double total = 0.0;
    long changed = 0;
    for (size_t u = 0; u < utterances.size(); ++u) {
      ViterbiResult v = ViterbiDecode(result.hmm, utterances[u].features);
      total += v.log_prob;
      for (size_t t = 0; t < v.states.size(); ++t) changed += v.states[t] != align[u][t];
      align[u] = std::move(v.states);
    }
    result.log_likelihoods.push_back(total);
    result.changed_frames.push_back(changed);
    if (changed == 0) {
      result.converged = true;
      break;
    }
  }
  result.alignments = std::move(align);
  return result;
}

Matrix BuildAlignmentMatrix(const StateSequence& q, int num_states) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(q.size()), num_states);
  for (size_t t = 0; t < q.size(); ++t) {
    if (q[t] < 0 || q[t] >= num_states)
      throw InputError("state index " + std::to_string(q[t]) + " out of range");
    a(static_cast<Eigen::Index>(t), q[t]) = 1.0;
  }
  return a;
}

namespace {

Vector Occupancy(const Matrix& x, const Matrix& alignment) {
  if (alignment.rows() != x.cols())
    throw ShapeError("pooling: alignment has " + std::to_string(alignment.rows()) +
                     " frames, features have " + std::to_string(x.cols()));
  Vector n = alignment.colwise().sum().transpose();
  for (Eigen::Index k = 0; k < n.size(); ++k)
    if (!(n(k) > 0.0))
      throw DomainError("pooling: state " + std::to_string(k) + " has no frames");
  return n;
}

}  // namespace

Matrix HmmPool(const Matrix& x, const Matrix& alignment) {
  const Vector n = Occupancy(x, alignment);
  Matrix slices = x * alignment;
  for (Eigen::Index k = 0; k < slices.cols(); ++k) slices.col(k) /= n(k);
  return slices;
}

Matrix HmmPoolBackward(const Matrix& x, const Matrix& alignment, const Matrix& upstream) {
  const Vector n = Occupancy(x, alignment);
  if (upstream.rows() != x.rows() || upstream.cols() != alignment.cols())
    throw ShapeError("pooling backward: upstream gradient shape mismatch");
  return (upstream * n.cwiseInverse().asDiagonal()) * alignment.transpose();
}

}  // namespace alignsv
