// include/alignsv/hmm.h

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

#ifndef ALIGNSV_HMM_H_
#define ALIGNSV_HMM_H_

#include <span>
#include <string>
#include <vector>

#include "alignsv/common.h"
#include "alignsv/supervector.h"

namespace alignsv {

// Left-to-right phrase HMM with one diagonal Gaussian per state. States are
// numbered 0..Q-1 internally; a state either loops or advances by one.
struct PhraseHmm {
  std::string phrase_id;
  Matrix means;      // Q x D
  Matrix variances;  // Q x D
  Vector self_loop;  // Q; advance probability is 1 - self_loop, last entry is 1

  int num_states() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
  // Throws ValidationError when shapes, probabilities or variances are off.
  void Validate() const;
};

// q_t for every frame.
using StateSequence = std::vector<int>;

struct HmmTrainOptions {
  int num_states = 40;
  int iterations = 10;
  double variance_floor = 1e-3;
  // Self-loop probabilities are kept in [floor, 1 - floor].
  double transition_floor = 1e-3;
};

struct HmmTrainResult {
  PhraseHmm hmm;
  // Total best-path log-likelihood of the data after each re-estimation.
  std::vector<double> log_likelihoods;
  // Frames whose state changed in each realignment pass.
  std::vector<long> changed_frames;
  std::vector<StateSequence> alignments;
  bool converged = false;
};

// Segmental (Viterbi) training. Starts from a uniform segmentation of each
// utterance into Q spans and alternates realignment and re-estimation until
// the alignment stops changing or the iteration limit is hit.
HmmTrainResult TrainHmm(const std::string& phrase_id,
                        std::span<const NamedFeatures> utterances,
                        const HmmTrainOptions& opts);

// T x Q Gaussian log-densities.
Matrix EmissionLogLikes(const PhraseHmm& hmm, const Matrix& features);

struct ViterbiResult {
  StateSequence states;
  double log_prob = 0.0;
};

// Best path that starts in state 0 and ends in state Q-1, so every state
// gets at least one frame. On equal scores the path that stays in the lower
// state longer wins (advance as late as possible).
ViterbiResult ViterbiDecode(const PhraseHmm& hmm, const Matrix& features);
ViterbiResult ViterbiDecodeLogLikes(const PhraseHmm& hmm, const Matrix& loglikes);

// Checks monotonicity, unit steps, start in 0 and end in Q-1.
bool IsValidStateSequence(const StateSequence& q, int num_states);

// T x Q one-hot matrix with A(t, q_t) = 1.
Matrix BuildAlignmentMatrix(const StateSequence& q, int num_states);

// D x K slices: each column is the alignment-weighted mean of the frames,
// x A diag(1 / colsum(A)). Throws DomainError on an empty column.
Matrix HmmPool(const Matrix& x, const Matrix& alignment);
Matrix HmmPoolBackward(const Matrix& x, const Matrix& alignment,
                       const Matrix& upstream);

}  // namespace alignsv

#endif  // ALIGNSV_HMM_H_
