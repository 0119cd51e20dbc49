// include/alignsv/losses.h

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

#ifndef ALIGNSV_LOSSES_H_
#define ALIGNSV_LOSSES_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "alignsv/common.h"

namespace alignsv {

struct LossWithGrad {
  double loss = 0.0;
  Vector grad;
};

// -log softmax(logits)[label]; gradient softmax - onehot.
LossWithGrad CrossEntropy(const Vector& logits, int label);

// Cross-entropy against a target distribution: -sum_k p_k log softmax_k.
LossWithGrad SoftCrossEntropy(const Vector& logits, const Vector& target);

struct TripletLossResult {
  double loss = 0.0;
  double grad_anchor_positive = 0.0;  // d loss / d s_ap
  double grad_anchor_negative = 0.0;  // d loss / d s_an
};

// Similarity form max(0, margin - s_ap + s_an).
TripletLossResult TripletLoss(double s_ap, double s_an, double margin);

// Scores of same-identity (positive) and different-identity (negative) pairs.
// The index vectors, when filled, name the two batch members behind each
// score.
struct PairBatch {
  std::vector<double> positive;
  std::vector<double> negative;
  std::vector<std::pair<int, int>> positive_pairs;
  std::vector<std::pair<int, int>> negative_pairs;
};

// Fraction of (positive, negative) score pairs ranked correctly; ties count
// one half.
double ExactAuc(std::span<const double> positive, std::span<const double> negative);
double ExactAuc(const PairBatch& batch);

struct AaucResult {
  double value = 0.0;  // in (0, 1)
  std::vector<double> grad_positive;  // d aAUC / d s+_i
  std::vector<double> grad_negative;  // d aAUC / d s-_j
};

// Mean over all (i, j) of sigmoid(alpha (s+_i - s-_j)). Training minimizes
// 1 - value.
AaucResult Aauc(std::span<const double> positive, std::span<const double> negative,
                double alpha);

using Scorer = std::function<double(const Vector&, const Vector&)>;

// One batch member for mining: its embedding and identity. Batches are
// phrase-homogeneous, so only the speaker matters here.
struct MiningItem {
  const Vector* embedding;
  std::string speaker;
};

struct MinedTriplet {
  int anchor;
  int positive;  // least similar same-speaker member
  int negative;  // most similar other-speaker member
  double positive_score;
  double negative_score;
};

struct MiningResult {
  std::vector<MinedTriplet> triplets;
  int skipped_anchors = 0;
};

// Hard positive/negative per anchor. Ties resolve to the lowest index.
// Anchors without any positive or negative are skipped and counted.
MiningResult MineHard(std::span<const MiningItem> items, const Scorer& scorer);

// All same-speaker and different-speaker pairs (i < j), keeping only the
// `max_positive` lowest-scoring positives and `max_negative` highest-scoring
// negatives when the caps are positive. Caps <= 0 mean no cap.
PairBatch BuildPairBatch(std::span<const MiningItem> items, const Scorer& scorer,
                         int max_positive, int max_negative);

}  // namespace alignsv

#endif  // ALIGNSV_LOSSES_H_
