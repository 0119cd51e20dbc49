// src/losses.cc

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

#include "alignsv/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alignsv/layers.h"

namespace alignsv {

LossWithGrad CrossEntropy(const Vector& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw InputError("cross-entropy: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(logits.size()) + ")");
  const double lse = LogSumExp(std::span<const double>(logits.data(), logits.size()));
  LossWithGrad out;
  out.loss = lse - logits(label);
  out.grad = Softmax(logits);
  out.grad(label) -= 1.0;
  return out;
}

LossWithGrad SoftCrossEntropy(const Vector& logits, const Vector& target) {
  if (target.size() != logits.size())
    throw ShapeError("soft cross-entropy: target size mismatch");
  const double lse = LogSumExp(std::span<const double>(logits.data(), logits.size()));
  LossWithGrad out;
  out.loss = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k)
    if (target(k) > 0.0) out.loss += target(k) * (lse - logits(k));
  out.grad = Softmax(logits) * target.sum() - target;
  return out;
}

TripletLossResult TripletLoss(double s_ap, double s_an, double margin) {
  TripletLossResult r;
  const double v = margin - s_ap + s_an;
  if (v > 0.0) {
    r.loss = v;
    r.grad_anchor_positive = -1.0;
    r.grad_anchor_negative = 1.0;
  }
  return r;
}

double ExactAuc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty())
    throw InputError("AUC needs at least one positive and one negative score");
  double correct = 0.0;
  for (double p : positive) {
    for (double n : negative) {
      if (p > n)
        correct += 1.0;
      else if (p == n)
        correct += 0.5;
    }
  }
  return correct / (static_cast<double>(positive.size()) * static_cast<double>(negative.size()));
}

double ExactAuc(const PairBatch& batch) { return ExactAuc(batch.positive, batch.negative); }

AaucResult Aauc(std::span<const double> positive, std::span<const double> negative,
                double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("aAUC: alpha must be positive");
  if (positive.empty() || negative.empty())
    throw InputError("aAUC needs at least one positive and one negative score");
  const double scale = 1.0 / (static_cast<double>(positive.size()) * negative.size());
  AaucResult r;
  r.grad_positive.assign(positive.size(), 0.0);
  r.grad_negative.assign(negative.size(), 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < positive.size(); ++i) {
    for (size_t j = 0; j < negative.size(); ++j) {
      const double s = Sigmoid(alpha * (positive[i] - negative[j]));
      sum += s;
      const double d = alpha * s * (1.0 - s) * scale;
      r.grad_positive[i] += d;
      r.grad_negative[j] -= d;
    }
  }
  r.value = sum * scale;
  return r;
}

MiningResult MineHard(std::span<const MiningItem> items, const Scorer& scorer) {
  MiningResult result;
  const int n = static_cast<int>(items.size());
  for (int a = 0; a < n; ++a) {
    int pos = -1, neg = -1;
    double pos_score = 0.0, neg_score = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == a) continue;
      const double s = scorer(*items[a].embedding, *items[j].embedding);
      if (items[j].speaker == items[a].speaker) {
        if (pos < 0 || s < pos_score) pos = j, pos_score = s;
      } else {
        if (neg < 0 || s > neg_score) neg = j, neg_score = s;
      }
    }
    if (pos < 0 || neg < 0) {
      ++result.skipped_anchors;
      continue;
    }
    result.triplets.push_back({a, pos, neg, pos_score, neg_score});
  }
  return result;
}

namespace {

struct ScoredPair {
  double score;
  int i, j;
};

void KeepHardest(std::vector<ScoredPair>* pairs, int cap, bool lowest_first) {
  std::stable_sort(pairs->begin(), pairs->end(), [&](const ScoredPair& x, const ScoredPair& y) {
    return lowest_first ? x.score < y.score : x.score > y.score;
  });
  if (cap > 0 && static_cast<int>(pairs->size()) > cap) pairs->resize(cap);
}

}  // namespace

PairBatch BuildPairBatch(std::span<const MiningItem> items, const Scorer& scorer,
                         int max_positive, int max_negative) {
  std::vector<ScoredPair> pos, neg;
  const int n = static_cast<int>(items.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double s = scorer(*items[i].embedding, *items[j].embedding);
      (items[i].speaker == items[j].speaker ? pos : neg).push_back({s, i, j});
    }
  }
  if (pos.empty()) throw InputError("pair batch: no same-speaker pairs");
  if (neg.empty()) throw InputError("pair batch: no different-speaker pairs");
  KeepHardest(&pos, max_positive, true);
  KeepHardest(&neg, max_negative, false);
  PairBatch batch;
  for (const ScoredPair& p : pos) {
    batch.positive.push_back(p.score);
    batch.positive_pairs.emplace_back(p.i, p.j);
  }
  for (const ScoredPair& p : neg) {
    batch.negative.push_back(p.score);
    batch.negative_pairs.emplace_back(p.i, p.j);
  }
  return batch;
}

}  // namespace alignsv
