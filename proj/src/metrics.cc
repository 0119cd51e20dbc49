// src/metrics.cc

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

#include "alignsv/metrics.h"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace alignsv {

namespace {

void Split(const ScoredTrialSet& trials, std::vector<double>* target,
           std::vector<double>* nontarget) {
  for (const ScoredTrial& t : trials) (t.target ? target : nontarget)->push_back(t.score);
}

void CheckClasses(const std::vector<double>& target, const std::vector<double>& nontarget) {
  if (target.empty() || nontarget.empty())
    throw InputError("metrics need at least one target and one nontarget trial");
}

// Operating point as counts: accepted nontargets and rejected targets.
struct CountPoint {
  double threshold;
  int64_t fa;
  int64_t miss;
};

// One point per distinct score plus reject-all at +inf.
std::vector<CountPoint> CountCurve(const std::vector<double>& target,
                                   const std::vector<double>& nontarget) {
  CheckClasses(target, nontarget);
  std::vector<double> tar = target, non = nontarget, all;
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());
  all.reserve(tar.size() + non.size());
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(), std::back_inserter(all));
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const int64_t nt = static_cast<int64_t>(tar.size()), nn = static_cast<int64_t>(non.size());
  std::vector<CountPoint> curve;
  curve.reserve(all.size() + 1);
  int64_t misses = 0, rejected_non = 0;
  for (double thr : all) {
    while (misses < nt && tar[misses] < thr) ++misses;
    while (rejected_non < nn && non[rejected_non] < thr) ++rejected_non;
    curve.push_back({thr, nn - rejected_non, misses});
  }
  curve.push_back({std::numeric_limits<double>::infinity(), 0, nt});
  return curve;
}

int64_t Cross(const CountPoint& o, const CountPoint& a, const CountPoint& b) {
  return (a.fa - o.fa) * (b.miss - o.miss) - (a.miss - o.miss) * (b.fa - o.fa);
}

}  // namespace

DetCurve DetPoints(const std::vector<double>& target, const std::vector<double>& nontarget) {
  const double nt = static_cast<double>(target.size()), nn = static_cast<double>(nontarget.size());
  DetCurve curve;
  for (const CountPoint& p : CountCurve(target, nontarget))
    curve.push_back({p.threshold, static_cast<double>(p.fa) / nn, static_cast<double>(p.miss) / nt});
  return curve;
}

DetCurve DetPoints(const ScoredTrialSet& trials) {
  std::vector<double> tar, non;
  Split(trials, &tar, &non);
  return DetPoints(tar, non);
}

bool IsMonotoneDet(const DetCurve& curve) {
  for (size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].p_fa > curve[i - 1].p_fa) return false;
    if (curve[i].p_miss < curve[i - 1].p_miss) return false;
  }
  return true;
}

double ComputeEer(const std::vector<double>& target, const std::vector<double>& nontarget) {
  // Integer counts keep the hull exact; the crossing is a ratio of integers
  // rounded once at the end.
  const int64_t nt = static_cast<int64_t>(target.size());
  const int64_t nn = static_cast<int64_t>(nontarget.size());
  std::vector<CountPoint> pts = CountCurve(target, nontarget);
  // Lower hull over increasing false alarms.
  std::sort(pts.begin(), pts.end(), [](const CountPoint& a, const CountPoint& b) {
    return a.fa != b.fa ? a.fa < b.fa : a.miss < b.miss;
  });
  std::vector<CountPoint> hull;
  for (const CountPoint& p : pts) {
    while (hull.size() >= 2 && Cross(hull[hull.size() - 2], hull.back(), p) <= 0) hull.pop_back();
    hull.push_back(p);
  }
  // Signed distance from the diagonal p_miss = p_fa, scaled by nt * nn.
  auto above = [&](const CountPoint& p) { return p.miss * nn - p.fa * nt; };
  for (size_t i = 0; i + 1 < hull.size(); ++i) {
    const CountPoint &a = hull[i], &b = hull[i + 1];
    const int64_t da = above(a), db = above(b);
    if (da >= 0 && db <= 0) {
      if (da == db) return static_cast<double>(a.fa) / static_cast<double>(nn);
      return static_cast<double>(a.miss * b.fa - a.fa * b.miss) / static_cast<double>(da - db);
    }
  }
  // The hull always runs from p_miss >= p_fa to p_miss <= p_fa.
  throw DomainError("EER: hull does not cross the diagonal");
}

double ComputeEer(const ScoredTrialSet& trials) {
  std::vector<double> tar, non;
  Split(trials, &tar, &non);
  return ComputeEer(tar, non);
}

double NormalizedDcf(double p_miss, double p_fa, const DcfParams& params) {
  const double miss_weight = params.c_miss * params.p_target;
  const double fa_weight = params.c_fa * (1.0 - params.p_target);
  return (miss_weight * p_miss + fa_weight * p_fa) / std::min(miss_weight, fa_weight);
}

double ComputeMinDcf(const std::vector<double>& target, const std::vector<double>& nontarget,
                     const DcfParams& params) {
  if (!(params.p_target > 0.0 && params.p_target < 1.0) || params.c_miss <= 0.0 ||
      params.c_fa <= 0.0)
    throw ConfigError("DCF: p_target must be in (0, 1) and costs positive");
  double best = std::numeric_limits<double>::infinity();
  for (const DetPoint& p : DetPoints(target, nontarget))
    best = std::min(best, NormalizedDcf(p.p_miss, p.p_fa, params));
  return best;
}

double ComputeMinDcf(const ScoredTrialSet& trials, const DcfParams& params) {
  std::vector<double> tar, non;
  Split(trials, &tar, &non);
  return ComputeMinDcf(tar, non, params);
}

double ComputeAuc(const std::vector<double>& target, const std::vector<double>& nontarget) {
  CheckClasses(target, nontarget);
  std::vector<std::pair<double, bool>> all;
  all.reserve(target.size() + nontarget.size());
  for (double s : target) all.emplace_back(s, true);
  for (double s : nontarget) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (size_t i = 0; i < all.size();) {
    size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    // Ranks i+1 .. j share their average.
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg;
    i = j;
  }
  const double np = static_cast<double>(target.size());
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(nontarget.size()));
}

double ComputeAuc(const ScoredTrialSet& trials) {
  std::vector<double> tar, non;
  Split(trials, &tar, &non);
  return ComputeAuc(tar, non);
}

double Probit(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

MetricsReport Evaluate(const ScoredTrialSet& trials, const DcfParams& params) {
  std::vector<double> tar, non;
  Split(trials, &tar, &non);
  MetricsReport r;
  r.eer = ComputeEer(tar, non);
  r.min_dcf = ComputeMinDcf(tar, non, params);
  r.auc = ComputeAuc(tar, non);
  r.num_target = tar.size();
  r.num_nontarget = non.size();
  return r;
}

}  // namespace alignsv
