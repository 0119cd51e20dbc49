// include/alignsv/metrics.h

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

#ifndef ALIGNSV_METRICS_H_
#define ALIGNSV_METRICS_H_

#include <string>
#include <vector>

#include "alignsv/common.h"

namespace alignsv {

struct ScoredTrial {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  bool target = false;
};

using ScoredTrialSet = std::vector<ScoredTrial>;

// A trial is accepted when score >= threshold.
struct DetPoint {
  double threshold;
  double p_fa;
  double p_miss;
};

// One point per distinct score (threshold at that score) plus the reject-all
// point at +inf, ordered by increasing threshold: p_fa falls from 1 and
// p_miss rises to 1.
using DetCurve = std::vector<DetPoint>;

DetCurve DetPoints(const ScoredTrialSet& trials);
DetCurve DetPoints(const std::vector<double>& target, const std::vector<double>& nontarget);

// True when p_fa is non-increasing and p_miss non-decreasing.
bool IsMonotoneDet(const DetCurve& curve);

// Equal error rate where the convex hull of the operating points crosses
// p_miss = p_fa, linearly interpolated along the hull.
double ComputeEer(const ScoredTrialSet& trials);
double ComputeEer(const std::vector<double>& target, const std::vector<double>& nontarget);

struct DcfParams {
  double p_target = 0.001;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

// Normalized cost of one operating point.
double NormalizedDcf(double p_miss, double p_fa, const DcfParams& params);

double ComputeMinDcf(const ScoredTrialSet& trials, const DcfParams& params = {});
double ComputeMinDcf(const std::vector<double>& target, const std::vector<double>& nontarget,
                     const DcfParams& params = {});

// Mann-Whitney statistic from average ranks; ties count one half.
double ComputeAuc(const ScoredTrialSet& trials);
double ComputeAuc(const std::vector<double>& target, const std::vector<double>& nontarget);

// Standard-normal deviate of p (the DET axis warping); +-inf at 0 and 1.
double Probit(double p);

struct MetricsReport {
  double eer = 0.0;
  double min_dcf = 0.0;
  double auc = 0.0;
  size_t num_target = 0;
  size_t num_nontarget = 0;
};

MetricsReport Evaluate(const ScoredTrialSet& trials, const DcfParams& params = {});

}  // namespace alignsv

#endif  // ALIGNSV_METRICS_H_
