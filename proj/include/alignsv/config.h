// include/alignsv/config.h

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

#ifndef ALIGNSV_CONFIG_H_
#define ALIGNSV_CONFIG_H_

#include <string>
#include <vector>

#include "alignsv/corpus.h"
#include "alignsv/features.h"
#include "alignsv/metrics.h"
#include "alignsv/network.h"

namespace alignsv {

// Every tunable of an experiment. Text form is one "key = value" per line,
// '#' starts a comment, unknown keys are errors.
struct ExperimentConfig {
  ExperimentConfig() { train.erasing.probability = 0.5; }

  uint64_t seed = 0;
  SyntheticSpec corpus;
  MfccConfig mfcc;
  // Interpolation target for every utterance; 0 keeps the raw length.
  int frames = 50;

  std::string aligner = "hmm";
  HmmTrainOptions hmm{8, 10, 1e-3, 1e-3};
  GmmTrainOptions gmm{8, 20, 5, 1e-3, 0};

  NetworkConfig network;
  TrainOptions train;
  // Classifier held-out split: this session of every training speaker.
  int heldout_session = 9;
  bool bdk = false;

  int enroll_sessions = 3;
  std::string eval_partition = "eval";
  DcfParams dcf;

  // Throws ConfigError for unknown keys or unparsable values.
  void Set(const std::string& key, const std::string& value);
  void ParseText(const std::string& text, const std::string& source);
  void LoadFile(const std::string& path);
  // Fully resolved configuration in the same text form, keys sorted.
  std::string Dump() const;
  std::vector<std::string> Keys() const;
};

}  // namespace alignsv

#endif  // ALIGNSV_CONFIG_H_
