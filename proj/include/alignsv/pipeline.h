// include/alignsv/pipeline.h

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

#ifndef ALIGNSV_PIPELINE_H_
#define ALIGNSV_PIPELINE_H_

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "alignsv/config.h"
#include "alignsv/corpus.h"
#include "alignsv/metrics.h"
#include "alignsv/network.h"

namespace alignsv {

using LogFn = std::function<void(const std::string&)>;

// Features of every record, time-interpolated to `frames` (0 keeps length).
std::vector<Utterance> LoadUtterances(std::span<const UtteranceRecord* const> records,
                                      int frames);
std::vector<Utterance> LoadPartition(const CorpusManifest& manifest,
                                     const std::string& partition, int frames);

// Speaker labels in sorted speaker-id order; returns the class names.
std::vector<std::string> AssignLabels(std::span<Utterance> utts);

// One aligner per phrase, trained on the given (background) utterances.
AlignerSet TrainAligners(std::span<const Utterance> utts, const ExperimentConfig& cfg,
                         const LogFn& log = nullptr);
// <phrase>.svhm or <phrase>.svgm under dir; returns the written paths.
std::vector<std::string> WriteAligners(const AlignerSet& aligners, const std::string& dir,
                                       const ExperimentConfig& cfg);
AlignerSet ReadAligners(const std::string& dir);

// Trains the architecture named by cfg.network.arch. Arch D needs `init`
// (a trained arch-C network); cfg.bdk needs `teacher`.
Network TrainNetwork(const ExperimentConfig& cfg, const AlignerSet& aligners,
                     std::span<Utterance> bkg, std::span<const Utterance> dev,
                     const Network* init, const Network* teacher, TrainReport* report,
                     const LogFn& log = nullptr);

std::vector<Embedding> EmbedAll(const Network& net, std::span<const Utterance> utts);
ScoredTrialSet ScoreTrials(const TrialList& trials, std::span<const Embedding> embeddings);

// Text report in percent / raw units as "key = value" lines.
std::string FormatReport(const MetricsReport& report);

// Command-line front end; returns the process exit code.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace alignsv

#endif  // ALIGNSV_PIPELINE_H_
