// include/alignsv/corpus.h

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

#ifndef ALIGNSV_CORPUS_H_
#define ALIGNSV_CORPUS_H_

#include <string>
#include <vector>

#include "alignsv/common.h"
#include "alignsv/io.h"

namespace alignsv {

// Synthetic speaker x phrase corpus. Each phrase is a left-to-right sequence
// of `segments` centroids (centered over the segments). A speaker scales
// every dimension by a positive gain (spectral coloring) and adds an offset.
// An utterance walks the phrase with a random dwell per segment and adds a
// session offset plus white noise:
//   x_t = gain_s * c_{p,k(t)} + offset_s + session_u + noise * eps_t.
struct SyntheticSpec {
  int num_speakers = 20;
  int num_phrases = 5;
  int sessions = 9;
  int segments = 8;
  int dim = 60;
  int dwell_min = 4;
  int dwell_max = 8;
  double template_scale = 1.0;
  double speaker_offset = 0.1;
  // Gain is exp(coloring * N(0, 1)) per dimension.
  double coloring = 0.25;
  double noise = 0.6;
  // Session offset std as a multiple of `noise`.
  double session_noise = 0.25;
  // Channel subspace: rank and std of z_u as a multiple of `noise`.
  int channel_rank = 4;
  double channel_scale = 2.0;
  int dev_speakers = 4;
  int eval_speakers = 6;
  uint64_t seed = 0;

  void Validate() const;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string phrase_id;
  int session = 0;
  std::string partition;  // bkg, dev or eval
  std::string path;       // as written in the manifest
  std::string resolved_path;
};

struct CorpusManifest {
  std::vector<UtteranceRecord> records;

  std::vector<const UtteranceRecord*> Partition(const std::string& name) const;
  std::vector<std::string> Phrases() const;  // in first-appearance order
  std::vector<std::string> Speakers(const std::string& partition) const;
};

struct SyntheticUtterance {
  Matrix features;                    // dim x T
  std::vector<int> segment_starts;    // first frame of each segment
};

class SyntheticCorpus {
 public:
  explicit SyntheticCorpus(const SyntheticSpec& spec);

  const SyntheticSpec& spec() const { return spec_; }
  // Deterministic in (seed, ids): generation order does not matter.
  SyntheticUtterance Generate(int speaker, int phrase, int session) const;

  static std::string SpeakerId(int speaker);
  static std::string PhraseId(int phrase);
  static std::string UtteranceId(int speaker, int phrase, int session);
  std::string PartitionOf(int speaker) const;

  const Matrix& phrase_template(int phrase) const { return templates_[phrase]; }
  const Vector& speaker_gain(int speaker) const { return gains_[speaker]; }
  const Vector& speaker_offset(int speaker) const { return offsets_[speaker]; }

 private:
  SyntheticSpec spec_;
  std::vector<Matrix> templates_;  // dim x segments
  std::vector<Vector> gains_;
  std::vector<Vector> offsets_;
  Matrix channel_;  // dim x channel_rank, orthonormal columns
};

// Writes features/<utt>.svfm, manifest.txt and boundaries.txt under out_dir.
CorpusManifest GenerateCorpus(const SyntheticSpec& spec, const std::string& out_dir);

// One record per line: utterance_id speaker_id phrase_id session partition
// path. Relative paths are resolved against the manifest's directory.
void WriteManifest(const std::string& path, const CorpusManifest& manifest);

// Parses and validates eagerly: duplicate ids, missing files, bad
// partitions and speakers spanning partitions are all reported together.
CorpusManifest IngestManifest(const std::string& path);

struct EnrollmentModel {
  std::string model_id;
  std::string speaker_id;
  std::string phrase_id;
  std::vector<std::string> utterances;
};

struct TrialList {
  std::vector<EnrollmentModel> models;
  std::vector<TrialKey> trials;
  int skipped_models = 0;
};

// Impostor-correct protocol on one partition: one model per (speaker,
// phrase) from the first `enroll_sessions` sessions; targets are the same
// speaker's later sessions of that phrase, nontargets other speakers' later
// sessions of the same phrase. Models without test utterances are skipped.
TrialList BuildTrials(const CorpusManifest& manifest, const std::string& partition = "eval",
                      int enroll_sessions = 3);

// "<model_id> <speaker_id> <phrase_id> <utt> <utt> ..." per line.
void WriteEnrollmentFile(const std::string& path, const std::vector<EnrollmentModel>& models);
std::vector<EnrollmentModel> ReadEnrollmentFile(const std::string& path);

}  // namespace alignsv

#endif  // ALIGNSV_CORPUS_H_
