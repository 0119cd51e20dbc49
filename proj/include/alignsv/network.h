// include/alignsv/network.h

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

#ifndef ALIGNSV_NETWORK_H_
#define ALIGNSV_NETWORK_H_

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alignsv/common.h"
#include "alignsv/features.h"
#include "alignsv/gmm.h"
#include "alignsv/hmm.h"
#include "alignsv/layers.h"

namespace alignsv {

// A: CNN + average pooling + softmax head.
// B: alignment pooling on the raw features + softmax head.
// C: CNN + alignment pooling + softmax head.
// D: C's front-end and pooling followed by a dense back-end, trained on
//    verification scores.
enum class Arch { kA, kB, kC, kD };
enum class Pooling { kAverage, kHmm, kGmmMap };
enum class LossType { kCrossEntropy, kTriplet, kAauc };

std::string ToString(Arch a);
std::string ToString(Pooling p);
std::string ToString(LossType l);
Arch ParseArch(const std::string& s);
Pooling ParsePooling(const std::string& s);
LossType ParseLossType(const std::string& s);

struct NetworkConfig {
  Arch arch = Arch::kC;
  Pooling pooling = Pooling::kHmm;
  int input_dim = 60;
  // Output widths of the conv layers; empty for arch B.
  std::vector<int> channels = {32, 32, 32};
  int kernel = 3;
  std::vector<int> back_end = {512, 256};
  int num_classes = 0;
  // Q or C of the aligner, 1 for average pooling.
  int num_slots = 1;
  double tau = 10.0;
  double beta = 0.01;

  void Validate() const;
  int frame_dim() const { return channels.empty() ? input_dim : channels.back(); }
  int supervector_dim() const { return frame_dim() * num_slots; }
};

// One utterance ready for the network: features after interpolation and,
// unless pooling is average, its alignment to the aligner of `aligned_phrase`.
struct Utterance {
  std::string id;
  std::string speaker;
  std::string phrase;
  int session = 0;
  int label = -1;
  Matrix features;   // D0 x T
  Matrix alignment;  // T x K (one-hot for HMM, posteriors for GMM)
  std::string aligned_phrase;
};

// Per-phrase aligners of one kind.
struct AlignerSet {
  Pooling kind = Pooling::kAverage;
  std::map<std::string, PhraseHmm> hmms;
  std::map<std::string, PhraseGmm> gmms;

  int num_slots() const;
  int input_dim() const;
  // Fills alignment and aligned_phrase. UsageError when the phrase has no
  // aligner.
  void Align(Utterance* utt) const;
  void AlignAll(std::span<Utterance> utts) const;
};

struct Network {
  NetworkConfig config;
  std::vector<Conv1dLayer> front_end;
  DenseLayer classifier;             // A, B, C
  std::vector<DenseLayer> back_end;  // D
  std::map<std::string, RunningMean> running_means;  // gmm_map only

  void ZeroGrad();
  // Parameters that training updates for this architecture.
  std::vector<ParamSlot> TrainableSlots();
  long NumParameters();
};

// Fresh network. For GMM-MAP pooling the running means start from the GMM
// means when pooling sits directly on the features (arch B); after a CNN
// they are filled by the first training batch.
Network CreateNetwork(const NetworkConfig& config, const AlignerSet& aligners, Rng* rng);

// Arch D from a trained arch-C network: copies the front-end and running
// means, drops the classifier and adds a freshly initialized back-end.
Network MakeEndToEnd(const Network& pretrained, const std::vector<int>& back_end, Rng* rng);

// Front-end, pooling and flatten (plus back-end for arch D). Eval mode:
// running means are read, never written.
Vector Embed(const Network& net, const Utterance& utt);
Vector Logits(const Network& net, const Utterance& utt);

// Mean of the embeddings, length-normalized.
struct Embedding {
  std::string id;
  std::string speaker;
  std::string phrase;
  Vector values;
};
Vector Enroll(std::span<const Embedding> embeddings);
double ScoreTrial(const Vector& model, const Vector& test);

struct TrainOptions {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 1e-3;
  ErasingConfig erasing{0.0};
  uint64_t seed = 0;

  // End-to-end training.
  LossType loss = LossType::kAauc;
  double alpha = 10.0;
  double margin = 0.5;
  int speakers_per_batch = 0;  // 0: every speaker of the phrase
  int utts_per_speaker = 3;
  int max_positive = 0;        // <= 0: no cap
  int max_negative = 0;
  int batches_per_epoch = 0;   // 0: one per phrase

  // Teacher-student training; 0 gives one-hot teacher targets.
  double temperature = 1.0;

  std::function<void(const std::string&)> log;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> heldout_loss;
  std::vector<double> heldout_accuracy;
  // End-to-end monitoring on all held-out pairs, averaged over phrases.
  std::vector<double> heldout_aauc;
  std::vector<double> heldout_auc;
  std::vector<double> batch_auc;
  int skipped_anchors = 0;
  double first_batch_front_grad_norm = 0.0;
};

// Softmax-head training with cross-entropy (A, B, C). Labels must be set.
TrainReport TrainClassifier(Network* net, std::span<const Utterance> train,
                            std::span<const Utterance> heldout, const TrainOptions& opts);

// The teacher sees Random-Erased inputs and emits softmax(logits / T); the
// student learns from those targets on clean inputs.
TrainReport TrainBdk(const Network& teacher, Network* student,
                     std::span<const Utterance> train, std::span<const Utterance> heldout,
                     const TrainOptions& opts);

// Joint front-end and back-end training of an arch-D network on
// phrase-homogeneous batches with the triplet or aAUC loss.
TrainReport TrainEndToEnd(Network* net, std::span<const Utterance> train,
                          std::span<const Utterance> heldout, const TrainOptions& opts);

// Batch losses with gradients accumulated into the trainable parameters
// (callers zero them first). Targets are rows of class distributions.
double ClassifierLossAndGradients(Network* net, std::span<const Utterance* const> batch,
                                  std::span<const Vector> targets, bool update_running_mean);
struct E2eBatchStats {
  double loss = 0.0;
  double auc = 0.0;
  int skipped_anchors = 0;
};
E2eBatchStats EndToEndLossAndGradients(Network* net, std::span<const Utterance* const> batch,
                                       const TrainOptions& opts);

// "SVCK" | u32 version | config text | named f64 tensors | running means |
// u64 FNV-1a of everything before it.
void SaveCheckpoint(const std::string& path, const Network& net);
Network LoadCheckpoint(const std::string& path);
std::string NetworkConfigText(const NetworkConfig& config);

}  // namespace alignsv

#endif  // ALIGNSV_NETWORK_H_
