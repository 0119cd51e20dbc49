// src/network.cc

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

#include "alignsv/network.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "alignsv/io.h"
#include "alignsv/losses.h"
#include "alignsv/supervector.h"

namespace alignsv {

std::string ToString(Arch a) {
  switch (a) {
    case Arch::kA: return "A";
    case Arch::kB: return "B";
    case Arch::kC: return "C";
    case Arch::kD: return "D";
  }
  return "?";
}

std::string ToString(Pooling p) {
  switch (p) {
    case Pooling::kAverage: return "avg";
    case Pooling::kHmm: return "hmm";
    case Pooling::kGmmMap: return "gmm_map";
  }
  return "?";
}

std::string ToString(LossType l) {
  switch (l) {
    case LossType::kCrossEntropy: return "cross_entropy";
    case LossType::kTriplet: return "triplet";
    case LossType::kAauc: return "aauc";
  }
  return "?";
}

Arch ParseArch(const std::string& s) {
  if (s == "A") return Arch::kA;
  if (s == "B") return Arch::kB;
  if (s == "C") return Arch::kC;
  if (s == "D") return Arch::kD;
  throw ConfigError("unknown architecture '" + s + "' (expected A, B, C or D)");
}

Pooling ParsePooling(const std::string& s) {
  if (s == "avg") return Pooling::kAverage;
  if (s == "hmm") return Pooling::kHmm;
  if (s == "gmm_map" || s == "gmm") return Pooling::kGmmMap;
  throw ConfigError("unknown pooling '" + s + "' (expected avg, hmm or gmm_map)");
}

LossType ParseLossType(const std::string& s) {
  if (s == "cross_entropy") return LossType::kCrossEntropy;
  if (s == "triplet") return LossType::kTriplet;
  if (s == "aauc") return LossType::kAauc;
  throw ConfigError("unknown loss '" + s + "' (expected cross_entropy, triplet or aauc)");
}

void NetworkConfig::Validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel size must be odd");
  for (int c : channels)
    if (c < 1) throw ConfigError("conv channel widths must be positive");
  for (int w : back_end)
    if (w < 1) throw ConfigError("back-end widths must be positive");
  if (num_slots < 1) throw ConfigError("num_slots must be positive");
  if (tau < 0.0) throw ConfigError("tau must be non-negative");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must be in (0, 1]");
  switch (arch) {
    case Arch::kA:
      if (pooling != Pooling::kAverage) throw ConfigError("arch A uses average pooling");
      break;
    case Arch::kB:
      if (!channels.empty()) throw ConfigError("arch B has no front-end");
      [[fallthrough]];
    case Arch::kC:
    case Arch::kD:
      if (pooling == Pooling::kAverage)
        throw ConfigError("arch " + ToString(arch) + " needs hmm or gmm_map pooling");
      break;
  }
  if (arch == Arch::kD) {
    if (back_end.empty()) throw ConfigError("arch D needs a back-end");
  } else if (num_classes < 2) {
    throw ConfigError("classifier training needs at least 2 classes");
  }
  if (pooling == Pooling::kAverage && num_slots != 1)
    throw ConfigError("average pooling has a single slot");
}

int AlignerSet::num_slots() const {
  if (kind == Pooling::kHmm && !hmms.empty()) return hmms.begin()->second.num_states();
  if (kind == Pooling::kGmmMap && !gmms.empty()) return gmms.begin()->second.num_components();
  return 1;
}

int AlignerSet::input_dim() const {
  if (kind == Pooling::kHmm && !hmms.empty()) return hmms.begin()->second.dim();
  if (kind == Pooling::kGmmMap && !gmms.empty()) return gmms.begin()->second.dim();
  return 0;
}

void AlignerSet::Align(Utterance* utt) const {
  if (kind == Pooling::kAverage) {
    utt->alignment.resize(0, 0);
    utt->aligned_phrase = utt->phrase;
    return;
  }
  if (kind == Pooling::kHmm) {
    auto it = hmms.find(utt->phrase);
    if (it == hmms.end())
      throw UsageError("no HMM aligner for phrase " + utt->phrase + " (utterance " + utt->id + ")");
    const PhraseHmm& hmm = it->second;
    if (utt->features.cols() < hmm.num_states())
      throw InputError("utterance " + utt->id + " has " + std::to_string(utt->features.cols()) +
                       " frames, fewer than " + std::to_string(hmm.num_states()) + " states");
    utt->alignment = BuildAlignmentMatrix(ViterbiDecode(hmm, utt->features).states,
                                          hmm.num_states());
  } else {
    auto it = gmms.find(utt->phrase);
    if (it == gmms.end())
      throw UsageError("no GMM aligner for phrase " + utt->phrase + " (utterance " + utt->id + ")");
    utt->alignment = GmmPosteriors(it->second, utt->features);
  }
  utt->aligned_phrase = utt->phrase;
}

void AlignerSet::AlignAll(std::span<Utterance> utts) const {
  for (auto& u : utts) Align(&u);
}

void Network::ZeroGrad() {
  for (auto& l : front_end) l.params.ZeroGrad();
  if (classifier.params.weights.size() > 0) classifier.params.ZeroGrad();
  for (auto& l : back_end) l.params.ZeroGrad();
}

std::vector<ParamSlot> Network::TrainableSlots() {
  std::vector<ParamSlot> slots;
  if (config.arch != Arch::kB)
    for (auto& l : front_end) AppendSlots(&l.params, &slots);
  if (config.arch == Arch::kD) {
    for (auto& l : back_end) AppendSlots(&l.params, &slots);
  } else {
    AppendSlots(&classifier.params, &slots);
  }
  return slots;
}

long Network::NumParameters() {
  long n = 0;
  for (const auto& s : TrainableSlots()) n += static_cast<long>(s.value.size());
  return n;
}

namespace {

std::vector<DenseLayer> MakeBackEnd(int in, const std::vector<int>& widths, Rng* rng) {
  std::vector<DenseLayer> layers;
  for (int w : widths) {
    layers.emplace_back(in, w);
    InitGlorot(&layers.back().params, in, w, rng);
    in = w;
  }
  return layers;
}

}  // namespace

Network CreateNetwork(const NetworkConfig& config, const AlignerSet& aligners, Rng* rng) {
  Network net;
  net.config = config;
  if (config.pooling != aligners.kind)
    throw ConfigError("network pooling " + ToString(config.pooling) + " but aligners are " +
                      ToString(aligners.kind));
  net.config.num_slots = aligners.num_slots();
  if (config.pooling != Pooling::kAverage && aligners.input_dim() != config.input_dim)
    throw ConfigError("aligners expect " + std::to_string(aligners.input_dim()) +
                      "-dim features, network input is " + std::to_string(config.input_dim));
  net.config.Validate();

  int in = config.input_dim;
  for (int c : config.channels) {
    net.front_end.emplace_back(in, c, config.kernel);
    InitGlorot(&net.front_end.back().params, in * config.kernel, c * config.kernel, rng);
    in = c;
  }
  if (config.arch == Arch::kD) {
    net.back_end = MakeBackEnd(net.config.supervector_dim(), config.back_end, rng);
  } else {
    net.classifier = DenseLayer(net.config.supervector_dim(), config.num_classes);
    InitGlorot(&net.classifier.params, net.config.supervector_dim(), config.num_classes, rng);
  }
  if (config.pooling == Pooling::kGmmMap) {
    for (const auto& [phrase, gmm] : aligners.gmms) {
      net.running_means[phrase] =
          config.channels.empty()
              ? RunningMean::FromGmm(gmm, config.beta)
              : RunningMean::Uninitialized(net.config.frame_dim(), gmm.num_components(),
                                           config.beta);
    }
  }
  return net;
}

Network MakeEndToEnd(const Network& pretrained, const std::vector<int>& back_end, Rng* rng) {
  if (pretrained.config.arch != Arch::kC)
    throw ConfigError("arch D must start from an arch C checkpoint, got arch " +
                      ToString(pretrained.config.arch));
  Network net;
  net.config = pretrained.config;
  net.config.arch = Arch::kD;
  net.config.back_end = back_end;
  net.config.Validate();
  net.front_end = pretrained.front_end;
  net.running_means = pretrained.running_means;
  net.back_end = MakeBackEnd(net.config.supervector_dim(), back_end, rng);
  return net;
}

namespace {

struct FrontCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix top;
};

FrontCache RunFrontEnd(const Network& net, const Matrix& x) {
  FrontCache c;
  Matrix cur = x;
  const size_t n = net.front_end.size();
  for (size_t l = 0; l < n; ++l) {
    Matrix z = Conv1dForward(net.front_end[l], cur);
    c.inputs.push_back(std::move(cur));
    cur = l + 1 < n ? ReluForward(z) : z;
    c.pre.push_back(std::move(z));
  }
  c.top = std::move(cur);
  return c;
}

// Accumulates parameter gradients; the gradient wrt the features is dropped.
void FrontEndBackward(Network* net, const FrontCache& c, Matrix up) {
  for (size_t l = net->front_end.size(); l-- > 0;) {
    if (l + 1 < net->front_end.size()) up = ReluBackward(c.pre[l], up);
    Conv1dGrads g = Conv1dBackward(net->front_end[l], c.inputs[l], up);
    net->front_end[l].params.Accumulate(g.weights, g.bias);
    up = std::move(g.input);
  }
}

void CheckAlignment(const Network& net, const Utterance& u, const Matrix& top) {
  if (net.config.pooling == Pooling::kAverage) return;
  if (u.aligned_phrase != u.phrase)
    throw UsageError("utterance " + u.id + " (phrase " + u.phrase +
                     ") was aligned with the aligner of phrase " +
                     (u.aligned_phrase.empty() ? "<none>" : u.aligned_phrase));
  if (u.alignment.rows() != top.cols() || u.alignment.cols() != net.config.num_slots)
    throw ShapeError("utterance " + u.id + ": alignment is " +
                     std::to_string(u.alignment.rows()) + "x" +
                     std::to_string(u.alignment.cols()) + ", expected " +
                     std::to_string(top.cols()) + "x" + std::to_string(net.config.num_slots));
}

const Matrix& PriorMean(const Network& net, const std::string& phrase) {
  auto it = net.running_means.find(phrase);
  if (it == net.running_means.end() || !it->second.initialized)
    throw UsageError("no trained running mean for phrase " + phrase);
  return it->second.mean;
}

Matrix PoolSlices(const Network& net, const Utterance& u, const Matrix& top) {
  CheckAlignment(net, u, top);
  switch (net.config.pooling) {
    case Pooling::kAverage: return AveragePool(top);
    case Pooling::kHmm: return HmmPool(top, u.alignment);
    case Pooling::kGmmMap:
      return MapPool(top, u.alignment, PriorMean(net, u.phrase), net.config.tau);
  }
  return {};
}

Matrix PoolBackward(const Network& net, const Utterance& u, const Matrix& top,
                    const Vector& up_flat) {
  switch (net.config.pooling) {
    case Pooling::kAverage: return AveragePoolBackward(top, up_flat);
    case Pooling::kHmm:
      return HmmPoolBackward(top, u.alignment, UnflattenSupervector(up_flat, top.rows()));
    case Pooling::kGmmMap:
      return MapPoolBackward(top, u.alignment, PriorMean(net, u.phrase), net.config.tau,
                             UnflattenSupervector(up_flat, top.rows()));
  }
  return {};
}

struct BackCache {
  std::vector<Vector> inputs;
  std::vector<Vector> pre;
};

Vector RunBackEnd(const Network& net, const Vector& sv, BackCache* c) {
  Vector cur = sv;
  const size_t n = net.back_end.size();
  for (size_t l = 0; l < n; ++l) {
    Vector z = DenseForward(net.back_end[l], cur);
    if (c) c->inputs.push_back(cur);
    cur = l + 1 < n ? Vector(ReluForward(z)) : z;
    if (c) c->pre.push_back(std::move(z));
  }
  return cur;
}

Vector BackEndBackward(Network* net, const BackCache& c, Vector up) {
  for (size_t l = net->back_end.size(); l-- > 0;) {
    if (l + 1 < net->back_end.size()) up = ReluBackward(c.pre[l], up);
    DenseGrads g = DenseBackward(net->back_end[l], c.inputs[l], up);
    net->back_end[l].params.Accumulate(g.weights, g.bias);
    up = std::move(g.input);
  }
  return up;
}

Vector Supervector(const Network& net, const Utterance& u) {
  if (u.features.rows() != net.config.input_dim)
    throw ShapeError("utterance " + u.id + " has " + std::to_string(u.features.rows()) +
                     "-dim features, network expects " + std::to_string(net.config.input_dim));
  FrontCache c = RunFrontEnd(net, u.features);
  return FlattenSupervector(PoolSlices(net, u, c.top));
}

}  // namespace

Vector Embed(const Network& net, const Utterance& utt) {
  Vector sv = Supervector(net, utt);
  if (net.config.arch == Arch::kD) return RunBackEnd(net, sv, nullptr);
  return sv;
}

Vector Logits(const Network& net, const Utterance& utt) {
  if (net.config.arch == Arch::kD) throw UsageError("arch D has no classifier head");
  return DenseForward(net.classifier, Supervector(net, utt));
}

Vector Enroll(std::span<const Embedding> embeddings) {
  if (embeddings.empty()) throw InputError("enrollment needs at least one utterance");
  Vector sum = Vector::Zero(embeddings[0].values.size());
  for (const auto& e : embeddings) {
    if (e.phrase != embeddings[0].phrase)
      throw UsageError("enrollment mixes phrases " + embeddings[0].phrase + " and " + e.phrase);
    if (e.speaker != embeddings[0].speaker)
      throw UsageError("enrollment mixes speakers " + embeddings[0].speaker + " and " +
                       e.speaker);
    if (e.values.size() != sum.size())
      throw UsageError("enrollment embeddings differ in dimension");
    sum += e.values;
  }
  sum /= static_cast<double>(embeddings.size());
  const double norm = sum.norm();
  if (!(norm > 0.0)) throw DomainError("enrollment vector has zero norm");
  return sum / norm;
}

double ScoreTrial(const Vector& model, const Vector& test) {
  if (model.size() != test.size())
    throw UsageError("trial dimension mismatch: model " + std::to_string(model.size()) +
                     ", test " + std::to_string(test.size()));
  return CosineSimilarity(model, test);
}

double ClassifierLossAndGradients(Network* net, std::span<const Utterance* const> batch,
                                  std::span<const Vector> targets, bool update_running_mean) {
  if (net->config.arch == Arch::kD) throw UsageError("arch D has no classifier head");
  if (batch.size() != targets.size()) throw ShapeError("one target per batch item expected");
  if (batch.empty()) return 0.0;
  std::vector<FrontCache> caches;
  caches.reserve(batch.size());
  for (const Utterance* u : batch) {
    if (u->features.rows() != net->config.input_dim)
      throw ShapeError("utterance " + u->id + " has the wrong feature dimension");
    caches.push_back(RunFrontEnd(*net, u->features));
  }

  if (update_running_mean && net->config.pooling == Pooling::kGmmMap) {
    std::map<std::string, std::vector<PosteriorBatchItem>> by_phrase;
    for (size_t i = 0; i < batch.size(); ++i) {
      CheckAlignment(*net, *batch[i], caches[i].top);
      by_phrase[batch[i]->phrase].push_back({&caches[i].top, &batch[i]->alignment});
    }
    for (auto& [phrase, items] : by_phrase) {
      auto it = net->running_means.find(phrase);
      if (it == net->running_means.end())
        throw UsageError("no running mean for phrase " + phrase);
      UpdateRunningMean(&it->second, items);
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Utterance& u = *batch[i];
    Vector sv = FlattenSupervector(PoolSlices(*net, u, caches[i].top));
    Vector logits = DenseForward(net->classifier, sv);
    LossWithGrad ce = SoftCrossEntropy(logits, targets[i]);
    total += ce.loss;
    DenseGrads g = DenseBackward(net->classifier, sv, ce.grad * scale);
    net->classifier.params.Accumulate(g.weights, g.bias);
    if (!net->front_end.empty() && net->config.arch != Arch::kB)
      FrontEndBackward(net, caches[i], PoolBackward(*net, u, caches[i].top, g.input));
  }
  return total * scale;
}

E2eBatchStats EndToEndLossAndGradients(Network* net, std::span<const Utterance* const> batch,
                                       const TrainOptions& opts) {
  if (net->config.arch != Arch::kD) throw UsageError("end-to-end training needs arch D");
  const size_t n = batch.size();
  std::vector<FrontCache> fronts;
  std::vector<BackCache> backs(n);
  std::vector<Vector> emb;
  for (size_t i = 0; i < n; ++i) {
    if (batch[i]->phrase != batch[0]->phrase)
      throw UsageError("end-to-end batches must hold a single phrase");
    fronts.push_back(RunFrontEnd(*net, batch[i]->features));
    Vector sv = FlattenSupervector(PoolSlices(*net, *batch[i], fronts[i].top));
    emb.push_back(RunBackEnd(*net, sv, &backs[i]));
  }
  std::vector<MiningItem> items;
  for (size_t i = 0; i < n; ++i) items.push_back({&emb[i], batch[i]->speaker});
  Scorer cosine = [](const Vector& a, const Vector& b) { return CosineSimilarity(a, b); };

  E2eBatchStats stats;
  std::vector<Vector> grad(n, Vector::Zero(emb.empty() ? 0 : emb[0].size()));
  auto add_pair = [&](int a, int b, double g) {
    if (g == 0.0) return;
    CosineGrads cg = CosineSimilarityBackward(emb[a], emb[b], g);
    grad[a] += cg.a;
    grad[b] += cg.b;
  };

  PairBatch all = BuildPairBatch(items, cosine, 0, 0);
  stats.auc = ExactAuc(all);
  if (opts.loss == LossType::kAauc) {
    PairBatch pb = (opts.max_positive > 0 || opts.max_negative > 0)
                       ? BuildPairBatch(items, cosine, opts.max_positive, opts.max_negative)
                       : std::move(all);
    AaucResult r = Aauc(pb.positive, pb.negative, opts.alpha);
    stats.loss = 1.0 - r.value;
    for (size_t i = 0; i < pb.positive.size(); ++i)
      add_pair(pb.positive_pairs[i].first, pb.positive_pairs[i].second, -r.grad_positive[i]);
    for (size_t j = 0; j < pb.negative.size(); ++j)
      add_pair(pb.negative_pairs[j].first, pb.negative_pairs[j].second, -r.grad_negative[j]);
  } else if (opts.loss == LossType::kTriplet) {
    MiningResult mr = MineHard(items, cosine);
    stats.skipped_anchors = mr.skipped_anchors;
    if (!mr.triplets.empty()) {
      const double scale = 1.0 / static_cast<double>(mr.triplets.size());
      for (const auto& t : mr.triplets) {
        TripletLossResult tl = TripletLoss(t.positive_score, t.negative_score, opts.margin);
        stats.loss += tl.loss * scale;
        add_pair(t.anchor, t.positive, tl.grad_anchor_positive * scale);
        add_pair(t.anchor, t.negative, tl.grad_anchor_negative * scale);
      }
    }
  } else {
    throw ConfigError("end-to-end training uses the triplet or aauc loss");
  }

  for (size_t i = 0; i < n; ++i) {
    Vector up_sv = BackEndBackward(net, backs[i], grad[i]);
    FrontEndBackward(net, fronts[i], PoolBackward(*net, *batch[i], fronts[i].top, up_sv));
  }
  return stats;
}

namespace {

void Log(const TrainOptions& opts, const std::string& msg) {
  if (opts.log) opts.log(msg);
}

Vector OneHot(int label, int classes, const std::string& id) {
  if (label < 0 || label >= classes)
    throw InputError("utterance " + id + ": label " + std::to_string(label) + " outside [0, " +
                     std::to_string(classes) + ")");
  Vector v = Vector::Zero(classes);
  v(label) = 1.0;
  return v;
}

void HeldoutClassification(const Network& net, std::span<const Utterance> heldout,
                           TrainReport* report) {
  if (heldout.empty()) return;
  double loss = 0.0;
  int correct = 0;
  for (const auto& u : heldout) {
    Vector logits = Logits(net, u);
    loss += CrossEntropy(logits, u.label).loss;
    Eigen::Index best;
    logits.maxCoeff(&best);
    correct += best == u.label;
  }
  report->heldout_loss.push_back(loss / heldout.size());
  report->heldout_accuracy.push_back(static_cast<double>(correct) / heldout.size());
}

double FrontGradNorm(const Network& net) {
  if (net.front_end.empty()) return 0.0;
  const auto& p = net.front_end.front().params;
  return std::sqrt(p.weights_grad.squaredNorm() + p.bias_grad.squaredNorm());
}

using TargetFn = std::function<std::vector<Vector>(std::span<const Utterance* const>)>;

TrainReport RunClassifierTraining(Network* net, std::span<const Utterance> train,
                                  std::span<const Utterance> heldout, const TrainOptions& opts,
                                  bool erase_inputs, const TargetFn& targets_for) {
  if (train.empty()) throw InputError("no training utterances");
  if (opts.batch_size < 1) throw ConfigError("batch_size must be positive");
  std::set<int> labels;
  for (const auto& u : train) {
    OneHot(u.label, net->config.num_classes, u.id);
    labels.insert(u.label);
  }
  if (labels.size() < 2) throw InputError("classifier training needs at least 2 speakers");

  Rng order_rng = SubStream(opts.seed, "batch-order");
  Rng erase_rng = SubStream(opts.seed, "erasing");
  AdamState adam;
  adam.learning_rate = opts.learning_rate;
  std::vector<ParamSlot> slots = net->TrainableSlots();
  std::vector<size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);

  TrainReport report;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), order_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < perm.size(); start += opts.batch_size) {
      size_t end = std::min(perm.size(), start + opts.batch_size);
      std::vector<const Utterance*> batch;
      std::vector<Utterance> erased;
      erased.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        const Utterance& u = train[perm[i]];
        if (erase_inputs && opts.erasing.probability > 0.0) {
          erased.push_back(u);
          erased.back().features = RandomErasing(u.features, opts.erasing, &erase_rng);
          batch.push_back(&erased.back());
        } else {
          batch.push_back(&u);
        }
      }
      std::vector<Vector> targets = targets_for(batch);
      net->ZeroGrad();
      epoch_loss += ClassifierLossAndGradients(net, batch, targets, true);
      if (epoch == 0 && batches == 0) report.first_batch_front_grad_norm = FrontGradNorm(*net);
      AdamStep(slots, &adam);
      ++batches;
    }
    report.train_loss.push_back(epoch_loss / batches);
    HeldoutClassification(*net, heldout, &report);
    std::ostringstream msg;
    msg << "epoch " << epoch + 1 << " train_loss " << report.train_loss.back();
    if (!heldout.empty())
      msg << " heldout_loss " << report.heldout_loss.back() << " heldout_acc "
          << report.heldout_accuracy.back();
    Log(opts, msg.str());
  }
  return report;
}

}  // namespace

TrainReport TrainClassifier(Network* net, std::span<const Utterance> train,
                            std::span<const Utterance> heldout, const TrainOptions& opts) {
  const int classes = net->config.num_classes;
  return RunClassifierTraining(
      net, train, heldout, opts, true, [classes](std::span<const Utterance* const> batch) {
        std::vector<Vector> t;
        for (const Utterance* u : batch) t.push_back(OneHot(u->label, classes, u->id));
        return t;
      });
}

TrainReport TrainBdk(const Network& teacher, Network* student,
                     std::span<const Utterance> train, std::span<const Utterance> heldout,
                     const TrainOptions& opts) {
  if (teacher.config.arch == Arch::kD || student->config.arch == Arch::kD)
    throw ConfigError("teacher-student training needs classifier architectures");
  if (teacher.config.num_classes != student->config.num_classes)
    throw ConfigError("teacher has " + std::to_string(teacher.config.num_classes) +
                      " classes, student " + std::to_string(student->config.num_classes));
  if (opts.temperature < 0.0) throw ConfigError("temperature must be non-negative");
  auto teacher_rng = std::make_shared<Rng>(SubStream(opts.seed, "erasing-teacher"));
  const double temperature = opts.temperature;
  auto targets = [&teacher, teacher_rng, temperature,
                  &opts](std::span<const Utterance* const> batch) {
    std::vector<Vector> t;
    for (const Utterance* u : batch) {
      Utterance noisy = *u;
      noisy.features = RandomErasing(u->features, opts.erasing, teacher_rng.get());
      Vector logits = Logits(teacher, noisy);
      if (temperature == 0.0) {
        Eigen::Index best;
        logits.maxCoeff(&best);
        t.push_back(Vector::Unit(logits.size(), best));
      } else {
        t.push_back(Softmax(logits / temperature));
      }
    }
    return t;
  };
  return RunClassifierTraining(student, train, heldout, opts, false, targets);
}

namespace {

struct PhraseGroups {
  std::vector<std::string> phrases;
  // phrase -> speaker -> utterance indices, both in sorted order.
  std::map<std::string, std::map<std::string, std::vector<int>>> index;
};

PhraseGroups GroupByPhrase(std::span<const Utterance> utts) {
  PhraseGroups g;
  for (size_t i = 0; i < utts.size(); ++i)
    g.index[utts[i].phrase][utts[i].speaker].push_back(static_cast<int>(i));
  for (const auto& [phrase, speakers] : g.index) g.phrases.push_back(phrase);
  return g;
}

void HeldoutPairs(const Network& net, std::span<const Utterance> heldout, double alpha,
                  TrainReport* report) {
  if (heldout.empty()) return;
  PhraseGroups groups = GroupByPhrase(heldout);
  Scorer cosine = [](const Vector& a, const Vector& b) { return CosineSimilarity(a, b); };
  double aauc = 0.0, auc = 0.0;
  int used = 0;
  for (const auto& phrase : groups.phrases) {
    std::vector<Vector> emb;
    std::vector<std::string> speakers;
    for (const auto& [spk, idx] : groups.index[phrase])
      for (int i : idx) {
        emb.push_back(Embed(net, heldout[i]));
        speakers.push_back(spk);
      }
    std::vector<MiningItem> items;
    for (size_t i = 0; i < emb.size(); ++i) items.push_back({&emb[i], speakers[i]});
    PairBatch pb;
    try {
      pb = BuildPairBatch(items, cosine, 0, 0);
    } catch (const InputError&) {
      continue;
    }
    aauc += Aauc(pb.positive, pb.negative, alpha).value;
    auc += ExactAuc(pb);
    ++used;
  }
  if (used == 0) return;
  report->heldout_aauc.push_back(aauc / used);
  report->heldout_auc.push_back(auc / used);
}

}  // namespace

TrainReport TrainEndToEnd(Network* net, std::span<const Utterance> train,
                          std::span<const Utterance> heldout, const TrainOptions& opts) {
  if (net->config.arch != Arch::kD) throw UsageError("end-to-end training needs arch D");
  if (opts.utts_per_speaker < 2) throw ConfigError("utts_per_speaker must be at least 2");
  PhraseGroups groups = GroupByPhrase(train);
  if (groups.phrases.empty()) throw InputError("no training utterances");

  Rng order_rng = SubStream(opts.seed, "batch-order");
  Rng erase_rng = SubStream(opts.seed, "erasing");
  AdamState adam;
  adam.learning_rate = opts.learning_rate;
  std::vector<ParamSlot> slots = net->TrainableSlots();
  const int per_epoch =
      opts.batches_per_epoch > 0 ? opts.batches_per_epoch : static_cast<int>(groups.phrases.size());

  TrainReport report;
  HeldoutPairs(*net, heldout, opts.alpha, &report);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<std::string> phrase_order = groups.phrases;
    std::shuffle(phrase_order.begin(), phrase_order.end(), order_rng);
    double loss = 0.0, auc = 0.0;
    int done = 0;
    for (int b = 0; b < per_epoch; ++b) {
      const std::string& phrase = phrase_order[b % phrase_order.size()];
      std::vector<std::vector<int>> pools;
      for (const auto& [spk, idx] : groups.index[phrase])
        if (idx.size() >= 2) pools.push_back(idx);
      if (pools.size() < 2) continue;
      std::shuffle(pools.begin(), pools.end(), order_rng);
      if (opts.speakers_per_batch > 1 && static_cast<int>(pools.size()) > opts.speakers_per_batch)
        pools.resize(opts.speakers_per_batch);
      std::vector<const Utterance*> batch;
      std::vector<Utterance> erased;
      erased.reserve(pools.size() * opts.utts_per_speaker);
      for (auto& idx : pools) {
        std::shuffle(idx.begin(), idx.end(), order_rng);
        const size_t take = std::min<size_t>(idx.size(), opts.utts_per_speaker);
        for (size_t k = 0; k < take; ++k) {
          const Utterance& u = train[idx[k]];
          if (opts.erasing.probability > 0.0) {
            erased.push_back(u);
            erased.back().features = RandomErasing(u.features, opts.erasing, &erase_rng);
            batch.push_back(&erased.back());
          } else {
            batch.push_back(&u);
          }
        }
      }
      net->ZeroGrad();
      E2eBatchStats s = EndToEndLossAndGradients(net, batch, opts);
      if (epoch == 0 && done == 0) report.first_batch_front_grad_norm = FrontGradNorm(*net);
      AdamStep(slots, &adam);
      loss += s.loss;
      auc += s.auc;
      report.skipped_anchors += s.skipped_anchors;
      ++done;
    }
    if (done == 0) throw InputError("no phrase has two speakers with two utterances each");
    report.train_loss.push_back(loss / done);
    report.batch_auc.push_back(auc / done);
    HeldoutPairs(*net, heldout, opts.alpha, &report);
    std::ostringstream msg;
    msg << "epoch " << epoch + 1 << " " << ToString(opts.loss) << " " << report.train_loss.back()
        << " batch_auc " << report.batch_auc.back();
    if (!report.heldout_auc.empty())
      msg << " heldout_aauc " << report.heldout_aauc.back() << " heldout_auc "
          << report.heldout_auc.back();
    Log(opts, msg.str());
  }
  if (report.skipped_anchors > 0)
    Log(opts, "skipped anchors without positive or negative: " +
                  std::to_string(report.skipped_anchors));
  return report;
}

std::string NetworkConfigText(const NetworkConfig& c) {
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  std::ostringstream os;
  os << "arch = " << ToString(c.arch) << "\n"
     << "pooling = " << ToString(c.pooling) << "\n"
     << "input_dim = " << c.input_dim << "\n"
     << "channels = " << list(c.channels) << "\n"
     << "kernel = " << c.kernel << "\n"
     << "back_end = " << list(c.back_end) << "\n"
     << "num_classes = " << c.num_classes << "\n"
     << "num_slots = " << c.num_slots << "\n"
     << "tau = " << FormatDouble(c.tau) << "\n"
     << "beta = " << FormatDouble(c.beta) << "\n";
  return os.str();
}

namespace {

constexpr uint32_t kCheckpointVersion = 1;

std::vector<int> ParseIntList(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

NetworkConfig ParseNetworkConfigText(const std::string& text) {
  NetworkConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (k == "arch") c.arch = ParseArch(v);
    else if (k == "pooling") c.pooling = ParsePooling(v);
    else if (k == "input_dim") c.input_dim = std::stoi(v);
    else if (k == "channels") c.channels = ParseIntList(v);
    else if (k == "kernel") c.kernel = std::stoi(v);
    else if (k == "back_end") c.back_end = ParseIntList(v);
    else if (k == "num_classes") c.num_classes = std::stoi(v);
    else if (k == "num_slots") c.num_slots = std::stoi(v);
    else if (k == "tau") c.tau = std::stod(v);
    else if (k == "beta") c.beta = std::stod(v);
    else throw ConfigError("checkpoint config has unknown key " + k);
  }
  return c;
}

void PutTensor(ByteWriter* w, const std::string& name, const double* data, size_t rows,
               size_t cols) {
  w->String(name);
  w->U32(static_cast<uint32_t>(rows));
  w->U32(static_cast<uint32_t>(cols));
  w->F64Array(data, rows * cols);
}

void PutLayer(ByteWriter* w, const std::string& name, const LayerParams& p) {
  PutTensor(w, name + ".weights", p.weights.data(), p.weights.rows(), p.weights.cols());
  PutTensor(w, name + ".bias", p.bias.data(), p.bias.size(), 1);
}

void GetTensor(ByteReader* r, const std::string& name, double* data, size_t rows, size_t cols) {
  std::string got = r->String();
  if (got != name) r->Fail("expected tensor " + name + ", found " + got);
  size_t gr = r->U32(), gc = r->U32();
  if (gr != rows || gc != cols)
    r->Fail("tensor " + name + " is " + std::to_string(gr) + "x" + std::to_string(gc) +
            ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  r->F64Array(data, rows * cols);
}

void GetLayer(ByteReader* r, const std::string& name, LayerParams* p) {
  GetTensor(r, name + ".weights", p->weights.data(), p->weights.rows(), p->weights.cols());
  GetTensor(r, name + ".bias", p->bias.data(), p->bias.size(), 1);
}

}  // namespace

void SaveCheckpoint(const std::string& path, const Network& net) {
  ByteWriter w;
  w.Bytes("SVCK");
  w.U32(kCheckpointVersion);
  w.String(NetworkConfigText(net.config));
  for (size_t l = 0; l < net.front_end.size(); ++l)
    PutLayer(&w, "conv" + std::to_string(l), net.front_end[l].params);
  if (net.config.arch == Arch::kD) {
    for (size_t l = 0; l < net.back_end.size(); ++l)
      PutLayer(&w, "backend" + std::to_string(l), net.back_end[l].params);
  } else {
    PutLayer(&w, "classifier", net.classifier.params);
  }
  w.U32(static_cast<uint32_t>(net.running_means.size()));
  for (const auto& [phrase, rm] : net.running_means) {
    w.String(phrase);
    w.U32(static_cast<uint32_t>(rm.mean.rows()));
    w.U32(static_cast<uint32_t>(rm.mean.cols()));
    w.F64(rm.beta);
    w.U64(static_cast<uint64_t>(rm.batches));
    w.U32(rm.initialized ? 1 : 0);
    w.F64Array(rm.mean.data(), rm.mean.size());
  }
  ByteWriter tail;
  tail.U64(Fnv1a64(w.buffer()));
  WriteFileAtomic(path, w.buffer() + tail.buffer());
}

Network LoadCheckpoint(const std::string& path) {
  std::string bytes = ReadFileBytes(path);
  if (bytes.size() < 12) throw IoError(path + ": not a checkpoint (too short)");
  const std::string body = bytes.substr(0, bytes.size() - 8);
  ByteReader tail(bytes.substr(bytes.size() - 8), path);
  if (tail.U64() != Fnv1a64(body)) throw IoError(path + ": checkpoint checksum mismatch");

  ByteReader r(body, path);
  r.ExpectMagic("SVCK");
  if (r.U32() != kCheckpointVersion) r.Fail("unsupported checkpoint version");
  Network net;
  net.config = ParseNetworkConfigText(r.String());
  net.config.Validate();
  const NetworkConfig& c = net.config;
  int in = c.input_dim;
  for (size_t l = 0; l < c.channels.size(); ++l) {
    net.front_end.emplace_back(in, c.channels[l], c.kernel);
    GetLayer(&r, "conv" + std::to_string(l), &net.front_end.back().params);
    in = c.channels[l];
  }
  if (c.arch == Arch::kD) {
    int d = c.supervector_dim();
    for (size_t l = 0; l < c.back_end.size(); ++l) {
      net.back_end.emplace_back(d, c.back_end[l]);
      GetLayer(&r, "backend" + std::to_string(l), &net.back_end.back().params);
      d = c.back_end[l];
    }
  } else {
    net.classifier = DenseLayer(c.supervector_dim(), c.num_classes);
    GetLayer(&r, "classifier", &net.classifier.params);
  }
  uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string phrase = r.String();
    RunningMean rm;
    uint32_t rows = r.U32(), cols = r.U32();
    if (static_cast<int>(rows) != c.frame_dim() || static_cast<int>(cols) != c.num_slots)
      r.Fail("running mean of phrase " + phrase + " has the wrong shape");
    rm.beta = r.F64();
    rm.batches = static_cast<long>(r.U64());
    rm.initialized = r.U32() != 0;
    rm.mean.resize(rows, cols);
    r.F64Array(rm.mean.data(), rm.mean.size());
    net.running_means[phrase] = std::move(rm);
  }
  if (!r.AtEnd()) r.Fail("trailing bytes");
  return net;
}

}  // namespace alignsv
