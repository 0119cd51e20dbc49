// src/pipeline.cc

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

#include "alignsv/pipeline.h"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "alignsv/features.h"
#include "alignsv/io.h"

namespace alignsv {

namespace fs = std::filesystem;

std::vector<Utterance> LoadUtterances(std::span<const UtteranceRecord* const> records,
                                      int frames) {
  std::vector<Utterance> out;
  out.reserve(records.size());
  for (const UtteranceRecord* r : records) {
    Utterance u;
    u.id = r->utterance_id;
    u.speaker = r->speaker_id;
    u.phrase = r->phrase_id;
    u.session = r->session;
    u.features = ReadFeatureFile(r->resolved_path);
    if (frames > 0 && u.features.cols() != frames) {
      try {
        u.features = InterpolateTime(u.features, frames);
      } catch (const InputError& e) {
        throw InputError("utterance " + u.id + ": " + e.what());
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> LoadPartition(const CorpusManifest& manifest,
                                     const std::string& partition, int frames) {
  auto records = manifest.Partition(partition);
  if (records.empty()) throw InputError("manifest has no '" + partition + "' utterances");
  return LoadUtterances(records, frames);
}

std::vector<std::string> AssignLabels(std::span<Utterance> utts) {
  std::set<std::string> speakers;
  for (const auto& u : utts) speakers.insert(u.speaker);
  std::vector<std::string> names(speakers.begin(), speakers.end());
  for (auto& u : utts)
    u.label = static_cast<int>(std::lower_bound(names.begin(), names.end(), u.speaker) -
                               names.begin());
  return names;
}

AlignerSet TrainAligners(std::span<const Utterance> utts, const ExperimentConfig& cfg,
                         const LogFn& log) {
  std::map<std::string, std::vector<NamedFeatures>> by_phrase;
  for (const auto& u : utts) by_phrase[u.phrase].push_back({u.id, u.features});
  if (by_phrase.empty()) throw InputError("no utterances to train aligners on");
  AlignerSet set;
  set.kind = cfg.aligner == "gmm" ? Pooling::kGmmMap : Pooling::kHmm;
  for (const auto& [phrase, feats] : by_phrase) {
    std::ostringstream msg;
    if (set.kind == Pooling::kHmm) {
      HmmTrainResult r = TrainHmm(phrase, feats, cfg.hmm);
      msg << "hmm " << phrase << ": " << r.log_likelihoods.size() << " passes, loglik "
          << r.log_likelihoods.back() << (r.converged ? ", converged" : "");
      set.hmms[phrase] = std::move(r.hmm);
    } else {
      GmmTrainOptions opts = cfg.gmm;
      opts.seed = cfg.seed;
      GmmTrainResult r = TrainGmm(phrase, feats, opts);
      msg << "gmm " << phrase << ": loglik " << r.log_likelihoods.back();
      set.gmms[phrase] = std::move(r.gmm);
    }
    if (log) log(msg.str());
  }
  return set;
}

std::vector<std::string> WriteAligners(const AlignerSet& aligners, const std::string& dir,
                                       const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (const auto& [phrase, hmm] : aligners.hmms) {
    paths.push_back((fs::path(dir) / (phrase + ".svhm")).string());
    WriteHmmFile(paths.back(), hmm);
  }
  for (const auto& [phrase, gmm] : aligners.gmms) {
    GmmModelFile f;
    f.gmm = gmm;
    f.running_mean = RunningMean::FromGmm(gmm, cfg.network.beta).mean;
    f.tau = cfg.network.tau;
    f.beta = cfg.network.beta;
    paths.push_back((fs::path(dir) / (phrase + ".svgm")).string());
    WriteGmmFile(paths.back(), f);
  }
  return paths;
}

AlignerSet ReadAligners(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("aligner directory " + dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".svhm" || e.path().extension() == ".svgm")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  AlignerSet set;
  for (const auto& p : files) {
    if (p.extension() == ".svhm") {
      PhraseHmm hmm = ReadHmmFile(p.string());
      set.hmms[hmm.phrase_id] = std::move(hmm);
    } else {
      GmmModelFile f = ReadGmmFile(p.string());
      set.gmms[f.gmm.phrase_id] = std::move(f.gmm);
    }
  }
  if (set.hmms.empty() == set.gmms.empty())
    throw UsageError("aligner directory " + dir +
                     (set.hmms.empty() ? " holds no aligner models" : " mixes HMM and GMM models"));
  set.kind = set.hmms.empty() ? Pooling::kGmmMap : Pooling::kHmm;
  return set;
}

Network TrainNetwork(const ExperimentConfig& cfg, const AlignerSet& aligners,
                     std::span<Utterance> bkg, std::span<const Utterance> dev,
                     const Network* init, const Network* teacher, TrainReport* report,
                     const LogFn& log) {
  if (bkg.empty()) throw InputError("no training utterances");
  TrainOptions opts = cfg.train;
  opts.seed = cfg.seed;
  opts.log = log;
  Rng init_rng = SubStream(cfg.seed, "init");
  TrainReport local;
  if (!report) report = &local;

  NetworkConfig nc = cfg.network;
  nc.input_dim = static_cast<int>(bkg[0].features.rows());
  if (nc.arch == Arch::kD) {
    if (!init) throw ConfigError("arch D needs a pretrained arch C checkpoint (--init)");
    if (opts.loss == LossType::kCrossEntropy)
      throw ConfigError("arch D trains with train.loss = triplet or aauc");
    if (init->config.pooling != aligners.kind)
      throw ConfigError("pretrained network pools with " + ToString(init->config.pooling) +
                        " but aligners are " + ToString(aligners.kind));
    Network net = MakeEndToEnd(*init, nc.back_end, &init_rng);
    *report = TrainEndToEnd(&net, bkg, dev, opts);
    return net;
  }

  std::vector<std::string> classes = AssignLabels(bkg);
  nc.num_classes = static_cast<int>(classes.size());
  AlignerSet avg;
  const AlignerSet* used = &aligners;
  if (nc.arch == Arch::kA) {
    nc.pooling = Pooling::kAverage;
    used = &avg;
  } else {
    nc.pooling = aligners.kind;
    if (nc.arch == Arch::kB) nc.channels.clear();
  }
  std::vector<Utterance> train, heldout;
  for (const auto& u : bkg) (u.session == cfg.heldout_session ? heldout : train).push_back(u);
  Network net = CreateNetwork(nc, *used, &init_rng);
  if (cfg.bdk) {
    if (!teacher) throw ConfigError("bdk training needs a teacher checkpoint (--teacher)");
    *report = TrainBdk(*teacher, &net, train, heldout, opts);
  } else {
    *report = TrainClassifier(&net, train, heldout, opts);
  }
  return net;
}

std::vector<Embedding> EmbedAll(const Network& net, std::span<const Utterance> utts) {
  std::vector<Embedding> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back({u.id, u.speaker, u.phrase, Embed(net, u)});
  return out;
}

ScoredTrialSet ScoreTrials(const TrialList& trials, std::span<const Embedding> embeddings) {
  std::map<std::string, const Embedding*> by_id;
  for (const auto& e : embeddings) by_id[e.id] = &e;
  auto find = [&](const std::string& id) -> const Embedding& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw UsageError("no embedding for utterance " + id);
    return *it->second;
  };
  std::map<std::string, Vector> models;
  for (const auto& m : trials.models) {
    std::vector<Embedding> enroll;
    for (const auto& u : m.utterances) enroll.push_back(find(u));
    models[m.model_id] = Enroll(enroll);
  }
  ScoredTrialSet out;
  out.reserve(trials.trials.size());
  for (const auto& t : trials.trials) {
    auto it = models.find(t.enroll_id);
    if (it == models.end()) throw UsageError("trial references unknown model " + t.enroll_id);
    out.push_back({t.enroll_id, t.test_id, ScoreTrial(it->second, find(t.test_id).values),
                   t.target});
  }
  return out;
}

std::string FormatReport(const MetricsReport& r) {
  std::ostringstream os;
  os << "eer_percent = " << FormatDouble(100.0 * r.eer) << "\n"
     << "dcf10 = " << FormatDouble(r.min_dcf) << "\n"
     << "auc_percent = " << FormatDouble(100.0 * r.auc) << "\n"
     << "num_target = " << r.num_target << "\n"
     << "num_nontarget = " << r.num_nontarget << "\n";
  return os.str();
}

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::vector<std::string> sets;
};

void AddCommon(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--config", f->config_path, "key = value config file");
  cmd->add_option("--seed", f->seed, "master random seed");
  cmd->add_option("--set", f->sets, "override one config key (key=value)");
}

ExperimentConfig Resolve(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg.LoadFile(f.config_path);
  for (const auto& kv : f.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
    cfg.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  return cfg;
}

void LogConfig(const ExperimentConfig& cfg, const std::string& cmd, std::ostream& err) {
  err << "# " << cmd << " resolved config\n";
  std::istringstream is(cfg.Dump());
  std::string line;
  while (std::getline(is, line)) err << "#   " << line << "\n";
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phrase-aligned supervector speaker verification"};
  app.require_subcommand(1);
  LogFn log = [&err](const std::string& m) { err << m << "\n"; };

  CommonFlags synth_f, feat_f, align_f, train_f, embed_f, score_f, eval_f;
  std::string out_path, manifest, aligners_dir, wav_list, type, arch, init_path, teacher_path,
      checkpoint, partition, embeddings, scores, key;
  std::optional<int> speakers, phrases;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  AddCommon(synth, &synth_f);
  synth->add_option("--speakers", speakers);
  synth->add_option("--phrases", phrases);
  synth->add_option("--out", out_path, "output directory")->required();

  CLI::App* feats = app.add_subcommand("features", "MFCC features from WAV files");
  AddCommon(feats, &feat_f);
  feats->add_option("--wav-list", wav_list, "lines of '<utterance_id> <wav path>'")->required();
  feats->add_option("--out", out_path, "output directory")->required();

  CLI::App* talign = app.add_subcommand("train-aligner", "per-phrase HMM or GMM on bkg");
  AddCommon(talign, &align_f);
  talign->add_option("--manifest", manifest)->required();
  talign->add_option("--type", type, "hmm or gmm");
  talign->add_option("--out", out_path, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a network");
  AddCommon(train, &train_f);
  train->add_option("--manifest", manifest)->required();
  train->add_option("--aligners", aligners_dir);
  train->add_option("--arch", arch, "A, B, C or D");
  train->add_option("--init", init_path, "arch C checkpoint for arch D");
  train->add_option("--teacher", teacher_path, "teacher checkpoint for bdk");
  train->add_option("--out", out_path, "checkpoint path")->required();

  CLI::App* embed = app.add_subcommand("embed", "extract embeddings");
  AddCommon(embed, &embed_f);
  embed->add_option("--checkpoint", checkpoint)->required();
  embed->add_option("--manifest", manifest)->required();
  embed->add_option("--aligners", aligners_dir);
  embed->add_option("--partition", partition);
  embed->add_option("--out", out_path, "embedding file")->required();

  CLI::App* score = app.add_subcommand("score", "build trials and score them");
  AddCommon(score, &score_f);
  score->add_option("--embeddings", embeddings)->required();
  score->add_option("--manifest", manifest)->required();
  score->add_option("--partition", partition);
  score->add_option("--out", out_path, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "metrics and DET data");
  AddCommon(eval, &eval_f);
  eval->add_option("--scores", scores)->required();
  eval->add_option("--key", key)->required();
  eval->add_option("--out", out_path, "output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*synth) {
      ExperimentConfig cfg = Resolve(synth_f);
      if (speakers) cfg.Set("corpus.speakers", std::to_string(*speakers));
      if (phrases) cfg.Set("corpus.phrases", std::to_string(*phrases));
      LogConfig(cfg, "synth", err);
      SyntheticSpec spec = cfg.corpus;
      spec.seed = cfg.seed;
      CorpusManifest m = GenerateCorpus(spec, out_path);
      out << "wrote " << m.records.size() << " utterances to " << Join(out_path, "manifest.txt")
          << "\n";
    } else if (*feats) {
      ExperimentConfig cfg = Resolve(feat_f);
      LogConfig(cfg, "features", err);
      EnsureDir(out_path);
      std::ifstream in(wav_list);
      if (!in) throw IoError("cannot open " + wav_list);
      std::string line;
      int n = 0;
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string id, wav;
        if (!(ls >> id)) continue;
        if (!(ls >> wav)) throw InputError(wav_list + ": no path for " + id);
        Matrix f;
        try {
          f = ExtractFeatures(ReadWav(wav), cfg.mfcc);
        } catch (const InputError& e) {
          throw InputError(id + ": " + e.what());
        }
        WriteFeatureFile(Join(out_path, id + ".svfm"), f);
        ++n;
      }
      out << "wrote " << n << " feature files to " << out_path << "\n";
    } else if (*talign) {
      ExperimentConfig cfg = Resolve(align_f);
      if (!type.empty()) cfg.Set("aligner", type);
      LogConfig(cfg, "train-aligner", err);
      CorpusManifest m = IngestManifest(manifest);
      std::vector<Utterance> bkg = LoadPartition(m, "bkg", cfg.frames);
      AlignerSet set = TrainAligners(bkg, cfg, log);
      auto paths = WriteAligners(set, out_path, cfg);
      out << "wrote " << paths.size() << " aligner models to " << out_path << "\n";
    } else if (*train) {
      ExperimentConfig cfg = Resolve(train_f);
      if (!arch.empty()) cfg.Set("arch", arch);
      LogConfig(cfg, "train", err);
      std::optional<Network> init, teacher;
      if (cfg.network.arch == Arch::kD) {
        if (init_path.empty())
          throw ConfigError("arch D needs a pretrained arch C checkpoint (--init)");
        init = LoadCheckpoint(init_path);
      }
      if (cfg.bdk) {
        if (teacher_path.empty()) throw ConfigError("bdk needs --teacher");
        teacher = LoadCheckpoint(teacher_path);
      }
      CorpusManifest m = IngestManifest(manifest);
      std::vector<Utterance> bkg = LoadPartition(m, "bkg", cfg.frames);
      // Held-out pairs for end-to-end monitoring come from the dev speakers.
      std::vector<Utterance> dev;
      if (cfg.network.arch == Arch::kD && !m.Partition("dev").empty())
        dev = LoadPartition(m, "dev", cfg.frames);
      AlignerSet aligners;
      if (cfg.network.arch != Arch::kA) {
        if (aligners_dir.empty()) throw ConfigError("arch " + ToString(cfg.network.arch) +
                                                    " needs --aligners");
        aligners = ReadAligners(aligners_dir);
        aligners.AlignAll(bkg);
        aligners.AlignAll(dev);
      }
      TrainReport report;
      Network net = TrainNetwork(cfg, aligners, bkg, dev, init ? &*init : nullptr,
                                 teacher ? &*teacher : nullptr, &report, log);
      SaveCheckpoint(out_path, net);
      out << "trained arch " << ToString(net.config.arch) << " (" << ToString(net.config.pooling)
          << ", " << net.NumParameters() << " parameters), final loss "
          << FormatDouble(report.train_loss.empty() ? 0.0 : report.train_loss.back())
          << ", checkpoint " << out_path << "\n";
    } else if (*embed) {
      ExperimentConfig cfg = Resolve(embed_f);
      if (partition.empty()) partition = cfg.eval_partition;
      LogConfig(cfg, "embed", err);
      Network net = LoadCheckpoint(checkpoint);
      CorpusManifest m = IngestManifest(manifest);
      std::vector<Utterance> utts = LoadPartition(m, partition, cfg.frames);
      if (net.config.pooling != Pooling::kAverage) {
        if (aligners_dir.empty()) throw ConfigError("this checkpoint needs --aligners");
        AlignerSet aligners = ReadAligners(aligners_dir);
        if (aligners.kind != net.config.pooling)
          throw ConfigError("checkpoint pools with " + ToString(net.config.pooling) +
                            " but aligners are " + ToString(aligners.kind));
        aligners.AlignAll(utts);
      }
      std::vector<EmbeddingRecord> records;
      for (const auto& e : EmbedAll(net, utts)) records.push_back({e.id, e.values});
      WriteEmbeddingFile(out_path, records);
      out << "wrote " << records.size() << " embeddings to " << out_path << "\n";
    } else if (*score) {
      ExperimentConfig cfg = Resolve(score_f);
      if (partition.empty()) partition = cfg.eval_partition;
      LogConfig(cfg, "score", err);
      CorpusManifest m = IngestManifest(manifest);
      TrialList trials = BuildTrials(m, partition, cfg.enroll_sessions);
      if (trials.skipped_models > 0)
        err << "warning: skipped " << trials.skipped_models << " models without test sessions\n";
      std::map<std::string, const UtteranceRecord*> rec;
      for (const auto& r : m.records) rec[r.utterance_id] = &r;
      std::vector<Embedding> embs;
      for (auto& e : ReadEmbeddingFile(embeddings)) {
        auto it = rec.find(e.id);
        if (it == rec.end()) throw UsageError("embedding " + e.id + " is not in the manifest");
        embs.push_back({e.id, it->second->speaker_id, it->second->phrase_id, e.values});
      }
      ScoredTrialSet scored = ScoreTrials(trials, embs);
      EnsureDir(out_path);
      WriteScoresFile(Join(out_path, "scores.txt"), scored);
      WriteKeyFile(Join(out_path, "key.txt"), trials.trials);
      WriteEnrollmentFile(Join(out_path, "enroll.txt"), trials.models);
      out << "scored " << scored.size() << " trials into " << Join(out_path, "scores.txt")
          << "\n";
    } else if (*eval) {
      ExperimentConfig cfg = Resolve(eval_f);
      LogConfig(cfg, "eval", err);
      ScoredTrialSet trials = ReadScoredTrials(scores, key);
      MetricsReport report = Evaluate(trials, cfg.dcf);
      std::string text = FormatReport(report);
      EnsureDir(out_path);
      WriteFileAtomic(Join(out_path, "report.txt"), text);
      WriteDetFile(Join(out_path, "det.txt"), DetPoints(trials));
      out << text;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace alignsv
