// src/corpus.cc

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

#include "alignsv/corpus.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace alignsv {

namespace fs = std::filesystem;

void SyntheticSpec::Validate() const {
  if (num_speakers < 2) throw ConfigError("synthetic corpus needs at least 2 speakers");
  if (num_phrases < 1) throw ConfigError("synthetic corpus needs at least 1 phrase");
  if (sessions < 1) throw ConfigError("synthetic corpus needs at least 1 session");
  if (segments < 2) throw ConfigError("synthetic corpus needs at least 2 segments");
  if (dim < 1) throw ConfigError("synthetic corpus dim must be positive");
  if (dwell_min < 1 || dwell_max < dwell_min)
    throw ConfigError("bad dwell range [" + std::to_string(dwell_min) + ", " +
                      std::to_string(dwell_max) + "]");
  if (noise < 0.0 || session_noise < 0.0 || channel_scale < 0.0 ||
      speaker_offset < 0.0 || coloring < 0.0 || template_scale < 0.0)
    throw ConfigError("synthetic corpus scales must be non-negative");
  if (channel_rank < 0 || channel_rank > dim)
    throw ConfigError("channel rank must be in [0, dim]");
  if (dev_speakers < 0 || eval_speakers < 0 ||
      dev_speakers + eval_speakers > num_speakers)
    throw ConfigError("dev + eval speakers exceed the speaker count");
}

std::vector<const UtteranceRecord*> CorpusManifest::Partition(
    const std::string& name) const {
  std::vector<const UtteranceRecord*> out;
  for (const auto& r : records)
    if (r.partition == name) out.push_back(&r);
  return out;
}

std::vector<std::string> CorpusManifest::Phrases() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.phrase_id).second) out.push_back(r.phrase_id);
  return out;
}

std::vector<std::string> CorpusManifest::Speakers(const std::string& partition) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records)
    if ((partition.empty() || r.partition == partition) && seen.insert(r.speaker_id).second)
      out.push_back(r.speaker_id);
  return out;
}

namespace {

std::string Padded(const char* prefix, int width, int v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, v);
  return buf;
}

Vector Gaussian(int n, double scale, Rng* rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * nd(*rng);
  return v;
}

}  // namespace

SyntheticCorpus::SyntheticCorpus(const SyntheticSpec& spec) : spec_(spec) {
  spec_.Validate();
  const int d = spec_.dim, k = spec_.segments;
  Rng rng = SubStream(spec_.seed, "corpus-templates");
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int p = 0; p < spec_.num_phrases; ++p) {
    Matrix c(d, k);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < k; ++j) c(i, j) = spec_.template_scale * nd(rng);
    // Centering makes the time average nearly speaker-blind: the gain only
    // shows up once frames are split by segment.
    c.colwise() -= c.rowwise().mean();
    templates_.push_back(std::move(c));
  }
  Rng srng = SubStream(spec_.seed, "corpus-speakers");
  for (int s = 0; s < spec_.num_speakers; ++s) {
    gains_.push_back(Gaussian(d, spec_.coloring, &srng).array().exp().matrix());
    offsets_.push_back(Gaussian(d, spec_.speaker_offset, &srng));
  }
  Rng crng = SubStream(spec_.seed, "corpus-channel");
  Matrix v(d, spec_.channel_rank);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < spec_.channel_rank; ++j) v(i, j) = nd(crng);
  if (spec_.channel_rank > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    channel_ = Eigen::MatrixXd(qr.householderQ()).leftCols(spec_.channel_rank);
  } else {
    channel_ = Matrix(d, 0);
  }
}

std::string SyntheticCorpus::SpeakerId(int speaker) { return Padded("spk", 3, speaker); }
std::string SyntheticCorpus::PhraseId(int phrase) { return Padded("ph", 2, phrase); }
std::string SyntheticCorpus::UtteranceId(int speaker, int phrase, int session) {
  return SpeakerId(speaker) + "_" + PhraseId(phrase) + Padded("_s", 2, session);
}

std::string SyntheticCorpus::PartitionOf(int speaker) const {
  int bkg = spec_.num_speakers - spec_.dev_speakers - spec_.eval_speakers;
  if (speaker < bkg) return "bkg";
  if (speaker < bkg + spec_.dev_speakers) return "dev";
  return "eval";
}

SyntheticUtterance SyntheticCorpus::Generate(int speaker, int phrase, int session) const {
  if (speaker < 0 || speaker >= spec_.num_speakers || phrase < 0 ||
      phrase >= spec_.num_phrases || session < 1 || session > spec_.sessions)
    throw InputError("no such synthetic utterance " + UtteranceId(speaker, phrase, session));
  const int d = spec_.dim, k = spec_.segments;
  Rng rng = SubStream(spec_.seed, "utt:" + UtteranceId(speaker, phrase, session));
  std::uniform_int_distribution<int> dwell(spec_.dwell_min, spec_.dwell_max);
  SyntheticUtterance u;
  int total = 0;
  for (int j = 0; j < k; ++j) {
    u.segment_starts.push_back(total);
    total += dwell(rng);
  }
  Vector session_offset = Gaussian(d, spec_.session_noise * spec_.noise, &rng);
  Vector z = Gaussian(spec_.channel_rank, spec_.channel_scale * spec_.noise, &rng);
  Vector fixed = offsets_[speaker] + session_offset + channel_ * z;

  const Matrix& c = templates_[phrase];
  const Vector& g = gains_[speaker];
  std::normal_distribution<double> nd(0.0, 1.0);
  u.features.resize(d, total);
  for (int j = 0; j < k; ++j) {
    int end = j + 1 < k ? u.segment_starts[j + 1] : total;
    for (int t = u.segment_starts[j]; t < end; ++t)
      for (int i = 0; i < d; ++i)
        u.features(i, t) = g(i) * c(i, j) + fixed(i) + spec_.noise * nd(rng);
  }
  return u;
}

CorpusManifest GenerateCorpus(const SyntheticSpec& spec, const std::string& out_dir) {
  SyntheticCorpus corpus(spec);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "features", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  CorpusManifest manifest;
  std::ostringstream bounds;
  for (int s = 0; s < spec.num_speakers; ++s) {
    for (int p = 0; p < spec.num_phrases; ++p) {
      for (int n = 1; n <= spec.sessions; ++n) {
        SyntheticUtterance u = corpus.Generate(s, p, n);
        UtteranceRecord r;
        r.utterance_id = SyntheticCorpus::UtteranceId(s, p, n);
        r.speaker_id = SyntheticCorpus::SpeakerId(s);
        r.phrase_id = SyntheticCorpus::PhraseId(p);
        r.session = n;
        r.partition = corpus.PartitionOf(s);
        r.path = "features/" + r.utterance_id + ".svfm";
        r.resolved_path = (fs::path(out_dir) / r.path).string();
        WriteFeatureFile(r.resolved_path, u.features);
        bounds << r.utterance_id;
        for (int b : u.segment_starts) bounds << ' ' << b;
        bounds << '\n';
        manifest.records.push_back(std::move(r));
      }
    }
  }
  WriteManifest((fs::path(out_dir) / "manifest.txt").string(), manifest);
  WriteFileAtomic((fs::path(out_dir) / "boundaries.txt").string(), bounds.str());
  return manifest;
}

void WriteManifest(const std::string& path, const CorpusManifest& manifest) {
  std::ostringstream os;
  for (const auto& r : manifest.records)
    os << r.utterance_id << ' ' << r.speaker_id << ' ' << r.phrase_id << ' ' << r.session
       << ' ' << r.partition << ' ' << r.path << '\n';
  WriteFileAtomic(path, os.str());
}

CorpusManifest IngestManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  fs::path base = fs::path(path).parent_path();
  CorpusManifest m;
  std::vector<std::string> problems;
  std::map<std::string, int> seen_ids;
  std::map<std::string, std::string> speaker_partition;
  std::set<std::string> multi;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    UtteranceRecord r;
    std::string session, extra;
    if (!(ls >> r.utterance_id)) continue;
    std::string where = path + ":" + std::to_string(lineno);
    if (!(ls >> r.speaker_id >> r.phrase_id >> session >> r.partition >> r.path) ||
        (ls >> extra)) {
      problems.push_back(where + ": expected 6 fields");
      continue;
    }
    try {
      size_t used = 0;
      r.session = std::stoi(session, &used);
      if (used != session.size()) throw std::invalid_argument(session);
    } catch (const std::exception&) {
      problems.push_back(where + ": bad session '" + session + "'");
      continue;
    }
    if (r.partition != "bkg" && r.partition != "dev" && r.partition != "eval")
      problems.push_back(where + ": unknown partition '" + r.partition + "'");
    if (auto [it, fresh] = seen_ids.emplace(r.utterance_id, lineno); !fresh)
      problems.push_back(where + ": duplicate utterance id " + r.utterance_id +
                         " (first on line " + std::to_string(it->second) + ")");
    fs::path p(r.path);
    r.resolved_path = (p.is_absolute() ? p : base / p).string();
    if (!fs::is_regular_file(r.resolved_path))
      problems.push_back(where + ": missing file " + r.resolved_path);
    auto [it, fresh] = speaker_partition.emplace(r.speaker_id, r.partition);
    if (!fresh && it->second != r.partition && multi.insert(r.speaker_id).second)
      problems.push_back("speaker " + r.speaker_id + " appears in partitions " +
                         it->second + " and " + r.partition);
    m.records.push_back(std::move(r));
  }
  if (!problems.empty()) {
    std::string msg = "invalid manifest " + path + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return m;
}

TrialList BuildTrials(const CorpusManifest& manifest, const std::string& partition,
                      int enroll_sessions) {
  auto records = manifest.Partition(partition);
  if (records.empty()) throw InputError("partition '" + partition + "' is empty");
  TrialList out;
  std::map<std::pair<std::string, std::string>, size_t> index;
  for (const auto* r : records) {
    auto key = std::make_pair(r->speaker_id, r->phrase_id);
    if (!index.count(key)) {
      index[key] = out.models.size();
      out.models.push_back({r->speaker_id + "-" + r->phrase_id, r->speaker_id, r->phrase_id, {}});
    }
    if (r->session <= enroll_sessions)
      out.models[index[key]].utterances.push_back(r->utterance_id);
  }
  std::vector<EnrollmentModel> kept;
  for (auto& model : out.models) {
    bool has_target = false;
    for (const auto* r : records)
      has_target |= r->session > enroll_sessions && r->speaker_id == model.speaker_id &&
                    r->phrase_id == model.phrase_id;
    if (model.utterances.empty() || !has_target) {
      ++out.skipped_models;
      continue;
    }
    for (const auto* r : records)
      if (r->session > enroll_sessions && r->phrase_id == model.phrase_id)
        out.trials.push_back({model.model_id, r->utterance_id, r->speaker_id == model.speaker_id});
    kept.push_back(std::move(model));
  }
  out.models = std::move(kept);
  return out;
}

void WriteEnrollmentFile(const std::string& path, const std::vector<EnrollmentModel>& models) {
  std::ostringstream os;
  for (const auto& m : models) {
    os << m.model_id << ' ' << m.speaker_id << ' ' << m.phrase_id;
    for (const auto& u : m.utterances) os << ' ' << u;
    os << '\n';
  }
  WriteFileAtomic(path, os.str());
}

std::vector<EnrollmentModel> ReadEnrollmentFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open enrollment list " + path);
  std::vector<EnrollmentModel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    EnrollmentModel m;
    if (!(ls >> m.model_id)) continue;
    std::string u;
    if (!(ls >> m.speaker_id >> m.phrase_id))
      throw IoError(path + ":" + std::to_string(lineno) + ": truncated line");
    while (ls >> u) m.utterances.push_back(u);
    if (m.utterances.empty())
      throw IoError(path + ":" + std::to_string(lineno) + ": model without utterances");
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace alignsv
