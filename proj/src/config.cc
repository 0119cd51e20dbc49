// src/config.cc

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

#include "alignsv/config.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "alignsv/io.h"

namespace alignsv {

namespace {

struct Field {
  std::function<void(ExperimentConfig*, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
T ParseNumber(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("bad value '" + v + "' for " + key);
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

std::vector<int> ParseList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseNumber<int>(key, item));
  return out;
}

std::string ListText(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Accessors built from a projection onto the member.
template <typename Proj>
Field IntField(Proj proj) {
  return {[proj](ExperimentConfig* c, const std::string& v) {
            auto& ref = proj(*c);
            ref = ParseNumber<std::remove_reference_t<decltype(ref)>>("", v);
          },
          [proj](const ExperimentConfig& c) {
            return std::to_string(proj(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Proj>
Field RealField(Proj proj) {
  return {[proj](ExperimentConfig* c, const std::string& v) {
            proj(*c) = ParseNumber<double>("", v);
          },
          [proj](const ExperimentConfig& c) {
            return FormatDouble(proj(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Proj>
Field BoolField(Proj proj) {
  return {[proj](ExperimentConfig* c, const std::string& v) { proj(*c) = ParseBool("", v); },
          [proj](const ExperimentConfig& c) {
            return std::string(proj(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Proj>
Field ListField(Proj proj) {
  return {[proj](ExperimentConfig* c, const std::string& v) { proj(*c) = ParseList("", v); },
          [proj](const ExperimentConfig& c) {
            return ListText(proj(const_cast<ExperimentConfig&>(c)));
          }};
}

#define REF(expr) [](ExperimentConfig& c) -> auto& { return expr; }

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = {
      {"seed", IntField(REF(c.seed))},
      // corpus
      {"corpus.speakers", IntField(REF(c.corpus.num_speakers))},
      {"corpus.phrases", IntField(REF(c.corpus.num_phrases))},
      {"corpus.sessions", IntField(REF(c.corpus.sessions))},
      {"corpus.segments", IntField(REF(c.corpus.segments))},
      {"corpus.dim", IntField(REF(c.corpus.dim))},
      {"corpus.dwell_min", IntField(REF(c.corpus.dwell_min))},
      {"corpus.dwell_max", IntField(REF(c.corpus.dwell_max))},
      {"corpus.template_scale", RealField(REF(c.corpus.template_scale))},
      {"corpus.speaker_offset", RealField(REF(c.corpus.speaker_offset))},
      {"corpus.coloring", RealField(REF(c.corpus.coloring))},
      {"corpus.noise", RealField(REF(c.corpus.noise))},
      {"corpus.session_noise", RealField(REF(c.corpus.session_noise))},
      {"corpus.channel_rank", IntField(REF(c.corpus.channel_rank))},
      {"corpus.channel_scale", RealField(REF(c.corpus.channel_scale))},
      {"corpus.dev_speakers", IntField(REF(c.corpus.dev_speakers))},
      {"corpus.eval_speakers", IntField(REF(c.corpus.eval_speakers))},
      // features
      {"mfcc.frame_length_ms", RealField(REF(c.mfcc.frame_length_ms))},
      {"mfcc.frame_shift_ms", RealField(REF(c.mfcc.frame_shift_ms))},
      {"mfcc.preemphasis", RealField(REF(c.mfcc.preemphasis))},
      {"mfcc.num_mel_bins", IntField(REF(c.mfcc.num_mel_bins))},
      {"mfcc.num_ceps", IntField(REF(c.mfcc.num_ceps))},
      {"mfcc.low_freq", RealField(REF(c.mfcc.low_freq))},
      {"mfcc.high_freq", RealField(REF(c.mfcc.high_freq))},
      {"mfcc.log_floor", RealField(REF(c.mfcc.log_floor))},
      {"mfcc.deltas", BoolField(REF(c.mfcc.add_deltas))},
      {"mfcc.cmn", BoolField(REF(c.mfcc.apply_cmn))},
      {"frames", IntField(REF(c.frames))},
      // aligners
      {"hmm.states", IntField(REF(c.hmm.num_states))},
      {"hmm.iterations", IntField(REF(c.hmm.iterations))},
      {"hmm.variance_floor", RealField(REF(c.hmm.variance_floor))},
      {"gmm.components", IntField(REF(c.gmm.num_components))},
      {"gmm.iterations", IntField(REF(c.gmm.iterations))},
      {"gmm.kmeans_iterations", IntField(REF(c.gmm.kmeans_iterations))},
      {"gmm.variance_floor", RealField(REF(c.gmm.variance_floor))},
      // network
      {"network.channels", ListField(REF(c.network.channels))},
      {"network.kernel", IntField(REF(c.network.kernel))},
      {"network.back_end", ListField(REF(c.network.back_end))},
      {"map.tau", RealField(REF(c.network.tau))},
      {"map.beta", RealField(REF(c.network.beta))},
      // training
      {"train.epochs", IntField(REF(c.train.epochs))},
      {"train.batch_size", IntField(REF(c.train.batch_size))},
      {"train.learning_rate", RealField(REF(c.train.learning_rate))},
      {"train.alpha", RealField(REF(c.train.alpha))},
      {"train.margin", RealField(REF(c.train.margin))},
      {"train.speakers_per_batch", IntField(REF(c.train.speakers_per_batch))},
      {"train.utts_per_speaker", IntField(REF(c.train.utts_per_speaker))},
      {"train.max_positive", IntField(REF(c.train.max_positive))},
      {"train.max_negative", IntField(REF(c.train.max_negative))},
      {"train.batches_per_epoch", IntField(REF(c.train.batches_per_epoch))},
      {"train.heldout_session", IntField(REF(c.heldout_session))},
      {"erasing.probability", RealField(REF(c.train.erasing.probability))},
      {"erasing.area_min", RealField(REF(c.train.erasing.area_min))},
      {"erasing.area_max", RealField(REF(c.train.erasing.area_max))},
      {"erasing.aspect_min", RealField(REF(c.train.erasing.aspect_min))},
      {"erasing.aspect_max", RealField(REF(c.train.erasing.aspect_max))},
      {"bdk", BoolField(REF(c.bdk))},
      {"bdk.temperature", RealField(REF(c.train.temperature))},
      // evaluation
      {"eval.enroll_sessions", IntField(REF(c.enroll_sessions))},
      {"dcf.p_target", RealField(REF(c.dcf.p_target))},
      {"dcf.c_miss", RealField(REF(c.dcf.c_miss))},
      {"dcf.c_fa", RealField(REF(c.dcf.c_fa))},
  };
  return fields;
}

#undef REF

}  // namespace

void ExperimentConfig::Set(const std::string& key, const std::string& value) {
  // String-valued keys are handled here; the rest go through the table.
  if (key == "aligner") {
    if (value != "hmm" && value != "gmm") throw ConfigError("aligner must be hmm or gmm");
    aligner = value;
    return;
  }
  if (key == "arch") {
    network.arch = ParseArch(value);
    return;
  }
  if (key == "pooling") {
    network.pooling = ParsePooling(value);
    return;
  }
  if (key == "train.loss") {
    train.loss = ParseLossType(value);
    return;
  }
  if (key == "eval.partition") {
    eval_partition = value;
    return;
  }
  auto it = Fields().find(key);
  if (it == Fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(this, value);
  } catch (const ConfigError&) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
}

void ExperimentConfig::ParseText(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      Set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ExperimentConfig::LoadFile(const std::string& path) { ParseText(ReadFileBytes(path), path); }

std::vector<std::string> ExperimentConfig::Keys() const {
  std::vector<std::string> keys = {"aligner", "arch", "eval.partition", "pooling", "train.loss"};
  for (const auto& [k, f] : Fields()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string ExperimentConfig::Dump() const {
  std::ostringstream os;
  for (const auto& k : Keys()) {
    std::string v;
    if (k == "aligner") v = aligner;
    else if (k == "arch") v = ToString(network.arch);
    else if (k == "pooling") v = ToString(network.pooling);
    else if (k == "train.loss") v = ToString(train.loss);
    else if (k == "eval.partition") v = eval_partition;
    else v = Fields().at(k).get(*this);
    os << k << " = " << v << "\n";
  }
  return os.str();
}

}  // namespace alignsv
