// src/io.cc

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

#include "alignsv/io.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <sstream>

namespace alignsv {

namespace {

template <typename T>
void PutLe(std::string* buf, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i) buf->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T GetLe(const char* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

constexpr uint32_t kVersion = 1;

}  // namespace

void ByteWriter::U32(uint32_t v) { PutLe(&buf_, v); }
void ByteWriter::U64(uint64_t v) { PutLe(&buf_, v); }
void ByteWriter::F32(float v) { PutLe(&buf_, std::bit_cast<uint32_t>(v)); }
void ByteWriter::F64(double v) { PutLe(&buf_, std::bit_cast<uint64_t>(v)); }

void ByteWriter::String(std::string_view s) {
  U32(static_cast<uint32_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::F64Array(const double* data, size_t n) {
  for (size_t i = 0; i < n; ++i) F64(data[i]);
}

ByteReader::ByteReader(std::string data, std::string source)
    : data_(std::move(data)), source_(std::move(source)) {}

void ByteReader::Fail(const std::string& what) const {
  throw IoError(source_ + ": " + what + " (offset " + std::to_string(pos_) + ")");
}

void ByteReader::Need(size_t n) const {
  if (data_.size() - pos_ < n) Fail("truncated file");
}

void ByteReader::ExpectMagic(std::string_view magic) {
  Need(magic.size());
  if (data_.compare(pos_, magic.size(), magic) != 0)
    Fail("bad magic, expected \"" + std::string(magic) + "\"");
  pos_ += magic.size();
}

uint32_t ByteReader::U32() {
  Need(4);
  const uint32_t v = GetLe<uint32_t>(data_.data() + pos_);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::U64() {
  Need(8);
  const uint64_t v = GetLe<uint64_t>(data_.data() + pos_);
  pos_ += 8;
  return v;
}

float ByteReader::F32() { return std::bit_cast<float>(U32()); }
double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::string ByteReader::String() {
  const uint32_t n = U32();
  Need(n);
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::F64Array(double* data, size_t n) {
  Need(n * 8);
  for (size_t i = 0; i < n; ++i) data[i] = F64();
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp + " to " + path);
  }
}

uint64_t Fnv1a64(std::string_view bytes) { return HashString(bytes); }

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void WriteFeatureFile(const std::string& path, const Matrix& features) {
  ByteWriter w;
  w.Bytes("SVFM");
  w.U32(kVersion);
  w.U32(static_cast<uint32_t>(features.rows()));
  w.U32(static_cast<uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.size(); ++i)
    w.F32(static_cast<float>(features.data()[i]));
  WriteFileAtomic(path, w.buffer());
}

Matrix ReadFeatureFile(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("SVFM");
  if (r.U32() != kVersion) r.Fail("unsupported version");
  const uint32_t rows = r.U32(), cols = r.U32();
  Matrix f(rows, cols);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = r.F32();
  if (!r.AtEnd()) r.Fail("trailing bytes");
  return f;
}

void WriteHmmFile(const std::string& path, const PhraseHmm& hmm) {
  hmm.Validate();
  ByteWriter w;
  w.Bytes("SVHM");
  w.U32(kVersion);
  w.String(hmm.phrase_id);
  w.U32(static_cast<uint32_t>(hmm.num_states()));
  w.U32(static_cast<uint32_t>(hmm.dim()));
  w.F64Array(hmm.means.data(), hmm.means.size());
  w.F64Array(hmm.variances.data(), hmm.variances.size());
  w.F64Array(hmm.self_loop.data(), hmm.self_loop.size());
  WriteFileAtomic(path, w.buffer());
}

PhraseHmm ReadHmmFile(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("SVHM");
  if (r.U32() != kVersion) r.Fail("unsupported version");
  PhraseHmm hmm;
  hmm.phrase_id = r.String();
  const uint32_t q = r.U32(), d = r.U32();
  hmm.means.resize(q, d);
  hmm.variances.resize(q, d);
  hmm.self_loop.resize(q);
  r.F64Array(hmm.means.data(), hmm.means.size());
  r.F64Array(hmm.variances.data(), hmm.variances.size());
  r.F64Array(hmm.self_loop.data(), hmm.self_loop.size());
  if (!r.AtEnd()) r.Fail("trailing bytes");
  hmm.Validate();
  return hmm;
}

void WriteGmmFile(const std::string& path, const GmmModelFile& model) {
  const PhraseGmm& g = model.gmm;
  g.Validate();
  if (model.running_mean.rows() != g.dim() || model.running_mean.cols() != g.num_components())
    throw ShapeError("gmm file: running mean shape mismatch");
  ByteWriter w;
  w.Bytes("SVGM");
  w.U32(kVersion);
  w.String(g.phrase_id);
  w.U32(static_cast<uint32_t>(g.num_components()));
  w.U32(static_cast<uint32_t>(g.dim()));
  w.F64Array(g.weights.data(), g.weights.size());
  w.F64Array(g.means.data(), g.means.size());
  w.F64Array(g.variances.data(), g.variances.size());
  const Matrix mu_t = model.running_mean.transpose();
  w.F64Array(mu_t.data(), mu_t.size());
  w.F64(model.tau);
  w.F64(model.beta);
  WriteFileAtomic(path, w.buffer());
}

GmmModelFile ReadGmmFile(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("SVGM");
  if (r.U32() != kVersion) r.Fail("unsupported version");
  GmmModelFile m;
  m.gmm.phrase_id = r.String();
  const uint32_t c = r.U32(), d = r.U32();
  m.gmm.weights.resize(c);
  m.gmm.means.resize(c, d);
  m.gmm.variances.resize(c, d);
  r.F64Array(m.gmm.weights.data(), c);
  r.F64Array(m.gmm.means.data(), m.gmm.means.size());
  r.F64Array(m.gmm.variances.data(), m.gmm.variances.size());
  Matrix mu_t(c, d);
  r.F64Array(mu_t.data(), mu_t.size());
  m.running_mean = mu_t.transpose();
  m.tau = r.F64();
  m.beta = r.F64();
  if (!r.AtEnd()) r.Fail("trailing bytes");
  m.gmm.Validate();
  return m;
}

void WriteEmbeddingFile(const std::string& path, std::span<const EmbeddingRecord> records) {
  const uint32_t dim = records.empty() ? 0 : static_cast<uint32_t>(records[0].values.size());
  ByteWriter w;
  w.Bytes("SVEM");
  w.U32(kVersion);
  w.U32(static_cast<uint32_t>(records.size()));
  w.U32(dim);
  for (const EmbeddingRecord& rec : records) {
    if (rec.values.size() != dim)
      throw ShapeError("embedding '" + rec.id + "' has dimension " +
                       std::to_string(rec.values.size()) + ", expected " + std::to_string(dim));
    w.String(rec.id);
    for (Eigen::Index i = 0; i < rec.values.size(); ++i) w.F32(static_cast<float>(rec.values(i)));
  }
  WriteFileAtomic(path, w.buffer());
}

std::vector<EmbeddingRecord> ReadEmbeddingFile(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("SVEM");
  if (r.U32() != kVersion) r.Fail("unsupported version");
  const uint32_t count = r.U32(), dim = r.U32();
  std::vector<EmbeddingRecord> out(count);
  for (EmbeddingRecord& rec : out) {
    rec.id = r.String();
    rec.values.resize(dim);
    for (uint32_t i = 0; i < dim; ++i) rec.values(i) = r.F32();
  }
  if (!r.AtEnd()) r.Fail("trailing bytes");
  return out;
}

void WriteScoresFile(const std::string& path, const ScoredTrialSet& trials) {
  std::string out;
  for (const ScoredTrial& t : trials)
    out += t.enroll_id + " " + t.test_id + " " + FormatDouble(t.score) + "\n";
  WriteFileAtomic(path, out);
}

namespace {

std::vector<std::vector<std::string>> ReadTokenLines(const std::string& path, size_t fields) {
  std::istringstream in(ReadFileBytes(path));
  std::vector<std::vector<std::string>> lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != fields)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(fields) + " fields, got " + std::to_string(tok.size()));
    lines.push_back(std::move(tok));
  }
  return lines;
}

double ParseDouble(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError(where + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void WriteKeyFile(const std::string& path, std::span<const TrialKey> key) {
  std::string out;
  for (const TrialKey& k : key)
    out += k.enroll_id + " " + k.test_id + (k.target ? " target\n" : " nontarget\n");
  WriteFileAtomic(path, out);
}

std::vector<TrialKey> ReadKeyFile(const std::string& path) {
  std::vector<TrialKey> key;
  for (auto& tok : ReadTokenLines(path, 3)) {
    if (tok[2] != "target" && tok[2] != "nontarget")
      throw IoError(path + ": label must be target or nontarget, got '" + tok[2] + "'");
    key.push_back({tok[0], tok[1], tok[2] == "target"});
  }
  return key;
}

ScoredTrialSet ReadScoredTrials(const std::string& scores_path, const std::string& key_path) {
  std::map<std::pair<std::string, std::string>, bool> labels;
  for (const TrialKey& k : ReadKeyFile(key_path)) labels[{k.enroll_id, k.test_id}] = k.target;
  ScoredTrialSet trials;
  for (auto& tok : ReadTokenLines(scores_path, 3)) {
    const auto it = labels.find({tok[0], tok[1]});
    if (it == labels.end())
      throw IoError(scores_path + ": trial " + tok[0] + " " + tok[1] + " missing from key");
    trials.push_back({tok[0], tok[1], ParseDouble(tok[2], scores_path), it->second});
  }
  return trials;
}

void WriteDetFile(const std::string& path, const DetCurve& curve) {
  std::string out = "# threshold p_fa p_miss probit_fa probit_miss\n";
  for (const DetPoint& p : curve) {
    out += FormatDouble(p.threshold) + " " + FormatDouble(p.p_fa) + " " +
           FormatDouble(p.p_miss) + " " + FormatDouble(Probit(p.p_fa)) + " " +
           FormatDouble(Probit(p.p_miss)) + "\n";
  }
  WriteFileAtomic(path, out);
}

DetCurve ReadDetFile(const std::string& path) {
  DetCurve curve;
  for (auto& tok : ReadTokenLines(path, 5))
    curve.push_back({ParseDouble(tok[0], path), ParseDouble(tok[1], path), ParseDouble(tok[2], path)});
  return curve;
}

}  // namespace alignsv
