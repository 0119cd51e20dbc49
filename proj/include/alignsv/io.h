// include/alignsv/io.h

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

#ifndef ALIGNSV_IO_H_
#define ALIGNSV_IO_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignsv/common.h"
#include "alignsv/gmm.h"
#include "alignsv/hmm.h"
#include "alignsv/metrics.h"

namespace alignsv {

// Little-endian serialization into an in-memory buffer.
class ByteWriter {
 public:
  void Bytes(std::string_view s) { buf_.append(s); }
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F32(float v);
  void F64(double v);
  void String(std::string_view s);  // u32 length + bytes
  void F64Array(const double* data, size_t n);
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string source);
  void ExpectMagic(std::string_view magic);
  uint32_t U32();
  uint64_t U64();
  float F32();
  double F64();
  std::string String();
  void F64Array(double* data, size_t n);
  size_t position() const { return pos_; }
  bool AtEnd() const { return pos_ == data_.size(); }
  const std::string& data() const { return data_; }
  [[noreturn]] void Fail(const std::string& what) const;

 private:
  void Need(size_t n) const;
  std::string data_;
  std::string source_;
  size_t pos_ = 0;
};

std::string ReadFileBytes(const std::string& path);
// Writes to a temporary file in the same directory, then renames.
void WriteFileAtomic(const std::string& path, std::string_view bytes);

uint64_t Fnv1a64(std::string_view bytes);

// "SVFM" | u32 version=1 | u32 D | u32 T | D*T f32, row-major.
void WriteFeatureFile(const std::string& path, const Matrix& features);
Matrix ReadFeatureFile(const std::string& path);

// "SVHM" | u32 version | phrase_id | u32 Q | u32 D | means Q*D | variances
// Q*D | self-loop Q, all f64.
void WriteHmmFile(const std::string& path, const PhraseHmm& hmm);
PhraseHmm ReadHmmFile(const std::string& path);

struct GmmModelFile {
  PhraseGmm gmm;
  Matrix running_mean;  // D x C
  double tau = 10.0;
  double beta = 0.01;
};

// "SVGM" | u32 version | phrase_id | u32 C | u32 D | weights C | means C*D |
// covariances C*D | running mean C*D (component-major) | tau | beta, f64.
void WriteGmmFile(const std::string& path, const GmmModelFile& model);
GmmModelFile ReadGmmFile(const std::string& path);

struct EmbeddingRecord {
  std::string id;
  Vector values;
};

// "SVEM" | u32 version | u32 count | u32 dim | per record: id | dim f32.
void WriteEmbeddingFile(const std::string& path, std::span<const EmbeddingRecord> records);
std::vector<EmbeddingRecord> ReadEmbeddingFile(const std::string& path);

// "<enroll_id> <test_id> <score>" per line.
void WriteScoresFile(const std::string& path, const ScoredTrialSet& trials);
// Scores with labels from a key file ("<enroll_id> <test_id> target|nontarget").
ScoredTrialSet ReadScoredTrials(const std::string& scores_path, const std::string& key_path);

struct TrialKey {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};
void WriteKeyFile(const std::string& path, std::span<const TrialKey> key);
std::vector<TrialKey> ReadKeyFile(const std::string& path);

// "# threshold p_fa p_miss probit_fa probit_miss" followed by one row per
// operating point.
void WriteDetFile(const std::string& path, const DetCurve& curve);
DetCurve ReadDetFile(const std::string& path);

// Shortest decimal text that reads back to the same double.
std::string FormatDouble(double v);

}  // namespace alignsv

#endif  // ALIGNSV_IO_H_
