// include/alignsv/common.h

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

#ifndef ALIGNSV_COMMON_H_
#define ALIGNSV_COMMON_H_

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace alignsv {

// Row-major so that flattening a matrix gives its rows back to back.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Error kinds. Every failure in the library is reported by throwing one of
// these; the CLI maps them to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class UsageError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };

using Rng = std::mt19937_64;

// splitmix64 finalizer.
inline uint64_t MixBits(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashString(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-stream of a master seed ("corpus", "init", "batch-order",
// "erasing", ...). Streams with different names are independent, and the
// same (seed, name) always yields the same sequence.
inline Rng SubStream(uint64_t seed, std::string_view name) {
  return Rng(MixBits(seed ^ MixBits(HashString(name))));
}

}  // namespace alignsv

#endif  // ALIGNSV_COMMON_H_
