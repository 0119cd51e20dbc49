// include/alignsv/supervector.h

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

#ifndef ALIGNSV_SUPERVECTOR_H_
#define ALIGNSV_SUPERVECTOR_H_

#include <string>

#include "alignsv/common.h"

namespace alignsv {

// Utterance features with the id they are reported under in errors.
struct NamedFeatures {
  std::string id;
  Matrix features;  // D x T
};

// D x K slice matrix -> (D*K)-vector, component-major: all D values of
// component 0, then component 1, ...
Vector FlattenSupervector(const Matrix& slices);
Matrix UnflattenSupervector(const Vector& flat, int dim);

// Global average over time (D x T -> D) and its gradient.
Vector AveragePool(const Matrix& x);
Matrix AveragePoolBackward(const Matrix& x, const Vector& upstream);

}  // namespace alignsv

#endif  // ALIGNSV_SUPERVECTOR_H_
