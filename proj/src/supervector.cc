// src/supervector.cc

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

#include "alignsv/supervector.h"

namespace alignsv {

Vector FlattenSupervector(const Matrix& slices) {
  const Eigen::Index dim = slices.rows(), count = slices.cols();
  Vector flat(dim * count);
  for (Eigen::Index k = 0; k < count; ++k) flat.segment(k * dim, dim) = slices.col(k);
  return flat;
}

Matrix UnflattenSupervector(const Vector& flat, int dim) {
  if (dim <= 0 || flat.size() % dim != 0)
    throw ShapeError("supervector length " + std::to_string(flat.size()) +
                     " is not a multiple of " + std::to_string(dim));
  const Eigen::Index count = flat.size() / dim;
  Matrix slices(dim, count);
  for (Eigen::Index k = 0; k < count; ++k) slices.col(k) = flat.segment(k * dim, dim);
  return slices;
}

Vector AveragePool(const Matrix& x) {
  if (x.cols() == 0) throw ShapeError("average pool: no frames");
  // Same arithmetic as alignment pooling with a single all-ones column.
  const Matrix ones = Matrix::Ones(x.cols(), 1);
  const Matrix sums = x * ones;
  return sums.col(0) / static_cast<double>(x.cols());
}

Matrix AveragePoolBackward(const Matrix& x, const Vector& upstream) {
  if (upstream.size() != x.rows()) throw ShapeError("average pool backward: shape mismatch");
  const Vector scaled = upstream / static_cast<double>(x.cols());
  return scaled.replicate(1, x.cols());
}

}  // namespace alignsv
