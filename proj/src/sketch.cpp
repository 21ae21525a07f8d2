/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The sketchlp authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sketchlp/sketch.hpp"

#include "sketchlp/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace sketchlp {

void fwht(Vector& x) {
  const Eigen::Index p = x.size();
  if (p == 0 || (p & (p - 1)) != 0) {
    throw InvalidDim("Hadamard transform length " + std::to_string(p) + " is not a power of two");
  }
  for (Eigen::Index len = 1; len < p; len <<= 1) {
    for (Eigen::Index i = 0; i < p; i += len << 1) {
      for (Eigen::Index j = i; j < i + len; ++j) {
        const double a = x[j];
        const double b = x[j + len];
        x[j] = a + b;
        x[j + len] = a - b;
      }
    }
  }
}

SketchOp SketchOp::srht_new(int sketch_rows, int n, std::uint64_t seed) {
  if (n < 1 || sketch_rows < 1 || sketch_rows > n) {
    throw InvalidDim("srht_new requires 1 <= sketch_rows <= n (got sketch_rows=" +
                     std::to_string(sketch_rows) + ", n=" + std::to_string(n) + ")");
  }
  SketchOp op;
  op.b_ = sketch_rows;
  op.n_ = n;
  op.p_ = static_cast<int>(std::bit_ceil(static_cast<unsigned>(n)));
  op.scale_ = 1.0 / std::sqrt(static_cast<double>(sketch_rows));
  Rng rng(seed);
  op.signs_.resize(static_cast<std::size_t>(op.p_));
  for (int& s : op.signs_) s = (rng() >> 63) != 0 ? -1 : 1;
  // Partial Fisher-Yates: the first b entries are a uniform b-subset.
  std::vector<int> perm(static_cast<std::size_t>(op.p_));
  for (int i = 0; i < op.p_; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < sketch_rows; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   uniform_below(rng, static_cast<std::uint64_t>(op.p_ - i));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  op.rows_.assign(perm.begin(), perm.begin() + sketch_rows);
  std::sort(op.rows_.begin(), op.rows_.end());
  return op;
}

SketchOp SketchOp::identity(int n) {
  if (n < 1) throw InvalidDim("identity sketch needs n >= 1");
  SketchOp op;
  op.b_ = n;
  op.n_ = n;
  op.p_ = n;
  op.scale_ = 1.0;
  op.identity_ = true;
  op.signs_.assign(static_cast<std::size_t>(n), 1);
  op.rows_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) op.rows_[static_cast<std::size_t>(i)] = i;
  return op;
}

Vector SketchOp::apply(const Vector& h) const {
  if (h.size() != n_) {
    throw DimMismatch("apply: vector length " + std::to_string(h.size()) + " != " + std::to_string(n_));
  }
  if (identity_) return h;
  Vector x = Vector::Zero(p_);
  for (int i = 0; i < n_; ++i) x[i] = signs_[static_cast<std::size_t>(i)] * h[i];
  fwht(x);
  Vector y(b_);
  for (int k = 0; k < b_; ++k) y[k] = scale_ * x[rows_[static_cast<std::size_t>(k)]];
  return y;
}

Vector SketchOp::apply_t(const Vector& y) const {
  if (y.size() != b_) {
    throw DimMismatch("apply_t: vector length " + std::to_string(y.size()) + " != " + std::to_string(b_));
  }
  if (identity_) return y;
  Vector x = Vector::Zero(p_);
  for (int k = 0; k < b_; ++k) x[rows_[static_cast<std::size_t>(k)]] = y[k];
  fwht(x);
  Vector h(n_);
  for (int i = 0; i < n_; ++i) h[i] = scale_ * signs_[static_cast<std::size_t>(i)] * x[i];
  return h;
}

Matrix SketchOp::to_dense() const {
  if (identity_) return Matrix::Identity(n_, n_);
  Matrix R(b_, n_);
  for (int j = 0; j < n_; ++j) {
    for (int k = 0; k < b_; ++k) {
      // Entry (r, j) of the unnormalised Hadamard matrix is (-1)^{popcount(r & j)}.
      const unsigned r = static_cast<unsigned>(rows_[static_cast<std::size_t>(k)]);
      const int h = (std::popcount(r & static_cast<unsigned>(j)) & 1) != 0 ? -1 : 1;
      R(k, j) = scale_ * h * signs_[static_cast<std::size_t>(j)];
    }
  }
  return R;
}

SketchPool::SketchPool(SketchMode mode, int L, int sketch_rows, int n, std::uint64_t seed)
    : mode_(mode), n_(n) {
  if (L < 1) throw InvalidDim("sketch pool needs L >= 1");
  b_ = mode == SketchMode::Identity ? n : sketch_rows;
  ops_.reserve(static_cast<std::size_t>(L));
  auto stacked = std::make_shared<Matrix>(static_cast<Eigen::Index>(L) * b_, n);
  for (int l = 0; l < L; ++l) {
    ops_.push_back(mode == SketchMode::Identity
                       ? SketchOp::identity(n)
                       : SketchOp::srht_new(sketch_rows, n, mix_seed(seed, static_cast<std::uint64_t>(l))));
    stacked->middleRows(static_cast<Eigen::Index>(l) * b_, b_) = ops_.back().to_dense();
  }
  stacked_ = std::move(stacked);
}

int SketchPool::advance() {
  if (exhausted()) {
    throw PoolExhausted("all " + std::to_string(size()) + " sketching operators have been used");
  }
  return cursor_++;
}

EmbeddingStats embedding_stats(int trials, int sketch_rows, int n, std::uint64_t seed) {
  if (trials < 100) throw InvalidDim("embedding_stats needs at least 100 trials");
  if (n < 1 || sketch_rows < 1 || sketch_rows > n) {
    throw InvalidDim("embedding_stats requires 1 <= sketch_rows <= n");
  }
  EmbeddingStats st;
  st.trials = trials;
  st.sketch_rows = sketch_rows;
  st.n = n;
  Rng rng(seed);
  st.h.resize(n);
  for (int i = 0; i < n; ++i) st.h[i] = 2.0 * uniform01(rng) - 1.0;
  st.h /= st.h.norm();
  const double hnorm = st.h.norm();
  st.tail_beta = std::log(static_cast<double>(n) / st.tail_delta);
  const double tail_level = hnorm * st.tail_beta / std::sqrt(static_cast<double>(sketch_rows));

  Vector sum = Vector::Zero(n), sum2 = Vector::Zero(n), sum4 = Vector::Zero(n);
  long long tail_hits = 0;
  for (int t = 0; t < trials; ++t) {
    const SketchOp R = SketchOp::srht_new(sketch_rows, n, mix_seed(seed, static_cast<std::uint64_t>(t) + 1));
    const Vector z = R.apply_t(R.apply(st.h));
    const Vector z2 = z.array().square();
    sum += z;
    sum2 += z2;
    sum4 += z2.array().square().matrix();
    for (int i = 0; i < n; ++i) {
      if (std::abs(z[i] - st.h[i]) > tail_level) ++tail_hits;
    }
  }
  const double T = trials;
  st.mean = sum / T;
  st.second = sum2 / T;
  const Vector var = (st.second.array() - st.mean.array().square()).max(0.0).matrix();
  const Vector var2 = (sum4.array() / T - st.second.array().square()).max(0.0).matrix();
  st.se_mean = (var.array() / T).sqrt().matrix();
  st.se_second = (var2.array() / T).sqrt().matrix();
  st.bias = (st.mean - st.h).norm() / hnorm;
  for (int i = 0; i < n; ++i) {
    if (st.se_mean[i] > 0.0) {
      const double zscore = (st.mean[i] - st.h[i]) / st.se_mean[i];
      st.bias_chi2 += zscore * zscore;
      ++st.bias_dof;
    }
  }
  st.variance = var.maxCoeff() * sketch_rows / (hnorm * hnorm);
  st.tail_rate = static_cast<double>(tail_hits) / (T * n);
  return st;
}

}  // namespace sketchlp
