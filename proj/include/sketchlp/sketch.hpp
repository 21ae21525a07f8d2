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

#pragma once

/// @file sketch.hpp
/// @brief Subsampled randomized Hadamard transforms (SRHT), the sketch pool
///        consumed by the projection-maintenance structure, and Monte-Carlo
///        checks of the coordinate-wise embedding properties.
///
/// An SRHT operator is R = (1/sqrt(b)) * S * H * D restricted to the first n
/// columns, where D is a random +-1 diagonal of the padded dimension P (the
/// next power of two >= n), H the unnormalised P x P Walsh-Hadamard matrix and
/// S selects b distinct rows uniformly at random.  Then E[R^T R] = I, and with
/// full sampling (b = P = n) R^T R = I exactly.
///
/// Randomness comes from std::mt19937_64 seeded with the 64-bit seed;
/// bounded integers are drawn by rejection sampling so that operators are
/// reproducible across standard-library implementations.

#include <cstdint>
#include <memory>
#include <vector>

#include "sketchlp/linalg.hpp"

namespace sketchlp {

/// How sketching operators are generated.
enum class SketchMode {
  Srht,      ///< subsampled randomized Hadamard transform
  Identity,  ///< R = I (deterministic; R^T R = I by construction)
};

/// One immutable sketching operator R (b x n).
class SketchOp {
 public:
  /// Draws an SRHT operator with @p sketch_rows rows for dimension @p n.
  ///
  /// @throws InvalidDim unless 1 <= sketch_rows <= n.
  static SketchOp srht_new(int sketch_rows, int n, std::uint64_t seed);
  /// The identity operator on R^n (sketch_rows = n).
  static SketchOp identity(int n);

  [[nodiscard]] int sketch_rows() const { return b_; }
  [[nodiscard]] int ambient_dim() const { return n_; }
  [[nodiscard]] int padded_dim() const { return p_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] bool is_identity() const { return identity_; }
  [[nodiscard]] const std::vector<int>& sign_flips() const { return signs_; }
  [[nodiscard]] const std::vector<int>& sampled_rows() const { return rows_; }

  /// R h (length sketch_rows).  @throws DimMismatch.
  [[nodiscard]] Vector apply(const Vector& h) const;
  /// R^T y (length n).  @throws DimMismatch.
  [[nodiscard]] Vector apply_t(const Vector& y) const;
  /// Dense b x n matrix of the operator.
  [[nodiscard]] Matrix to_dense() const;

 private:
  int b_ = 0;
  int n_ = 0;
  int p_ = 0;
  double scale_ = 1.0;
  bool identity_ = false;
  std::vector<int> signs_;
  std::vector<int> rows_;
};

/// In-place unnormalised fast Walsh-Hadamard transform; size must be a power
/// of two.
void fwht(Vector& x);

/// L sketching operators with a cursor.  The pool also keeps the operators
/// stacked into one dense (L*b) x n matrix, which is what the maintenance
/// structure multiplies with.
class SketchPool {
 public:
  SketchPool() = default;
  /// Generates @p L operators of @p sketch_rows rows for dimension @p n.
  /// Operator k uses the seed derived from (@p seed, k).
  SketchPool(SketchMode mode, int L, int sketch_rows, int n, std::uint64_t seed);

  [[nodiscard]] int size() const { return static_cast<int>(ops_.size()); }
  [[nodiscard]] int block_rows() const { return b_; }
  [[nodiscard]] int ambient_dim() const { return n_; }
  [[nodiscard]] int cursor() const { return cursor_; }
  [[nodiscard]] bool exhausted() const { return cursor_ >= size(); }
  [[nodiscard]] SketchMode mode() const { return mode_; }

  /// Operator @p l (0-based).
  [[nodiscard]] const SketchOp& op(int l) const { return ops_.at(static_cast<std::size_t>(l)); }
  /// Stacked dense operators, (L*b) x n.
  [[nodiscard]] const Matrix& stacked() const { return *stacked_; }
  /// Rows of operator @p l inside the stacked matrix.
  [[nodiscard]] auto block(int l) const { return stacked_->middleRows(static_cast<Eigen::Index>(l) * b_, b_); }

  /// Index of the operator to use next; advances the cursor.
  ///
  /// @throws PoolExhausted when all L operators have been used.
  int advance();

 private:
  SketchMode mode_ = SketchMode::Identity;
  int b_ = 0;
  int n_ = 0;
  int cursor_ = 0;
  std::vector<SketchOp> ops_;
  std::shared_ptr<const Matrix> stacked_;
};

/// Monte-Carlo estimates of the coordinate-wise embedding properties for a
/// fixed random unit vector h, using fresh SRHT operators per trial.
struct EmbeddingStats {
  int trials = 0;
  int sketch_rows = 0;
  int n = 0;
  Vector h;            ///< the test vector
  Vector mean;         ///< per-coordinate sample mean of (R^T R h)_i
  Vector second;       ///< per-coordinate sample mean of (R^T R h)_i^2
  Vector se_mean;      ///< standard error of `mean`
  Vector se_second;    ///< standard error of `second`
  double bias = 0.0;      ///< ||mean - h||_2 / ||h||_2
  double bias_chi2 = 0.0; ///< sum_i ((mean_i - h_i)/se_i)^2 over coordinates with se_i > 0
  int bias_dof = 0;       ///< number of coordinates entering bias_chi2
  double variance = 0.0;  ///< max_i Var((R^T R h)_i) * b / ||h||_2^2 (property-2 constant)
  double tail_beta = 0.0; ///< ln(n / tail_delta)
  double tail_delta = 0.01;
  double tail_rate = 0.0; ///< fraction of (trial, i) with |(R^T R h)_i - h_i| > ||h|| beta / sqrt(b)
};

/// Runs @p trials independent SRHT draws.  Deterministic for a fixed seed.
///
/// @throws InvalidDim if trials < 100 or sketch_rows is not in [1, n].
EmbeddingStats embedding_stats(int trials, int sketch_rows, int n, std::uint64_t seed);

}  // namespace sketchlp
