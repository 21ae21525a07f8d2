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

/// @file linalg.hpp
/// @brief Dense linear algebra primitives: guarded inverse, Woodbury update,
///        index sets, padded (fixed-capacity) blocks and the structured
///        U' C U^T factorisation of a capacitance change.
///
/// Dense storage is Eigen's column-major MatrixXd/VectorXd.  Diagonal
/// matrices (W, V, Delta, Gamma, ...) are carried as plain vectors holding
/// the diagonal.

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "sketchlp/errors.hpp"

namespace sketchlp {

using Matrix = Eigen::MatrixXd;  ///< Dense real matrix.
using Vector = Eigen::VectorXd;  ///< Dense real vector / diagonal of a matrix.

/// Relative pivot threshold below which a factorisation reports SingularMatrix.
inline constexpr double kSingularPivotRel = 1e-12;

// ---------------------------------------------------------------------------
// Index sets
// ---------------------------------------------------------------------------

/// Strictly increasing list of distinct non-negative indices.
class IndexSet {
 public:
  IndexSet() = default;
  /// Builds from arbitrary indices (sorted and de-duplicated).
  IndexSet(std::initializer_list<int> idx);
  /// Builds from arbitrary indices (sorted and de-duplicated).
  static IndexSet from_unsorted(std::vector<int> idx);
  /// Support of a vector: indices whose entry is not exactly zero.
  static IndexSet support(const Vector& v);
  /// Indices where two vectors differ (exact comparison).
  static IndexSet differ(const Vector& a, const Vector& b);
  /// {0, 1, ..., n-1}.
  static IndexSet range(int n);

  [[nodiscard]] std::size_t size() const { return idx_.size(); }
  [[nodiscard]] bool empty() const { return idx_.empty(); }
  [[nodiscard]] int operator[](std::size_t k) const { return idx_[k]; }
  [[nodiscard]] const std::vector<int>& indices() const { return idx_; }
  [[nodiscard]] auto begin() const { return idx_.begin(); }
  [[nodiscard]] auto end() const { return idx_.end(); }

  /// True iff @p i is a member.
  [[nodiscard]] bool contains(int i) const;
  /// Position of @p i within the set, or -1 if absent.
  [[nodiscard]] int position(int i) const;
  /// True iff every member of this set is in @p other.
  [[nodiscard]] bool subset_of(const IndexSet& other) const;
  /// Throws DimMismatch unless every index lies in [0, n).
  void validate(int n) const;

  friend bool operator==(const IndexSet& a, const IndexSet& b) { return a.idx_ == b.idx_; }

 private:
  std::vector<int> idx_;
};

IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_intersection(const IndexSet& a, const IndexSet& b);
IndexSet set_difference(const IndexSet& a, const IndexSet& b);

/// Columns of @p M indexed by @p S (the matrix M_S).
Matrix select_cols(const Matrix& M, const IndexSet& S);
/// Rows of @p M indexed by @p S.
Matrix select_rows(const Matrix& M, const IndexSet& S);
/// Principal submatrix M_{S,S}.
Matrix select_block(const Matrix& M, const IndexSet& S);
/// Entries of @p v indexed by @p S.
Vector select(const Vector& v, const IndexSet& S);

// ---------------------------------------------------------------------------
// Inverse and Woodbury
// ---------------------------------------------------------------------------

/// Inverse by row-pivoted LU factorisation of the row/column-equilibrated
/// matrix (every row, then every column, scaled to unit max-norm).
///
/// @throws DimMismatch if @p M is not square.
/// @throws SingularMatrix if M has a zero row/column or a pivot of the
///         equilibrated matrix is below kSingularPivotRel times its max entry.
Matrix mat_inverse(const Matrix& M);

/// Solves M X = B by row-pivoted LU with the same singularity guard.
Matrix lu_solve(const Matrix& M, const Matrix& B);

/// (M + U C V)^{-1} from M^{-1} via the Woodbury identity
/// Minv - Minv U (C^{-1} + V Minv U)^{-1} V Minv.
///
/// @throws DimMismatch on non-conforming shapes.
/// @throws SingularMatrix if C or the capacitance matrix is singular.
Matrix woodbury(const Matrix& Minv, const Matrix& U, const Matrix& C, const Matrix& V);

// ---------------------------------------------------------------------------
// Padded blocks
// ---------------------------------------------------------------------------

/// How a submatrix is embedded into a fixed-capacity block.
enum class PadMode {
  Cols,    ///< selected columns, zero-padded to `capacity` columns
  Rows,    ///< selected rows, zero-padded to `capacity` rows
  Square,  ///< principal block, identity-padded to capacity x capacity
};

/// Slot marker for an unused slot.
inline constexpr int kEmptySlot = -1;

/// A submatrix stored in a block of fixed capacity.
///
/// Occupied slots hold the members of `occupied` in ascending order of the
/// original index and precede the empty slots.  Empty rows/columns of the
/// payload are zero (Cols/Rows) or identity-extended on the diagonal (Square).
struct PaddedBlock {
  PadMode mode = PadMode::Cols;
  int capacity = 0;
  IndexSet occupied;
  Matrix payload;

  /// Slot list of length `capacity` (original index or kEmptySlot).
  [[nodiscard]] std::vector<int> slots() const;
  /// Slot holding original index @p i, or -1.
  [[nodiscard]] int slot_of(int i) const { return occupied.position(i); }
};

/// Embeds the columns (Cols), rows (Rows) of @p M indexed by @p S, or the
/// already-extracted |S| x |S| matrix @p M (Square), into a block of
/// @p capacity slots.
///
/// @throws CapacityExceeded if |S| > capacity.
/// @throws DimMismatch if Square mode is given a matrix whose size is not |S|.
PaddedBlock pad(const Matrix& M, const IndexSet& S, int capacity, PadMode mode);

/// Zero (Cols/Rows) or identity (Square) block over slot set @p S.
PaddedBlock padded_zero(int other_dim, const IndexSet& S, int capacity, PadMode mode);

/// Re-slots a block onto the superset @p S_new; new slots receive zeros
/// (Cols/Rows) or identity (Square).  Slot order stays ascending.
///
/// @throws AlignmentError if the current occupied set is not a subset of S_new.
PaddedBlock reslot(const PaddedBlock& blk, const IndexSet& S_new);

/// Restricts a block to the subset @p S_new, discarding the other slots.
///
/// @throws AlignmentError if S_new is not a subset of the occupied set.
PaddedBlock restrict_slots(const PaddedBlock& blk, const IndexSet& S_new);

/// Padded-block sum with slot alignment by original index; the result lives
/// on the union of both slot sets.  Operands must share mode and capacity.
PaddedBlock padded_add(const PaddedBlock& a, const PaddedBlock& b, double beta = 1.0);

/// Cols x Rows product with columns of @p lhs aligned to rows of @p rhs by
/// original index.  Requires one slot set to contain the other; the product
/// then equals the unpadded product over the smaller set.
///
/// @throws AlignmentError on incompatible modes or non-nested slot sets.
Matrix padded_mul(const PaddedBlock& lhs, const PaddedBlock& rhs);

/// Products whose result is itself a padded block: Cols x Square -> Cols,
/// Square x Rows -> Rows, Square x Square -> Square.  The padded operand with
/// the larger slot set determines the result slots.
///
/// @throws AlignmentError on incompatible modes or non-nested slot sets.
PaddedBlock padded_mul_block(const PaddedBlock& lhs, const PaddedBlock& rhs);

/// Dense x Cols -> Cols (multiplication passes through the padding).
PaddedBlock padded_mul(const Matrix& lhs, const PaddedBlock& rhs);
/// Rows x Dense -> Rows.
PaddedBlock padded_mul(const PaddedBlock& lhs, const Matrix& rhs);

/// Unpadded matrix: selected columns / rows / principal block.
Matrix unpad(const PaddedBlock& blk);

// ---------------------------------------------------------------------------
// U' C U^T decomposition
// ---------------------------------------------------------------------------

/// Factors of N = U' C U^T.
struct UcuFactors {
  Matrix Uprime;  ///< capacity x 3|S2|
  Matrix C;       ///< 3|S2| x 3|S2|, block diagonal [I, N_{S2,S2}, I]
  Matrix U;       ///< capacity x 3|S2|
  int k = 0;      ///< |S2|
};

/// Decomposes a symmetric square padded block whose nonzeros are confined to
/// the blocks (S1,S2), (S2,S1) and (S2,S2), with S1 and S2 disjoint:
/// U' = [U1, U1, U2], C = diag(I, N_{S2,S2}, I), U = [U2, U1, U1] where U1 is
/// the slot indicator of S2 and U2 holds N_{S1,S2} on the S1 slots.  The
/// factors are assembled by copying only.
///
/// @param check_structure verify that N has no entries outside the permitted
///        blocks (the identity padding of empty slots is ignored).
/// @throws StructureViolation if the check fails.
/// @throws AlignmentError if S1, S2 overlap or are not occupied slots of N.
UcuFactors decompose_ucu(const PaddedBlock& N, const IndexSet& S1, const IndexSet& S2,
                         bool check_structure = true);

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

/// max_ij |M_ij| (0 for empty).
double max_abs(const Matrix& M);
/// Induced matrix 1-norm (maximum absolute column sum).
double norm1(const Matrix& M);

}  // namespace sketchlp
