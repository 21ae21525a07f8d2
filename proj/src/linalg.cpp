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

#include "sketchlp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

namespace sketchlp {

// ---------------------------------------------------------------------------
// IndexSet
// ---------------------------------------------------------------------------

IndexSet::IndexSet(std::initializer_list<int> idx) : idx_(idx) {
  std::sort(idx_.begin(), idx_.end());
  idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
}

IndexSet IndexSet::from_unsorted(std::vector<int> idx) {
  IndexSet s;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  s.idx_ = std::move(idx);
  return s;
}

IndexSet IndexSet::support(const Vector& v) {
  IndexSet s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) s.idx_.push_back(static_cast<int>(i));
  }
  return s;
}

IndexSet IndexSet::differ(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimMismatch("IndexSet::differ: vector sizes differ");
  IndexSet s;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) s.idx_.push_back(static_cast<int>(i));
  }
  return s;
}

IndexSet IndexSet::range(int n) {
  IndexSet s;
  s.idx_.resize(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) s.idx_[static_cast<std::size_t>(i)] = i;
  return s;
}

bool IndexSet::contains(int i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

int IndexSet::position(int i) const {
  auto it = std::lower_bound(idx_.begin(), idx_.end(), i);
  if (it == idx_.end() || *it != i) return -1;
  return static_cast<int>(it - idx_.begin());
}

bool IndexSet::subset_of(const IndexSet& other) const {
  return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
}

void IndexSet::validate(int n) const {
  for (std::size_t k = 0; k < idx_.size(); ++k) {
    if (idx_[k] < 0 || idx_[k] >= n) {
      throw DimMismatch("IndexSet: index " + std::to_string(idx_[k]) + " outside [0, " +
                        std::to_string(n) + ")");
    }
    if (k > 0 && idx_[k] <= idx_[k - 1]) throw DimMismatch("IndexSet: not strictly increasing");
  }
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_unsorted(std::move(out));
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_unsorted(std::move(out));
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_unsorted(std::move(out));
}

Matrix select_cols(const Matrix& M, const IndexSet& S) {
  Matrix out(M.rows(), static_cast<Eigen::Index>(S.size()));
  for (std::size_t k = 0; k < S.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = M.col(S[k]);
  return out;
}

Matrix select_rows(const Matrix& M, const IndexSet& S) {
  Matrix out(static_cast<Eigen::Index>(S.size()), M.cols());
  for (std::size_t k = 0; k < S.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = M.row(S[k]);
  return out;
}

Matrix select_block(const Matrix& M, const IndexSet& S) {
  const auto k = static_cast<Eigen::Index>(S.size());
  Matrix out(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) out(i, j) = M(S[static_cast<std::size_t>(i)], S[static_cast<std::size_t>(j)]);
  }
  return out;
}

Vector select(const Vector& v, const IndexSet& S) {
  Vector out(static_cast<Eigen::Index>(S.size()));
  for (std::size_t k = 0; k < S.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[S[k]];
  return out;
}

// ---------------------------------------------------------------------------
// Inverse and Woodbury
// ---------------------------------------------------------------------------

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

double norm1(const Matrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().colwise().sum().maxCoeff();
}

namespace {

/// LU factorisation of the equilibrated matrix diag(r) M diag(c), where r
/// scales every row to unit max-norm and c then does the same for columns.
/// Equilibration makes the relative pivot guard insensitive to the wide
/// diagonal scalings that arise from interior-point weights while still
/// rejecting numerically rank-deficient input.
struct GuardedLu {
  Eigen::PartialPivLU<Matrix> lu;
  Vector r;
  Vector c;
};

GuardedLu guarded_lu(const Matrix& M, const char* who) {
  if (M.rows() != M.cols()) {
    throw DimMismatch(std::string(who) + ": matrix is " + std::to_string(M.rows()) + "x" +
                      std::to_string(M.cols()) + ", expected square");
  }
  if (!M.allFinite()) throw SingularMatrix(std::string(who) + ": non-finite entries");
  if (max_abs(M) == 0.0) throw SingularMatrix(std::string(who) + ": zero matrix");
  GuardedLu g;
  g.r = M.cwiseAbs().rowwise().maxCoeff();
  if (g.r.minCoeff() == 0.0) throw SingularMatrix(std::string(who) + ": zero row");
  g.r = g.r.cwiseInverse();
  const Matrix Mr = g.r.asDiagonal() * M;
  g.c = Mr.cwiseAbs().colwise().maxCoeff().transpose();
  if (g.c.minCoeff() == 0.0) throw SingularMatrix(std::string(who) + ": zero column");
  g.c = g.c.cwiseInverse();
  const Matrix Ms = Mr * g.c.asDiagonal();
  g.lu.compute(Ms);
  const double scale = max_abs(Ms);
  const Vector piv = g.lu.matrixLU().diagonal();
  for (Eigen::Index i = 0; i < piv.size(); ++i) {
    if (std::abs(piv[i]) < kSingularPivotRel * scale) {
      throw SingularMatrix(std::string(who) + ": pivot " + std::to_string(i) + " of the equilibrated matrix has magnitude " +
                           std::to_string(std::abs(piv[i])) + " below threshold");
    }
  }
  return g;
}

}  // namespace

Matrix mat_inverse(const Matrix& M) {
  if (M.rows() == 0 && M.cols() == 0) return Matrix(0, 0);
  const GuardedLu g = guarded_lu(M, "mat_inverse");
  return g.c.asDiagonal() * g.lu.inverse() * g.r.asDiagonal();
}

Matrix lu_solve(const Matrix& M, const Matrix& B) {
  if (M.rows() != B.rows()) throw DimMismatch("lu_solve: right-hand side row count mismatch");
  if (M.rows() == 0) return Matrix(0, B.cols());
  const GuardedLu g = guarded_lu(M, "lu_solve");
  return g.c.asDiagonal() * g.lu.solve(g.r.asDiagonal() * B);
}

Matrix woodbury(const Matrix& Minv, const Matrix& U, const Matrix& C, const Matrix& V) {
  const Eigen::Index n = Minv.rows();
  const Eigen::Index k = C.rows();
  if (Minv.cols() != n || U.rows() != n || U.cols() != k || C.cols() != k || V.rows() != k ||
      V.cols() != n) {
    throw DimMismatch("woodbury: non-conforming shapes");
  }
  if (k == 0) return Minv;
  const Matrix Cinv = mat_inverse(C);
  const Matrix MinvU = Minv * U;
  const Matrix VMinv = V * Minv;
  const Matrix cap = Cinv + V * MinvU;
  return Minv - MinvU * lu_solve(cap, VMinv);
}

// ---------------------------------------------------------------------------
// Padded blocks
// ---------------------------------------------------------------------------

std::vector<int> PaddedBlock::slots() const {
  std::vector<int> out(static_cast<std::size_t>(capacity), kEmptySlot);
  for (std::size_t k = 0; k < occupied.size(); ++k) out[k] = occupied[k];
  return out;
}

namespace {

void check_capacity(const IndexSet& S, int capacity) {
  if (static_cast<int>(S.size()) > capacity) {
    throw CapacityExceeded("index set of size " + std::to_string(S.size()) +
                           " exceeds capacity " + std::to_string(capacity));
  }
}

/// Maps slot k of @p from to slot position in @p to (both ascending).
std::vector<int> slot_map(const IndexSet& from, const IndexSet& to) {
  std::vector<int> m(from.size());
  for (std::size_t k = 0; k < from.size(); ++k) {
    m[k] = to.position(from[k]);
    if (m[k] < 0) throw AlignmentError("slot set is not contained in the target slot set");
  }
  return m;
}

}  // namespace

PaddedBlock padded_zero(int other_dim, const IndexSet& S, int capacity, PadMode mode) {
  check_capacity(S, capacity);
  PaddedBlock blk;
  blk.mode = mode;
  blk.capacity = capacity;
  blk.occupied = S;
  switch (mode) {
    case PadMode::Cols:
      blk.payload = Matrix::Zero(other_dim, capacity);
      break;
    case PadMode::Rows:
      blk.payload = Matrix::Zero(capacity, other_dim);
      break;
    case PadMode::Square:
      blk.payload = Matrix::Identity(capacity, capacity);
      break;
  }
  return blk;
}

PaddedBlock pad(const Matrix& M, const IndexSet& S, int capacity, PadMode mode) {
  check_capacity(S, capacity);
  const auto k = static_cast<Eigen::Index>(S.size());
  switch (mode) {
    case PadMode::Cols: {
      S.validate(static_cast<int>(M.cols()));
      PaddedBlock blk = padded_zero(static_cast<int>(M.rows()), S, capacity, mode);
      blk.payload.leftCols(k) = select_cols(M, S);
      return blk;
    }
    case PadMode::Rows: {
      S.validate(static_cast<int>(M.rows()));
      PaddedBlock blk = padded_zero(static_cast<int>(M.cols()), S, capacity, mode);
      blk.payload.topRows(k) = select_rows(M, S);
      return blk;
    }
    case PadMode::Square: {
      if (M.rows() != k || M.cols() != k) {
        throw DimMismatch("pad(square): matrix must be |S| x |S|");
      }
      PaddedBlock blk = padded_zero(0, S, capacity, mode);
      blk.payload.topLeftCorner(k, k) = M;
      return blk;
    }
  }
  throw AlignmentError("pad: unknown mode");
}

PaddedBlock reslot(const PaddedBlock& blk, const IndexSet& S_new) {
  if (blk.occupied == S_new) return blk;
  check_capacity(S_new, blk.capacity);
  const std::vector<int> m = slot_map(blk.occupied, S_new);
  const int other = blk.mode == PadMode::Cols   ? static_cast<int>(blk.payload.rows())
                    : blk.mode == PadMode::Rows ? static_cast<int>(blk.payload.cols())
                                                : 0;
  PaddedBlock out = padded_zero(other, S_new, blk.capacity, blk.mode);
  const std::size_t k = blk.occupied.size();
  switch (blk.mode) {
    case PadMode::Cols:
      for (std::size_t a = 0; a < k; ++a) out.payload.col(m[a]) = blk.payload.col(static_cast<Eigen::Index>(a));
      break;
    case PadMode::Rows:
      for (std::size_t a = 0; a < k; ++a) out.payload.row(m[a]) = blk.payload.row(static_cast<Eigen::Index>(a));
      break;
    case PadMode::Square:
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          out.payload(m[a], m[b]) = blk.payload(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
      break;
  }
  return out;
}

PaddedBlock restrict_slots(const PaddedBlock& blk, const IndexSet& S_new) {
  if (blk.occupied == S_new) return blk;
  const std::vector<int> m = slot_map(S_new, blk.occupied);
  const int other = blk.mode == PadMode::Cols   ? static_cast<int>(blk.payload.rows())
                    : blk.mode == PadMode::Rows ? static_cast<int>(blk.payload.cols())
                                                : 0;
  PaddedBlock out = padded_zero(other, S_new, blk.capacity, blk.mode);
  const std::size_t k = S_new.size();
  switch (blk.mode) {
    case PadMode::Cols:
      for (std::size_t a = 0; a < k; ++a) out.payload.col(static_cast<Eigen::Index>(a)) = blk.payload.col(m[a]);
      break;
    case PadMode::Rows:
      for (std::size_t a = 0; a < k; ++a) out.payload.row(static_cast<Eigen::Index>(a)) = blk.payload.row(m[a]);
      break;
    case PadMode::Square:
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          out.payload(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = blk.payload(m[a], m[b]);
        }
      }
      break;
  }
  return out;
}

PaddedBlock padded_add(const PaddedBlock& a, const PaddedBlock& b, double beta) {
  if (a.mode != b.mode || a.capacity != b.capacity) {
    throw AlignmentError("padded_add: operands differ in mode or capacity");
  }
  const IndexSet U = set_union(a.occupied, b.occupied);
  PaddedBlock ra = reslot(a, U);
  const PaddedBlock rb = reslot(b, U);
  if (ra.payload.rows() != rb.payload.rows() || ra.payload.cols() != rb.payload.cols()) {
    throw DimMismatch("padded_add: payload shapes differ");
  }
  ra.payload += beta * rb.payload;
  return ra;
}

Matrix padded_mul(const PaddedBlock& lhs, const PaddedBlock& rhs) {
  if (lhs.mode != PadMode::Cols || rhs.mode != PadMode::Rows) {
    throw AlignmentError("padded_mul: expected Cols x Rows operands");
  }
  const bool l_in_r = lhs.occupied.subset_of(rhs.occupied);
  const bool r_in_l = rhs.occupied.subset_of(lhs.occupied);
  if (!l_in_r && !r_in_l) throw AlignmentError("padded_mul: slot sets are not nested");
  const IndexSet& common = l_in_r ? lhs.occupied : rhs.occupied;
  Matrix out = Matrix::Zero(lhs.payload.rows(), rhs.payload.cols());
  for (int i : common) out.noalias() += lhs.payload.col(lhs.slot_of(i)) * rhs.payload.row(rhs.slot_of(i));
  return out;
}

PaddedBlock padded_mul_block(const PaddedBlock& lhs, const PaddedBlock& rhs) {
  if (lhs.capacity != rhs.capacity) throw AlignmentError("padded_mul_block: capacity mismatch");
  if (lhs.mode == PadMode::Cols && rhs.mode == PadMode::Square) {
    if (!lhs.occupied.subset_of(rhs.occupied)) {
      throw AlignmentError("padded_mul_block: column slots must lie within the square's slots");
    }
    PaddedBlock out = reslot(lhs, rhs.occupied);
    out.payload = out.payload * rhs.payload;
    return out;
  }
  if (lhs.mode == PadMode::Square && rhs.mode == PadMode::Rows) {
    if (!rhs.occupied.subset_of(lhs.occupied)) {
      throw AlignmentError("padded_mul_block: row slots must lie within the square's slots");
    }
    PaddedBlock out = reslot(rhs, lhs.occupied);
    out.payload = lhs.payload * out.payload;
    return out;
  }
  if (lhs.mode == PadMode::Square && rhs.mode == PadMode::Square) {
    if (lhs.occupied.subset_of(rhs.occupied)) {
      PaddedBlock out = reslot(lhs, rhs.occupied);
      out.payload = out.payload * rhs.payload;
      return out;
    }
    if (rhs.occupied.subset_of(lhs.occupied)) {
      PaddedBlock out = reslot(rhs, lhs.occupied);
      out.payload = lhs.payload * out.payload;
      return out;
    }
    throw AlignmentError("padded_mul_block: square slot sets are not nested");
  }
  throw AlignmentError("padded_mul_block: unsupported operand modes");
}

PaddedBlock padded_mul(const Matrix& lhs, const PaddedBlock& rhs) {
  if (rhs.mode != PadMode::Cols) throw AlignmentError("padded_mul(dense, block): expected Cols block");
  if (lhs.cols() != rhs.payload.rows()) throw DimMismatch("padded_mul(dense, block): shape mismatch");
  PaddedBlock out = rhs;
  out.payload = lhs * rhs.payload;
  return out;
}

PaddedBlock padded_mul(const PaddedBlock& lhs, const Matrix& rhs) {
  if (lhs.mode != PadMode::Rows) throw AlignmentError("padded_mul(block, dense): expected Rows block");
  if (lhs.payload.cols() != rhs.rows()) throw DimMismatch("padded_mul(block, dense): shape mismatch");
  PaddedBlock out = lhs;
  out.payload = lhs.payload * rhs;
  return out;
}

Matrix unpad(const PaddedBlock& blk) {
  const auto k = static_cast<Eigen::Index>(blk.occupied.size());
  switch (blk.mode) {
    case PadMode::Cols:
      return blk.payload.leftCols(k);
    case PadMode::Rows:
      return blk.payload.topRows(k);
    case PadMode::Square:
      return blk.payload.topLeftCorner(k, k);
  }
  return Matrix();
}

// ---------------------------------------------------------------------------
// U' C U^T decomposition
// ---------------------------------------------------------------------------

UcuFactors decompose_ucu(const PaddedBlock& N, const IndexSet& S1, const IndexSet& S2,
                         bool check_structure) {
  if (N.mode != PadMode::Square) throw AlignmentError("decompose_ucu: expected a square block");
  if (!set_intersection(S1, S2).empty()) throw AlignmentError("decompose_ucu: S1 and S2 overlap");
  if (!S1.subset_of(N.occupied) || !S2.subset_of(N.occupied)) {
    throw AlignmentError("decompose_ucu: S1/S2 must be occupied slots of N");
  }
  const int cap = N.capacity;
  const auto k = static_cast<Eigen::Index>(S2.size());

  if (check_structure) {
    const std::vector<int> slots = N.slots();
    for (int q = 0; q < cap; ++q) {
      const int jq = slots[static_cast<std::size_t>(q)];
      const bool q2 = jq != kEmptySlot && S2.contains(jq);
      const bool q1 = jq != kEmptySlot && S1.contains(jq);
      for (int p = 0; p < cap; ++p) {
        const int ip = slots[static_cast<std::size_t>(p)];
        if (ip == kEmptySlot && jq == kEmptySlot && p == q) continue;  // identity padding
        const bool p2 = ip != kEmptySlot && S2.contains(ip);
        const bool p1 = ip != kEmptySlot && S1.contains(ip);
        const bool allowed = (p1 && q2) || (p2 && q1) || (p2 && q2);
        if (!allowed && N.payload(p, q) != 0.0) {
          throw StructureViolation("decompose_ucu: nonzero at slots (" + std::to_string(p) + ", " +
                                   std::to_string(q) + ") outside the permitted blocks");
        }
      }
    }
  }

  UcuFactors f;
  f.k = static_cast<int>(k);
  Matrix U1 = Matrix::Zero(cap, k);
  Matrix U2 = Matrix::Zero(cap, k);
  Matrix N22(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const int sj = N.slot_of(S2[static_cast<std::size_t>(j)]);
    U1(sj, j) = 1.0;
    for (int i : S1) {
      const int si = N.slot_of(i);
      U2(si, j) = N.payload(si, sj);
    }
    for (Eigen::Index i = 0; i < k; ++i) N22(i, j) = N.payload(N.slot_of(S2[static_cast<std::size_t>(i)]), sj);
  }
  f.Uprime.resize(cap, 3 * k);
  f.Uprime << U1, U1, U2;
  f.U.resize(cap, 3 * k);
  f.U << U2, U1, U1;
  f.C = Matrix::Zero(3 * k, 3 * k);
  f.C.topLeftCorner(k, k).setIdentity();
  f.C.block(k, k, k, k) = N22;
  f.C.bottomRightCorner(k, k).setIdentity();
  return f;
}

}  // namespace sketchlp
