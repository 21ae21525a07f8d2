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

/// @file oracle.hpp
/// @brief Brute-force reference computations.
///
/// Every function here recomputes its result from scratch with dense
/// algebra (no caching, no incremental state).  They are the ground truth
/// that the maintenance structure, the step logic and the solver are tested
/// against.

#include <cstdint>
#include <utility>
#include <vector>

#include "sketchlp/linalg.hpp"
#include "sketchlp/lp.hpp"
#include "sketchlp/potential.hpp"

namespace sketchlp {

/// P = sqrt(W) A^T (A W A^T)^{-1} A sqrt(W).
///
/// Verifies P^2 = P and P = P^T to 1e-8 (relative to max|P|).
/// @throws SingularMatrix if A W A^T is singular or the projection checks fail.
Matrix naive_projection(const Matrix& A, const Vector& w);

/// R^T R P(w_appr) f(h_appr).  @p R is the dense b x n sketch (identity for
/// unsketched queries).
Vector naive_query(const Matrix& A, const Vector& w_appr, const Vector& h_appr,
                   const ScalarFunction& f, const Matrix& R);

/// Sketched step from its definition.
struct ReferenceStep {
  Vector dx;        ///< hat delta_x
  Vector ds;        ///< hat delta_s
  Vector delta_mu;  ///< tilde delta_mu = tilde delta_t + tilde delta_Phi
};

/// Direct evaluation of tilde delta_t, tilde delta_Phi (0 when the potential
/// gradient vanishes), the projection at w = x/s, and the sketched
/// hat delta_x, hat delta_s with sketch @p R.
ReferenceStep reference_step(const Matrix& A, const Vector& x, const Vector& s, double t,
                             double t_new, double lambda, double eps, const Matrix& R);

/// Result of exhaustive vertex enumeration.
struct ExactLp {
  double opt = 0.0;
  Vector x;                      ///< an optimal vertex
  std::vector<Vector> vertices;  ///< all distinct feasible basic solutions
  double l1_diameter = 0.0;      ///< max ||v||_1 over the vertices
};

/// Maximum sizes accepted by tiny_lp_exact.
inline constexpr int kTinyLpMaxCols = 24;
inline constexpr int kTinyLpMaxRows = 12;

/// Solves a tiny standard-form LP by enumerating all d-column bases.
///
/// @throws InvalidDim beyond kTinyLpMaxCols / kTinyLpMaxRows.
/// @throws DegenerateInput if A does not have full row rank.
/// @throws Infeasible if no basic solution is feasible.
/// @throws Unbounded if the LP is feasible and an extreme ray improves c.
ExactLp tiny_lp_exact(const Matrix& A, const Vector& b, const Vector& c);

/// Random feasible, bounded LP with d rows and n columns.  The first row of
/// A is all ones (so the polytope has l1 diameter b_0), the other entries are
/// uniform in [-1, 1], b = A x_feas for x_feas uniform in [0.1, 1], and c is
/// uniform in [-1, 1].  R_bound is set to b_0.
LpInstance random_feasible_lp(int n, int d, std::uint64_t seed);

}  // namespace sketchlp
