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

#include "sketchlp/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sketchlp/random.hpp"

namespace sketchlp {

namespace {

/// Calls @p visit with every k-subset of {0..n-1} in lexicographic order.
template <class Visit>
void for_each_subset(int n, int k, Visit&& visit) {
  if (k > n || k < 0) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    visit(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// Basic solution for column subset @p basis of @p A with right-hand side
/// @p rhs, or false if the basis matrix is singular.
bool basic_solution(const Matrix& A, const Vector& rhs, const std::vector<int>& basis, Vector& x) {
  const Eigen::Index m = A.rows();
  Matrix AB(m, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) AB.col(static_cast<Eigen::Index>(j)) = A.col(basis[j]);
  Eigen::FullPivLU<Matrix> lu(AB);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) return false;
  const Vector xB = lu.solve(rhs);
  x = Vector::Zero(A.cols());
  for (std::size_t j = 0; j < basis.size(); ++j) x[basis[j]] = xB[static_cast<Eigen::Index>(j)];
  return true;
}

}  // namespace

Matrix naive_projection(const Matrix& A, const Vector& w) {
  if (w.size() != A.cols()) throw DimMismatch("naive_projection: |w| != number of columns of A");
  const Vector sw = w.array().sqrt().matrix();
  const Matrix AW = A * w.asDiagonal();
  const Matrix K = AW * A.transpose();
  const Matrix As = A * sw.asDiagonal();
  const Matrix P = As.transpose() * lu_solve(K, As);
  const double scale = std::max(max_abs(P), 1.0);
  if (max_abs(P * P - P) > 1e-8 * scale || max_abs(P - P.transpose()) > 1e-8 * scale) {
    throw SingularMatrix("projection check failed (A W A^T too ill-conditioned)");
  }
  return P;
}

Vector naive_query(const Matrix& A, const Vector& w_appr, const Vector& h_appr,
                   const ScalarFunction& f, const Matrix& R) {
  if (R.cols() != A.cols()) throw DimMismatch("naive_query: sketch width != n");
  const Matrix P = naive_projection(A, w_appr);
  return R.transpose() * (R * (P * f(h_appr)));
}

ReferenceStep reference_step(const Matrix& A, const Vector& x, const Vector& s, double t,
                             double t_new, double lambda, double eps, const Matrix& R) {
  const Vector mu = x.cwiseProduct(s);
  const Vector w = x.cwiseQuotient(s);
  ReferenceStep out;
  const Vector delta_t = (t_new / t - 1.0) * mu;
  Vector grad(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) grad[i] = lambda * std::sinh(lambda * (mu[i] / t - 1.0));
  const double gnorm = grad.norm();
  const Vector delta_phi = gnorm < 1e-14 ? Vector::Zero(mu.size()).eval() : (-(eps / 2.0) * t_new / gnorm * grad).eval();
  out.delta_mu = delta_t + delta_phi;
  const Vector smu = mu.array().sqrt().matrix();
  const Vector scaled = out.delta_mu.cwiseQuotient(smu);
  const Matrix P = naive_projection(A, w);
  const Vector proj = R.transpose() * (R * (P * scaled));
  out.dx = x.cwiseQuotient(smu).cwiseProduct(scaled - proj);
  out.ds = s.cwiseQuotient(smu).cwiseProduct(proj);
  return out;
}

ExactLp tiny_lp_exact(const Matrix& A, const Vector& b, const Vector& c) {
  const int d = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (n > kTinyLpMaxCols || d > kTinyLpMaxRows) {
    throw InvalidDim("tiny_lp_exact is limited to n <= 24 and d <= 12");
  }
  if (b.size() != d || c.size() != n) throw DimMismatch("tiny_lp_exact: inconsistent LP shapes");
  if (d > n || Eigen::FullPivLU<Matrix>(A).rank() < d) {
    throw DegenerateInput("tiny_lp_exact requires A with full row rank");
  }
  const double tol = 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff());

  ExactLp out;
  out.opt = std::numeric_limits<double>::infinity();
  for_each_subset(n, d, [&](const std::vector<int>& basis) {
    Vector x;
    if (!basic_solution(A, b, basis, x)) return;
    if (x.minCoeff() < -tol) return;
    x = x.cwiseMax(0.0);
    for (const Vector& v : out.vertices) {
      if ((v - x).cwiseAbs().maxCoeff() <= tol) return;
    }
    out.vertices.push_back(x);
    out.l1_diameter = std::max(out.l1_diameter, x.lpNorm<1>());
    const double obj = c.dot(x);
    if (obj < out.opt) {
      out.opt = obj;
      out.x = x;
    }
  });
  if (out.vertices.empty()) throw Infeasible("no feasible basic solution");

  // Extreme rays of {x >= 0 : A x = 0} are the basic solutions of
  // [A; 1^T] r = [0; 1]; the LP is unbounded iff one of them descends.
  if (d + 1 <= n) {
    Matrix Ar(d + 1, n);
    Ar.topRows(d) = A;
    Ar.row(d).setOnes();
    Vector rhs = Vector::Zero(d + 1);
    rhs[d] = 1.0;
    bool unbounded = false;
    for_each_subset(n, d + 1, [&](const std::vector<int>& basis) {
      if (unbounded) return;
      Vector r;
      if (!basic_solution(Ar, rhs, basis, r)) return;
      if (r.minCoeff() < -1e-9) return;
      if (c.dot(r) < -1e-9) unbounded = true;
    });
    if (unbounded) throw Unbounded("an extreme ray decreases the objective");
  }
  return out;
}

LpInstance random_feasible_lp(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1 || d > n) throw InvalidDim("random_feasible_lp needs 1 <= d <= n");
  Rng rng(seed);
  LpInstance lp;
  lp.name = "random_n" + std::to_string(n) + "_d" + std::to_string(d) + "_s" + std::to_string(seed);
  lp.A.resize(d, n);
  lp.A.row(0).setOnes();
  for (int i = 1; i < d; ++i) {
    for (int j = 0; j < n; ++j) lp.A(i, j) = uniform_real(rng, -1.0, 1.0);
  }
  Vector x(n);
  for (int j = 0; j < n; ++j) x[j] = uniform_real(rng, 0.1, 1.0);
  lp.b = lp.A * x;
  lp.c.resize(n);
  for (int j = 0; j < n; ++j) lp.c[j] = uniform_real(rng, -1.0, 1.0);
  lp.R_bound = lp.b[0];
  return lp;
}

}  // namespace sketchlp
