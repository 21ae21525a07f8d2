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

#include <cmath>

#include "doctest.h"
#include "sketchlp/feasible.hpp"
#include "sketchlp/oracle.hpp"
#include "sketchlp/potential.hpp"
#include "sketchlp/projmaint.hpp"
#include "test_util.hpp"

using namespace sketchlp;
using namespace sketchlp::testing;

namespace {

constexpr double kEps = 0.02;
constexpr double kLambda = 4.0;

ProjMaint make_structure(const Matrix& A, FeasibleRole role, const Vector& w, const Vector& h, SketchMode mode,
                         std::uint64_t seed, const MaintParams& prm = {}) {
  const int n = static_cast<int>(A.cols());
  const ScalarFunction f =
      role == FeasibleRole::Time ? ScalarFunction::sqrt_fn() : ScalarFunction::grad_potential(kLambda);
  const int rows = mode == SketchMode::Identity ? n : std::max(1, n / 2);
  return ProjMaint(A, f, prm, w, h, SketchPool(mode, 200, rows, n, seed), FeasibleParams{role, kEps, kLambda});
}

/// c * A^T (A W A^T)^{-1} A sqrt(W) f(h), computed densely.
Vector dual_part(const Matrix& A, const Vector& w, const Vector& h, const ScalarFunction& f, double c) {
  const Matrix Mw = A.transpose() * mat_inverse(A * w.asDiagonal() * A.transpose()) * A;
  return c * (Mw * w.cwiseSqrt().cwiseProduct(f(h)));
}

}  // namespace

TEST_SUITE("scalar_c") {
  TEST_CASE("time role") {
    const double n = 16;
    const double t = 0.7;
    const double t_new = (1.0 - kEps / (3.0 * std::sqrt(n))) * t;
    CHECK(scalar_c(Vector::Ones(16), FeasibleRole::Time, t, t_new, kEps, kLambda) ==
          doctest::Approx(-kEps / (3.0 * std::sqrt(n))).epsilon(1e-12));
  }

  TEST_CASE("potential role on the path has no direction") {
    CHECK_THROWS_AS(scalar_c(Vector::Ones(5), FeasibleRole::Potential, 1.0, 0.99, kEps, kLambda), ZeroGradient);
  }

  TEST_CASE("potential role matches the formula at n = 1") {
    Vector h(1);
    h << 1.0 + std::log(2.0);
    const double t = 0.5, t_new = 0.49;
    const double grad = std::abs(1.0 * std::sinh(std::log(2.0)));  // lambda = 1: sinh(ln 2) = 0.75
    CHECK(grad == doctest::Approx(0.75));
    const double expect = -(kEps / 2.0) * t_new / (std::sqrt(t) * grad);
    CHECK(scalar_c(h, FeasibleRole::Potential, t, t_new, kEps, 1.0) == doctest::Approx(expect).epsilon(1e-13));
  }

  TEST_CASE("argument errors") {
    CHECK_THROWS_AS(scalar_c(Vector::Ones(2), FeasibleRole::Time, 0.0, 1.0, kEps, kLambda), InvalidDim);
    CHECK_THROWS_AS(scalar_c(Vector::Ones(2), FeasibleRole::None, 1.0, 1.0, kEps, kLambda), InvalidDim);
  }
}

TEST_SUITE("implicit accumulators") {
  TEST_CASE("fresh structure has zero accumulators and G = V M") {
    Rng rng(1);
    const Matrix A = random_matrix(rng, 3, 8);
    const Vector w = random_vector(rng, 8, 0.5, 2.0);
    const ProjMaint pm = make_structure(A, FeasibleRole::Time, w, w, SketchMode::Identity, 1);
    CHECK(max_abs(pm.implicit_x()) == 0.0);
    CHECK(max_abs(pm.implicit_s()) == 0.0);
    CHECK(rel_err(pm.G(), w.asDiagonal() * pm.M()) <= 1e-14);
    CHECK(pm.check_invariants().residual("G") <= 1e-10);
  }

  TEST_CASE("one query-only iteration adds c times the exact step parts") {
    Rng rng(2);
    const Matrix A = random_matrix(rng, 3, 8);
    const Vector w0 = random_vector(rng, 8, 0.5, 2.0);
    const Vector h0 = random_vector(rng, 8, 0.5, 2.0);
    ProjMaint pm = make_structure(A, FeasibleRole::Time, w0, h0, SketchMode::Identity, 2);
    pm.set_path(1.0, 0.99);
    Vector w = w0;
    w[3] *= 1.01;  // inside the approximation radius: no update fires
    const QueryOutput out = pm.update_query(w, h0);
    CHECK(out.k == 0);
    CHECK(out.kt == 0);
    CHECK(out.c == doctest::Approx(-0.01));
    const Vector s_part = dual_part(A, out.w_appr, out.h_appr, pm.f(), out.c);
    CHECK(rel_err(pm.implicit_s(), s_part) <= 1e-10);
    CHECK(rel_err(pm.implicit_x(), out.w_appr.cwiseProduct(s_part)) <= 1e-10);
  }

  TEST_CASE("an iteration that fires the matrix level satisfies the same identity") {
    Rng rng(3);
    const Matrix A = random_matrix(rng, 3, 8);
    const Vector w0 = random_vector(rng, 8, 0.5, 2.0);
    const Vector h0 = random_vector(rng, 8, 0.5, 2.0);
    ProjMaint pm = make_structure(A, FeasibleRole::Time, w0, h0, SketchMode::Identity, 3);
    pm.set_path(1.0, 0.98);
    const QueryOutput out = pm.update_query(2.0 * w0, h0);
    CHECK(out.matrix_level_fired);
    CHECK(out.k == 8);
    const Vector s_part = dual_part(A, out.w_appr, out.h_appr, pm.f(), out.c);
    CHECK(rel_err(pm.implicit_s(), s_part) <= 1e-10);
    CHECK(rel_err(pm.implicit_x(), out.w_appr.cwiseProduct(s_part)) <= 1e-10);
    CHECK(pm.check_invariants().ok(1e-8));
  }

  TEST_CASE("accumulated sums over a random sequence match the direct-sum oracle") {
    for (const FeasibleRole role : {FeasibleRole::Time, FeasibleRole::Potential}) {
      for (const SketchMode mode : {SketchMode::Identity, SketchMode::Srht}) {
        Rng rng(4);
        const int n = 12;
        const Matrix A = random_matrix(rng, 5, n);
        Vector w = random_vector(rng, n, 0.5, 2.0);
        Vector h = random_vector(rng, n, 0.8, 1.2);
        MaintParams prm;
        prm.thresh_k_override = 6;
        prm.thresh_kt_override = 2;
        ProjMaint pm = make_structure(A, role, w, h, mode, 4, prm);
        Vector sum_x = Vector::Zero(n), sum_s = Vector::Zero(n);
        double t = 1.0;
        for (int it = 0; it < 40; ++it) {
          const double t_new = 0.995 * t;
          pm.set_path(t, t_new);
          for (int i = 0; i < n; ++i) {
            if (uniform01(rng) < 0.25) w[i] *= uniform_real(rng, 0.9, 1.1);
            if (uniform01(rng) < 0.25) h[i] *= uniform_real(rng, 0.97, 1.03);
          }
          const QueryOutput out = pm.update_query(w, h);
          const Vector s_part = dual_part(A, out.w_appr, out.h_appr, pm.f(), out.c);
          sum_s += s_part;
          sum_x += out.w_appr.cwiseProduct(s_part);
          const double scale = std::max(1.0, max_abs(sum_s));
          CHECK(max_abs(pm.implicit_s() - sum_s) <= 1e-8 * scale);
          CHECK(max_abs(pm.implicit_x() - sum_x) <= 1e-8 * std::max(1.0, max_abs(sum_x)));
          CHECK(pm.check_invariants().residual("G") <= 1e-8);
          t = t_new;
        }
        CHECK(pm.counters().partial_matrix_updates + pm.counters().matrix_updates > 0);
      }
    }
  }

  TEST_CASE("reset_implicit replaces the accumulated values") {
    Rng rng(5);
    const Matrix A = random_matrix(rng, 2, 6);
    const Vector w = random_vector(rng, 6, 0.5, 2.0);
    ProjMaint pm = make_structure(A, FeasibleRole::Time, w, w, SketchMode::Identity, 5);
    pm.set_path(1.0, 0.9);
    (void)pm.update_query(w, w);
    const Vector xp = random_vector(rng, 6);
    const Vector sp = random_vector(rng, 6);
    pm.reset_implicit(xp, sp);
    CHECK(max_abs(pm.implicit_x() - xp) <= 1e-15);
    CHECK(max_abs(pm.implicit_s() - sp) <= 1e-15);
  }
}

TEST_SUITE("materialize and make_feasible") {
  struct Setup {
    Matrix A;
    Vector b;
    FeasibleDriverState st;
    ProjMaint mp_t;
    ProjMaint mp_phi;
  };

  Setup make_setup(std::uint64_t seed, SketchMode mode) {
    Rng rng(seed);
    const int n = 10;
    Matrix A = random_matrix(rng, 4, n);
    FeasibleDriverState st;
    st.x = random_vector(rng, n, 0.5, 2.0);
    st.s = random_vector(rng, n, 0.5, 2.0);
    st.xbar = st.x;
    st.sbar = st.s;
    st.w_old = st.x.cwiseQuotient(st.s);
    const Vector w = st.w_old;
    const Vector mu = st.x.cwiseProduct(st.s);
    Vector b = A * st.x;
    ProjMaint t = make_structure(A, FeasibleRole::Time, w, mu, mode, seed);
    ProjMaint p = make_structure(A, FeasibleRole::Potential, w, mu, mode, seed + 1);
    return {std::move(A), std::move(b), std::move(st), std::move(t), std::move(p)};
  }

  TEST_CASE("right after initialisation materialize returns the explicit parts") {
    Setup su = make_setup(6, SketchMode::Identity);
    const Materialized m = materialize(su.st, su.mp_t, su.mp_phi);
    CHECK(max_abs(m.x - su.st.x) == 0.0);
    CHECK(max_abs(m.s - su.st.s) == 0.0);
  }

  TEST_CASE("materialized iterates follow the exact steps and stay feasible") {
    for (const SketchMode mode : {SketchMode::Identity, SketchMode::Srht}) {
      Setup su = make_setup(7, mode);
      Rng rng(8);
      Vector x_exact = su.st.x, s_exact = su.st.s;
      double t = 1.0;
      Vector xbar = su.st.x, sbar = su.st.s;
      for (int it = 0; it < 25; ++it) {
        const double t_new = 0.99 * t;
        su.mp_t.set_path(t, t_new);
        su.mp_phi.set_path(t, t_new);
        // Drive the structures with a slowly drifting (w, mu / t).
        for (int i = 0; i < 10; ++i) {
          xbar[i] *= uniform_real(rng, 0.98, 1.02);
          sbar[i] *= uniform_real(rng, 0.98, 1.02);
        }
        const Vector w = xbar.cwiseQuotient(sbar);
        const Vector h = xbar.cwiseProduct(sbar) / t;
        const QueryOutput ot = su.mp_t.update_query(w, h);
        const QueryOutput op = su.mp_phi.update_query(w, h);
        su.st.x += ot.q_x + op.q_x;
        // Exact step of each structure: c sqrt(W) (I - P) f(h), c P f(h) / sqrt(W).
        for (const QueryOutput* o : {&ot, &op}) {
          const ScalarFunction& f = o == &ot ? su.mp_t.f() : su.mp_phi.f();
          const Matrix P = naive_projection(su.A, o->w_appr);
          const Vector fh = f(o->h_appr);
          const Vector sw = o->w_appr.cwiseSqrt();
          x_exact += o->c * sw.cwiseProduct(fh - P * fh);
          s_exact += o->c * (P * fh).cwiseQuotient(sw);
        }
        const Materialized m = materialize(su.st, su.mp_t, su.mp_phi);
        CHECK(max_abs(m.x - x_exact) <= 1e-8 * max_abs(x_exact));
        CHECK(max_abs(m.s - s_exact) <= 1e-8 * max_abs(s_exact));
        const double scale = norm1(su.A) * m.x.lpNorm<1>() + su.b.lpNorm<1>();
        CHECK((su.A * m.x - su.b).lpNorm<1>() <= 1e-8 * scale);
        t = t_new;
      }
    }
  }

  TEST_CASE("make_feasible: unchanged weights are a no-op") {
    Setup su = make_setup(9, SketchMode::Identity);
    const Vector xbar = su.st.xbar;
    CHECK(make_feasible(su.st, su.st.w_old, su.mp_t, su.mp_phi).empty());
    CHECK(max_abs(su.st.xbar - xbar) == 0.0);
  }

  TEST_CASE("make_feasible: a tripled coordinate is reset to the materialized value") {
    Setup su = make_setup(10, SketchMode::Identity);
    su.mp_t.set_path(1.0, 0.99);
    su.mp_phi.set_path(1.0, 0.99);
    const Vector mu = su.st.x.cwiseProduct(su.st.s);
    Vector h = mu;
    h[0] *= 1.05;  // gives the potential structure a direction
    const QueryOutput ot = su.mp_t.update_query(su.st.w_old, h);
    const QueryOutput op = su.mp_phi.update_query(su.st.w_old, h);
    su.st.x += ot.q_x + op.q_x;
    su.st.xbar[7] = -123.0;  // stale value that must be overwritten
    Vector w_appr = su.st.w_old;
    w_appr[7] *= 3.0;
    const Vector w_old_before = su.st.w_old;
    const IndexSet S_hat = make_feasible(su.st, w_appr, su.mp_t, su.mp_phi);
    CHECK(S_hat == IndexSet{7});
    const Materialized m = materialize(su.st, su.mp_t, su.mp_phi);
    CHECK(su.st.xbar[7] == m.x[7]);
    CHECK(su.st.sbar[7] == m.s[7]);
    CHECK(su.st.w_old[7] == w_appr[7]);
    CHECK(su.st.w_old[3] == w_old_before[3]);
  }

  TEST_CASE("make_feasible: the half-distance rule is strict") {
    Setup su = make_setup(11, SketchMode::Identity);
    Vector w_appr = su.st.w_old;
    w_appr[2] *= 1.45;  // less than half away: kept
    w_appr[4] *= 0.49;  // more than half away: reset
    CHECK(make_feasible(su.st, w_appr, su.mp_t, su.mp_phi) == IndexSet{4});
    CHECK_THROWS_AS(make_feasible(su.st, Vector::Ones(3), su.mp_t, su.mp_phi), DimMismatch);
  }
}
