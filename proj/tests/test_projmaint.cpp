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
#include "sketchlp/oracle.hpp"
#include "sketchlp/projmaint.hpp"
#include "sketchlp/walk.hpp"
#include "test_util.hpp"

using namespace sketchlp;
using namespace sketchlp::testing;

namespace {

constexpr double kInvTol = 1e-8;

struct Fixture {
  Matrix A;
  Vector w0, h0;
  ProjMaint pm;
};

MaintParams params_with(int k = 0, int kt = 0) {
  MaintParams p;
  p.thresh_k_override = k;
  p.thresh_kt_override = kt;
  return p;
}

Fixture make(int n, int d, std::uint64_t seed, const MaintParams& p = {}, ScalarFunction f = ScalarFunction::sqrt_fn(),
             SketchMode mode = SketchMode::Identity, int L = 64) {
  Rng rng(seed);
  Matrix A = random_matrix(rng, d, n);
  Vector w0 = random_vector(rng, n, 0.5, 2.0);
  Vector h0 = random_vector(rng, n, 0.5, 2.0);
  const int rows = mode == SketchMode::Identity ? n : std::max(1, n / 2);
  ProjMaint pm(A, f, p, w0, h0, SketchPool(mode, L, rows, n, mix_seed(seed, 99)));
  return {std::move(A), std::move(w0), std::move(h0), std::move(pm)};
}

double query_error(const Fixture& fx, ProjMaint& pm, const Vector& w, const Vector& h) {
  const int l = pm.pool().cursor();
  const Matrix R = pm.pool().op(l).to_dense();
  const Vector r = pm.query(w, h);
  const Vector ref = naive_query(fx.A, w, h, pm.f(), R);
  return max_abs(r - ref) / std::max(1.0, max_abs(ref));
}

/// Moves coordinate set `idx` of `base` by the factor `fac`.
Vector moved(const Vector& base, const std::vector<int>& idx, double fac) {
  Vector w = base;
  for (int i : idx) w[i] *= fac;
  return w;
}

}  // namespace

TEST_SUITE("psi") {
  TEST_CASE("knots and plateau") {
    const double e = 0.05;
    CHECK(psi(0.0, e) == 0.0);
    CHECK(psi(e, e) == doctest::Approx(e / 2));
    CHECK(psi(2 * e, e) == doctest::Approx(e));
    CHECK(psi(5 * e, e) == e);
    CHECK(psi(-0.7 * e, e) == doctest::Approx(psi(0.7 * e, e)));
    CHECK(psi(1.5 * e, e) == doctest::Approx(e - 0.25 * e * e / (2 * e)));
  }

  TEST_CASE("continuous and nondecreasing in |x|") {
    const double e = 0.03;
    double prev = 0.0;
    for (int i = 1; i <= 400; ++i) {
      const double x = 3 * e * i / 400.0;
      const double v = psi(x, e);
      CHECK(v >= prev - 1e-18);
      CHECK(v - prev <= 2 * e * (3 * e / 400.0) / e + 1e-15);  // Lipschitz with constant <= 2
      prev = v;
    }
  }
}

TEST_SUITE("soft_threshold") {
  TEST_CASE("zero scores leave v unchanged") {
    const Vector v = Vector::LinSpaced(5, 1, 5);
    const SoftThresholdResult r = soft_threshold(Vector::Zero(5), 2 * v, v, 0.1, 2);
    CHECK(r.k == 0);
    CHECK(max_abs(r.v_new - v) == 0.0);
  }

  TEST_CASE("geometric growth with base-2 decay factor") {
    Vector y(8);
    y << 0.5, 0.4, 0.3, 0.2, 0, 0, 0, 0;
    const Vector v = Vector::Ones(8);
    const Vector w = Vector::Constant(8, 3.0);
    const SoftThresholdResult r = soft_threshold(y, w, v, 0.25, 2, 2.0);
    CHECK(r.k == 5);
    for (int i = 0; i < 5; ++i) CHECK(r.v_new[i] == 3.0);
    for (int i = 5; i < 8; ++i) CHECK(r.v_new[i] == 1.0);
  }

  TEST_CASE("below threshold only the scored coordinates are copied") {
    Vector y(6);
    y << 0, 0.3, 0, 0.05, 0.4, 0;
    const Vector v = Vector::Ones(6);
    const Vector w = Vector::Constant(6, 2.0);
    const SoftThresholdResult r = soft_threshold(y, w, v, 0.25, 3);
    CHECK(r.k == 2);
    CHECK(IndexSet::differ(r.v_new, v) == IndexSet{1, 4});
  }

  TEST_CASE("all coordinates above the cutoff copy w_new entirely") {
    const Vector v = Vector::Ones(3);
    Vector w(3);
    w << 2, 3, 4;
    const SoftThresholdResult r = soft_threshold(Vector::Ones(3), w, v, 0.5, 1);
    CHECK(r.k == 3);
    CHECK(max_abs(r.v_new - w) == 0.0);
  }

  TEST_CASE("ties are broken by ascending index") {
    const Vector y = Vector::Constant(4, 0.2);
    const Vector v = Vector::Zero(4);
    const Vector w = Vector::Ones(4);
    const SoftThresholdResult r = soft_threshold(y, w, v, 0.5, 1);  // nothing above the cutoff
    CHECK(r.k == 0);
  }
}

TEST_SUITE("adjust") {
  TEST_CASE("unchanged input passes through") {
    const Vector vt = Vector::LinSpaced(4, 1, 2);
    CHECK(max_abs(adjust(vt, vt, Vector::Ones(4), 0.01) - vt) == 0.0);
  }

  TEST_CASE("a coordinate landing next to v snaps back") {
    Vector v(2), vt(2), tmp(2);
    v << 1, 1;
    vt << 1.5, 1;
    tmp << 1.0005, 1;
    const Vector out = adjust(tmp, vt, v, 0.001);
    CHECK(out[0] == 1.0);
  }

  TEST_CASE("a changed coordinate outside the band is kept") {
    Vector v(2), vt(2), tmp(2);
    v << 1, 1;
    vt << 1.5, 1;
    tmp << 1.2, 1;
    CHECK(adjust(tmp, vt, v, 0.001)[0] == 1.2);
  }
}

TEST_SUITE("initialize") {
  TEST_CASE("two-coordinate example") {
    const Matrix A = Matrix::Ones(1, 2);
    ProjMaint pm(A, ScalarFunction::sqrt_fn(), {}, Vector::Ones(2), Vector::Ones(2),
                 SketchPool(SketchMode::Identity, 4, 2, 2, 0));
    CHECK(max_abs(pm.M() - 0.5 * Matrix::Ones(2, 2)) <= 1e-15);
    CHECK(max_abs(pm.beta2() - Vector::Ones(2)) <= 1e-15);
    CHECK(pm.S().empty());
    CHECK(pm.T().empty());
    CHECK(pm.check_invariants().ok(1e-10));
  }

  TEST_CASE("identity sketch gives Q = sqrt(V) M and all invariants hold") {
    Fixture fx = make(12, 5, 3);
    const Vector sv = fx.w0.cwiseSqrt();
    CHECK(max_abs(fx.pm.Q() - sv.asDiagonal() * fx.pm.M()) <= 1e-12 * max_abs(fx.pm.Q()));
    CHECK(fx.pm.check_invariants().ok(1e-10));
    CHECK(max_abs(fx.pm.Delta()) == 0.0);
    CHECK(max_abs(fx.pm.xi()) == 0.0);
    CHECK(max_abs(fx.pm.gamma2()) == 0.0);
  }

  TEST_CASE("SRHT sketch initial invariants") {
    Fixture fx = make(16, 6, 4, {}, ScalarFunction::grad_potential(5.0), SketchMode::Srht);
    CHECK(fx.pm.check_invariants().ok(1e-10));
  }

  TEST_CASE("shape and weight errors") {
    Rng rng(1);
    const Matrix A = random_matrix(rng, 2, 4);
    CHECK_THROWS_AS(ProjMaint(A, ScalarFunction::sqrt_fn(), {}, Vector::Ones(3), Vector::Ones(4),
                              SketchPool(SketchMode::Identity, 2, 4, 4, 0)),
                    DimMismatch);
    Matrix Asing(2, 4);
    Asing << 1, 1, 1, 1, 2, 2, 2, 2;
    CHECK_THROWS_AS(ProjMaint(Asing, ScalarFunction::sqrt_fn(), {}, Vector::Ones(4), Vector::Ones(4),
                              SketchPool(SketchMode::Identity, 2, 4, 4, 0)),
                    SingularMatrix);
  }

  TEST_CASE("thresholds follow the exponents and are clamped") {
    Fixture fx = make(64, 8, 5);
    CHECK(fx.pm.thresh_k() == static_cast<int>(std::ceil(std::pow(64.0, 8.0 / 9.0))));
    CHECK(fx.pm.thresh_kt() == static_cast<int>(std::ceil(std::pow(64.0, 2.0 / 3.0))));
    Fixture gx = make(8, 3, 5, params_with(3, 6));
    CHECK(gx.pm.thresh_k() == 3);
    CHECK(gx.pm.thresh_kt() == 3);
  }
}

TEST_SUITE("update_v and update_g") {
  TEST_CASE("no movement keeps everything") {
    Fixture fx = make(8, 3, 6);
    const LevelUpdate u = fx.pm.update_v(fx.w0);
    CHECK(max_abs(u.appr - fx.w0) == 0.0);
    CHECK(u.k == 0);
    CHECK(u.kt == 0);
    const LevelUpdate g = fx.pm.update_g(fx.h0);
    CHECK(max_abs(g.appr - fx.h0) == 0.0);
    CHECK(g.k == 0);
    CHECK(g.kt == 0);
  }

  TEST_CASE("one coordinate doubled: counters obey the batching law") {
    Fixture fx = make(8, 3, 7, params_with(0, 0));
    const Vector w = moved(fx.w0, {2}, 2.0);
    const LevelUpdate u = fx.pm.update_v(w);
    CHECK((u.kt == 0 || u.kt >= fx.pm.thresh_kt()));
    CHECK((u.k == 0 || u.k >= fx.pm.thresh_k()));
    CHECK(std::abs(u.appr[2] / w[2] - 1.0) <= fx.pm.params().eps_mp);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("one coordinate doubled with a unit cheap threshold enters S") {
    Fixture fx = make(8, 3, 7, params_with(8, 1));
    const Vector w = moved(fx.w0, {2}, 2.0);
    const LevelUpdate u = fx.pm.update_v(w);
    CHECK(u.kt == 1);
    CHECK(u.k == 0);
    CHECK(fx.pm.S() == IndexSet{2});
    CHECK(fx.pm.vt()[2] == w[2]);
    CHECK(fx.pm.counters().partial_matrix_updates == 1);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("all coordinates doubled fires a matrix update") {
    Fixture fx = make(8, 3, 8);
    const LevelUpdate u = fx.pm.update_v(2.0 * fx.w0);
    CHECK(u.k == 8);
    CHECK(fx.pm.counters().matrix_updates == 1);
    CHECK(max_abs(fx.pm.v() - u.appr) == 0.0);
    CHECK(max_abs(fx.pm.vt() - u.appr) == 0.0);
    CHECK(max_abs(u.appr - 2.0 * fx.w0) == 0.0);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("all h coordinates moved fires a vector update") {
    Fixture fx = make(8, 3, 9);
    const LevelUpdate g = fx.pm.update_g(1.5 * fx.h0);
    CHECK(g.k == 8);
    CHECK(fx.pm.counters().vector_updates == 1);
    CHECK(max_abs(fx.pm.g() - g.appr) == 0.0);
    CHECK(max_abs(fx.pm.gt() - g.appr) == 0.0);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("one h coordinate moved: partial counter equals the support change") {
    Fixture fx = make(8, 3, 10, params_with(8, 1));
    const Vector gt_before = fx.pm.gt();
    const LevelUpdate g = fx.pm.update_g(moved(fx.h0, {5}, 1.5));
    CHECK(g.kt == static_cast<int>(IndexSet::differ(fx.pm.gt(), gt_before).size()));
    CHECK(g.kt == 1);
    CHECK(fx.pm.T() == IndexSet{5});
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("small moves stay within the approximation radius without any update") {
    Fixture fx = make(8, 3, 11);
    const Vector w = fx.w0 * (1.0 + 0.3 * fx.pm.params().eps_mp);
    const LevelUpdate u = fx.pm.update_v(w);
    CHECK(u.k == 0);
    CHECK(u.kt == 0);
    CHECK(((w.array() / u.appr.array()) - 1.0).abs().maxCoeff() <= fx.pm.params().eps_mp);
  }

  TEST_CASE("non-positive weights are rejected") {
    Fixture fx = make(6, 2, 12);
    Vector w = fx.w0;
    w[0] = -1;
    CHECK_THROWS_AS(fx.pm.update_v(w), InvalidDim);
  }
}

TEST_SUITE("compute_locals") {
  TEST_CASE("w_appr = v~ gives empty increments") {
    Fixture fx = make(6, 2, 13);
    const LocalVars lv = fx.pm.compute_locals(fx.pm.vt());
    CHECK(lv.dS.empty());
    CHECK(max_abs(lv.dDelta) == 0.0);
    CHECK(max_abs(lv.dGamma) == 0.0);
    CHECK_FALSE(lv.has_h);
  }

  TEST_CASE("a coordinate returning to v lands in S'") {
    Fixture fx = make(4, 2, 14, params_with(4, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {1, 3}, 1.5));
    REQUIRE(fx.pm.S() == IndexSet{1, 3});
    Vector w = fx.pm.vt();
    w[1] = fx.pm.v()[1];  // back to v
    w[0] *= 1.4;          // new coordinate
    const LocalVars lv = fx.pm.compute_locals(w);
    CHECK(lv.dS == (IndexSet{0, 1}));
    CHECK(lv.S_new == (IndexSet{0, 3}));
    CHECK(lv.S_prime == IndexSet{1});
  }

  TEST_CASE("random perturbation matches the defining formulas") {
    Fixture fx = make(10, 4, 15, params_with(10, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {2, 6}, 1.3));
    fx.pm.partial_vector_update(moved(fx.h0, {4}, 1.2));
    Rng rng(1);
    Vector w = fx.pm.vt(), h = fx.pm.gt();
    for (int i : {0, 2, 7}) w[i] *= uniform_real(rng, 0.8, 1.25);
    for (int i : {4, 9}) h[i] *= uniform_real(rng, 0.8, 1.25);
    const LocalVars lv = fx.pm.compute_locals(w, &h);
    const Vector sw = w.cwiseSqrt(), svt = fx.pm.vt().cwiseSqrt(), sv = fx.pm.v().cwiseSqrt();
    CHECK(max_abs(lv.dDelta - (w - fx.pm.vt())) == 0.0);
    CHECK(max_abs(lv.dGamma - (sw - svt)) <= 1e-15);
    CHECK(max_abs(lv.Delta_new - (w - fx.pm.v())) <= 1e-15);
    CHECK(max_abs(lv.Gamma_new - (sw - sv)) <= 1e-15);
    CHECK(lv.dS == IndexSet::differ(w, fx.pm.vt()));
    CHECK(lv.S_new == IndexSet::differ(w, fx.pm.v()));
    CHECK(lv.S_prime == set_difference(set_union(fx.pm.S(), lv.dS), lv.S_new));
    REQUIRE(lv.has_h);
    const auto& f = fx.pm.f();
    const Vector dxi = sw.cwiseProduct(f(h)) - svt.cwiseProduct(f(fx.pm.gt()));
    CHECK(max_abs(lv.dxi - dxi) <= 1e-14);
    CHECK(max_abs(lv.xi_new - (sw.cwiseProduct(f(h)) - sv.cwiseProduct(f(fx.pm.g())))) <= 1e-14);
  }
}

TEST_SUITE("matrix_update") {
  TEST_CASE("degenerate call with w_appr = v") {
    Fixture fx = make(6, 2, 16);
    const Matrix M = fx.pm.M();
    fx.pm.matrix_update(fx.pm.v());
    CHECK(max_abs(fx.pm.M() - M) <= 1e-15);
    CHECK(fx.pm.S().empty());
    CHECK(fx.pm.check_invariants().ok(1e-10));
  }

  TEST_CASE("two-coordinate Woodbury update") {
    const Matrix A = Matrix::Ones(1, 2);
    ProjMaint pm(A, ScalarFunction::sqrt_fn(), {}, Vector::Ones(2), Vector::Ones(2),
                 SketchPool(SketchMode::Identity, 4, 2, 2, 0));
    Vector w(2);
    w << 4, 1;
    pm.matrix_update(w);
    CHECK(max_abs(pm.M() - Matrix::Ones(2, 2) / 5.0) <= 1e-15);
    CHECK(max_abs(pm.v() - w) == 0.0);
    CHECK(pm.check_invariants().ok(1e-10));
  }

  TEST_CASE("after partial updates the full update restores a clean state") {
    Fixture fx = make(10, 4, 17, params_with(10, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {1, 5}, 1.4));
    fx.pm.partial_vector_update(moved(fx.h0, {3}, 0.7));
    const Vector w = moved(fx.pm.vt(), {2, 8}, 1.3);
    fx.pm.matrix_update(w);
    const Matrix Mtrue = fx.A.transpose() * mat_inverse(fx.A * w.asDiagonal() * fx.A.transpose()) * fx.A;
    CHECK(rel_err(fx.pm.M(), Mtrue) <= 1e-10);
    CHECK(fx.pm.S().empty());
    CHECK(max_abs(fx.pm.B().payload - Matrix::Identity(fx.pm.capacity(), fx.pm.capacity())) == 0.0);
    CHECK(max_abs(fx.pm.E().payload) == 0.0);
    CHECK(max_abs(fx.pm.gamma2()) <= 1e-15);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }
}

TEST_SUITE("partial_matrix_update") {
  TEST_CASE("empty increment leaves B unchanged") {
    Fixture fx = make(8, 3, 18, params_with(8, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {0}, 1.5));
    const Matrix B = fx.pm.B().payload;
    fx.pm.partial_matrix_update(fx.pm.vt());
    CHECK(max_abs(fx.pm.B().payload - B) <= 1e-15);
  }

  TEST_CASE("a coordinate returning to v: B equals a fresh capacitance inverse") {
    Fixture fx = make(4, 2, 19, params_with(4, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {1, 3}, 1.5));
    Vector w = fx.pm.vt();
    w[1] = fx.pm.v()[1];
    w[0] *= 0.6;
    fx.pm.partial_matrix_update(w);
    const IndexSet S = fx.pm.S();
    REQUIRE(S == (IndexSet{0, 3}));
    const Vector Dinv = select(fx.pm.Delta(), S).cwiseInverse();
    const Matrix fresh = mat_inverse(Matrix(Dinv.asDiagonal()) + select_block(fx.pm.M(), S));
    CHECK(rel_err(fx.pm.B().payload.topLeftCorner(2, 2), fresh) <= 1e-10);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("50 random partial updates keep every invariant") {
    for (const ScalarFunction f : {ScalarFunction::sqrt_fn(), ScalarFunction::grad_potential(3.0)}) {
      Fixture fx = make(16, 6, 20, params_with(16, 1), f, SketchMode::Srht);
      Rng rng(5);
      for (int rep = 0; rep < 50; ++rep) {
        Vector w = fx.pm.vt();
        const IndexSet idx = random_subset(rng, 16, 2);
        for (int i : idx) {
          // Either return to v or move far from it.
          if (uniform01(rng) < 0.3) {
            w[i] = fx.pm.v()[i];
          } else {
            w[i] = fx.pm.v()[i] * (uniform01(rng) < 0.5 ? uniform_real(rng, 0.7, 0.95) : uniform_real(rng, 1.05, 1.4));
          }
        }
        if (set_union(fx.pm.S(), IndexSet::differ(w, fx.pm.vt())).size() > static_cast<std::size_t>(fx.pm.capacity())) {
          continue;
        }
        fx.pm.partial_matrix_update(w);
        const InvariantReport rep_inv = fx.pm.check_invariants();
        CHECK(rep_inv.ok(kInvTol));
      }
    }
  }
}

TEST_SUITE("vector updates") {
  TEST_CASE("h_appr = g recomputes identical values") {
    Fixture fx = make(8, 3, 21);
    const Vector g1 = fx.pm.gamma2();
    const Vector b2 = fx.pm.beta2();
    fx.pm.vector_update(fx.pm.g());
    CHECK(max_abs(fx.pm.beta2() - b2) <= 1e-15);
    CHECK(max_abs(fx.pm.gamma2() - g1) == 0.0);
  }

  TEST_CASE("random h_appr: beta2 matches the direct formula") {
    Fixture fx = make(8, 3, 22, params_with(8, 1));
    fx.pm.partial_matrix_update(moved(fx.w0, {4}, 1.7));
    Rng rng(3);
    const Vector h = random_vector(rng, 8, 0.5, 2.0);
    fx.pm.vector_update(h);
    const Vector expect = fx.pm.M() * fx.pm.v().cwiseSqrt().cwiseProduct(h.cwiseSqrt());
    CHECK(rel_err(fx.pm.beta2(), expect) <= 1e-12);
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }

  TEST_CASE("partial vector update keeps g and moves g~") {
    Fixture fx = make(8, 3, 23, params_with(8, 1));
    const Vector h = moved(fx.h0, {1, 6}, 1.3);
    fx.pm.partial_vector_update(h);
    CHECK(max_abs(fx.pm.g() - fx.h0) == 0.0);
    CHECK(max_abs(fx.pm.gt() - h) == 0.0);
    CHECK(fx.pm.T() == (IndexSet{1, 6}));
    CHECK(fx.pm.check_invariants().ok(kInvTol));
  }
}

TEST_SUITE("query") {
  TEST_CASE("right after initialisation the result is R^T beta1") {
    Fixture fx = make(8, 3, 24, {}, ScalarFunction::sqrt_fn(), SketchMode::Srht);
    const Matrix R = fx.pm.pool().op(0).to_dense();
    const Vector r = fx.pm.query(fx.w0, fx.h0);
    CHECK(rel_err(r, R.transpose() * fx.pm.beta1()) <= 1e-12);
    CHECK(fx.pm.pool().cursor() == 1);
  }

  TEST_CASE("one coordinate of w and h perturbed matches the oracle") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
      Fixture fx = make(8, 3, seed);
      const Vector w = moved(fx.w0, {3}, 1.02);
      const Vector h = moved(fx.h0, {5}, 0.98);
      CHECK(query_error(fx, fx.pm, w, h) <= 1e-8);
    }
  }

  TEST_CASE("S' nonempty and overlapping increments match the oracle") {
    for (const SketchMode mode : {SketchMode::Identity, SketchMode::Srht}) {
      Fixture fx = make(8, 3, 41, params_with(8, 1), ScalarFunction::grad_potential(4.0), mode);
      fx.pm.partial_matrix_update(moved(fx.w0, {1, 2, 6}, 1.5));
      fx.pm.partial_vector_update(moved(fx.h0, {0, 6}, 1.2));
      Vector w = fx.pm.vt();
      w[1] = fx.pm.v()[1];  // S' = {1}
      w[2] *= 1.01;         // overlaps S
      w[4] *= 0.9;          // new
      Vector h = fx.pm.gt();
      h[6] = fx.pm.g()[6];
      h[3] *= 1.1;
      CHECK(query_error(fx, fx.pm, w, h) <= 1e-8);
    }
  }

  TEST_CASE("pool exhaustion is reported") {
    Fixture fx = make(6, 2, 42, {}, ScalarFunction::sqrt_fn(), SketchMode::Identity, 2);
    (void)fx.pm.query(fx.w0, fx.h0);
    (void)fx.pm.query(fx.w0, fx.h0);
    CHECK_THROWS_AS((void)fx.pm.query(fx.w0, fx.h0), PoolExhausted);
  }
}

TEST_SUITE("update_query") {
  TEST_CASE("stationary inputs give identical results") {
    Fixture fx = make(8, 3, 43);
    const QueryOutput a = fx.pm.update_query(fx.w0, fx.h0);
    const QueryOutput b = fx.pm.update_query(fx.w0, fx.h0);
    CHECK(max_abs(a.r - b.r) == 0.0);
  }

  TEST_CASE("approximation contract after each call") {
    Fixture fx = make(16, 6, 44, params_with(0, 0), ScalarFunction::grad_potential(4.0));
    Rng rng(7);
    Vector w = fx.w0, h = fx.h0;
    for (int step = 0; step < 60; ++step) {
      for (int i = 0; i < 16; ++i) {
        if (uniform01(rng) < 0.3) w[i] *= uniform_real(rng, 0.9, 1.1);
        if (uniform01(rng) < 0.3) h[i] *= uniform_real(rng, 0.95, 1.05);
      }
      const QueryOutput out = fx.pm.update_query(w, h);
      const double eps = fx.pm.params().eps_mp;
      CHECK(((w.array() / out.w_appr.array()) - 1.0).abs().maxCoeff() <= eps + 1e-12);
      CHECK(((h.array() / out.h_appr.array()) - 1.0).abs().maxCoeff() <= eps + 1e-12);
      CHECK((out.k == 0 || out.k >= fx.pm.thresh_k()));
      CHECK((out.kt == 0 || out.kt >= fx.pm.thresh_kt()));
    }
  }

  TEST_CASE("200-step walk at n = 16 matches the oracle") {
    WalkSpec spec;
    spec.n = 16;
    spec.d = 8;
    spec.steps = 200;
    spec.seed = 5;
    const WalkReport rep = run_walk(spec);
    CHECK(rep.max_query_error <= 1e-6);
    CHECK(rep.max_invariant_residual <= kInvTol);
    CHECK(rep.k_violations + rep.kt_violations + rep.p_violations + rep.pt_violations == 0);
  }
}

TEST_SUITE("invariant checker") {
  TEST_CASE("fresh state passes at 1e-10") {
    Fixture fx = make(10, 4, 45);
    const InvariantReport rep = fx.pm.check_invariants();
    CHECK(rep.ok(1e-10));
    CHECK(rep.items.size() >= 14);
  }

  TEST_CASE("a corrupted entry of M is flagged") {
    Fixture fx = make(10, 4, 46);
    fx.pm.debug_perturb_M(2, 3, 1e-3);
    const InvariantReport rep = fx.pm.check_invariants();
    CHECK(rep.residual("M") > 1e-6);
    CHECK_FALSE(rep.ok(1e-6));
  }

  TEST_CASE("corrupting walk is detected") {
    WalkSpec spec;
    spec.n = 8;
    spec.d = 4;
    spec.steps = 20;
    spec.corrupt = true;
    CHECK(run_walk(spec).max_invariant_residual > 1e-6);
  }
}

TEST_SUITE("randomized walks") {
  TEST_CASE("walks over sizes, sketches, functions and thresholds") {
    int walks = 0;
    for (int n : {4, 8, 16, 32}) {
      for (const SketchMode mode : {SketchMode::Identity, SketchMode::Srht}) {
        for (const ScalarFnKind f : {ScalarFnKind::Sqrt, ScalarFnKind::GradPotential}) {
          for (int variant = 0; variant < 2; ++variant) {
            WalkSpec spec;
            spec.n = n;
            spec.d = std::max(1, n / 2);
            spec.steps = 40;
            spec.seed = static_cast<std::uint64_t>(1000 + n * 10 + variant);
            spec.sketch = mode;
            spec.f = f;
            if (variant == 1) {  // exercise the cheap level at every size
              spec.params.thresh_k_override = std::max(2, n / 2);
              spec.params.thresh_kt_override = 1;
            }
            const WalkReport rep = run_walk(spec);
            CHECK(rep.max_invariant_residual <= kInvTol);
            CHECK(rep.max_query_error <= 1e-6);
            CHECK(rep.max_w_approx <= spec.params.eps_mp + 1e-12);
            CHECK(rep.max_h_approx <= spec.params.eps_mp + 1e-12);
            CHECK(rep.k_violations + rep.kt_violations + rep.p_violations + rep.pt_violations == 0);
            if (variant == 1) CHECK(rep.counters.partial_matrix_updates > 0);
            ++walks;
          }
        }
      }
    }
    CHECK(walks == 32);
  }
}
