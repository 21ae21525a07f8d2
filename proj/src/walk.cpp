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

#include "sketchlp/walk.hpp"

#include <algorithm>
#include <cmath>

#include "sketchlp/oracle.hpp"
#include "sketchlp/random.hpp"

namespace sketchlp {

namespace {

/// Multiplies a random subset of coordinates by factors in [1-r, 1+r] and
/// jitters some others slightly, keeping the result inside [lo, hi].
Vector random_move(Rng& rng, const Vector& x, double r, double lo, double hi) {
  const auto n = x.size();
  const double p_big = uniform01(rng) * 0.5;
  Vector y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    double step = 0.0;
    if (u < p_big) {
      step = uniform_real(rng, -r, r);
    } else if (u < p_big + 0.3) {
      step = uniform_real(rng, -0.01, 0.01);
    }
    double cand = x[i] * (1.0 + step);
    if (cand < lo || cand > hi) cand = x[i] * (1.0 - step);
    y[i] = cand;
  }
  return y;
}

bool law_ok(int k, int lo, int hi) { return k == 0 || (k >= lo && k <= hi); }

}  // namespace

WalkReport run_walk(const WalkSpec& spec) {
  Rng rng(spec.seed);
  const int n = spec.A ? static_cast<int>(spec.A->cols()) : spec.n;
  Matrix A;
  if (spec.A) {
    A = *spec.A;
  } else {
    A.resize(spec.d, n);
    for (int i = 0; i < spec.d; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = uniform_real(rng, -1.0, 1.0);
    }
  }
  const bool potential_fn = spec.f == ScalarFnKind::GradPotential;
  const ScalarFunction f{spec.f, spec.lambda};
  const double h_lo = potential_fn ? 0.8 : 0.05;
  const double h_hi = potential_fn ? 1.25 : 20.0;

  Vector w(n), h(n);
  for (int i = 0; i < n; ++i) {
    w[i] = uniform_real(rng, 0.5, 2.0);
    h[i] = potential_fn ? uniform_real(rng, 0.9, 1.1) : uniform_real(rng, 0.5, 2.0);
  }
  const int b = spec.sketch == SketchMode::Identity ? n : (spec.sketch_rows > 0 ? spec.sketch_rows : std::max(1, n / 2));
  SketchPool pool(spec.sketch, spec.steps + 1, b, n, mix_seed(spec.seed, 0xabcdef));
  ProjMaint mp(A, f, spec.params, w, h, std::move(pool));

  WalkReport rep;
  rep.thresh_k = mp.thresh_k();
  rep.thresh_kt = mp.thresh_kt();
  auto absorb = [&rep](const InvariantReport& ir) {
    for (const auto& it : ir.items) {
      double& slot = rep.max_residual[it.name];
      slot = std::max(slot, std::isnan(it.residual) ? INFINITY : it.residual);
      rep.max_invariant_residual = std::max(rep.max_invariant_residual, slot);
    }
  };
  absorb(mp.check_invariants());

  for (int step = 0; step < spec.steps; ++step) {
    w = random_move(rng, w, spec.max_ratio, 1e-3, 1e3);
    h = random_move(rng, h, potential_fn ? 0.05 : spec.max_ratio, h_lo, h_hi);
    if (spec.corrupt && step == spec.steps / 2) {
      mp.debug_perturb_M(0, 0, 1e-3 * (std::abs(mp.M()(0, 0)) + 1.0));
    }
    const int l = mp.pool().cursor();
    const QueryOutput out = mp.update_query(w, h);
    ++rep.steps;

    const Matrix Rl = mp.pool().block(l);
    const Vector ref = naive_query(A, out.w_appr, out.h_appr, f, Rl);
    const double scale = std::max(ref.lpNorm<Eigen::Infinity>(), 1e-300);
    rep.max_query_error = std::max(rep.max_query_error, (out.r - ref).lpNorm<Eigen::Infinity>() / scale);
    rep.max_w_approx = std::max(rep.max_w_approx, (w.cwiseQuotient(out.w_appr).array() - 1.0).abs().maxCoeff());
    rep.max_h_approx = std::max(rep.max_h_approx, (h.cwiseQuotient(out.h_appr).array() - 1.0).abs().maxCoeff());
    rep.k_violations += law_ok(out.k, mp.thresh_k(), n) ? 0 : 1;
    rep.kt_violations += law_ok(out.kt, mp.thresh_kt(), 2 * mp.thresh_k()) ? 0 : 1;
    rep.p_violations += law_ok(out.p, mp.thresh_k(), n) ? 0 : 1;
    rep.pt_violations += law_ok(out.pt, mp.thresh_kt(), 2 * mp.thresh_k()) ? 0 : 1;
    absorb(mp.check_invariants());
  }
  rep.counters = mp.counters();
  return rep;
}

}  // namespace sketchlp
