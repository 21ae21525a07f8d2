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

#include "sketchlp/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <string>

#include "sketchlp/feasible.hpp"
#include "sketchlp/random.hpp"

namespace sketchlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Potential value, or +inf when the overflow guard trips.
double safe_potential(const Vector& r, double lambda) {
  try {
    return potential_of(r, lambda);
  } catch (const PotentialBlowup&) {
    return kInf;
  }
}

/// Strips the "TypeName: " prefix that every sketchlp error carries.
std::string bare_message(const Error& e) {
  const std::string w = e.what();
  const auto pos = w.find(": ");
  return pos == std::string::npos ? w : w.substr(pos + 2);
}

/// Rethrows the active sketchlp error with the same type and an iteration
/// prefix in the message.
[[noreturn]] void rethrow_with_context(long iter) {
  const std::string ctx = "iteration " + std::to_string(iter) + ": ";
  try {
    throw;
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(ctx + bare_message(e));
  } catch (const CapacityExceeded& e) {
    throw CapacityExceeded(ctx + bare_message(e));
  } catch (const AlignmentError& e) {
    throw AlignmentError(ctx + bare_message(e));
  } catch (const StructureViolation& e) {
    throw StructureViolation(ctx + bare_message(e));
  } catch (const InvalidDim& e) {
    throw InvalidDim(ctx + bare_message(e));
  } catch (const DimMismatch& e) {
    throw DimMismatch(ctx + bare_message(e));
  } catch (const PoolExhausted& e) {
    throw PoolExhausted(ctx + bare_message(e));
  } catch (const NoConvergence& e) {
    throw NoConvergence(ctx + bare_message(e));
  } catch (const PotentialBlowup& e) {
    throw PotentialBlowup(ctx + bare_message(e));
  }
}

/// Exact projection P v with P = sqrt(W) A^T (A W A^T)^{-1} A sqrt(W).
Vector project(const Matrix& A, const Vector& w, const Vector& v) {
  const Vector sw = w.array().sqrt().matrix();
  const Matrix AW = A * w.asDiagonal();
  const Matrix K = AW * A.transpose();
  const Vector rhs = A * sw.cwiseProduct(v);
  const Vector y = lu_solve(K, rhs);
  return sw.cwiseProduct(A.transpose() * y);
}

/// Merit for the classical line search: the potential while it is finite,
/// otherwise the largest centrality deviation (ranked above every finite
/// potential value).
struct Merit {
  bool blown = false;
  double value = 0.0;
  bool operator<=(const Merit& o) const {
    if (blown != o.blown) return !blown;
    return value <= o.value;
  }
};

Merit merit_of(const Vector& x, const Vector& s, double t_new, double lambda) {
  const Vector r = (x.cwiseProduct(s) / t_new).array() - 1.0;
  const double phi = safe_potential(r, lambda);
  if (std::isfinite(phi)) return {false, phi};
  return {true, inf_norm(r)};
}

/// Relative feasibility residual ||A x - b||_1 / (||A||_1 ||x||_1 + ||b||_1).
double feas_relative(const Matrix& A, const Vector& b, double normA, const Vector& x) {
  const double num = (A * x - b).lpNorm<1>();
  const double den = normA * x.lpNorm<1>() + b.lpNorm<1>();
  return den > 0 ? num / den : num;
}

void accumulate(SolveCounters& c, const ProjMaint& mp) {
  const MaintCounters& m = mp.counters();
  c.matrix_updates += m.matrix_updates;
  c.partial_matrix_updates += m.partial_matrix_updates;
  c.vector_updates += m.vector_updates;
  c.partial_vector_updates += m.partial_vector_updates;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

ResolvedParams resolve_params(const SolverConfig& cfg, int n) {
  if (n < 1) throw InvalidDim("resolve_params needs n >= 1");
  const double nn = static_cast<double>(n);
  const double ln = std::max(std::log(nn), 1.0);
  ResolvedParams p;
  p.n = n;
  if (cfg.paper_constants) {
    p.eps = 1e-7 / ln;
    p.eps_mp = 1e-5 / ln;
    p.eps_far = 1e-7 / (ln * ln);
    p.lambda = 40.0 * ln;
    p.sketch_rows = n;  // 1e22 sqrt(n) ln^10 n exceeds n for every representable n
  } else {
    p.eps = 0.02;
    p.eps_mp = 0.05;
    p.eps_far = p.eps_mp / 10.0;
    p.lambda = std::max(4.0, 2.0 * std::log(nn));
    p.sketch_rows = std::min(n, static_cast<int>(std::ceil(4.0 * std::sqrt(nn) * std::pow(std::log(nn), 2))));
  }
  p.L = static_cast<int>(std::ceil(2.0 * std::sqrt(nn)));
  if (cfg.eps > 0) p.eps = cfg.eps;
  if (cfg.eps_mp > 0) p.eps_mp = cfg.eps_mp;
  if (cfg.eps_far > 0) p.eps_far = cfg.eps_far;
  else if (cfg.eps_mp > 0 && !cfg.paper_constants) p.eps_far = p.eps_mp / 10.0;
  if (cfg.lambda > 0) p.lambda = cfg.lambda;
  if (cfg.sketch_rows > 0) p.sketch_rows = cfg.sketch_rows;
  if (cfg.L > 0) p.L = cfg.L;
  p.a_exp = cfg.a_exp;
  p.atilde_exp = cfg.atilde_exp;
  p.sketch_rows = std::max(1, p.sketch_rows);

  if (!(p.eps > 0 && p.eps < 0.2)) throw InvalidDim("eps must lie in (0, 0.2)");
  if (!(p.eps_mp > 0 && p.eps_mp < 0.5)) throw InvalidDim("eps_mp must lie in (0, 0.5)");
  if (!(p.eps_far > 0 && p.eps_far < p.eps_mp)) throw InvalidDim("eps_far must lie in (0, eps_mp)");
  if (!(p.lambda > 0)) throw InvalidDim("lambda must be positive");
  if (p.sketch_rows > n) throw InvalidDim("sketch_rows exceeds the dimension");
  if (!(p.a_exp > 0 && p.a_exp <= 1)) throw InvalidDim("a must lie in (0, 1]");
  if (!(p.atilde_exp > 0 && p.atilde_exp <= p.a_exp)) throw InvalidDim("a~ must lie in (0, a]");
  if (!(cfg.delta > 0 && cfg.delta < 1)) throw InvalidDim("delta must lie in (0, 1)");
  if (cfg.max_iters < 1) throw InvalidDim("max_iters must be positive");
  return p;
}

// ---------------------------------------------------------------------------
// One step
// ---------------------------------------------------------------------------

StepResult one_step(ProjMaint& mp_t, ProjMaint& mp_phi, const Vector& x, const Vector& s, double t,
                    double t_new, double eps, double lambda) {
  if (!(t > 0)) throw InvalidDim("one_step requires t > 0");
  const Vector wbar = x.cwiseQuotient(s);
  const Vector mubar = x.cwiseProduct(s);
  const QueryOutput qt = mp_t.update_query(wbar, mubar);
  const QueryOutput qp = mp_phi.update_query(wbar, mubar / t);

  StepResult out;
  out.w_appr = qt.w_appr;
  out.h_appr = qt.h_appr;
  out.k = qt.k;
  out.kt = qt.kt;
  out.p = qp.p;
  out.pt = qp.pt;

  const Vector& wt = qt.w_appr;
  const Vector q_phi = mp_phi.f()(qp.h_appr);
  const Vector mu = qp.h_appr * t;
  const Vector xt = mu.cwiseProduct(wt).array().sqrt().matrix();
  const Vector st = mu.cwiseQuotient(wt).array().sqrt().matrix();
  const Vector smu = mu.array().sqrt().matrix();

  const double tau = t_new / t - 1.0;
  const Vector delta_t = tau * mu;
  Vector delta_phi = Vector::Zero(mu.size());
  Vector p_mu = tau * qt.r;
  const PotentialValue pv = potential(mu, t, lambda);
  const double gnorm = pv.grad.norm();
  if (gnorm < 1e-14) {
    out.zero_gradient = true;
  } else {
    delta_phi = -(eps / 2.0) * t_new * (mu / t).array().sqrt().matrix().cwiseProduct(q_phi) / gnorm;
    p_mu -= (eps / 2.0) * t_new * qp.r / (std::sqrt(t) * gnorm);
  }
  out.delta_mu = delta_t + delta_phi;
  out.ds = st.cwiseQuotient(smu).cwiseProduct(p_mu);
  out.dx = out.delta_mu.cwiseQuotient(st) - xt.cwiseQuotient(smu).cwiseProduct(p_mu);

  const Vector res = xt.cwiseProduct(out.ds) + st.cwiseProduct(out.dx) - out.delta_mu;
  const double scale = inf_norm(out.delta_mu);
  out.step_identity = scale > 0 ? inf_norm(res) / scale : inf_norm(res);
  return out;
}

StepResult one_step_feasible(ProjMaint& mp_t, ProjMaint& mp_phi, const Vector& xbar,
                             const Vector& sbar, Vector& x, double t, double t_new, double eps,
                             double lambda) {
  (void)eps;
  (void)lambda;
  if (!(t > 0)) throw InvalidDim("one_step_feasible requires t > 0");
  mp_t.set_path(t, t_new);
  mp_phi.set_path(t, t_new);
  const Vector wbar = xbar.cwiseQuotient(sbar);
  const Vector mubar = xbar.cwiseProduct(sbar);
  const QueryOutput qt = mp_t.update_query(wbar, mubar);
  const QueryOutput qp = mp_phi.update_query(wbar, mubar / t);

  StepResult out;
  out.w_appr = qt.w_appr;
  out.h_appr = qt.h_appr;
  out.k = qt.k;
  out.kt = qt.kt;
  out.p = qp.p;
  out.pt = qp.pt;
  out.zero_gradient = qp.c == 0.0;

  out.dx = qt.q_x + qp.q_x - (qt.p_x + qp.p_x);
  out.ds = qt.p_s + qp.p_s;
  x += qt.q_x + qp.q_x;

  // Per-structure step identity: with mu~ the structure's own approximation,
  // x~ = sqrt(mu~ w~), s~ = sqrt(mu~ / w~) and delta~ = s~ q.
  const Vector& wt = qt.w_appr;
  double res = 0.0;
  double scale = 0.0;
  out.delta_mu = Vector::Zero(wt.size());
  auto accum = [&](const QueryOutput& q, const Vector& mu) {
    const Vector xt = mu.cwiseProduct(wt).array().sqrt().matrix();
    const Vector st = mu.cwiseQuotient(wt).array().sqrt().matrix();
    const Vector dmu = st.cwiseProduct(q.q_x);
    const Vector r = xt.cwiseProduct(q.p_s) + st.cwiseProduct(q.q_x - q.p_x) - dmu;
    out.delta_mu += dmu;
    res = std::max(res, inf_norm(r));
    scale = std::max(scale, inf_norm(dmu));
  };
  accum(qt, qt.h_appr);
  accum(qp, qp.h_appr * t);
  out.step_identity = scale > 0 ? res / scale : res;
  return out;
}

// ---------------------------------------------------------------------------
// Classical step
// ---------------------------------------------------------------------------

ClassicalResult classical_step(const Matrix& A, const Vector& x, const Vector& s, double t_new,
                               double lambda) {
  if (x.size() != s.size() || A.cols() != x.size()) throw DimMismatch("classical_step shapes");
  if (!(t_new > 0)) throw InvalidDim("classical_step requires t_new > 0");
  if (!((x.array() > 0).all() && (s.array() > 0).all())) {
    throw InvalidDim("classical_step requires x, s > 0");
  }
  const int n = static_cast<int>(x.size());
  const int cap = static_cast<int>(std::ceil(100.0 * std::sqrt(static_cast<double>(n))));
  ClassicalResult out{x, s, 0};
  for (;;) {
    const Vector mu = out.x.cwiseProduct(out.s);
    if (inf_norm((mu / t_new).array() - 1.0) <= 0.01) return out;
    if (out.steps >= cap) {
      throw NoConvergence("classical step did not centre within " + std::to_string(cap) + " steps");
    }
    const Vector smu = mu.array().sqrt().matrix();
    const Vector v = (Vector::Constant(n, t_new) - mu).cwiseQuotient(smu);
    const Vector w = out.x.cwiseQuotient(out.s);
    const Vector Pv = project(A, w, v);
    const Vector dx = out.x.cwiseQuotient(smu).cwiseProduct(v - Pv);
    const Vector ds = out.s.cwiseQuotient(smu).cwiseProduct(Pv);

    const Merit m0 = merit_of(out.x, out.s, t_new, lambda);
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, alpha /= 2.0) {
      const Vector xn = out.x + alpha * dx;
      const Vector sn = out.s + alpha * ds;
      if (!((xn.array() > 0).all() && (sn.array() > 0).all())) continue;
      if (merit_of(xn, sn, t_new, lambda) <= m0) {
        out.x = xn;
        out.s = sn;
        accepted = true;
        break;
      }
    }
    ++out.steps;
    if (!accepted) throw NoConvergence("classical step line search stalled");
  }
}

// ---------------------------------------------------------------------------
// LP initialisation
// ---------------------------------------------------------------------------

InitLp init_lp(const Matrix& A, const Vector& b, const Vector& c, double delta) {
  const int d = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (b.size() != d || c.size() != n) throw DimMismatch("init_lp: |b| != d or |c| != n");
  if (n < 1 || d < 1) throw InvalidDim("init_lp needs a non-empty A");
  if (d > n) throw InvalidDim("init_lp needs d <= n");
  if (!(delta > 0)) throw InvalidDim("init_lp needs delta > 0");
  if (!A.allFinite() || !b.allFinite() || !c.allFinite()) throw DegenerateInput("non-finite LP data");
  Eigen::FullPivLU<Matrix> lu(A);
  lu.setThreshold(1e-10);
  if (lu.rank() < d) throw DegenerateInput("A does not have full row rank");

  InitLp il;
  il.n = n;
  il.d = d;
  il.delta_prime = std::min(delta, 0.05) / 2.0;
  il.M_b = 4.0 * n / il.delta_prime;
  const double cmax = inf_norm(c);
  il.c_scale = cmax > 0 ? il.delta_prime / cmax : 0.0;

  il.A = Matrix::Zero(d + 1, n + 2);
  il.A.topLeftCorner(d, n) = A;
  il.A.block(0, n + 1, d, 1) = il.M_b * (b - A * Vector::Ones(n));
  il.A.block(d, 0, 1, n).setOnes();
  il.A(d, n) = 1.0;

  il.b.resize(d + 1);
  il.b.head(d) = b;
  il.b[d] = n + 1.0;

  il.c = Vector::Zero(n + 2);
  il.c.head(n) = il.c_scale * c;
  il.c[n + 1] = il.M_b;

  il.x0 = Vector::Ones(n + 2);
  il.x0[n + 1] = 1.0 / il.M_b;
  il.y0 = Vector::Zero(d + 1);
  il.y0[d] = -1.0;
  il.s0 = il.c - il.A.transpose() * il.y0;
  return il;
}

Vector recover_x(const InitLp& il, const Vector& x_mod) {
  if (x_mod.size() != il.n + 2) throw DimMismatch("recover_x: |x| != n + 2");
  return x_mod.head(il.n);
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

namespace {

/// Owns the two maintenance structures and their sketch pools.
class Structures {
 public:
  Structures(const Matrix& A, const ResolvedParams& rp, const SolverConfig& cfg, bool feasible)
      : A_(A), rp_(rp), cfg_(cfg), feasible_(feasible) {
    mpp_.eps_mp = rp.eps_mp;
    mpp_.eps_far = rp.eps_far;
    mpp_.a_exp = rp.a_exp;
    mpp_.atilde_exp = rp.atilde_exp;
    mpp_.thresh_k_override = cfg.thresh_k_override;
    mpp_.thresh_kt_override = cfg.thresh_kt_override;
  }

  void init(const Vector& w, const Vector& h_t, const Vector& h_phi, SolveCounters& counters) {
    if (t_) {
      accumulate(counters, *t_);
      accumulate(counters, *phi_);
      ++counters.reinitializations;
    }
    const SketchPool pool(cfg_.sketch_mode, rp_.L, rp_.sketch_rows, static_cast<int>(A_.cols()),
                          mix_seed(cfg_.seed, ++pools_));
    const FeasibleRole rt = feasible_ ? FeasibleRole::Time : FeasibleRole::None;
    const FeasibleRole rphi = feasible_ ? FeasibleRole::Potential : FeasibleRole::None;
    t_ = std::make_unique<ProjMaint>(A_, ScalarFunction::sqrt_fn(), mpp_, w, h_t, pool,
                                     FeasibleParams{rt, rp_.eps, rp_.lambda});
    phi_ = std::make_unique<ProjMaint>(A_, ScalarFunction::grad_potential(rp_.lambda), mpp_, w, h_phi,
                                       pool, FeasibleParams{rphi, rp_.eps, rp_.lambda});
  }

  void finish(SolveCounters& counters) const {
    accumulate(counters, *t_);
    accumulate(counters, *phi_);
  }

  ProjMaint& t() { return *t_; }
  ProjMaint& phi() { return *phi_; }

 private:
  const Matrix& A_;
  ResolvedParams rp_;
  SolverConfig cfg_;
  bool feasible_;
  MaintParams mpp_;
  std::uint64_t pools_ = 0;
  std::unique_ptr<ProjMaint> t_, phi_;
};

void record_moves(Solution& sol, const Vector& x, const Vector& s, const Vector& dx, const Vector& ds) {
  const Vector xn = x + dx;
  const Vector sn = s + ds;
  const Vector w_ratio = (xn.cwiseQuotient(sn)).cwiseQuotient(x.cwiseQuotient(s)).array() - 1.0;
  const Vector mu_ratio = (xn.cwiseProduct(sn)).cwiseQuotient(x.cwiseProduct(s)).array() - 1.0;
  sol.max_w_move = std::max(sol.max_w_move, inf_norm(w_ratio));
  sol.max_mu_move = std::max(sol.max_mu_move, inf_norm(mu_ratio));
}

}  // namespace

Solution solve(const LpInstance& lp, const SolverConfig& cfg) {
  lp.validate();
  const InitLp il = init_lp(lp.A, lp.b, lp.c, cfg.delta);
  const Matrix& A = il.A;
  const int nb = static_cast<int>(A.cols());
  const double nbd = static_cast<double>(nb);
  const ResolvedParams rp = resolve_params(cfg, nb);
  const double delta_ipm = std::min(cfg.delta / 2.0, 1.0 / rp.lambda);
  const double t_end = delta_ipm * delta_ipm / (32.0 * nbd * nbd * nbd);
  const double shrink = 1.0 - rp.eps / (3.0 * std::sqrt(nbd));
  const double phi_cap = nbd * nbd * nbd;
  const double normA = norm1(A);
  const bool feasible = cfg.mode == SolveMode::Feasible;

  Solution sol;
  sol.params = rp;
  Structures ds(A, rp, cfg, feasible);

  double t = 1.0;
  long iter = 0;
  auto budget = [&]() {
    if (sol.counters.one_steps >= cfg.max_iters) {
      throw MaxItersExceeded("one-step budget of " + std::to_string(cfg.max_iters) + " exhausted at t = " +
                             std::to_string(t));
    }
  };
  auto note_phi = [&](double phi) {
    if (std::isfinite(phi)) sol.potential_max = std::max(sol.potential_max, phi);
  };

  Vector x_final;
  if (!feasible) {
    Vector x = il.x0;
    Vector s = il.s0;
    auto reinit = [&]() {
      const Vector mu = x.cwiseProduct(s);
      ds.init(x.cwiseQuotient(s), mu, mu / t, sol.counters);
    };
    reinit();
    while (t > t_end) {
      ++iter;
      TraceRecord rec;
      try {
        const double t_new = shrink * t;
        StepResult step;
        for (;;) {
          budget();
          if (ds.t().pool().exhausted()) reinit();
          step = one_step(ds.t(), ds.phi(), x, s, t, t_new, rp.eps, rp.lambda);
          ++sol.counters.one_steps;
          if (inf_norm(step.dx.cwiseQuotient(x)) <= 3.0 * rp.eps &&
              inf_norm(step.ds.cwiseQuotient(s)) <= 3.0 * rp.eps) {
            break;
          }
          ++rec.rejected;
        }
        sol.max_step_identity = std::max(sol.max_step_identity, step.step_identity);
        record_moves(sol, x, s, step.dx, step.ds);
        Vector xn = x + step.dx;
        Vector sn = s + step.ds;
        const double phi = safe_potential((xn.cwiseProduct(sn) / t).array() - 1.0, rp.lambda);
        note_phi(phi);
        rec.phi = phi;
        if (phi > phi_cap) {
          const ClassicalResult cr = classical_step(A, x, s, t_new, rp.lambda);
          xn = cr.x;
          sn = cr.s;
          rec.classical = true;
          ++sol.counters.classical_steps;
        }
        x = xn;
        s = sn;
        if (rec.classical) reinit();
        rec.iter = iter;
        rec.t = t_new;
        rec.k = step.k;
        rec.kt = step.kt;
        rec.p = step.p;
        rec.pt = step.pt;
        rec.step_identity = step.step_identity;
        sol.counters.rejected_steps += rec.rejected;
        t = t_new;
      } catch (const MaxItersExceeded&) {
        throw;
      } catch (const Error&) {
        rethrow_with_context(iter);
      }
      if (cfg.record_trace) sol.trace.push_back(rec);
    }
    x_final = x;
  } else {
    FeasibleDriverState st;
    st.x = st.xbar = il.x0;
    st.s = st.sbar = il.s0;
    st.w_old = il.x0.cwiseQuotient(il.s0);
    st.t_old = 1.0;
    st.j = 0;
    auto flush = [&]() {
      const Materialized m = materialize(st, ds.t(), ds.phi());
      st.x = m.x;
      st.s = m.s;
    };
    auto reinit_from_bar = [&]() {
      const Vector mu = st.xbar.cwiseProduct(st.sbar);
      ds.init(st.xbar.cwiseQuotient(st.sbar), mu, mu / t, sol.counters);
    };
    reinit_from_bar();
    while (t > t_end) {
      ++iter;
      TraceRecord rec;
      try {
        const double t_new = shrink * t;
        ++st.j;
        StepResult step;
        for (;;) {
          budget();
          if (ds.t().pool().exhausted()) {
            flush();
            reinit_from_bar();
          }
          const Vector x_before = st.x;
          const Vector ux_t = ds.t().implicit_x(), us_t = ds.t().implicit_s();
          const Vector ux_p = ds.phi().implicit_x(), us_p = ds.phi().implicit_s();
          step = one_step_feasible(ds.t(), ds.phi(), st.xbar, st.sbar, st.x, t, t_new, rp.eps, rp.lambda);
          ++sol.counters.one_steps;
          if (inf_norm(step.dx.cwiseQuotient(st.xbar)) <= 5.0 * rp.eps &&
              inf_norm(step.ds.cwiseQuotient(st.sbar)) <= 5.0 * rp.eps) {
            break;
          }
          // Revoke this try's contribution to the implicit iterate.
          ds.t().reset_implicit(ux_t, us_t);
          ds.phi().reset_implicit(ux_p, us_p);
          st.x = x_before;
          ++rec.rejected;
        }
        sol.max_step_identity = std::max(sol.max_step_identity, step.step_identity);
        record_moves(sol, st.xbar, st.sbar, step.dx, step.ds);
        st.xbar += step.dx;
        st.sbar += step.ds;
        make_feasible(st, step.w_appr, ds.t(), ds.phi());
        if (st.j > std::sqrt(nbd) || t < st.t_old / 2.0) {
          flush();
          if (cfg.resync_on_reinit && (st.x.array() > 0).all() && (st.s.array() > 0).all()) {
            // Pull the sketched iterate back onto the exactly feasible one so
            // that their statistical drift cannot accumulate across windows.
            st.xbar = st.x;
            st.sbar = st.s;
            reinit_from_bar();
          } else {
            ds.init(step.w_appr, step.h_appr, step.h_appr / t, sol.counters);
          }
          st.j = 1;
          st.t_old = t;
        }
        const double phi = safe_potential((st.xbar.cwiseProduct(st.sbar) / t).array() - 1.0, rp.lambda);
        note_phi(phi);
        rec.phi = phi;
        if (phi > phi_cap) {
          const Materialized m = materialize(st, ds.t(), ds.phi());
          const ClassicalResult cr = classical_step(A, m.x, m.s, t_new, rp.lambda);
          st.xbar = st.x = cr.x;
          st.sbar = st.s = cr.s;
          reinit_from_bar();
          rec.classical = true;
          ++sol.counters.classical_steps;
        }
        const Materialized m = materialize(st, ds.t(), ds.phi());
        rec.feas_rel = feas_relative(A, il.b, normA, m.x);
        sol.max_feas_rel = std::max(sol.max_feas_rel, rec.feas_rel);
        rec.iter = iter;
        rec.t = t_new;
        rec.k = step.k;
        rec.kt = step.kt;
        rec.p = step.p;
        rec.pt = step.pt;
        rec.step_identity = step.step_identity;
        sol.counters.rejected_steps += rec.rejected;
        t = t_new;
      } catch (const MaxItersExceeded&) {
        throw;
      } catch (const Error&) {
        rethrow_with_context(iter);
      }
      if (cfg.record_trace) sol.trace.push_back(rec);
    }
    x_final = materialize(st, ds.t(), ds.phi()).x;
  }
  ds.finish(sol.counters);

  sol.iterations = iter;
  sol.final_t = t;
  sol.x_modified = x_final;
  Vector x = recover_x(il, x_final);
  const double most_negative = x.size() ? x.minCoeff() : 0.0;
  sol.clipped = std::max(0.0, -most_negative);
  x = x.cwiseMax(0.0);
  sol.x = x;
  sol.objective = lp.c.dot(x);
  sol.feasibility_l1 = (lp.A * x - lp.b).lpNorm<1>();

  const int n = il.n;
  const double R = static_cast<double>(n + 1);
  if (x_final[n] <= 1e-6 * R) {
    sol.status = SolveStatus::Unbounded;
  } else if (sol.feasibility_l1 > cfg.delta * (R * norm1(lp.A) + lp.b.lpNorm<1>())) {
    sol.status = SolveStatus::Infeasible;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

ExponentPlan plan_exponents(double omega, double alpha) {
  if (!(omega >= 2.0 && omega <= 3.0)) throw InvalidDim("omega must lie in [2, 3]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidDim("alpha must lie in [0, 1]");
  const double cap = 4.0 * omega / (3.0 * (2.0 * omega - 1.0));
  const double bal = 2.0 / (2.0 * omega - 1.0);
  ExponentPlan p;
  if (alpha <= cap) {
    p.a = alpha;
    p.atilde = std::min(alpha * alpha, bal);
  } else {
    p.a = cap;
    p.atilde = bal;
  }
  p.exponent = std::max({omega, 2.5 - p.a / 2.0, 1.5 + p.a - p.atilde / 2.0,
                         0.5 + (omega - 1.0) * p.atilde + p.a});
  return p;
}

double balanced_omega() {
  auto g = [](double w) { return w - 13.0 / 6.0 + 1.0 / (3.0 * (2.0 * w - 1.0)); };
  double lo = 2.0, hi = 3.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace sketchlp
