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

/// @file projmaint.hpp
/// @brief Two-level lazy maintenance of the sketched projection
///        R^T R sqrt(W) A^T (A W A^T)^{-1} A sqrt(W) f(h).
///
/// The structure keeps an expensive proxy v of the weights (with the full
/// matrix M = A^T (A V A^T)^{-1} A), a cheap proxy v~ that differs from v on a
/// small set S (with the capacitance inverse B over S), and the mirror pair
/// g, g~ for the right-hand side h.  Updates are batched by soft
/// thresholding: the cheap level is refreshed once at least thresh_k~
/// coordinates moved, the expensive level once at least thresh_k did.  Each
/// query then corrects the stored quantities for the few coordinates in which
/// the requested (w, h) differ from (v~, g~).
///
/// Notation follows the member list: Delta = V~ - V, Gamma = sqrt(V~) -
/// sqrt(V), xi = sqrt(V~) f(g~) - sqrt(V) f(g), B = L*[(Delta_SS^{-1} +
/// M_SS)^{-1}], E = B L_r[(M_S)^T], F = R Gamma L_c[M_S], gamma1 =
/// B L_r[beta2_S] + B L_r[(M_S)^T] xi, gamma2 = Gamma M xi, where L_c, L_r, L*
/// denote fixed-capacity padded blocks (see linalg.hpp).

#include <string>
#include <vector>

#include "sketchlp/feasible.hpp"
#include "sketchlp/linalg.hpp"
#include "sketchlp/potential.hpp"
#include "sketchlp/sketch.hpp"

namespace sketchlp {

// ---------------------------------------------------------------------------
// Scalar building blocks
// ---------------------------------------------------------------------------

/// Smoothed error score: x^2/(2 eps_mp) on |x| <= eps_mp,
/// eps_mp - (2 eps_mp - |x|)^2/(2 eps_mp) on eps_mp < |x| <= 2 eps_mp, and
/// eps_mp beyond.
double psi(double x, double eps_mp);

/// Result of soft thresholding.
struct SoftThresholdResult {
  Vector v_new;
  int k = 0;
};

/// Sorts y decreasingly (stable, ties by ascending index) and copies w_new
/// into v on the top-k coordinates.  k starts as #{y_i >= eps}; if that count
/// reaches @p threshold, k grows as k <- min(ceil(1.5 k), n) until k = n or
/// y_pi(k) < (1 - 1/log n) y_pi(ceil(k/1.5)).
///
/// @param log_base base of the logarithm in the decay factor (0 = natural).
SoftThresholdResult soft_threshold(const Vector& y, const Vector& w_new, const Vector& v, double eps,
                                   int threshold, double log_base = 0.0);

/// Moves coordinates of @p vt_tmp that changed w.r.t. @p vt and landed
/// within a factor (1 +- eps_far) of @p v back to v.
Vector adjust(const Vector& vt_tmp, const Vector& vt, const Vector& v, double eps_far);

// ---------------------------------------------------------------------------
// The maintenance structure
// ---------------------------------------------------------------------------

/// Tuning of one maintenance instance.
struct MaintParams {
  double eps_mp = 0.05;           ///< approximation radius of the proxies
  double eps_far = 0.005;         ///< enforced separation between v and v~
  double a_exp = 8.0 / 9.0;       ///< thresh_k = ceil(n^a_exp)
  double atilde_exp = 2.0 / 3.0;  ///< thresh_k~ = ceil(n^atilde_exp)
  int thresh_k_override = 0;      ///< > 0 replaces the computed thresh_k
  int thresh_kt_override = 0;     ///< > 0 replaces the computed thresh_k~
  double log_base = 0.0;          ///< SoftThreshold decay-factor log base (0 = e)
};

/// Exact-feasibility extension settings (role None disables it).
struct FeasibleParams {
  FeasibleRole role = FeasibleRole::None;
  double eps = 0.02;    ///< step parameter epsilon of the driver
  double lambda = 4.0;  ///< potential parameter
};

/// Counts of fired events since construction.
struct MaintCounters {
  long matrix_updates = 0;
  long partial_matrix_updates = 0;
  long vector_updates = 0;
  long partial_vector_updates = 0;
  long queries = 0;
};

/// Output of update_v / update_g.
struct LevelUpdate {
  Vector appr;  ///< w_appr (or h_appr)
  int k = 0;    ///< |supp(v_new - v)| of a fired expensive-level update, else 0
  int kt = 0;   ///< |supp(v~_new - v~)| of a fired cheap-level update, else 0
};

/// Local variables of one call (definitions relative to the current state).
struct LocalVars {
  Vector dDelta;      ///< W - V~
  Vector dGamma;      ///< sqrt(W) - sqrt(V~)
  Vector Delta_new;   ///< Delta + dDelta
  Vector Gamma_new;   ///< Gamma + dGamma
  IndexSet dS;        ///< supp(w - v~)
  IndexSet S_new;     ///< supp(w - v)
  IndexSet S_prime;   ///< (S u dS) \ S_new
  bool has_h = false;
  Vector dxi;         ///< sqrt(W) f(h) - sqrt(V~) f(g~)   (if has_h)
  Vector xi_new;      ///< xi + dxi                        (if has_h)
};

/// Output of update_query.
struct QueryOutput {
  Vector w_appr;
  Vector h_appr;
  Vector r;     ///< R_l^T R_l sqrt(W) A^T (A W A^T)^{-1} A sqrt(W) f(h), W = w_appr
  int k = 0, kt = 0, p = 0, pt = 0;
  int sketch_index = 0;  ///< l used by the query
  // Feasible extension only:
  double c = 0.0;  ///< scalar multiplier
  Vector q_x;      ///< sqrt(w~) c f(h)
  Vector p_x;      ///< sqrt(w~) c r
  Vector p_s;      ///< c r / sqrt(w~)
  bool matrix_level_fired = false;
};

/// One named invariant residual.
struct InvariantCheck {
  std::string name;
  double residual = 0.0;
};

/// Per-invariant relative residuals (0 or 1 for set-valued checks).
struct InvariantReport {
  std::vector<InvariantCheck> items;
  [[nodiscard]] double max_residual() const;
  [[nodiscard]] double residual(const std::string& name) const;
  [[nodiscard]] bool ok(double tol) const { return max_residual() <= tol; }
};

/// The maintenance structure.  Single owner; not thread-safe.
class ProjMaint {
 public:
  /// Initialises v = v~ = w0, g = g~ = h0 and all members from scratch.
  ///
  /// @throws DimMismatch on inconsistent shapes.
  /// @throws SingularMatrix if A W0 A^T is singular.
  ProjMaint(const Matrix& A, ScalarFunction f, const MaintParams& params, const Vector& w0,
            const Vector& h0, SketchPool pool, const FeasibleParams& feas = {});

  // --- high-level operations ----------------------------------------------
  /// Cheap/expensive weight update with soft thresholding (fires
  /// matrix_update or partial_matrix_update as needed).  @p h_appr is
  /// forwarded to the feasible-extension bookkeeping when enabled.
  LevelUpdate update_v(const Vector& w_new, const Vector* h_appr = nullptr);
  /// Mirror of update_v for h.
  LevelUpdate update_g(const Vector& h_new);
  /// Sketched projection for (w_appr, h_appr); advances the sketch cursor.
  Vector query(const Vector& w_appr, const Vector& h_appr);
  /// update_v, update_g, query (extension disabled) or update_g, update_v,
  /// query plus the step vectors (extension enabled).
  QueryOutput update_query(const Vector& w_new, const Vector& h_new);

  // --- individual update procedures (public for testing) -------------------
  [[nodiscard]] LocalVars compute_locals(const Vector& w_appr, const Vector* h_appr = nullptr) const;
  void matrix_update(const Vector& w_appr, const Vector* h_appr = nullptr);
  void partial_matrix_update(const Vector& w_appr, const Vector* h_appr = nullptr);
  void vector_update(const Vector& h_appr);
  void partial_vector_update(const Vector& h_appr);

  /// Evaluates every member invariant from scratch.  Never throws.
  [[nodiscard]] InvariantReport check_invariants() const;

  // --- feasible extension ---------------------------------------------------
  /// Sets the path parameters used by scalar_c on subsequent calls.
  void set_path(double t, double t_new) { t_ = t; t_new_ = t_new; }
  /// u1 + G u2.
  [[nodiscard]] Vector implicit_x() const;
  /// u3 + M u4.
  [[nodiscard]] Vector implicit_s() const;
  /// Replaces the accumulators by u1 = x_part, u3 = s_part, u2 = u4 = 0, so
  /// that implicit_x() = x_part and implicit_s() = s_part.
  void reset_implicit(const Vector& x_part, const Vector& s_part);

  // --- accessors ------------------------------------------------------------
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int thresh_k() const { return thresh_k_; }
  [[nodiscard]] int thresh_kt() const { return thresh_kt_; }
  [[nodiscard]] int capacity() const { return cap_; }
  [[nodiscard]] const ScalarFunction& f() const { return f_; }
  [[nodiscard]] const MaintParams& params() const { return prm_; }
  [[nodiscard]] const FeasibleParams& feasible_params() const { return fp_; }
  [[nodiscard]] const SketchPool& pool() const { return pool_; }
  [[nodiscard]] const MaintCounters& counters() const { return counters_; }
  [[nodiscard]] const Vector& v() const { return v_; }
  [[nodiscard]] const Vector& vt() const { return vt_; }
  [[nodiscard]] const Vector& g() const { return g_; }
  [[nodiscard]] const Vector& gt() const { return gt_; }
  [[nodiscard]] const Matrix& M() const { return M_; }
  [[nodiscard]] const Matrix& Q() const { return Q_; }
  [[nodiscard]] const Vector& beta1() const { return beta1_; }
  [[nodiscard]] const Vector& beta2() const { return beta2_; }
  [[nodiscard]] const IndexSet& S() const { return S_; }
  [[nodiscard]] const IndexSet& T() const { return T_; }
  [[nodiscard]] const Vector& Delta() const { return Delta_; }
  [[nodiscard]] const Vector& Gamma() const { return Gamma_; }
  [[nodiscard]] const Vector& xi() const { return xi_; }
  [[nodiscard]] const PaddedBlock& B() const { return B_; }
  [[nodiscard]] const PaddedBlock& E() const { return E_; }
  [[nodiscard]] const PaddedBlock& F() const { return F_; }
  [[nodiscard]] const PaddedBlock& gamma1() const { return gamma1_; }
  [[nodiscard]] const Vector& gamma2() const { return gamma2_; }
  [[nodiscard]] const Matrix& G() const { return G_; }
  [[nodiscard]] const Vector& u1() const { return u1_; }
  [[nodiscard]] const Vector& u2() const { return u2_; }
  [[nodiscard]] const Vector& u3() const { return u3_; }
  [[nodiscard]] const Vector& u4() const { return u4_; }

  /// Fault injection for tests: adds @p delta to M(i, j).
  void debug_perturb_M(int i, int j, double delta) { M_(i, j) += delta; }

 private:
  [[nodiscard]] Vector sqrt_of(const Vector& x) const { return x.array().sqrt().matrix(); }
  [[nodiscard]] double c_for(const Vector* h_appr) const;
  void check_weights(const Vector& w, const char* what) const;
  void check_delta(const Vector& Delta_new, const IndexSet& S) const;

  Matrix A_;
  ScalarFunction f_;
  MaintParams prm_;
  FeasibleParams fp_;
  int n_ = 0;
  int thresh_k_ = 1;
  int thresh_kt_ = 1;
  int cap_ = 1;
  SketchPool pool_;

  Vector v_, vt_, g_, gt_;
  Matrix M_, Q_;
  Vector beta1_, beta2_;
  IndexSet S_, T_;
  Vector Delta_, Gamma_, xi_;
  PaddedBlock B_, E_, F_, gamma1_;
  Vector gamma2_;

  double t_ = 1.0, t_new_ = 1.0;
  Matrix G_;
  Vector u1_, u2_, u3_, u4_;
  bool matrix_level_fired_ = false;

  MaintCounters counters_;
};

}  // namespace sketchlp
