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

/// @file ipm.hpp
/// @brief Stochastic central-path driver: parameter resolution, the sketched
///        one-step logic (infeasible-start and feasible variants), the exact
///        classical repair step, LP initialisation / recovery, the solve loop
///        and the exponent planner.

#include <cstdint>
#include <vector>

#include "sketchlp/linalg.hpp"
#include "sketchlp/lp.hpp"
#include "sketchlp/potential.hpp"
#include "sketchlp/projmaint.hpp"
#include "sketchlp/sketch.hpp"

namespace sketchlp {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which driver runs the central-path loop.
enum class SolveMode {
  Infeasible,  ///< sketched iterate, no exact feasibility of intermediate x
  Feasible,    ///< implicitly maintained exactly feasible iterate + MakeFeasible
};

/// Solver configuration.  Every numeric field set to 0 (or negative) means
/// "use the default", which depends on the dimension of the modified LP.
struct SolverConfig {
  double delta = 0.05;      ///< target accuracy
  double eps = 0;           ///< step parameter
  double eps_mp = 0;        ///< proxy approximation radius
  double eps_far = 0;       ///< v / v~ separation
  double lambda = 0;        ///< potential parameter
  double a_exp = 8.0 / 9.0;
  double atilde_exp = 2.0 / 3.0;
  int sketch_rows = 0;      ///< rows per sketch
  int L = 0;                ///< sketches per pool
  int thresh_k_override = 0;
  int thresh_kt_override = 0;
  SolveMode mode = SolveMode::Feasible;
  SketchMode sketch_mode = SketchMode::Srht;
  std::uint64_t seed = 1;
  long max_iters = 200000;  ///< budget on one-step calls
  bool paper_constants = false;
  bool record_trace = true;
  /// Feasible mode: at every periodic re-initialisation, reset the sketched
  /// iterate (xbar, sbar) to the materialised exactly feasible (x, s) when
  /// the latter is strictly positive.  Off: the two iterates are only
  /// re-synchronised coordinatewise by MakeFeasible.
  bool resync_on_reinit = true;
};

/// Fully resolved numeric parameters for a given dimension.
struct ResolvedParams {
  int n = 0;
  double eps = 0, eps_mp = 0, eps_far = 0, lambda = 0;
  double a_exp = 0, atilde_exp = 0;
  int sketch_rows = 0;
  int L = 0;
};

/// Resolves defaults at dimension @p n.
///
/// Desk mode: eps = 0.02, eps_mp = 0.05, eps_far = eps_mp / 10,
/// lambda = max(4, 2 ln n), sketch_rows = min(n, ceil(4 sqrt(n) ln^2 n)),
/// L = ceil(2 sqrt(n)).  With `paper_constants`: eps = 1e-7 / ln n,
/// eps_mp = 1e-5 / ln n, eps_far = 1e-7 / ln^2 n, lambda = 40 ln n and
/// sketch_rows = min(n, 1e22 sqrt(n) ln^10 n).  Explicit fields win.
///
/// @throws InvalidDim on out-of-range explicit values or n < 1.
ResolvedParams resolve_params(const SolverConfig& cfg, int n);

// ---------------------------------------------------------------------------
// One step
// ---------------------------------------------------------------------------

/// Result of one sketched central-path step.
struct StepResult {
  Vector dx;        ///< hat delta_x
  Vector ds;        ///< hat delta_s
  Vector w_appr;    ///< approximate weights used by the step
  Vector h_appr;    ///< approximate mu~ / t-scaled values reported by mp_t
  Vector delta_mu;  ///< tilde delta_mu
  double step_identity = 0.0;  ///< ||X~ ds + S~ dx - delta_mu||_inf / ||delta_mu||_inf
  int k = 0, kt = 0, p = 0, pt = 0;
  bool zero_gradient = false;  ///< the potential term was dropped (mu~ = t)
};

/// Infeasible-start one step.  @p mp_t maintains f_t = sqrt on h = x s,
/// @p mp_phi maintains f_Phi on h = x s / t; both share the same sketch
/// sequence.  Returns hat delta_x / hat delta_s for the sketched iterate.
StepResult one_step(ProjMaint& mp_t, ProjMaint& mp_phi, const Vector& x, const Vector& s, double t,
                    double t_new, double eps, double lambda);

/// Feasible one step.  Both structures carry the feasible extension; the
/// explicit primal part `x` receives the q-terms while the implicit parts
/// accumulate inside the structures.
StepResult one_step_feasible(ProjMaint& mp_t, ProjMaint& mp_phi, const Vector& xbar,
                             const Vector& sbar, Vector& x, double t, double t_new, double eps,
                             double lambda);

// ---------------------------------------------------------------------------
// Classical repair step
// ---------------------------------------------------------------------------

/// Output of classical_step.
struct ClassicalResult {
  Vector x;
  Vector s;
  int steps = 0;  ///< exact Newton steps taken
};

/// Exact (unsketched) Newton steps toward x s = t_new 1, with backtracking
/// halving from 1 until positivity and non-increase of the potential, until
/// max_i |x_i s_i / t_new - 1| <= 0.01.  Preserves A x and the dual slack
/// structure s = c - A^T y.
///
/// @throws InvalidDim if x or s is not strictly positive.
/// @throws NoConvergence after ceil(100 sqrt(n)) steps.
ClassicalResult classical_step(const Matrix& A, const Vector& x, const Vector& s, double t_new,
                               double lambda);

// ---------------------------------------------------------------------------
// LP initialisation and recovery
// ---------------------------------------------------------------------------

/// Modified LP with an explicit, strictly interior, well-centred start.
///
/// Columns: original n, a slack for the summing row, and one artificial
/// column carrying the residual b - A 1.
struct InitLp {
  Matrix A;   ///< (d+1) x (n+2)
  Vector b;   ///< d+1
  Vector c;   ///< n+2
  Vector x0;  ///< (1_n, 1, 1/M_b)
  Vector y0;  ///< (0_d, -1)
  Vector s0;  ///< c - A^T y0
  int n = 0;  ///< original column count
  int d = 0;  ///< original row count
  double delta_prime = 0;  ///< min(delta, 0.05) / 2
  double M_b = 0;          ///< artificial cost 4 n / delta'
  double c_scale = 0;      ///< delta' / ||c||_inf (0 if c = 0)
};

/// Builds the modified LP.
///
/// @throws DimMismatch on inconsistent shapes.
/// @throws InvalidDim if delta <= 0 or d > n.
/// @throws DegenerateInput if A lacks full row rank.
InitLp init_lp(const Matrix& A, const Vector& b, const Vector& c, double delta);

/// Maps a modified-LP point back to the original variables (first n entries).
Vector recover_x(const InitLp& il, const Vector& x_mod);

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

/// Per-iteration trace record.
struct TraceRecord {
  long iter = 0;
  double t = 0;
  double phi = 0;       ///< potential of x s / t - 1 after the step (inf on overflow)
  int k = 0, kt = 0;    ///< w-level batch sizes of the accepted step
  int p = 0, pt = 0;    ///< h-level batch sizes of the potential structure
  int rejected = 0;     ///< rejected tries in this iteration
  bool classical = false;
  double step_identity = 0;
  double feas_rel = -1;  ///< feasible mode: relative residual of the materialised x
};

/// Solver outcome classification.
enum class SolveStatus {
  Optimal,     ///< converged; bounds hold under the feasibility assumption
  Infeasible,  ///< the artificial column stays active: no feasible point
  Unbounded,   ///< the summing-row slack collapsed: unbounded direction
};

/// Event counters aggregated over both structures and all re-initialisations.
struct SolveCounters {
  long matrix_updates = 0;
  long partial_matrix_updates = 0;
  long vector_updates = 0;
  long partial_vector_updates = 0;
  long rejected_steps = 0;
  long classical_steps = 0;
  long one_steps = 0;
  long reinitializations = 0;
};

/// Solver output.
struct Solution {
  Vector x;             ///< original-LP point, x >= 0
  Vector x_modified;    ///< final modified-LP point
  double objective = 0;
  double feasibility_l1 = 0;  ///< ||A x - b||_1 on the original LP
  long iterations = 0;
  SolveCounters counters;
  double potential_max = 0;   ///< max finite potential observed
  double max_step_identity = 0;
  double max_feas_rel = 0;    ///< feasible mode: max per-iteration relative residual
  double max_w_move = 0;      ///< max |w_new / w - 1| over accepted steps
  double max_mu_move = 0;     ///< max |mu_new / mu - 1| over accepted steps
  double clipped = 0;         ///< largest negative entry clipped to zero
  double final_t = 0;
  SolveStatus status = SolveStatus::Optimal;
  ResolvedParams params;
  std::vector<TraceRecord> trace;
};

/// Runs the central-path method on the modified LP of @p lp.
///
/// @throws MaxItersExceeded when the one-step budget is exhausted.
/// @throws DegenerateInput / DimMismatch / InvalidDim on bad input.
/// Inner errors propagate with the iteration number prefixed.
Solution solve(const LpInstance& lp, const SolverConfig& cfg);

// ---------------------------------------------------------------------------
// Exponent planner
// ---------------------------------------------------------------------------

/// Planned batch exponents and the resulting cost exponent.
struct ExponentPlan {
  double a = 0;
  double atilde = 0;
  double exponent = 0;
};

/// a = min(alpha, 4 omega / (3 (2 omega - 1))); a~ = min(alpha^2, 2/(2 omega - 1))
/// in the first branch and 2/(2 omega - 1) otherwise; exponent =
/// max(omega, 2.5 - a/2, 1.5 + a - a~/2, 0.5 + (omega - 1) a~ + a).
///
/// @throws InvalidDim unless 2 <= omega <= 3 and 0 <= alpha <= 1.
ExponentPlan plan_exponents(double omega, double alpha);

/// Root of omega = 13/6 - 1/(3 (2 omega - 1)) in [2, 3] by bisection.
double balanced_omega();

}  // namespace sketchlp
