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

/// @file feasible.hpp
/// @brief Exact-feasibility extension: the scalar multipliers of the two
///        maintenance instances, materialisation of the implicitly maintained
///        iterate, and the MakeFeasible coordinate reset.
///
/// Each maintenance instance carries G = diag(v~) A^T (A V A^T)^{-1} A and
/// four accumulators u1..u4 such that u1 + G u2 and u3 + M u4 equal the sums
/// of the exact (unsketched) primal and dual step parts issued since the last
/// initialisation.  The driver keeps x, s (explicit parts) and the sketched
/// iterates xbar, sbar.

#include "sketchlp/linalg.hpp"

namespace sketchlp {

class ProjMaint;

/// Which central-path term an instance maintains.
enum class FeasibleRole {
  None,       ///< extension disabled (infeasible-start driver)
  Time,       ///< the t-decrease term, f_t(x) = sqrt(x)
  Potential,  ///< the potential-gradient term, f_Phi
};

/// Scalar c multiplying f(h) in the step of one instance.
///
/// Time: c = t_new/t - 1.
/// Potential: c = -(eps/2) t_new / (sqrt(t) ||grad Phi_lambda(mu~/t - 1)||_2)
/// with mu~ = h_appr * t.
///
/// @throws InvalidDim if t <= 0 or role is None.
/// @throws ZeroGradient if the gradient norm is below 1e-14 (Potential role).
double scalar_c(const Vector& h_appr, FeasibleRole role, double t, double t_new, double eps,
                double lambda);

/// Iterates of the feasible-start driver.
struct FeasibleDriverState {
  Vector x;      ///< explicit part of the exactly feasible primal iterate
  Vector s;      ///< explicit part of the exactly feasible dual slack
  Vector xbar;   ///< sketched primal iterate
  Vector sbar;   ///< sketched dual slack
  Vector w_old;  ///< weights at the last reset of each coordinate
  int j = 0;     ///< iterations since the last re-initialisation
  double t_old = 1.0;
};

/// Primal and dual iterates including the implicit parts.
struct Materialized {
  Vector x;
  Vector s;
};

/// x - sum_ds (u1 + G u2) and s + sum_ds (u3 + M u4).
Materialized materialize(const FeasibleDriverState& st, const ProjMaint& mp_t, const ProjMaint& mp_phi);

/// Resets xbar, sbar on S^ = {i : |w_old_i - w_appr_i| > w_old_i / 2} to the
/// materialised values and sets w_old on S^ to w_appr.  Returns S^.
IndexSet make_feasible(FeasibleDriverState& st, const Vector& w_appr, const ProjMaint& mp_t,
                       const ProjMaint& mp_phi);

}  // namespace sketchlp
