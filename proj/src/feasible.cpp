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

#include "sketchlp/feasible.hpp"

#include <cmath>

#include "sketchlp/potential.hpp"
#include "sketchlp/projmaint.hpp"

namespace sketchlp {

double scalar_c(const Vector& h_appr, FeasibleRole role, double t, double t_new, double eps, double lambda) {
  if (!(t > 0.0)) throw InvalidDim("scalar_c requires t > 0");
  switch (role) {
    case FeasibleRole::Time:
      return t_new / t - 1.0;
    case FeasibleRole::Potential: {
      const Vector mu = h_appr * t;
      const PotentialValue pv = potential(mu, t, lambda);
      const double gnorm = pv.grad.norm();
      if (gnorm < 1e-14) throw ZeroGradient("potential gradient vanishes (mu~ = t)");
      return -(eps / 2.0) * t_new / (std::sqrt(t) * gnorm);
    }
    case FeasibleRole::None:
      break;
  }
  throw InvalidDim("scalar_c needs the Time or Potential role");
}

Materialized materialize(const FeasibleDriverState& st, const ProjMaint& mp_t, const ProjMaint& mp_phi) {
  return {st.x - mp_t.implicit_x() - mp_phi.implicit_x(), st.s + mp_t.implicit_s() + mp_phi.implicit_s()};
}

IndexSet make_feasible(FeasibleDriverState& st, const Vector& w_appr, const ProjMaint& mp_t,
                       const ProjMaint& mp_phi) {
  if (w_appr.size() != st.w_old.size()) throw DimMismatch("make_feasible: |w_appr| != n");
  std::vector<int> hat;
  for (Eigen::Index i = 0; i < w_appr.size(); ++i) {
    if (std::abs(st.w_old[i] - w_appr[i]) > st.w_old[i] / 2.0) hat.push_back(static_cast<int>(i));
  }
  const IndexSet S_hat = IndexSet::from_unsorted(hat);
  if (S_hat.empty()) return S_hat;
  const Materialized m = materialize(st, mp_t, mp_phi);
  for (int i : S_hat) {
    st.xbar[i] = m.x[i];
    st.sbar[i] = m.s[i];
    st.w_old[i] = w_appr[i];
  }
  return S_hat;
}

}  // namespace sketchlp
