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

/// @file potential.hpp
/// @brief The cosh potential of the central path and the two scalar functions
///        f_t and f_Phi whose projections the maintenance structures track.

#include "sketchlp/linalg.hpp"

namespace sketchlp {

/// Largest |lambda * r_i| for which cosh/sinh are evaluated.
inline constexpr double kPotentialArgLimit = 700.0;

/// Value and gradient of Phi_lambda(r) = sum_i cosh(lambda r_i) at
/// r = mu/t - 1; grad_i = lambda sinh(lambda r_i).
struct PotentialValue {
  double phi = 0.0;
  Vector grad;
};

/// Phi_lambda(mu/t - 1) and its gradient with respect to r.
///
/// @throws InvalidDim if t <= 0.
/// @throws PotentialBlowup if some |lambda (mu_i/t - 1)| exceeds kPotentialArgLimit.
PotentialValue potential(const Vector& mu, double t, double lambda);

/// Phi_lambda(r) for an already-formed deviation vector r.
/// @throws PotentialBlowup as above.
double potential_of(const Vector& r, double lambda);

/// The scalar function applied coordinatewise to h inside f(h).
enum class ScalarFnKind {
  Sqrt,           ///< f_t(x) = sqrt(x)
  GradPotential,  ///< f_Phi(x) = lambda sinh(lambda (x - 1)) / sqrt(x)
};

/// Tagged scalar function with its parameter.
struct ScalarFunction {
  ScalarFnKind kind = ScalarFnKind::Sqrt;
  double lambda = 1.0;

  [[nodiscard]] double operator()(double x) const;
  /// Coordinatewise application.
  [[nodiscard]] Vector operator()(const Vector& x) const;

  static ScalarFunction sqrt_fn() { return {ScalarFnKind::Sqrt, 1.0}; }
  static ScalarFunction grad_potential(double lambda) { return {ScalarFnKind::GradPotential, lambda}; }
};

}  // namespace sketchlp
