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

#include "sketchlp/potential.hpp"

#include <cmath>
#include <string>

namespace sketchlp {

namespace {

double guarded_arg(double lambda, double r) {
  const double arg = lambda * r;
  if (!(std::abs(arg) <= kPotentialArgLimit)) {
    throw PotentialBlowup("|lambda * r| = " + std::to_string(std::abs(arg)) + " exceeds " +
                          std::to_string(kPotentialArgLimit));
  }
  return arg;
}

}  // namespace

PotentialValue potential(const Vector& mu, double t, double lambda) {
  if (!(t > 0.0)) throw InvalidDim("potential requires t > 0");
  PotentialValue out;
  out.grad.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double arg = guarded_arg(lambda, mu[i] / t - 1.0);
    out.phi += std::cosh(arg);
    out.grad[i] = lambda * std::sinh(arg);
  }
  return out;
}

double potential_of(const Vector& r, double lambda) {
  double phi = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) phi += std::cosh(guarded_arg(lambda, r[i]));
  return phi;
}

double ScalarFunction::operator()(double x) const {
  switch (kind) {
    case ScalarFnKind::Sqrt:
      return std::sqrt(x);
    case ScalarFnKind::GradPotential:
      return lambda * std::sinh(guarded_arg(lambda, x - 1.0)) / std::sqrt(x);
  }
  return 0.0;
}

Vector ScalarFunction::operator()(const Vector& x) const {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = (*this)(x[i]);
  return y;
}

}  // namespace sketchlp
