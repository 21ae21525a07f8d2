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

/// @file lp.hpp
/// @brief Standard-form linear program  min c^T x  s.t.  A x = b, x >= 0.

#include <optional>
#include <string>

#include "sketchlp/linalg.hpp"

namespace sketchlp {

/// A dense standard-form LP instance.
struct LpInstance {
  std::string name;
  Matrix A;  ///< d x n constraint matrix
  Vector b;  ///< right-hand side, length d
  Vector c;  ///< objective, length n
  std::optional<double> R_bound;  ///< l1 diameter of the feasible polytope, if known

  [[nodiscard]] int rows() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int cols() const { return static_cast<int>(A.cols()); }

  /// Throws DimMismatch unless |b| = d and |c| = n.
  void validate() const;
};

}  // namespace sketchlp
