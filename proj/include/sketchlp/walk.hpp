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

/// @file walk.hpp
/// @brief Scripted random update/query walks over a maintenance instance,
///        checked against the invariants and the brute-force query oracle.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "sketchlp/projmaint.hpp"

namespace sketchlp {

/// Configuration of one walk.
struct WalkSpec {
  int n = 16;
  int d = 8;
  int steps = 100;
  std::uint64_t seed = 1;
  SketchMode sketch = SketchMode::Identity;
  int sketch_rows = 0;  ///< 0: max(1, n/2) for SRHT (identity mode always uses n)
  ScalarFnKind f = ScalarFnKind::Sqrt;
  double lambda = 4.0;
  MaintParams params;
  double max_ratio = 1.0 / 8.0;  ///< per-step bound on |w_new/w - 1| for moving coordinates
  bool corrupt = false;          ///< perturb M halfway through (self-test of the checker)
  std::optional<Matrix> A;       ///< constraint matrix (random d x n if absent)
};

/// Aggregated outcome of a walk.
struct WalkReport {
  int steps = 0;
  int thresh_k = 0;
  int thresh_kt = 0;
  std::map<std::string, double> max_residual;  ///< per invariant, max over all calls
  double max_invariant_residual = 0.0;
  double max_query_error = 0.0;     ///< max relative l_inf error of r vs the oracle
  double max_w_approx = 0.0;        ///< max |w_new/w_appr - 1|
  double max_h_approx = 0.0;        ///< max |h_new/h_appr - 1|
  long k_violations = 0;            ///< k outside {0} u [thresh_k, n]
  long kt_violations = 0;           ///< k~ outside {0} u [thresh_k~, 2 thresh_k]
  long p_violations = 0;            ///< same laws for the h-level counters
  long pt_violations = 0;
  MaintCounters counters;
};

/// Runs the walk.  Deterministic for a fixed spec.
WalkReport run_walk(const WalkSpec& spec);

}  // namespace sketchlp
