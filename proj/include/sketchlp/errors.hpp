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

/// @file errors.hpp
/// @brief Exception hierarchy shared by every sketchlp module.
///
/// Each failure mode named in the module contracts has its own exception
/// type so that callers (and tests) can react to a specific condition
/// without parsing message strings.

#include <stdexcept>
#include <string>

namespace sketchlp {

/// Base class of all sketchlp errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SKETCHLP_DEFINE_ERROR(Name)                                 \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

/// A pivot fell below the relative singularity threshold.
SKETCHLP_DEFINE_ERROR(SingularMatrix)
/// An index set does not fit into a padded block.
SKETCHLP_DEFINE_ERROR(CapacityExceeded)
/// Slot sets of two padded operands violate the alignment preconditions.
SKETCHLP_DEFINE_ERROR(AlignmentError)
/// A matrix has nonzeros outside the blocks a decomposition permits.
SKETCHLP_DEFINE_ERROR(StructureViolation)
/// Invalid dimension argument (e.g. more sketch rows than columns).
SKETCHLP_DEFINE_ERROR(InvalidDim)
/// Operand dimensions do not match.
SKETCHLP_DEFINE_ERROR(DimMismatch)
/// All sketches of a pool have been consumed.
SKETCHLP_DEFINE_ERROR(PoolExhausted)
/// The potential gradient vanished where a normalisation by it is needed.
SKETCHLP_DEFINE_ERROR(ZeroGradient)
/// cosh/sinh argument of the potential exceeds the overflow guard.
SKETCHLP_DEFINE_ERROR(PotentialBlowup)
/// An iterative repair did not reach its target within the step cap.
SKETCHLP_DEFINE_ERROR(NoConvergence)
/// The input cannot be transformed as requested.
SKETCHLP_DEFINE_ERROR(DegenerateInput)
/// The solve loop exceeded its iteration budget.
SKETCHLP_DEFINE_ERROR(MaxItersExceeded)
/// The linear program has no feasible point.
SKETCHLP_DEFINE_ERROR(Infeasible)
/// The linear program is unbounded below.
SKETCHLP_DEFINE_ERROR(Unbounded)
/// Malformed input (JSON shape errors etc.).
SKETCHLP_DEFINE_ERROR(ParseError)

#undef SKETCHLP_DEFINE_ERROR

}  // namespace sketchlp
