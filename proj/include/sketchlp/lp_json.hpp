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

/// @file lp_json.hpp
/// @brief JSON ingestion / emission of LP instances, run reports, trace
///        records and invariant-check reports.
///
/// Parsing uses nlohmann::json; emission writes every floating-point number
/// with 17 significant digits so that emitted files round-trip bit-exactly
/// and identical runs produce identical bytes.

#include <optional>
#include <string>

#include "sketchlp/ipm.hpp"
#include "sketchlp/lp.hpp"
#include "sketchlp/walk.hpp"

namespace sketchlp {

/// Parses an LP file of the form
/// {"name": s, "A": [[...], ...], "b": [...], "c": [...], "R_bound": r?}.
///
/// @throws ParseError with a "line L:" prefix on malformed JSON, wrong field
///         types, ragged rows of A (naming the row) or inconsistent sizes.
LpInstance parse_lp_json(const std::string& text);

/// Reads and parses a file.
/// @throws ParseError if the file cannot be read or parsed.
LpInstance load_lp_json(const std::string& path);

/// Serialises an instance (17 significant digits).
std::string emit_lp_json(const LpInstance& lp);

/// %.17g formatting; non-finite values become null.
std::string format_number(double v);

/// R_bound if present, otherwise the heuristic n * max|b| / min{|A_ij| : A_ij != 0}.
double effective_r_bound(const LpInstance& lp);

/// Human-readable status name ("optimal", "infeasible", "unbounded").
std::string status_name(SolveStatus s);

/// Run report for `solve` (stable key order, 17-digit numbers).
std::string report_json(const LpInstance& lp, const Solution& sol,
                        const std::optional<std::string>& trace_path);

/// One line of the JSONL trace file.
std::string trace_record_json(const TraceRecord& r);

/// Plan result {"a", "atilde", "exponent", "omega", "alpha"}.
std::string plan_json(double omega, double alpha, const ExponentPlan& p);

/// Invariant-check report of a random walk.
std::string walk_report_json(const WalkSpec& spec, const WalkReport& rep);

}  // namespace sketchlp
