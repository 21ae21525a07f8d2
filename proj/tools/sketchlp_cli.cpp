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

/// @file sketchlp_cli.cpp
/// @brief Command-line front end: `solve`, `plan` and `check`.
///
/// Exit codes: 0 success, 1 parse/shape/configuration error, 2 the LP was
/// detected infeasible or unbounded, 3 an invariant check failed.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sketchlp/ipm.hpp"
#include "sketchlp/lp_json.hpp"
#include "sketchlp/walk.hpp"

namespace {

using namespace sketchlp;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitLpStatus = 2;
constexpr int kExitCheckFailed = 3;
constexpr double kCheckTolerance = 1e-6;

struct SolveArgs {
  std::string input;
  double delta = 0.05;
  std::string mode = "feasible";
  std::string sketch = "srht";
  std::optional<double> a;
  std::optional<double> atilde;
  int sketch_rows = 0;
  std::uint64_t seed = 1;
  long max_iters = 200000;
  bool paper_constants = false;
  bool no_resync = false;
  std::string trace;
  int threshold_k = 0;
  int threshold_kt = 0;
};

struct PlanArgs {
  double omega = 2.0;
  double alpha = 1.0;
};

struct CheckArgs {
  std::string input;
  std::vector<std::uint64_t> random;
  int steps = 100;
  std::string sketch = "identity";
  std::uint64_t seed = 1;
  bool corrupt = false;
  int threshold_k = 0;
  int threshold_kt = 0;
};

SketchMode sketch_mode(const std::string& s) { return s == "identity" ? SketchMode::Identity : SketchMode::Srht; }

int run_solve(const SolveArgs& a) {
  const LpInstance lp = load_lp_json(a.input);
  SolverConfig cfg;
  cfg.delta = a.delta;
  cfg.mode = a.mode == "infeasible" ? SolveMode::Infeasible : SolveMode::Feasible;
  cfg.sketch_mode = sketch_mode(a.sketch);
  if (a.a) cfg.a_exp = *a.a;
  if (a.atilde) cfg.atilde_exp = *a.atilde;
  cfg.sketch_rows = a.sketch_rows;
  cfg.seed = a.seed;
  cfg.max_iters = a.max_iters;
  cfg.paper_constants = a.paper_constants;
  cfg.resync_on_reinit = !a.no_resync;
  cfg.thresh_k_override = a.threshold_k;
  cfg.thresh_kt_override = a.threshold_kt;
  cfg.record_trace = !a.trace.empty();

  const Solution sol = solve(lp, cfg);
  std::optional<std::string> trace_path;
  if (!a.trace.empty()) {
    std::ofstream out(a.trace, std::ios::binary);
    if (!out) throw ParseError("cannot write trace file '" + a.trace + "'");
    for (const TraceRecord& r : sol.trace) out << trace_record_json(r) << '\n';
    trace_path = a.trace;
  }
  std::cout << report_json(lp, sol, trace_path);
  if (sol.status != SolveStatus::Optimal) {
    std::cerr << "sketchlp: the LP appears " << status_name(sol.status) << "\n";
    return kExitLpStatus;
  }
  return kExitOk;
}

int run_plan(const PlanArgs& a) {
  const ExponentPlan p = plan_exponents(a.omega, a.alpha);
  std::cout << plan_json(a.omega, a.alpha, p);
  return kExitOk;
}

int run_check(const CheckArgs& a) {
  WalkSpec spec;
  spec.steps = a.steps;
  spec.sketch = sketch_mode(a.sketch);
  spec.corrupt = a.corrupt;
  spec.params.thresh_k_override = a.threshold_k;
  spec.params.thresh_kt_override = a.threshold_kt;
  if (!a.random.empty()) {
    if (a.random.size() != 3) throw ParseError("--random expects n d seed");
    spec.n = static_cast<int>(a.random[0]);
    spec.d = static_cast<int>(a.random[1]);
    spec.seed = a.random[2];
  } else if (!a.input.empty()) {
    const LpInstance lp = load_lp_json(a.input);
    lp.validate();
    spec.A = lp.A;
    spec.n = lp.cols();
    spec.d = lp.rows();
    spec.seed = a.seed;
  } else {
    throw ParseError("check needs an input file or --random n d seed");
  }
  const WalkReport rep = run_walk(spec);
  std::cout << walk_report_json(spec, rep);
  const bool bad = !(rep.max_invariant_residual <= kCheckTolerance) || !(rep.max_query_error <= kCheckTolerance) ||
                   rep.k_violations + rep.kt_violations + rep.p_violations + rep.pt_violations > 0;
  if (bad) {
    std::cerr << "sketchlp: invariant check failed\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchlp: sketched central-path LP solver with projection maintenance"};
  app.require_subcommand(1);

  SolveArgs sa;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve an LP given as JSON; prints a JSON report");
  solve_cmd->add_option("input", sa.input, "LP file {name, A, b, c, R_bound?}")->required();
  solve_cmd->add_option("--delta", sa.delta, "Target accuracy")->check(CLI::Range(1e-12, 0.999999));
  solve_cmd->add_option("--mode", sa.mode, "Driver variant")->check(CLI::IsMember({"infeasible", "feasible"}));
  solve_cmd->add_option("--sketch", sa.sketch, "Sketch family")->check(CLI::IsMember({"srht", "identity"}));
  solve_cmd->add_option("--a", sa.a, "Expensive-level batch exponent");
  solve_cmd->add_option("--atilde", sa.atilde, "Cheap-level batch exponent");
  solve_cmd->add_option("--sketch-rows", sa.sketch_rows, "Rows per sketch (0 = default)");
  solve_cmd->add_option("--seed", sa.seed, "Random seed")->envname("SEED");
  solve_cmd->add_option("--max-iters", sa.max_iters, "Budget on one-step calls");
  solve_cmd->add_flag("--paper-constants", sa.paper_constants, "Use the theoretical constants");
  solve_cmd->add_flag("--no-resync", sa.no_resync,
                      "Feasible mode: do not reset the sketched iterate to the exact one at re-initialisations");
  solve_cmd->add_option("--trace", sa.trace, "Write a JSONL per-iteration trace");
  solve_cmd->add_option("--threshold-k", sa.threshold_k, "Override the expensive-level threshold");
  solve_cmd->add_option("--threshold-ktilde", sa.threshold_kt, "Override the cheap-level threshold");

  PlanArgs pa;
  CLI::App* plan_cmd = app.add_subcommand("plan", "Optimal batch exponents for given omega, alpha");
  plan_cmd->add_option("--omega", pa.omega, "Matrix multiplication exponent in [2, 3]")->required();
  plan_cmd->add_option("--alpha", pa.alpha, "Dual exponent in [0, 1]")->required();

  CheckArgs ca;
  CLI::App* check_cmd = app.add_subcommand("check", "Run an update/query walk and verify all invariants");
  check_cmd->add_option("input", ca.input, "LP file whose A drives the walk");
  check_cmd->add_option("--random", ca.random, "Random instance: n d seed")->expected(3);
  check_cmd->add_option("--steps", ca.steps, "Walk length")->check(CLI::PositiveNumber);
  check_cmd->add_option("--sketch", ca.sketch, "Sketch family")->check(CLI::IsMember({"srht", "identity"}));
  check_cmd->add_option("--seed", ca.seed, "Walk seed for file input")->envname("SEED");
  check_cmd->add_flag("--corrupt", ca.corrupt, "Inject a fault mid-walk (checker self-test)");
  check_cmd->add_option("--threshold-k", ca.threshold_k, "Override the expensive-level threshold");
  check_cmd->add_option("--threshold-ktilde", ca.threshold_kt, "Override the cheap-level threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve_cmd) return run_solve(sa);
    if (*plan_cmd) return run_plan(pa);
    if (*check_cmd) return run_check(ca);
  } catch (const Infeasible& e) {
    std::cerr << "sketchlp: " << e.what() << "\n";
    return kExitLpStatus;
  } catch (const Unbounded& e) {
    std::cerr << "sketchlp: " << e.what() << "\n";
    return kExitLpStatus;
  } catch (const std::exception& e) {
    std::cerr << "sketchlp: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
