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

#include "sketchlp/lp_json.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "json.hpp"

namespace sketchlp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// LpInstance validation
// ---------------------------------------------------------------------------

void LpInstance::validate() const {
  if (A.rows() < 1 || A.cols() < 1) throw DimMismatch("LP '" + name + "': A is empty");
  if (b.size() != A.rows()) {
    throw DimMismatch("LP '" + name + "': |b| = " + std::to_string(b.size()) + " but A has " +
                      std::to_string(A.rows()) + " rows");
  }
  if (c.size() != A.cols()) {
    throw DimMismatch("LP '" + name + "': |c| = " + std::to_string(c.size()) + " but A has " +
                      std::to_string(A.cols()) + " columns");
  }
  if (!A.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw DimMismatch("LP '" + name + "': non-finite entries");
  }
  if (R_bound && !(*R_bound > 0 && std::isfinite(*R_bound))) {
    throw DimMismatch("LP '" + name + "': R_bound must be positive");
  }
}

namespace {

// ---------------------------------------------------------------------------
// Source positions
// ---------------------------------------------------------------------------

int line_of(const std::string& text, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

/// Byte offset of the first occurrence of the member name "key" (outside of
/// other string literals), or npos.
std::size_t key_offset(const std::string& text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') {
      if (text.compare(i, quoted.size(), quoted) == 0) {
        std::size_t j = i + quoted.size();
        while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j < text.size() && text[j] == ':') return i;
      }
      in_string = true;
    }
  }
  return std::string::npos;
}

int key_line(const std::string& text, const std::string& key) {
  const std::size_t pos = key_offset(text, key);
  return pos == std::string::npos ? 1 : line_of(text, pos);
}

/// Line on which row @p r of the "A" array starts (falls back to the line of
/// the "A" key).
int row_line(const std::string& text, std::size_t r) {
  const std::size_t key = key_offset(text, "A");
  if (key == std::string::npos) return 1;
  std::size_t i = text.find('[', key);
  if (i == std::string::npos) return line_of(text, key);
  int depth = 0;
  std::size_t row = 0;
  bool in_string = false;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '[') {
      ++depth;
      if (depth == 2) {
        if (row == r) return line_of(text, i);
        ++row;
      }
    } else if (ch == ']') {
      if (--depth == 0) break;
    } else if (depth == 1 && ch != ',' && !std::isspace(static_cast<unsigned char>(ch))) {
      // A non-array row element still counts as a row.
      if (row == r) return line_of(text, i);
      ++row;
      while (i + 1 < text.size() && text[i + 1] != ',' && text[i + 1] != ']') ++i;
    }
  }
  return line_of(text, key);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg);
}

Vector number_array(const std::string& text, const json& j, const std::string& key) {
  const int line = key_line(text, key);
  if (!j.is_array()) fail(line, "'" + key + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(line, key + "[" + std::to_string(i) + "] is not a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Emission helpers
// ---------------------------------------------------------------------------

std::string quote(const std::string& s) { return json(s).dump(); }

std::string vec_json(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v[i]);
  }
  return out + "]";
}

/// Ordered object with pre-rendered values.
class Obj {
 public:
  Obj& add(const std::string& key, std::string rendered) {
    items_.emplace_back(key, std::move(rendered));
    return *this;
  }
  Obj& num(const std::string& key, double v) { return add(key, format_number(v)); }
  Obj& integer(const std::string& key, long v) { return add(key, std::to_string(v)); }
  Obj& boolean(const std::string& key, bool v) { return add(key, v ? "true" : "false"); }
  Obj& str(const std::string& key, const std::string& v) { return add(key, quote(v)); }

  [[nodiscard]] std::string compact() const {
    std::string out = "{";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (i) out += ", ";
      out += quote(items_[i].first) + ": " + items_[i].second;
    }
    return out + "}";
  }

  [[nodiscard]] std::string pretty(int indent = 0) const {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    std::string out = "{\n";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      out += pad + quote(items_[i].first) + ": " + items_[i].second;
      out += i + 1 < items_.size() ? ",\n" : "\n";
    }
    return out + std::string(static_cast<std::size_t>(indent), ' ') + "}";
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

LpInstance parse_lp_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    fail(line_of(text, byte), std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) fail(1, "top level must be a JSON object");

  LpInstance lp;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail(key_line(text, "name"), "'name' must be a string");
    lp.name = j["name"].get<std::string>();
  }
  for (const char* key : {"A", "b", "c"}) {
    if (!j.contains(key)) fail(1, std::string("missing required field '") + key + "'");
  }

  const json& jA = j["A"];
  if (!jA.is_array() || jA.empty()) fail(key_line(text, "A"), "'A' must be a non-empty array of rows");
  std::size_t ncols = 0;
  for (std::size_t r = 0; r < jA.size(); ++r) {
    if (!jA[r].is_array()) fail(row_line(text, r), "row " + std::to_string(r) + " of A is not an array");
    if (r == 0) {
      ncols = jA[0].size();
      if (ncols == 0) fail(row_line(text, 0), "row 0 of A is empty");
    } else if (jA[r].size() != ncols) {
      fail(row_line(text, r), "ragged A: row " + std::to_string(r) + " has " + std::to_string(jA[r].size()) +
                                  " entries, expected " + std::to_string(ncols));
    }
  }
  lp.A.resize(static_cast<Eigen::Index>(jA.size()), static_cast<Eigen::Index>(ncols));
  for (std::size_t r = 0; r < jA.size(); ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const json& e = jA[r][c];
      if (!e.is_number()) {
        fail(row_line(text, r), "A[" + std::to_string(r) + "][" + std::to_string(c) + "] is not a number");
      }
      lp.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = e.get<double>();
    }
  }

  lp.b = number_array(text, j["b"], "b");
  lp.c = number_array(text, j["c"], "c");
  if (lp.b.size() != lp.A.rows()) {
    fail(key_line(text, "b"), "|b| = " + std::to_string(lp.b.size()) + " but A has " +
                                  std::to_string(lp.A.rows()) + " rows");
  }
  if (lp.c.size() != lp.A.cols()) {
    fail(key_line(text, "c"), "|c| = " + std::to_string(lp.c.size()) + " but A has " +
                                  std::to_string(lp.A.cols()) + " columns");
  }
  if (j.contains("R_bound") && !j["R_bound"].is_null()) {
    const json& R = j["R_bound"];
    if (!R.is_number() || !(R.get<double>() > 0)) fail(key_line(text, "R_bound"), "'R_bound' must be a positive number");
    lp.R_bound = R.get<double>();
  }
  return lp;
}

LpInstance load_lp_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_lp_json(ss.str());
  } catch (const ParseError& e) {
    const std::string w = e.what();
    const auto pos = w.find(": ");
    throw ParseError(path + ": " + (pos == std::string::npos ? w : w.substr(pos + 2)));
  }
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string emit_lp_json(const LpInstance& lp) {
  std::string rows = "[";
  for (Eigen::Index r = 0; r < lp.A.rows(); ++r) {
    rows += r ? ",\n    " : "\n    ";
    rows += vec_json(lp.A.row(r).transpose());
  }
  rows += "\n  ]";
  Obj o;
  o.str("name", lp.name).add("A", rows).add("b", vec_json(lp.b)).add("c", vec_json(lp.c));
  if (lp.R_bound) o.num("R_bound", *lp.R_bound);
  return o.pretty() + "\n";
}

double effective_r_bound(const LpInstance& lp) {
  if (lp.R_bound) return *lp.R_bound;
  double min_pivot = 0.0;
  for (Eigen::Index i = 0; i < lp.A.size(); ++i) {
    const double a = std::abs(lp.A.data()[i]);
    if (a > 0 && (min_pivot == 0.0 || a < min_pivot)) min_pivot = a;
  }
  const double bmax = lp.b.size() ? lp.b.cwiseAbs().maxCoeff() : 0.0;
  if (min_pivot == 0.0 || bmax == 0.0) return static_cast<double>(lp.cols());
  return lp.cols() * bmax / min_pivot;
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Unbounded:
      return "unbounded";
  }
  return "unknown";
}

std::string report_json(const LpInstance& lp, const Solution& sol,
                        const std::optional<std::string>& trace_path) {
  Obj counters;
  counters.integer("matrix_updates", sol.counters.matrix_updates)
      .integer("partial_matrix_updates", sol.counters.partial_matrix_updates)
      .integer("vector_updates", sol.counters.vector_updates)
      .integer("partial_vector_updates", sol.counters.partial_vector_updates)
      .integer("rejected_steps", sol.counters.rejected_steps)
      .integer("classical_steps", sol.counters.classical_steps)
      .integer("one_steps", sol.counters.one_steps)
      .integer("reinitializations", sol.counters.reinitializations);
  Obj params;
  params.integer("n_modified", sol.params.n)
      .num("eps", sol.params.eps)
      .num("eps_mp", sol.params.eps_mp)
      .num("eps_far", sol.params.eps_far)
      .num("lambda", sol.params.lambda)
      .num("a", sol.params.a_exp)
      .num("atilde", sol.params.atilde_exp)
      .integer("sketch_rows", sol.params.sketch_rows)
      .integer("L", sol.params.L);
  Obj o;
  o.str("name", lp.name)
      .str("status", status_name(sol.status))
      .add("x", vec_json(sol.x))
      .num("objective", sol.objective)
      .num("feasibility_l1", sol.feasibility_l1)
      .num("R_bound", effective_r_bound(lp))
      .integer("iterations", sol.iterations)
      .add("counters", counters.pretty(2))
      .num("potential_max", sol.potential_max)
      .num("max_step_identity", sol.max_step_identity)
      .num("max_feasibility_rel", sol.max_feas_rel)
      .num("final_t", sol.final_t)
      .add("params", params.pretty(2));
  if (trace_path) o.str("trace_path", *trace_path);
  return o.pretty() + "\n";
}

std::string trace_record_json(const TraceRecord& r) {
  Obj o;
  o.integer("iter", r.iter)
      .num("t", r.t)
      .num("phi", r.phi)
      .integer("k", r.k)
      .integer("ktilde", r.kt)
      .integer("p", r.p)
      .integer("ptilde", r.pt)
      .integer("rejected", r.rejected)
      .boolean("classical", r.classical)
      .num("step_identity", r.step_identity);
  if (r.feas_rel >= 0) o.num("feasibility_rel", r.feas_rel);
  return o.compact();
}

std::string plan_json(double omega, double alpha, const ExponentPlan& p) {
  Obj o;
  o.num("omega", omega).num("alpha", alpha).num("a", p.a).num("atilde", p.atilde).num("exponent", p.exponent);
  return o.pretty() + "\n";
}

std::string walk_report_json(const WalkSpec& spec, const WalkReport& rep) {
  Obj inv;
  for (const auto& [name, r] : rep.max_residual) inv.num(name, r);
  Obj counters;
  counters.integer("matrix_updates", rep.counters.matrix_updates)
      .integer("partial_matrix_updates", rep.counters.partial_matrix_updates)
      .integer("vector_updates", rep.counters.vector_updates)
      .integer("partial_vector_updates", rep.counters.partial_vector_updates)
      .integer("queries", rep.counters.queries);
  Obj laws;
  laws.integer("k", rep.k_violations)
      .integer("ktilde", rep.kt_violations)
      .integer("p", rep.p_violations)
      .integer("ptilde", rep.pt_violations);
  Obj o;
  o.integer("n", spec.n)
      .integer("d", spec.d)
      .integer("steps", rep.steps)
      .integer("seed", static_cast<long>(spec.seed))
      .str("sketch", spec.sketch == SketchMode::Srht ? "srht" : "identity")
      .integer("thresh_k", rep.thresh_k)
      .integer("thresh_ktilde", rep.thresh_kt)
      .add("invariants", inv.pretty(2))
      .num("max_invariant_residual", rep.max_invariant_residual)
      .num("max_query_error", rep.max_query_error)
      .num("max_w_approx", rep.max_w_approx)
      .num("max_h_approx", rep.max_h_approx)
      .add("counter_law_violations", laws.pretty(2))
      .add("counters", counters.pretty(2));
  return o.pretty() + "\n";
}

}  // namespace sketchlp
