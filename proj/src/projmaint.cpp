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

#include "sketchlp/projmaint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sketchlp {

namespace {

/// Columns X of @p M laid out on the slots of @p frame (X must be a subset).
Matrix cols_on(const Matrix& M, const IndexSet& X, const IndexSet& frame, int cap) {
  return reslot(pad(M, X, cap, PadMode::Cols), frame).payload;
}

/// Rows X of @p M laid out on the slots of @p frame.
Matrix rows_on(const Matrix& M, const IndexSet& X, const IndexSet& frame, int cap) {
  return reslot(pad(M, X, cap, PadMode::Rows), frame).payload;
}

/// Entries X of @p v laid out on the slots of @p frame.
Vector vec_on(const Vector& v, const IndexSet& X, const IndexSet& frame, int cap) {
  return rows_on(Matrix(v), X, frame, cap).col(0);
}

/// 1_X applied to a slot vector over @p frame: the n-vector holding the slot
/// entries of the members of X at their original indices.
Vector scatter_slots(const Vector& slotvec, const IndexSet& X, const IndexSet& frame, int n) {
  Vector out = Vector::Zero(n);
  for (int i : X) out[i] = slotvec[frame.position(i)];
  return out;
}

/// Principal block (Delta^{-1} + M)_{X,X}, identity-padded onto @p frame.
PaddedBlock capacitance_block(const Vector& Delta, const Matrix& M, const IndexSet& X,
                              const IndexSet& frame, int cap) {
  Matrix K = select_block(M, X);
  for (std::size_t a = 0; a < X.size(); ++a) {
    const auto ia = static_cast<Eigen::Index>(a);
    K(ia, ia) += 1.0 / Delta[X[a]];
  }
  return reslot(pad(K, X, cap, PadMode::Square), frame);
}

/// (C^{-1} + X)^{-1} Y, falling back to C (I + X C)^{-1} Y when C is singular.
Matrix capacitance_solve(const Matrix& C, const Matrix& X, const Matrix& Y) {
  if (C.rows() == 0) return Matrix::Zero(0, Y.cols());
  try {
    return lu_solve(mat_inverse(C) + X, Y);
  } catch (const SingularMatrix&) {
    const Matrix I = Matrix::Identity(C.rows(), C.cols());
    return C * lu_solve(I + X * C, Y);
  }
}

/// max_i |a_i| over a matrix (or 0).
double linf(const Matrix& a) { return max_abs(a); }

/// Relative residual ||x - ref||_max / max(scale, tiny).
double rel(const Matrix& x, const Matrix& ref, double scale) {
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) return std::numeric_limits<double>::infinity();
  const double err = max_abs(x - ref);
  if (err == 0.0) return 0.0;
  return err / std::max(scale, std::numeric_limits<double>::min());
}

/// max entry of |A| |B| (magnitude bound for the rounding error of A B).
double mag(const Matrix& A, const Matrix& B) { return linf(A.cwiseAbs() * B.cwiseAbs()); }

}  // namespace

// ---------------------------------------------------------------------------
// Scalar building blocks
// ---------------------------------------------------------------------------

double psi(double x, double eps_mp) {
  const double ax = std::abs(x);
  if (ax <= eps_mp) return ax * ax / (2.0 * eps_mp);
  if (ax <= 2.0 * eps_mp) {
    const double r = 2.0 * eps_mp - ax;
    return eps_mp - r * r / (2.0 * eps_mp);
  }
  return eps_mp;
}

SoftThresholdResult soft_threshold(const Vector& y, const Vector& w_new, const Vector& v, double eps,
                                   int threshold, double log_base) {
  const int n = static_cast<int>(y.size());
  if (w_new.size() != n || v.size() != n) throw DimMismatch("soft_threshold: vector lengths differ");
  if (threshold < 1) throw InvalidDim("soft_threshold requires threshold >= 1");
  std::vector<int> pi(static_cast<std::size_t>(n));
  std::iota(pi.begin(), pi.end(), 0);
  std::stable_sort(pi.begin(), pi.end(), [&](int a, int b) { return y[a] > y[b]; });

  int k = 0;
  for (int i = 0; i < n; ++i) k += y[i] >= eps ? 1 : 0;
  if (k >= threshold) {
    double logn = std::log(static_cast<double>(n));
    if (log_base > 0.0) logn /= std::log(log_base);
    const double decay = 1.0 - 1.0 / logn;
    // 1-based positions: y_pi(k) is y[pi[k-1]].
    auto ypos = [&](int pos) { return y[pi[static_cast<std::size_t>(pos - 1)]]; };
    do {
      k = std::min((3 * k + 1) / 2, n);                      // ceil(1.5 k)
    } while (!(k == n || ypos(k) < decay * ypos((2 * k + 2) / 3)));  // ceil(k / 1.5)
  }
  SoftThresholdResult out{v, k};
  for (int i = 0; i < k; ++i) {
    const int c = pi[static_cast<std::size_t>(i)];
    out.v_new[c] = w_new[c];
  }
  return out;
}

Vector adjust(const Vector& vt_tmp, const Vector& vt, const Vector& v, double eps_far) {
  Vector out = vt_tmp;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (vt_tmp[i] != vt[i] && vt_tmp[i] >= (1.0 - eps_far) * v[i] && vt_tmp[i] <= (1.0 + eps_far) * v[i]) {
      out[i] = v[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

double InvariantReport::max_residual() const {
  double m = 0.0;
  for (const auto& it : items) m = std::max(m, std::isnan(it.residual) ? std::numeric_limits<double>::infinity() : it.residual);
  return m;
}

double InvariantReport::residual(const std::string& name) const {
  for (const auto& it : items) {
    if (it.name == name) return it.residual;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

ProjMaint::ProjMaint(const Matrix& A, ScalarFunction f, const MaintParams& params, const Vector& w0,
                     const Vector& h0, SketchPool pool, const FeasibleParams& feas)
    : A_(A), f_(f), prm_(params), fp_(feas), n_(static_cast<int>(A.cols())), pool_(std::move(pool)) {
  if (n_ < 1 || A_.rows() < 1) throw DimMismatch("constraint matrix must be non-empty");
  if (w0.size() != n_ || h0.size() != n_) throw DimMismatch("initial w/h length != number of columns");
  if (pool_.ambient_dim() != n_) throw DimMismatch("sketch pool dimension != number of columns");
  if (!(prm_.eps_mp > 0.0 && prm_.eps_mp < 1.0 && prm_.eps_far > 0.0 && prm_.eps_far < 1.0)) {
    throw InvalidDim("eps_mp and eps_far must lie in (0, 1)");
  }
  check_weights(w0, "w0");

  const double n = n_;
  thresh_k_ = prm_.thresh_k_override > 0 ? prm_.thresh_k_override
                                          : static_cast<int>(std::ceil(std::pow(n, prm_.a_exp)));
  thresh_k_ = std::clamp(thresh_k_, 1, n_);
  thresh_kt_ = prm_.thresh_kt_override > 0 ? prm_.thresh_kt_override
                                            : static_cast<int>(std::ceil(std::pow(n, prm_.atilde_exp)));
  thresh_kt_ = std::clamp(thresh_kt_, 1, thresh_k_);
  cap_ = std::min(n_, 6 * thresh_k_);

  v_ = vt_ = w0;
  g_ = gt_ = h0;
  const Vector sv = sqrt_of(v_);
  M_ = A_.transpose() * lu_solve(A_ * v_.asDiagonal() * A_.transpose(), A_);
  Q_ = pool_.stacked() * (sv.asDiagonal() * M_);
  const Vector svfg = sv.cwiseProduct(f_(g_));
  beta1_ = Q_ * svfg;
  beta2_ = M_ * svfg;
  Delta_ = Gamma_ = xi_ = gamma2_ = Vector::Zero(n_);
  B_ = padded_zero(0, IndexSet{}, cap_, PadMode::Square);
  E_ = padded_zero(n_, IndexSet{}, cap_, PadMode::Rows);
  F_ = padded_zero(static_cast<int>(Q_.rows()), IndexSet{}, cap_, PadMode::Cols);
  gamma1_ = padded_zero(1, IndexSet{}, cap_, PadMode::Rows);

  if (fp_.role != FeasibleRole::None) {
    G_ = v_.asDiagonal() * M_;
    u1_ = u2_ = u3_ = u4_ = Vector::Zero(n_);
  }
}

void ProjMaint::check_weights(const Vector& w, const char* what) const {
  if (w.size() != n_) throw DimMismatch(std::string(what) + ": length != number of columns");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw InvalidDim(std::string(what) + ": weights must be positive and finite");
    }
  }
}

void ProjMaint::check_delta(const Vector& Delta_new, const IndexSet& S) const {
  for (int i : S) {
    if (std::abs(Delta_new[i]) < 1e-14 * v_[i]) {
      throw SingularMatrix("|Delta_" + std::to_string(i) + "| is numerically zero");
    }
  }
}

double ProjMaint::c_for(const Vector* h_appr) const {
  if (fp_.role == FeasibleRole::None || h_appr == nullptr) return 0.0;
  try {
    return scalar_c(*h_appr, fp_.role, t_, t_new_, fp_.eps, fp_.lambda);
  } catch (const ZeroGradient&) {
    return 0.0;
  }
}

// ---------------------------------------------------------------------------
// Local variables
// ---------------------------------------------------------------------------

LocalVars ProjMaint::compute_locals(const Vector& w_appr, const Vector* h_appr) const {
  if (w_appr.size() != n_) throw DimMismatch("compute_locals: |w_appr| != n");
  LocalVars lv;
  lv.dDelta = w_appr - vt_;
  lv.dGamma = sqrt_of(w_appr) - sqrt_of(vt_);
  lv.Delta_new = Delta_ + lv.dDelta;
  lv.Gamma_new = Gamma_ + lv.dGamma;
  lv.dS = IndexSet::differ(w_appr, vt_);
  lv.S_new = IndexSet::differ(w_appr, v_);
  lv.S_prime = set_difference(set_union(S_, lv.dS), lv.S_new);
  if (h_appr != nullptr) {
    if (h_appr->size() != n_) throw DimMismatch("compute_locals: |h_appr| != n");
    lv.has_h = true;
    lv.dxi = sqrt_of(w_appr).cwiseProduct(f_(*h_appr)) - sqrt_of(vt_).cwiseProduct(f_(gt_));
    lv.xi_new = xi_ + lv.dxi;
  }
  return lv;
}

// ---------------------------------------------------------------------------
// Expensive level: MatrixUpdate
// ---------------------------------------------------------------------------

void ProjMaint::matrix_update(const Vector& w_appr, const Vector* h_appr) {
  check_weights(w_appr, "matrix_update");
  const LocalVars lv = compute_locals(w_appr, nullptr);
  check_delta(lv.Delta_new, lv.S_new);
  const Vector sw = sqrt_of(w_appr);
  const Vector sv = sqrt_of(v_);

  Matrix Mtmp = M_;
  if (!lv.S_new.empty()) {
    Matrix K = select_block(M_, lv.S_new);
    for (std::size_t a = 0; a < lv.S_new.size(); ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      K(ia, ia) += 1.0 / lv.Delta_new[lv.S_new[a]];
    }
    const Matrix MS = select_cols(M_, lv.S_new);
    Mtmp -= MS * lu_solve(K, MS.transpose());
  }
  const Matrix Qtmp = Q_ + pool_.stacked() * (lv.Gamma_new.asDiagonal() * Mtmp) +
                      pool_.stacked() * (sv.asDiagonal() * (Mtmp - M_));

  if (fp_.role != FeasibleRole::None) {
    const double c = c_for(h_appr);
    const Vector step = h_appr != nullptr ? (Mtmp * sw.cwiseProduct(f_(*h_appr))).eval() : Vector::Zero(n_).eval();
    u1_ += G_ * u2_ + c * w_appr.cwiseProduct(step);
    u3_ += M_ * u4_ + c * step;
    G_ = w_appr.asDiagonal() * Mtmp;
    u2_.setZero();
    u4_.setZero();
  }

  const Vector fg = f_(g_);
  M_ = std::move(Mtmp);
  Q_ = Qtmp;
  beta1_ = Q_ * sw.cwiseProduct(fg);
  beta2_ = M_ * sw.cwiseProduct(fg);
  xi_ = sw.cwiseProduct(f_(gt_) - fg);
  v_ = vt_ = w_appr;
  B_ = padded_zero(0, IndexSet{}, cap_, PadMode::Square);
  E_ = padded_zero(n_, IndexSet{}, cap_, PadMode::Rows);
  F_ = padded_zero(static_cast<int>(Q_.rows()), IndexSet{}, cap_, PadMode::Cols);
  gamma1_ = padded_zero(1, IndexSet{}, cap_, PadMode::Rows);
  gamma2_.setZero();
  S_ = IndexSet{};
  Delta_.setZero();
  Gamma_.setZero();
  matrix_level_fired_ = true;
  ++counters_.matrix_updates;
}

// ---------------------------------------------------------------------------
// Cheap level: PartialMatrixUpdate
// ---------------------------------------------------------------------------

void ProjMaint::partial_matrix_update(const Vector& w_appr, const Vector* h_appr) {
  check_weights(w_appr, "partial_matrix_update");
  const LocalVars lv = compute_locals(w_appr, nullptr);
  check_delta(lv.Delta_new, lv.S_new);
  const IndexSet W = set_union(S_, lv.dS);
  const IndexSet dS_out = set_difference(lv.dS, S_);  // dS \ S
  const IndexSet& Sp = lv.S_prime;
  const Matrix Mt = M_.transpose();
  const Matrix& R = pool_.stacked();

  // B in the frame W and the structured change N = U' C U^T.
  const PaddedBlock BW = reslot(B_, W);
  const PaddedBlock N = padded_add(capacitance_block(lv.Delta_new, M_, lv.S_new, W, cap_),
                                   capacitance_block(Delta_, M_, S_, W, cap_), -1.0);
  const UcuFactors uc = decompose_ucu(N, set_difference(S_, lv.dS), lv.dS);
  const Matrix BU = BW.payload * uc.Uprime;
  // X = B U' (C^{-1} + U^T B U')^{-1} U^T
  const Matrix X = BU * capacitance_solve(uc.C, uc.U.transpose() * BU, uc.U.transpose());
  const Matrix Btmp = BW.payload - X * BW.payload;

  const Matrix FW = reslot(F_, W).payload;
  const Matrix Ftmp = FW + R * (Gamma_.asDiagonal() * (cols_on(M_, dS_out, W, cap_) - cols_on(M_, Sp, W, cap_))) +
                      R * (lv.dGamma.asDiagonal() * cols_on(M_, lv.S_new, W, cap_));
  const Matrix EW = reslot(E_, W).payload;
  const Matrix Etmp = EW + Btmp * (rows_on(Mt, dS_out, W, cap_) - rows_on(Mt, Sp, W, cap_)) - X * EW;

  const Vector sw = sqrt_of(w_appr);
  const Vector sv = sqrt_of(v_);
  const Vector svt = sqrt_of(vt_);
  const Vector fg = f_(g_);
  const Vector fgt = f_(gt_);
  const Vector xi_tmp = sw.cwiseProduct(fgt) - sv.cwiseProduct(fg);
  const Matrix MSnew_t = rows_on(Mt, lv.S_new, W, cap_);
  const Vector g1tmp = Btmp * vec_on(beta2_, lv.S_new, W, cap_) + Btmp * (MSnew_t * xi_tmp);
  const Vector g2tmp = gamma2_ + lv.Gamma_new.cwiseProduct(M_ * (sw - svt).cwiseProduct(fgt)) +
                       lv.dGamma.cwiseProduct(M_ * (svt.cwiseProduct(fgt) - sv.cwiseProduct(fg)));

  if (fp_.role != FeasibleRole::None) {
    const double c = c_for(h_appr);
    u1_ -= lv.dDelta.cwiseProduct(M_ * u2_);
    G_ += lv.dDelta.asDiagonal() * M_;
    if (h_appr != nullptr) {
      const Vector swf = sw.cwiseProduct(f_(*h_appr));
      const Vector corr = swf - scatter_slots(Btmp * (MSnew_t * swf), lv.S_new, W, n_);
      u2_ += c * corr;
      u4_ += c * corr;
    }
  }

  PaddedBlock Bnew{PadMode::Square, cap_, W, Btmp};
  PaddedBlock Enew{PadMode::Rows, cap_, W, Etmp};
  PaddedBlock Fnew{PadMode::Cols, cap_, W, Ftmp};
  PaddedBlock g1new{PadMode::Rows, cap_, W, Matrix(g1tmp)};
  B_ = restrict_slots(Bnew, lv.S_new);
  E_ = restrict_slots(Enew, lv.S_new);
  F_ = restrict_slots(Fnew, lv.S_new);
  gamma1_ = restrict_slots(g1new, lv.S_new);
  xi_ = xi_tmp;
  gamma2_ = g2tmp;
  vt_ = w_appr;
  S_ = lv.S_new;
  Delta_ = lv.Delta_new;
  Gamma_ = lv.Gamma_new;
  matrix_level_fired_ = true;
  ++counters_.partial_matrix_updates;
}

// ---------------------------------------------------------------------------
// Right-hand side levels
// ---------------------------------------------------------------------------

void ProjMaint::vector_update(const Vector& h_appr) {
  if (h_appr.size() != n_) throw DimMismatch("vector_update: |h_appr| != n");
  const Vector sv = sqrt_of(v_);
  const Vector svt = sqrt_of(vt_);
  const Vector fh = f_(h_appr);
  const Vector dfh = sv.cwiseProduct(fh - f_(g_));
  beta1_ += Q_ * dfh;
  beta2_ += M_ * dfh;
  xi_ = (svt - sv).cwiseProduct(fh);
  const IndexSet& S = S_;
  const Matrix MSt = rows_on(M_.transpose(), S, S, cap_);
  gamma1_.payload = B_.payload * (vec_on(beta2_, S, S, cap_) + MSt * xi_);
  gamma2_ = Gamma_.cwiseProduct(M_ * xi_);
  g_ = gt_ = h_appr;
  T_ = IndexSet{};
  ++counters_.vector_updates;
}

void ProjMaint::partial_vector_update(const Vector& h_appr) {
  if (h_appr.size() != n_) throw DimMismatch("partial_vector_update: |h_appr| != n");
  const Vector sv = sqrt_of(v_);
  const Vector svt = sqrt_of(vt_);
  const Vector fh = f_(h_appr);
  const Vector step = svt.cwiseProduct(fh - f_(gt_));
  xi_ = svt.cwiseProduct(fh) - sv.cwiseProduct(f_(g_));
  const Matrix MSt = rows_on(M_.transpose(), S_, S_, cap_);
  gamma1_.payload += B_.payload * (MSt * step);
  gamma2_ += Gamma_.cwiseProduct(M_ * step);
  T_ = IndexSet::differ(h_appr, g_);
  gt_ = h_appr;
  ++counters_.partial_vector_updates;
}

// ---------------------------------------------------------------------------
// Soft-thresholded level updates
// ---------------------------------------------------------------------------

LevelUpdate ProjMaint::update_v(const Vector& w_new, const Vector* h_appr) {
  check_weights(w_new, "update_v");
  const double emp = prm_.eps_mp;
  Vector yt(n_);
  for (int i = 0; i < n_; ++i) yt[i] = psi(w_new[i] / vt_[i] - 1.0, emp);
  const SoftThresholdResult lo = soft_threshold(yt, w_new, vt_, emp / 2.0, thresh_kt_, prm_.log_base);
  const Vector vt_new = adjust(lo.v_new, vt_, v_, prm_.eps_far);

  if (static_cast<int>(IndexSet::differ(vt_new, v_).size()) >= thresh_k_) {
    Vector y(n_);
    for (int i = 0; i < n_; ++i) y[i] = psi(w_new[i] / v_[i] - 1.0, emp) + psi(w_new[i] / vt_[i] - 1.0, emp);
    const SoftThresholdResult hi = soft_threshold(y, w_new, v_, prm_.eps_far * prm_.eps_far / (32.0 * emp),
                                                  thresh_k_, prm_.log_base);
    const int k = static_cast<int>(IndexSet::differ(hi.v_new, v_).size());
    matrix_update(hi.v_new, h_appr);
    return {hi.v_new, k, 0};
  }
  const int kt = static_cast<int>(IndexSet::differ(vt_new, vt_).size());
  if (kt >= thresh_kt_) {
    partial_matrix_update(vt_new, h_appr);
    return {vt_new, 0, kt};
  }
  return {vt_new, 0, 0};
}

LevelUpdate ProjMaint::update_g(const Vector& h_new) {
  if (h_new.size() != n_) throw DimMismatch("update_g: |h_new| != n");
  const double emp = prm_.eps_mp;
  Vector yt(n_);
  for (int i = 0; i < n_; ++i) yt[i] = psi(h_new[i] / gt_[i] - 1.0, emp);
  const SoftThresholdResult lo = soft_threshold(yt, h_new, gt_, emp / 2.0, thresh_kt_, prm_.log_base);
  const Vector gt_new = adjust(lo.v_new, gt_, g_, prm_.eps_far);

  if (static_cast<int>(IndexSet::differ(gt_new, g_).size()) >= thresh_k_) {
    Vector y(n_);
    for (int i = 0; i < n_; ++i) y[i] = psi(h_new[i] / g_[i] - 1.0, emp) + psi(h_new[i] / gt_[i] - 1.0, emp);
    const SoftThresholdResult hi = soft_threshold(y, h_new, g_, prm_.eps_far * prm_.eps_far / (32.0 * emp),
                                                  thresh_k_, prm_.log_base);
    const int k = static_cast<int>(IndexSet::differ(hi.v_new, g_).size());
    vector_update(hi.v_new);
    return {hi.v_new, k, 0};
  }
  const int kt = static_cast<int>(IndexSet::differ(gt_new, gt_).size());
  if (kt >= thresh_kt_) {
    partial_vector_update(gt_new);
    return {gt_new, 0, kt};
  }
  return {gt_new, 0, 0};
}

// ---------------------------------------------------------------------------
// Query
// ---------------------------------------------------------------------------

Vector ProjMaint::query(const Vector& w_appr, const Vector& h_appr) {
  check_weights(w_appr, "query");
  if (h_appr.size() != n_) throw DimMismatch("query: |h_appr| != n");
  const LocalVars lv = compute_locals(w_appr, &h_appr);
  check_delta(lv.Delta_new, lv.S_new);
  const int l = pool_.advance();
  ++counters_.queries;
  const int b = pool_.block_rows();
  const auto Rl = pool_.block(l);
  const Matrix Ql = Q_.middleRows(static_cast<Eigen::Index>(l) * b, b);

  const Vector r1 = beta1_.segment(static_cast<Eigen::Index>(l) * b, b);
  const Vector r2 = Ql * xi_ + Rl * gamma2_ + Rl * lv.dGamma.cwiseProduct(M_ * lv.xi_new) + Ql * lv.dxi +
                    Rl * Gamma_.cwiseProduct(M_ * lv.dxi);
  const Vector r3 = Rl * lv.Gamma_new.cwiseProduct(beta2_);
  Vector r4 = Vector::Zero(b);

  const IndexSet W = set_union(S_, lv.dS);
  Vector diff = Vector::Zero(cap_);  // gamma^tmp - gamma1 - d gamma on the frame W
  if (!W.empty()) {
    const IndexSet dS_out = set_difference(lv.dS, S_);
    const IndexSet& Sp = lv.S_prime;
    const Matrix Mt = M_.transpose();
    const PaddedBlock BW = reslot(B_, W);
    const Matrix EW = reslot(E_, W).payload;
    const Vector g1W = reslot(gamma1_, W).payload.col(0);

    const Vector dgamma = BW.payload * (vec_on(beta2_, dS_out, W, cap_) - vec_on(beta2_, Sp, W, cap_)) +
                          BW.payload * ((rows_on(Mt, dS_out, W, cap_) - rows_on(Mt, Sp, W, cap_)) * lv.xi_new) +
                          EW * lv.dxi;

    Vector gamma_tmp = Vector::Zero(cap_);
    if (!lv.dS.empty()) {
      const PaddedBlock N = padded_add(capacitance_block(lv.Delta_new, M_, lv.S_new, W, cap_),
                                       capacitance_block(Delta_, M_, S_, W, cap_), -1.0);
      const UcuFactors uc = decompose_ucu(N, set_difference(S_, lv.dS), lv.dS);
      const int k = uc.k;
      // dE = E_{dS} - B_{(dS n S)} M_{(dS n S), dS}, with the S' columns negated
      // and the other (S n dS) columns zeroed; equals B U2.
      const IndexSet SdS = set_intersection(S_, lv.dS);
      Matrix dE(cap_, k);
      for (int j = 0; j < k; ++j) {
        const int cj = lv.dS[static_cast<std::size_t>(j)];
        Vector col = EW.col(cj);
        for (int i : SdS) col -= BW.payload.col(W.position(i)) * M_(i, cj);
        if (Sp.contains(cj)) {
          col = -col;
        } else if (SdS.contains(cj)) {
          col.setZero();
        }
        dE.col(j) = col;
      }
      Matrix Utmp(cap_, 3 * k);
      for (int j = 0; j < k; ++j) {
        const Vector bc = BW.payload.col(W.position(lv.dS[static_cast<std::size_t>(j)]));
        Utmp.col(j) = bc;
        Utmp.col(k + j) = bc;
      }
      Utmp.rightCols(k) = dE;
      gamma_tmp = Utmp * capacitance_solve(uc.C, uc.U.transpose() * Utmp, uc.U.transpose() * (g1W + dgamma));
    }
    diff = gamma_tmp - g1W - dgamma;

    const Matrix FWl = reslot(F_, W).payload.middleRows(static_cast<Eigen::Index>(l) * b, b);
    const Matrix lhs = cols_on(Ql, lv.S_new, W, cap_) + FWl +
                       Rl * (Gamma_.asDiagonal() * (cols_on(M_, dS_out, W, cap_) - cols_on(M_, Sp, W, cap_))) +
                       Rl * (lv.dGamma.asDiagonal() * cols_on(M_, lv.S_new, W, cap_));
    r4 = lhs * diff;
  }

  if (fp_.role != FeasibleRole::None && !matrix_level_fired_) {
    const double c = c_for(&h_appr);
    const Vector z = sqrt_of(w_appr).cwiseProduct(f_(h_appr)) + scatter_slots(diff, lv.S_new, W, n_);
    u1_ += c * lv.dDelta.cwiseProduct(M_ * z);
    u2_ += c * z;
    u4_ += c * z;
  }

  return Rl.transpose() * (r1 + r2 + r3 + r4);
}

QueryOutput ProjMaint::update_query(const Vector& w_new, const Vector& h_new) {
  QueryOutput out;
  matrix_level_fired_ = false;
  if (fp_.role == FeasibleRole::None) {
    const LevelUpdate vu = update_v(w_new);
    const LevelUpdate gu = update_g(h_new);
    out.w_appr = vu.appr;
    out.h_appr = gu.appr;
    out.k = vu.k;
    out.kt = vu.kt;
    out.p = gu.k;
    out.pt = gu.kt;
  } else {
    const LevelUpdate gu = update_g(h_new);
    const LevelUpdate vu = update_v(w_new, &gu.appr);
    out.w_appr = vu.appr;
    out.h_appr = gu.appr;
    out.k = vu.k;
    out.kt = vu.kt;
    out.p = gu.k;
    out.pt = gu.kt;
  }
  out.sketch_index = pool_.cursor();
  out.matrix_level_fired = matrix_level_fired_;
  try {
    out.r = query(out.w_appr, out.h_appr);
  } catch (...) {
    matrix_level_fired_ = false;
    throw;
  }
  if (fp_.role != FeasibleRole::None) {
    out.c = c_for(&out.h_appr);
    const Vector sw = sqrt_of(out.w_appr);
    out.q_x = out.c * sw.cwiseProduct(f_(out.h_appr));
    out.p_x = out.c * sw.cwiseProduct(out.r);
    out.p_s = out.c * out.r.cwiseQuotient(sw);
  }
  matrix_level_fired_ = false;
  return out;
}

// ---------------------------------------------------------------------------
// Feasible extension accessors
// ---------------------------------------------------------------------------

Vector ProjMaint::implicit_x() const {
  if (fp_.role == FeasibleRole::None) return Vector::Zero(n_);
  return u1_ + G_ * u2_;
}

Vector ProjMaint::implicit_s() const {
  if (fp_.role == FeasibleRole::None) return Vector::Zero(n_);
  return u3_ + M_ * u4_;
}

void ProjMaint::reset_implicit(const Vector& x_part, const Vector& s_part) {
  if (fp_.role == FeasibleRole::None) return;
  u1_ = x_part;
  u3_ = s_part;
  u2_.setZero();
  u4_.setZero();
}

// ---------------------------------------------------------------------------
// Invariant checks
// ---------------------------------------------------------------------------

InvariantReport ProjMaint::check_invariants() const {
  InvariantReport rep;
  auto add = [&rep](const char* name, double r) { rep.items.push_back({name, r}); };
  const double inf = std::numeric_limits<double>::infinity();
  try {
    const Matrix& R = pool_.stacked();
    const Vector sv = sqrt_of(v_);
    const Vector svt = sqrt_of(vt_);
    const Vector fg = f_(g_);
    const Vector fgt = f_(gt_);
    const Matrix Mtrue = A_.transpose() * lu_solve(A_ * v_.asDiagonal() * A_.transpose(), A_);
    const Matrix SVM = sv.asDiagonal() * Mtrue;
    const Matrix Qtrue = R * SVM;
    const Vector svfg = sv.cwiseProduct(fg);
    const Vector b1 = Qtrue * svfg;
    const Vector b2 = Mtrue * svfg;
    const Vector Dtrue = vt_ - v_;
    const Vector Gtrue = svt - sv;
    const Vector xitrue = svt.cwiseProduct(fgt) - svfg;
    const IndexSet Strue = IndexSet::differ(vt_, v_);
    const IndexSet Ttrue = IndexSet::differ(gt_, g_);

    add("M", rel(M_, Mtrue, linf(Mtrue)));
    add("Q", rel(Q_, Qtrue, mag(R, SVM)));
    add("beta1", rel(beta1_, b1, mag(R, SVM.cwiseAbs() * svfg.cwiseAbs())));
    add("beta2", rel(beta2_, b2, mag(Mtrue, svfg)));
    add("S", S_ == Strue ? 0.0 : 1.0);
    add("T", T_ == Ttrue ? 0.0 : 1.0);
    add("Delta", rel(Delta_, Dtrue, linf(vt_) + linf(v_)));
    add("Gamma", rel(Gamma_, Gtrue, linf(svt) + linf(sv)));
    add("xi", rel(xi_, xitrue, linf(svt.cwiseProduct(fgt)) + linf(svfg)));

    // Members over S are compared on the true support.
    const IndexSet& S = Strue;
    const int k = static_cast<int>(S.size());
    if (!(B_.occupied == S) || !(E_.occupied == S) || !(F_.occupied == S) || !(gamma1_.occupied == S)) {
      add("B", inf);
      add("E", inf);
      add("F", inf);
      add("gamma1", inf);
    } else {
      Matrix K = select_block(Mtrue, S);
      for (int a = 0; a < k; ++a) K(a, a) += 1.0 / Dtrue[S[static_cast<std::size_t>(a)]];
      const Matrix Btrue = mat_inverse(K);
      const Matrix MSt = select_rows(Mtrue.transpose(), S);
      const Matrix MS = select_cols(Mtrue, S);
      // Padding: identity (B) or zero (E, F, gamma1) beyond the first k slots.
      Matrix Bpad = B_.payload;
      Bpad.topLeftCorner(k, k).setZero();
      const Matrix Ipad = [&] {
        Matrix I = Matrix::Identity(cap_, cap_);
        I.topLeftCorner(k, k).setZero();
        return I;
      }();
      const double bpad = max_abs(Bpad - Ipad);
      add("B", std::max(rel(B_.payload.topLeftCorner(k, k), Btrue, linf(Btrue)), bpad));
      const Matrix Etrue = Btrue * MSt;
      add("E", std::max(rel(E_.payload.topRows(k), Etrue, mag(Btrue, MSt)),
                        max_abs(E_.payload.bottomRows(cap_ - k))));
      const Matrix RG = R * Gtrue.asDiagonal();
      const Matrix Ftrue = RG * MS;
      add("F", std::max(rel(F_.payload.leftCols(k), Ftrue, mag(RG, MS)),
                        max_abs(F_.payload.rightCols(cap_ - k))));
      const Vector inner = select(b2, S) + MSt * xitrue;
      const Vector inner_mag = select(b2, S).cwiseAbs() + MSt.cwiseAbs() * xitrue.cwiseAbs();
      const Vector g1true = Btrue * inner;
      add("gamma1", std::max(rel(gamma1_.payload.topRows(k), g1true, linf(Btrue.cwiseAbs() * inner_mag)),
                             max_abs(gamma1_.payload.bottomRows(cap_ - k))));
    }
    const Vector g2true = Gtrue.cwiseProduct(Mtrue * xitrue);
    const Vector g2mag = (svt + sv).cwiseProduct(Mtrue.cwiseAbs() * xitrue.cwiseAbs());
    add("gamma2", rel(gamma2_, g2true, linf(g2mag)));

    if (fp_.role != FeasibleRole::None) {
      const Matrix Gtrue_ = vt_.asDiagonal() * Mtrue;
      add("G", rel(G_, Gtrue_, linf(Gtrue_)));
    }
    const bool sparse = static_cast<int>(Strue.size()) <= thresh_k_ && static_cast<int>(Ttrue.size()) <= thresh_k_;
    add("sparsity", sparse ? 0.0 : 1.0);
    double sep = 0.0;
    for (int i : Strue) {
      if (!(std::abs(vt_[i] / v_[i] - 1.0) > prm_.eps_far)) sep = 1.0;
    }
    add("separation", sep);
  } catch (const std::exception&) {
    add("evaluation", inf);
  }
  return rep;
}

}  // namespace sketchlp
