// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense two-phase primal simplex with bounded variables and Bland's rule.
//
//   maximize    c^T x
//   subject to  A x <= b,   0 <= x <= u   (u_j may be +inf)
//
// Variables at their upper bound are handled by substitution
// x_j = u_j - x'_j, so every nonbasic variable sits at zero in the tableau.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "evsenet/core.hpp"

namespace evsenet {

struct LpProblem {
  std::vector<double> objective;  // one coefficient per variable
  std::vector<double> upper;      // per-variable upper bound, +inf if free above
  std::vector<double> matrix;     // row-major, rows() x vars()
  std::vector<double> rhs;

  LpProblem() = default;
  explicit LpProblem(std::size_t n_vars)
      : objective(n_vars, 0.0), upper(n_vars, std::numeric_limits<double>::infinity()) {}

  std::size_t vars() const { return objective.size(); }
  std::size_t rows() const { return rhs.size(); }

  void add_row(std::span<const double> coeffs, double bound) {
    if (coeffs.size() != vars()) throw Error("LpProblem::add_row: width mismatch");
    matrix.insert(matrix.end(), coeffs.begin(), coeffs.end());
    rhs.push_back(bound);
  }
  double coeff(std::size_t row, std::size_t col) const { return matrix[row * vars() + col]; }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

namespace detail {

class BoundedSimplex {
 public:
  static constexpr double kEps = 1e-9;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  explicit BoundedSimplex(const LpProblem& p) : n_(p.vars()), m_(p.rows()) {
    for (std::size_t i = 0; i < m_; ++i)
      if (p.rhs[i] < 0.0) art_rows_.push_back(i);
    cols_ = n_ + m_ + art_rows_.size();
    width_ = cols_ + 1;
    tab_.assign(m_ * width_, 0.0);
    upper_.assign(cols_, kInf);
    flipped_.assign(cols_, false);
    is_basic_.assign(cols_, false);
    basis_.resize(m_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (!(p.upper[j] >= 0.0)) throw Error("LP: variable upper bounds must be nonnegative");
      upper_[j] = p.upper[j];
    }

    std::size_t art = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double sign = p.rhs[i] < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = sign * p.coeff(i, j);
      at(i, n_ + i) = sign;
      rhs(i) = sign * p.rhs[i];
      if (sign < 0.0) {
        const std::size_t col = n_ + m_ + art++;
        at(i, col) = 1.0;
        set_basic(i, col);
      } else {
        set_basic(i, n_ + i);
      }
    }
    objective_.assign(p.objective.begin(), p.objective.end());
    objective_.resize(cols_, 0.0);
  }

  LpResult solve() {
    LpResult result;
    if (!art_rows_.empty()) {
      // Phase 1: maximize -sum(artificials).
      std::vector<double> phase1(cols_, 0.0);
      for (std::size_t j = n_ + m_; j < cols_; ++j) phase1[j] = -1.0;
      load_objective(phase1);
      if (!iterate(cols_, result.pivots)) throw Error("LP: phase 1 reported unbounded");
      if (obj_value_ < -1e-7 * (1.0 + max_abs_rhs_)) {
        result.status = LpStatus::Infeasible;
        return result;
      }
      // Artificials stay pinned at zero from here on.
      for (std::size_t j = n_ + m_; j < cols_; ++j) upper_[j] = 0.0;
    }
    load_objective(objective_);
    if (!iterate(n_ + m_, result.pivots)) {
      result.status = LpStatus::Unbounded;
      return result;
    }
    result.x = primal();
    result.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) result.objective += objective_[j] * result.x[j];
    return result;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return tab_[i * width_ + j]; }
  double& rhs(std::size_t i) { return tab_[i * width_ + cols_]; }

  void set_basic(std::size_t row, std::size_t col) {
    basis_[row] = col;
    is_basic_[col] = true;
  }

  // Reduced costs for `c` given the current basis and flips.
  void load_objective(const std::vector<double>& c) {
    reduced_.assign(cols_, 0.0);
    obj_value_ = 0.0;
    auto eff = [&](std::size_t j) { return flipped_[j] ? -c[j] : c[j]; };
    for (std::size_t j = 0; j < cols_; ++j) {
      if (flipped_[j]) obj_value_ += c[j] * upper_[j];
      if (!is_basic_[j]) reduced_[j] = eff(j);
    }
    max_abs_rhs_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = eff(basis_[i]);
      max_abs_rhs_ = std::max(max_abs_rhs_, std::abs(rhs(i)));
      if (cb == 0.0) continue;
      obj_value_ += cb * rhs(i);
      for (std::size_t j = 0; j < cols_; ++j)
        if (!is_basic_[j]) reduced_[j] -= cb * at(i, j);
    }
  }

  // Substitutes x_j = u_j - x'_j.
  void flip(std::size_t j) {
    const double u = upper_[j];
    for (std::size_t i = 0; i < m_; ++i) {
      double& a = at(i, j);
      if (a == 0.0) continue;
      rhs(i) -= a * u;
      a = -a;
    }
    obj_value_ += reduced_[j] * u;
    reduced_[j] = -reduced_[j];
    flipped_[j] = !flipped_[j];
  }

  // Flip a basic variable that is about to leave at its upper bound.
  void flip_basic(std::size_t row) {
    const std::size_t k = basis_[row];
    const double u = upper_[k];
    double* r = &tab_[row * width_];
    for (std::size_t j = 0; j < cols_; ++j)
      if (j != k) r[j] = -r[j];
    r[cols_] = u - r[cols_];
    flipped_[k] = !flipped_[k];
  }

  void pivot(std::size_t row, std::size_t col) {
    double* pr = &tab_[row * width_];
    const double inv = 1.0 / pr[col];
    for (std::size_t j = 0; j < width_; ++j) pr[j] *= inv;
    pr[col] = 1.0;
    // Nonzero pattern of the pivot row keeps elimination cheap on sparse rows.
    nz_.clear();
    for (std::size_t j = 0; j < width_; ++j)
      if (pr[j] != 0.0) nz_.push_back(j);
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row) continue;
      double* ri = &tab_[i * width_];
      const double f = ri[col];
      if (f == 0.0) continue;
      for (std::size_t j : nz_) ri[j] -= f * pr[j];
      ri[col] = 0.0;
    }
    const double f = reduced_[col];
    if (f != 0.0) {
      for (std::size_t j : nz_)
        if (j < cols_) reduced_[j] -= f * pr[j];
      obj_value_ += f * pr[cols_];
      reduced_[col] = 0.0;
    }
    is_basic_[basis_[row]] = false;
    set_basic(row, col);
  }

  // Returns false on unboundedness. Columns >= `allowed` never enter.
  bool iterate(std::size_t allowed, std::size_t& pivots) {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < allowed; ++j)
        if (!is_basic_[j] && reduced_[j] > kEps && upper_[j] > 0.0) {
          enter = j;
          break;
        }
      if (enter == cols_) return true;

      // Ratio test; ties go to the smallest variable index (Bland).
      double best = upper_[enter];
      std::size_t best_var = std::isfinite(best) ? enter : cols_;
      std::size_t best_row = m_;
      bool to_upper = false;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = at(i, enter);
        const std::size_t k = basis_[i];
        double theta;
        bool up;
        if (a > kEps) {
          theta = std::max(rhs(i), 0.0) / a;
          up = false;
        } else if (a < -kEps && std::isfinite(upper_[k])) {
          theta = std::max(upper_[k] - rhs(i), 0.0) / -a;
          up = true;
        } else {
          continue;
        }
        if (theta < best - kEps || (theta <= best + kEps && k < best_var)) {
          best = std::min(theta, best);
          best_var = k;
          best_row = i;
          to_upper = up;
        }
      }
      if (best_var == cols_) return false;
      ++pivots;
      if (best_var == enter) {
        flip(enter);
        continue;
      }
      if (to_upper) flip_basic(best_row);
      pivot(best_row, enter);
    }
  }

  std::vector<double> primal() {
    std::vector<double> value(cols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) value[basis_[i]] = rhs(i);
    std::vector<double> x(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      double v = flipped_[j] ? upper_[j] - value[j] : value[j];
      if (v < 0.0) v = 0.0;
      if (v > upper_[j]) v = upper_[j];
      x[j] = v;
    }
    return x;
  }

  std::size_t n_, m_, cols_ = 0, width_ = 0;
  std::vector<std::size_t> art_rows_;
  std::vector<double> tab_;
  std::vector<double> upper_;
  std::vector<bool> flipped_;
  std::vector<bool> is_basic_;
  std::vector<std::size_t> basis_;
  std::vector<double> objective_;
  std::vector<double> reduced_;
  std::vector<std::size_t> nz_;
  double obj_value_ = 0.0;
  double max_abs_rhs_ = 0.0;
};

}  // namespace detail

/// Solves the problem to an optimal vertex, or reports infeasible/unbounded.
inline LpResult solve_lp(const LpProblem& problem) {
  if (problem.upper.size() != problem.vars() || problem.matrix.size() != problem.rows() * problem.vars())
    throw Error("LP: inconsistent problem dimensions");
  for (double v : problem.objective)
    if (!std::isfinite(v)) throw Error("LP: non-finite objective coefficient");
  for (double v : problem.matrix)
    if (!std::isfinite(v)) throw Error("LP: non-finite constraint coefficient");
  for (double v : problem.rhs)
    if (!std::isfinite(v)) throw Error("LP: non-finite right-hand side");
  if (problem.vars() == 0) {
    LpResult r;
    for (double b : problem.rhs)
      if (b < 0.0) r.status = LpStatus::Infeasible;
    return r;
  }
  return detail::BoundedSimplex(problem).solve();
}

}  // namespace evsenet
