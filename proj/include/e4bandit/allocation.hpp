#pragma once

// Optimal-allocation programs. All three entry points reduce to
//
//   min_w  sum_{x != b} coef_x w_x
//   s.t.   ||x - x_b||^2_{H_w^-1} <= coef_x^2 / 2   for every x != b,
//          w_b = cap,  w >= 0,
//
// with H_w = sum_x w_x x x^T and b the (estimated) best arm:
//  - solve_allocation: finite-horizon program with coefficients
//    gap_hat - 4 eps (floored) and cap (log T)^gamma / alpha;
//  - solve_oracle_allocation: exact gaps, effectively unbounded cap;
//  - c_star: objective of the oracle program.
//
// The program is convex (linear objective, matrix-fractional constraints).
// It is solved by a log-barrier method with damped Newton inner steps,
// followed by the smallest uniform up-scaling of the free weights that
// restores exact feasibility.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "e4bandit/env.hpp"
#include "e4bandit/estimator.hpp"
#include "e4bandit/linalg.hpp"

namespace e4 {

struct Allocation {
  /// One weight per arm; w[best] == cap_value.
  Vector w;
  double objective = 0.0;
  bool feasible = false;
  double cap_value = 0.0;
  int best_index = 0;
  /// Coefficients used in objective and constraints (0 for the best arm).
  Vector coefficients;
};

struct AllocConfig {
  double epsilon = 0.0;
  double alpha = 1.0;
  double gamma = 0.9;
  double gap_floor_fraction = 0.5;
  /// Replaces (log T)^gamma / alpha when set.
  std::optional<double> cap_override;

  /// epsilon = 1/log log T, alpha = (1 + 1/log log T)(1 + d log log T / log T).
  static AllocConfig for_horizon(double horizon, int d, double gamma = 0.9,
                                 double gap_floor_fraction = 0.5) {
    if (!(horizon >= 16.0)) throw BanditError("AllocConfig: horizon must be >= 16");
    if (!(gamma > 0.0 && gamma < 1.0)) throw BanditError("AllocConfig: gamma must lie in (0,1)");
    if (!(gap_floor_fraction > 0.0 && gap_floor_fraction <= 1.0))
      throw BanditError("AllocConfig: gap_floor_fraction must lie in (0,1]");
    const double lt = std::log(horizon);
    const double llt = std::log(lt);
    AllocConfig cfg;
    cfg.epsilon = 1.0 / llt;
    cfg.alpha = (1.0 + 1.0 / llt) * (1.0 + d * llt / lt);
    cfg.gamma = gamma;
    cfg.gap_floor_fraction = gap_floor_fraction;
    return cfg;
  }

  double cap(double horizon) const {
    if (cap_override) return *cap_override;
    return std::pow(std::log(horizon), gamma) / alpha;
  }
};

struct BarrierOptions {
  /// Minimum number of barrier rounds.
  int outer_rounds = 12;
  double decrease = 0.5;
  double inner_tol = 1e-6;
  int max_inner = 10000;
  /// Rounds continue past outer_rounds until the barrier's duality-gap
  /// bound (number of barrier terms times mu) falls below this fraction of
  /// the objective.
  double gap_rel_tol = 1e-7;
  int max_outer_rounds = 200;
};

/// Cap standing in for an unbounded best-arm weight.
inline constexpr double kOracleCap = 1e8;

namespace detail {

/// Evaluates constraint values and derivatives of the allocation program for
/// the free (suboptimal) weights.
class AllocationProgram {
 public:
  AllocationProgram(const Matrix& arms, int best, std::vector<int> free_arms, Vector coefs, double cap)
      : free_(std::move(free_arms)), coefs_(std::move(coefs)), cap_(cap) {
    const Eigen::Index m = static_cast<Eigen::Index>(free_.size());
    const Eigen::Index d = arms.cols();
    best_vec_ = arms.row(best).transpose();
    free_rows_.resize(m, d);
    diffs_.resize(m, d);
    bounds_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      free_rows_.row(i) = arms.row(free_[i]);
      diffs_.row(i) = arms.row(free_[i]) - arms.row(best);
      bounds_(i) = coefs_(i) * coefs_(i) / 2.0;
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(free_.size()); }
  const Vector& coefs() const { return coefs_; }
  const Vector& bounds() const { return bounds_; }

  Matrix gram(const Vector& w) const {
    Matrix h = cap_ * best_vec_ * best_vec_.transpose();
    h.noalias() += free_rows_.transpose() * w.asDiagonal() * free_rows_;
    return h;
  }

  /// ||x - x_b||^2_{H_w^-1} for every free arm; +inf if H_w is singular.
  Vector constraint_values(const Vector& w) const {
    const Matrix h = gram(w);
    Eigen::LLT<Matrix> llt(h);
    Vector out(size());
    if (llt.info() != Eigen::Success) {
      out.setConstant(std::numeric_limits<double>::infinity());
      return out;
    }
    const Matrix y = llt.matrixL().solve(diffs_.transpose());
    out = y.colwise().squaredNorm().transpose();
    return out;
  }

  /// Largest ratio constraint / bound; <= 1 means feasible.
  double worst_ratio(const Vector& w) const {
    return constraint_values(w).cwiseQuotient(bounds_).maxCoeff();
  }

  /// Barrier function psi = f/mu - sum log(1 - g/b) - sum log w.
  double barrier(const Vector& w, double mu) const {
    if ((w.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const Vector g = constraint_values(w);
    double acc = coefs_.dot(w) / mu;
    for (Eigen::Index i = 0; i < size(); ++i) {
      const double s = 1.0 - g(i) / bounds_(i);
      if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
      acc -= std::log(s) + std::log(w(i));
    }
    return acc;
  }

  /// Gradient and Hessian of the barrier function.
  void derivatives(const Vector& w, double mu, Vector& grad, Matrix& hess) const {
    const Eigen::Index m = size();
    const Matrix h = gram(w);
    const Eigen::LLT<Matrix> llt(h);
    const Matrix u = llt.solve(diffs_.transpose());                // d x m, columns u_x
    const Matrix p = free_rows_ * u;                                // p(y, x) = y^T u_x
    const Matrix gm = free_rows_ * llt.solve(free_rows_.transpose());  // y^T H^-1 z
    grad = coefs_ / mu;
    hess = Matrix::Zero(m, m);
    for (Eigen::Index x = 0; x < m; ++x) {
      const double g = diffs_.row(x).dot(u.col(x));
      const double scale = 1.0 / (bounds_(x) - g);  // 1 / (b s)
      const Vector dg = -p.col(x).cwiseAbs2();
      grad.noalias() += scale * dg;
      hess.noalias() += scale * scale * dg * dg.transpose();
      hess.noalias() += (2.0 * scale) * gm.cwiseProduct(p.col(x) * p.col(x).transpose());
    }
    grad.array() -= w.array().inverse();
    hess.diagonal().array() += w.array().inverse().square();
  }

 private:
  std::vector<int> free_;
  Vector coefs_;
  double cap_;
  Vector best_vec_;
  Matrix free_rows_;
  Matrix diffs_;
  Vector bounds_;
};

/// Smallest c >= 1 with worst_ratio(c w) <= 1, or nullopt if none below
/// 2^60.
inline std::optional<double> feasibility_scale(const AllocationProgram& prog, const Vector& w) {
  if (prog.worst_ratio(w) <= 1.0) return 1.0;
  double hi = 2.0;
  while (prog.worst_ratio(hi * w) > 1.0) {
    hi *= 2.0;
    if (hi > std::ldexp(1.0, 60)) return std::nullopt;
  }
  double lo = hi / 2.0;
  for (int i = 0; i < 100 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (prog.worst_ratio(mid * w) <= 1.0 ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace detail

/// Solves the allocation program for best arm `best` and per-arm positive
/// coefficients `coefs` (entry `best` ignored). Arms whose coefficient is
/// not positive cannot meet their constraint; they get weight 0 and the
/// result is flagged infeasible.
inline Allocation solve_allocation_program(const Matrix& arms, int best, const Vector& coefs, double cap,
                                           BarrierOptions opts = {}) {
  const int k = static_cast<int>(arms.rows());
  if (best < 0 || best >= k) throw BanditError("allocation: best arm index out of range");
  if (!(cap > 0.0)) throw BanditError("allocation: cap must be positive");
  std::vector<int> free_arms;
  bool dropped = false;
  for (int i = 0; i < k; ++i) {
    if (i == best) continue;
    if (coefs(i) > 0.0)
      free_arms.push_back(i);
    else
      dropped = true;
  }
  if (free_arms.empty()) throw BanditError("allocation: all suboptimal gaps are zero (degenerate estimate)");

  const Eigen::Index m = static_cast<Eigen::Index>(free_arms.size());
  Vector c(m);
  for (Eigen::Index i = 0; i < m; ++i) c(i) = coefs(free_arms[i]);
  const detail::AllocationProgram prog(arms, best, free_arms, c, cap);

  Allocation out;
  out.best_index = best;
  out.cap_value = cap;
  out.coefficients = Vector::Zero(k);
  for (Eigen::Index i = 0; i < m; ++i) out.coefficients(free_arms[i]) = c(i);

  // Closed-form optimum of the decoupled problem, scaled into the strict
  // interior.
  Vector w = (2.0 / c.array().square()).matrix();
  const auto interior = detail::feasibility_scale(prog, w);
  if (!interior) {
    // Constraints cannot be met for any finite weights (the cap binds).
    out.w = Vector::Zero(k);
    out.w(best) = cap;
    for (Eigen::Index i = 0; i < m; ++i) out.w(free_arms[i]) = w(i);
    out.objective = c.dot(w);
    out.feasible = false;
    return out;
  }
  w *= *interior * 1.25;
  while (prog.worst_ratio(w) >= 0.99) w *= 1.25;

  double mu = c.dot(w) / static_cast<double>(2 * m);
  Vector grad;
  Matrix hess;
  for (int round = 0; round < opts.max_outer_rounds; ++round) {
    if (round >= opts.outer_rounds && 2.0 * m * mu <= opts.gap_rel_tol * c.dot(w)) break;
    for (int it = 0; it < opts.max_inner; ++it) {
      prog.derivatives(w, mu, grad, hess);
      const Eigen::LDLT<Matrix> ldlt(hess);
      const Vector step = -ldlt.solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 0.0) || decrement / 2.0 <= opts.inner_tol) break;
      const double f0 = prog.barrier(w, mu);
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Vector cand = w + t * step;
        const double f1 = prog.barrier(cand, mu);
        if (std::isfinite(f1) && f1 <= f0 - 0.25 * t * decrement) {
          w = cand;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    mu *= opts.decrease;
  }

  const auto scale = detail::feasibility_scale(prog, w);
  if (scale) w *= *scale;
  out.w = Vector::Zero(k);
  out.w(best) = cap;
  for (Eigen::Index i = 0; i < m; ++i) out.w(free_arms[i]) = w(i);
  out.objective = c.dot(w);
  out.feasible = scale.has_value() && !dropped && prog.worst_ratio(w) <= 1.0 + 1e-6;
  return out;
}

/// Finite-horizon allocation from a batch estimate. Coefficients are
/// max(gap_hat - 4 eps, floor * gap_hat); the best-arm weight is fixed at
/// (log T)^gamma / alpha.
inline Allocation solve_allocation(const Estimate& est, const Matrix& arms, const AllocConfig& cfg,
                                   double horizon, BarrierOptions opts = {}) {
  if (!(horizon >= 16.0)) throw BanditError("solve_allocation: horizon must be >= 16");
  const Eigen::Index k = arms.rows();
  Vector coefs = Vector::Zero(k);
  bool any = false;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (i == est.best_hat) continue;
    const double g = est.gaps_hat(i);
    coefs(i) = std::max(g - 4.0 * cfg.epsilon, cfg.gap_floor_fraction * g);
    any = any || g > 0.0;
  }
  if (!any) throw BanditError("solve_allocation: all estimated gaps are zero");
  return solve_allocation_program(arms, est.best_hat, coefs, cfg.cap(horizon), opts);
}

/// Allocation from the true gaps with an effectively unbounded best-arm
/// weight.
inline Allocation solve_oracle_allocation(const GapProfile& gaps, const Matrix& arms, BarrierOptions opts = {}) {
  return solve_allocation_program(arms, gaps.best_index, gaps.gaps, kOracleCap, opts);
}

/// Asymptotic regret constant: liminf R_T / log T >= c*.
inline double c_star(const Instance& inst) {
  return solve_oracle_allocation(compute_gaps(inst), inst.arms()).objective;
}

}  // namespace e4
