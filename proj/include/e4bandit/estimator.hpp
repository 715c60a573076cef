#pragma once

// Per-batch least squares, the Chernoff stopping statistic Z, its
// threshold beta(t, delta) and the combined stopping-rule check.
//
// Every estimate is built from a single batch of data; nothing carries over
// between batches.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "e4bandit/linalg.hpp"

namespace e4 {

/// Data of one batch: the pulled feature vectors and rewards together with
/// the running Gram matrix H = sum x x^T and moment sum x r.
class BatchData {
 public:
  explicit BatchData(int dim) : dim_(dim), gram_(Matrix::Zero(dim, dim)), moment_(Vector::Zero(dim)) {
    if (dim < 1) throw BanditError("BatchData: dimension must be >= 1");
  }

  void add(const Vector& x, double reward) {
    if (x.size() != dim_) throw BanditError("BatchData: feature dimension mismatch");
    xs_.insert(xs_.end(), x.data(), x.data() + dim_);
    rewards_.push_back(reward);
    gram_.noalias() += x * x.transpose();
    moment_.noalias() += reward * x;
  }

  int dim() const { return dim_; }
  std::int64_t size() const { return static_cast<std::int64_t>(rewards_.size()); }
  bool empty() const { return rewards_.empty(); }
  const Matrix& gram() const { return gram_; }
  const Vector& moment() const { return moment_; }

  Vector feature(std::int64_t s) const {
    return Eigen::Map<const Vector>(xs_.data() + s * dim_, dim_);
  }
  double reward(std::int64_t s) const { return rewards_[static_cast<std::size_t>(s)]; }

 private:
  int dim_;
  std::vector<double> xs_;
  std::vector<double> rewards_;
  Matrix gram_;
  Vector moment_;
};

/// Least-squares estimate with derived per-arm quantities.
struct Estimate {
  Vector theta_hat;
  Vector mu_hat;
  int best_hat = 0;
  Vector gaps_hat;
};

/// Estimate for arms given theta_hat: mu = arms theta, best by lowest-index
/// argmax, gaps clamped at 0.
inline Estimate estimate_from_theta(const Vector& theta_hat, const Matrix& arms) {
  Estimate est;
  est.theta_hat = theta_hat;
  est.mu_hat = arms * theta_hat;
  int best = 0;
  for (Eigen::Index i = 1; i < est.mu_hat.size(); ++i)
    if (est.mu_hat(i) > est.mu_hat(best)) best = static_cast<int>(i);
  est.best_hat = best;
  est.gaps_hat = (Vector::Constant(est.mu_hat.size(), est.mu_hat(best)) - est.mu_hat).cwiseMax(0.0);
  est.gaps_hat(best) = 0.0;
  return est;
}

/// theta_hat = H^+ sum x_s r_s (minimum-norm solution when H is singular).
inline Estimate least_squares(const BatchData& data, const Matrix& arms) {
  if (data.empty()) throw BanditError("least_squares: empty batch");
  if (arms.cols() != data.dim()) throw BanditError("least_squares: arm dimension mismatch");
  const linalg::PsdSystem sys(data.gram());
  return estimate_from_theta(sys.pinv_solve(data.moment()), arms);
}

/// Z = min_{x != x_hat*} gap_hat_x^2 / (2 ||x - x_hat*||^2_{H^-1}).
/// Directions outside range(H) carry no evidence and give Z = 0.
inline double stopping_statistic(const Estimate& est, const Matrix& gram, const Matrix& arms) {
  const linalg::PsdSystem sys(gram);
  const Vector best = arms.row(est.best_hat).transpose();
  double z = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < arms.rows(); ++i) {
    if (i == est.best_hat) continue;
    const double norm_sq = sys.inverse_norm_sq(arms.row(i).transpose() - best);
    const double gap = est.gaps_hat(i);
    double zi = 0.0;
    if (std::isfinite(norm_sq) && norm_sq > 0.0) zi = gap * gap / (2.0 * norm_sq);
    z = std::min(z, zi);
  }
  return std::isfinite(z) ? z : 0.0;
}

inline double stopping_statistic(const Estimate& est, const BatchData& data, const Matrix& arms) {
  return stopping_statistic(est, data.gram(), arms);
}

/// beta(t, delta) = (1 + 1/log log T) log((t log log T)^{d/2} / delta).
/// The horizon is real-valued so that log log T can be set exactly; it must
/// exceed e.
inline double beta_threshold(double t, double delta, double horizon, int d) {
  if (!(horizon > 0.0) || !(std::log(horizon) > 1.0))
    throw BanditError("beta_threshold: horizon too small (log log T <= 0)");
  if (!(delta > 0.0 && delta < 1.0)) throw BanditError("beta_threshold: delta must lie in (0,1)");
  if (!(t >= 1.0)) throw BanditError("beta_threshold: t must be >= 1");
  if (d < 0) throw BanditError("beta_threshold: d must be >= 0");
  const double lll = std::log(std::log(horizon));
  return (1.0 + 1.0 / lll) * (0.5 * d * std::log(t * lll) - std::log(delta));
}

struct StoppingCheck {
  bool holds = false;
  double z = 0.0;
  double beta = 0.0;
  double min_eigenvalue = 0.0;
  /// c = max_x ||x||_2^2 over the full arm set.
  double c = 0.0;
};

/// Z >= beta and lambda_min(H) >= c, both inclusive.
inline bool stopping_verdict(double z, double beta, double min_eigenvalue, double c) {
  return z >= beta && min_eigenvalue >= c;
}

inline StoppingCheck check_stopping_rule(const Estimate& est, const BatchData& data, const Matrix& arms,
                                         double horizon) {
  StoppingCheck out;
  out.z = stopping_statistic(est, data, arms);
  out.beta = beta_threshold(static_cast<double>(data.size()), 1.0 / horizon, horizon,
                            static_cast<int>(arms.cols()));
  out.min_eigenvalue = linalg::PsdSystem(data.gram()).min_eigenvalue();
  out.c = arms.rowwise().squaredNorm().maxCoeff();
  out.holds = stopping_verdict(out.z, out.beta, out.min_eigenvalue, out.c);
  return out;
}

}  // namespace e4
