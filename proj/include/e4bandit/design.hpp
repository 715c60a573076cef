#pragma once

// D-optimal (Kiefer-Wolfowitz) experimental design over a finite arm set,
// solved with Frank-Wolfe / Fedorov-Wynn exact line-search steps, and the
// rounding of a design into integer pull counts.

#include <cmath>
#include <cstdint>
#include <vector>

#include "e4bandit/linalg.hpp"

namespace e4 {

/// A probability distribution over an active arm set, aligned with the rows
/// passed to frank_wolfe_design, together with its worst-case leverage
/// g(pi) = max_x ||x||^2_{H_pi^-1}.
struct DesignWeights {
  std::vector<double> probs;
  double g_value = 0.0;
  /// Dimension of the span of the active arms; g_value >= effective_dim.
  int effective_dim = 0;
  bool converged = false;
  int iterations = 0;

  /// Indices (into the active set) carrying positive probability.
  std::vector<int> support_arms() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] > 0.0) out.push_back(static_cast<int>(i));
    return out;
  }
};

struct FrankWolfeOptions {
  double tol = 1e-3;
  int max_iter = 10000;
};

namespace detail {

/// Leverages ||x_i||^2_{H^-1} of every row under the design `probs`.
inline Vector leverages(const Matrix& rows, const Vector& probs) {
  const linalg::CholeskySystem chol(linalg::weighted_gram(rows, probs));
  Vector out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    out(i) = chol.inverse_norm_sq(rows.row(i).transpose());
  return out;
}

}  // namespace detail

/// g(pi) recomputed from scratch, with H_pi^-1 taken as a pseudo-inverse so
/// rank-deficient arm sets are measured inside their span.
inline double design_g_value(const Matrix& active_arms, const std::vector<double>& probs) {
  const Vector p = Eigen::Map<const Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  const linalg::PsdSystem sys(linalg::weighted_gram(active_arms, p));
  double g = 0.0;
  for (Eigen::Index i = 0; i < active_arms.rows(); ++i)
    g = std::max(g, sys.inverse_norm_sq(active_arms.row(i).transpose()));
  return g;
}

/// log det H_pi in the span coordinates; Frank-Wolfe ascends this.
inline double design_log_det(const Matrix& active_arms, const std::vector<double>& probs) {
  const Matrix basis = linalg::row_span_basis(active_arms);
  const Matrix proj = active_arms * basis;
  const Vector p = Eigen::Map<const Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  return linalg::CholeskySystem(linalg::weighted_gram(proj, p)).log_det();
}

/// Approximate D-optimal design on the rows of `active_arms`.
///
/// Starts from the uniform design and repeatedly moves mass towards the arm
/// with the largest leverage using the exact line-search step
/// (g/r - 1)/(g - 1), r the dimension of the span. Stops once
/// g <= (1 + tol) r. If the arms do not span their ambient space the problem
/// is solved in an orthonormal basis of their span. The best design seen is
/// returned; `converged` is false if max_iter ran out first.
inline DesignWeights frank_wolfe_design(const Matrix& active_arms, FrankWolfeOptions opts = {}) {
  const Eigen::Index n = active_arms.rows();
  if (n == 0) throw BanditError("frank_wolfe_design: empty arm set");
  if (!(opts.tol > 0.0)) throw BanditError("frank_wolfe_design: tol must be positive");

  const Matrix basis = linalg::row_span_basis(active_arms);
  const int r = static_cast<int>(basis.cols());
  if (r == 0) throw BanditError("frank_wolfe_design: arms span only the zero vector");
  const Matrix proj = active_arms * basis;
  const double target = (1.0 + opts.tol) * r;

  Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  DesignWeights best;
  best.effective_dim = r;
  best.g_value = std::numeric_limits<double>::infinity();

  for (int it = 0; it <= opts.max_iter; ++it) {
    const Vector lev = detail::leverages(proj, pi);
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (lev(i) > lev(k)) k = i;
    const double g = lev(k);
    if (g < best.g_value) {
      best.g_value = g;
      best.probs.assign(pi.data(), pi.data() + n);
      best.iterations = it;
    }
    if (g <= target) {
      best.converged = true;
      break;
    }
    if (it == opts.max_iter) break;
    const double step = (g / r - 1.0) / (g - 1.0);
    pi *= (1.0 - step);
    pi(k) += step;
  }
  return best;
}

/// Pull counts ceil(2 pi_x g M / d) for every arm of the design; arms with
/// zero probability get no pulls. `d` is the ambient dimension.
inline std::vector<std::int64_t> pull_counts(const DesignWeights& design, double rate, int d) {
  if (!(rate > 0.0)) throw BanditError("pull_counts: exploration rate must be positive");
  if (d < 1) throw BanditError("pull_counts: d must be >= 1");
  std::vector<std::int64_t> out(design.probs.size(), 0);
  for (std::size_t i = 0; i < design.probs.size(); ++i) {
    const double p = design.probs[i];
    if (p <= 0.0) continue;
    out[i] = static_cast<std::int64_t>(std::ceil(2.0 * p * design.g_value * rate / d));
  }
  return out;
}

}  // namespace e4
