#pragma once

// Batched linear-bandit algorithms: the Explore-Estimate-Eliminate-Exploit
// (E4) algorithm and two baselines, phased elimination with D-optimal
// design (PhaElimD) and rarely-switching OFUL (rs-OFUL). Each run returns a
// TrialResult with a cumulative-regret trajectory and per-batch logs.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "e4bandit/allocation.hpp"
#include "e4bandit/design.hpp"
#include "e4bandit/env.hpp"
#include "e4bandit/estimator.hpp"

namespace e4 {

/// Exploration-rate schedule for E4.
///   T_1 = T_2 = (log T)^{1/2},  T_3 = (log T)^{1+gamma},
///   T_l = T^{1 - 2^{-(l-3)}}            (kind T1, l >= 4)
///   T_l = d log(K T^2) 2^{l-3}          (kind T2, l >= 4)
struct Schedule {
  enum class Kind { T1, T2 };
  Kind kind = Kind::T1;
  double gamma = 0.9;

  double rate(int batch, double horizon, int d, int k) const {
    if (batch < 1) throw BanditError("Schedule: batch index starts at 1");
    const double lt = std::log(horizon);
    if (batch <= 2) return std::sqrt(lt);
    if (batch == 3) return std::pow(lt, 1.0 + gamma);
    const int shift = batch - 3;
    if (kind == Kind::T1) return std::pow(horizon, 1.0 - std::ldexp(1.0, -shift));
    return d * std::log(k * horizon * horizon) * std::ldexp(1.0, shift);
  }
};

/// Record of one batch. For exploration batches `estimate` is the least-
/// squares fit on this batch only; `reward_sums` lets it be recomputed.
struct BatchLog {
  int index = 0;
  std::vector<std::int64_t> pulls;
  std::vector<double> reward_sums;
  std::int64_t size = 0;
  std::optional<Estimate> estimate;
  std::vector<int> active_before;
  std::vector<int> active_after;
  std::optional<StoppingCheck> stop_verdict;
  bool exploitation = false;
};

struct TrialResult {
  std::string algorithm;
  std::vector<std::pair<std::int64_t, double>> regret_checkpoints;
  int batch_count = 0;
  std::vector<BatchLog> batches;
  int identified_best = -1;
  std::chrono::duration<double, std::milli> wall_clock{0};

  double final_regret() const {
    return regret_checkpoints.empty() ? 0.0 : regret_checkpoints.back().second;
  }
};

namespace detail {

/// Tracks time, pseudo-regret from the true gaps, checkpoints and batch
/// logs for one trial.
class TrialRecorder {
 public:
  TrialRecorder(const Instance& inst, std::int64_t horizon, std::string name)
      : inst_(inst), gaps_(compute_gaps(inst).gaps), horizon_(horizon),
        every_(std::max<std::int64_t>(1, horizon / 1000)), start_(std::chrono::steady_clock::now()) {
    result_.algorithm = std::move(name);
    result_.regret_checkpoints.emplace_back(0, 0.0);
  }

  std::int64_t t() const { return t_; }
  std::int64_t remaining() const { return horizon_ - t_; }
  const Instance& instance() const { return inst_; }

  /// Plays `arm` `count` times without observing rewards (exploitation).
  void advance(int arm, std::int64_t count) {
    const double gap = gaps_(arm);
    const std::int64_t end = t_ + count;
    std::int64_t next = (t_ / every_ + 1) * every_;
    while (next <= end) {
      result_.regret_checkpoints.emplace_back(next, regret_ + gap * static_cast<double>(next - t_));
      next += every_;
    }
    regret_ += gap * static_cast<double>(count);
    t_ = end;
  }

  /// Plays an exploration batch: arms pulled round-robin over `counts`
  /// (indexed by arm), truncated to the remaining horizon.
  BatchData explore(const std::vector<std::int64_t>& counts, Rng& rng, BatchLog& log) {
    const int k = inst_.num_arms();
    BatchData data(inst_.dim());
    log.pulls.assign(k, 0);
    log.reward_sums.assign(k, 0.0);
    std::vector<std::int64_t> left = counts;
    bool any = true;
    while (any && t_ < horizon_) {
      any = false;
      for (int a = 0; a < k && t_ < horizon_; ++a) {
        if (left[a] <= 0) continue;
        any = true;
        --left[a];
        const double r = sample_reward(inst_, a, rng);
        data.add(inst_.arm(a), r);
        log.pulls[a] += 1;
        log.reward_sums[a] += r;
        advance(a, 1);
      }
    }
    log.size = data.size();
    return data;
  }

  void close_batch(BatchLog log) {
    log.index = static_cast<int>(result_.batches.size()) + 1;
    mark_boundary();
    result_.batches.push_back(std::move(log));
    result_.batch_count = static_cast<int>(result_.batches.size());
  }

  /// Commits the rest of the horizon to `arm` as a final batch.
  void exploit(int arm, const std::vector<int>& active) {
    if (remaining() <= 0) return;
    BatchLog log;
    log.exploitation = true;
    log.pulls.assign(inst_.num_arms(), 0);
    log.pulls[arm] = remaining();
    log.size = remaining();
    log.active_before = active;
    log.active_after = active;
    advance(arm, remaining());
    close_batch(std::move(log));
  }

  TrialResult finish(int identified_best) {
    mark_boundary();
    result_.identified_best = identified_best;
    result_.wall_clock = std::chrono::steady_clock::now() - start_;
    return std::move(result_);
  }

 private:
  void mark_boundary() {
    if (result_.regret_checkpoints.back().first != t_) result_.regret_checkpoints.emplace_back(t_, regret_);
  }

  const Instance& inst_;
  Vector gaps_;
  std::int64_t horizon_;
  std::int64_t every_;
  std::int64_t t_ = 0;
  double regret_ = 0.0;
  TrialResult result_;
  std::chrono::steady_clock::time_point start_;
};

inline Matrix rows_of(const Matrix& arms, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), arms.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = arms.row(idx[i]);
  return out;
}

/// D-optimal pull counts on the active set at exploration rate `rate`,
/// scattered back to a per-arm vector.
inline std::vector<std::int64_t> design_counts(const Matrix& arms, const std::vector<int>& active, double rate) {
  const DesignWeights design = frank_wolfe_design(rows_of(arms, active));
  const auto local = pull_counts(design, rate, static_cast<int>(arms.cols()));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(arms.rows()), 0);
  for (std::size_t i = 0; i < active.size(); ++i) counts[active[i]] = local[i];
  return counts;
}

/// Keeps x in `active` with max_{y in active} <theta, y - x> <= threshold.
inline std::vector<int> eliminate(const Estimate& est, const std::vector<int>& active, double threshold) {
  double top = -std::numeric_limits<double>::infinity();
  for (int a : active) top = std::max(top, est.mu_hat(a));
  std::vector<int> kept;
  for (int a : active)
    if (top - est.mu_hat(a) <= threshold) kept.push_back(a);
  return kept;
}

inline int best_active(const Estimate& est, const std::vector<int>& active) {
  int best = active.front();
  for (int a : active)
    if (est.mu_hat(a) > est.mu_hat(best)) best = a;
  return best;
}

inline std::vector<int> all_arms(int k) {
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[i] = i;
  return out;
}

}  // namespace detail

/// Least-squares estimate recomputed from a batch log's per-arm pull counts
/// and reward sums.
inline Estimate estimate_from_log(const BatchLog& log, const Matrix& arms) {
  const Eigen::Index d = arms.cols();
  Matrix gram = Matrix::Zero(d, d);
  Vector moment = Vector::Zero(d);
  for (Eigen::Index a = 0; a < arms.rows(); ++a) {
    const Vector x = arms.row(a).transpose();
    gram.noalias() += static_cast<double>(log.pulls[a]) * x * x.transpose();
    moment.noalias() += log.reward_sums[a] * x;
  }
  return estimate_from_theta(linalg::PsdSystem(gram).pinv_solve(moment), arms);
}

/// n_x = ceil(min(w_x alpha log T, (log T)^{1+gamma})) for the second batch.
inline std::vector<std::int64_t> allocation_pulls(const Allocation& alloc, const std::vector<int>& active,
                                                  double alpha, double gamma, double horizon, int k) {
  const double lt = std::log(horizon);
  const double ceiling = std::pow(lt, 1.0 + gamma);
  std::vector<std::int64_t> out(static_cast<std::size_t>(k), 0);
  for (int a : active) {
    const double n = std::min(alloc.w(a) * alpha * lt, ceiling);
    out[a] = static_cast<std::int64_t>(std::ceil(std::max(n, 0.0)));
  }
  return out;
}

/// The E4 algorithm.
///
/// Batch 1 explores by D-optimal design at rate T_1 and solves the
/// allocation program from its estimate. Batch 2 explores at rate T_2 plus
/// n_x extra pulls per arm and applies the Chernoff stopping rule; if it
/// holds only the estimated best arm stays active. Later batches run phased
/// elimination with rates T_l and thresholds 2 eps_l,
/// eps_l = sqrt(d log(K T^2) / T_l). The last active arm is exploited until
/// the horizon.
inline TrialResult run_e4(const Instance& inst, std::int64_t horizon, const Schedule& sched,
                          const AllocConfig& cfg, Rng& rng) {
  if (horizon < 16) throw BanditError("run_e4: horizon must be >= 16");
  const double T = static_cast<double>(horizon);
  const int k = inst.num_arms();
  const int d = inst.dim();
  const Matrix& arms = inst.arms();
  const double log_inv_delta = std::log(static_cast<double>(k) * T * T);

  std::vector<int> active = detail::all_arms(k);
  const auto counts1 = detail::design_counts(arms, active, sched.rate(1, T, d, k));
  const auto design2 = detail::design_counts(arms, active, sched.rate(2, T, d, k));
  {
    std::int64_t mandatory = 0;
    const auto extra = static_cast<std::int64_t>(std::ceil(std::pow(std::log(T), 1.0 + sched.gamma)));
    for (int a = 0; a < k; ++a) mandatory += counts1[a] + design2[a] + extra;
    if (mandatory > horizon)
      throw BanditError("run_e4: horizon too small for the first two batches (needs up to " +
                        std::to_string(mandatory) + " pulls)");
  }

  detail::TrialRecorder rec(inst, horizon, "e4");

  // Batch 1.
  BatchLog log1;
  log1.active_before = active;
  const BatchData data1 = rec.explore(counts1, rng, log1);
  const Estimate est1 = least_squares(data1, arms);
  std::vector<std::int64_t> extra;
  try {
    const Allocation alloc = solve_allocation(est1, arms, cfg, T);
    extra = allocation_pulls(alloc, active, cfg.alpha, sched.gamma, T, k);
  } catch (const BanditError&) {
    // Degenerate estimate (no positive gap): explore every arm at the cap.
    const auto cap_pulls = static_cast<std::int64_t>(std::ceil(std::pow(std::log(T), 1.0 + sched.gamma)));
    extra.assign(static_cast<std::size_t>(k), cap_pulls);
  }
  log1.estimate = est1;
  log1.active_after = active;
  rec.close_batch(std::move(log1));

  // Batch 2.
  std::vector<std::int64_t> counts2(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) counts2[a] = design2[a] + extra[a];
  BatchLog log2;
  log2.active_before = active;
  const BatchData data2 = rec.explore(counts2, rng, log2);
  Estimate last = least_squares(data2, arms);
  const StoppingCheck check = check_stopping_rule(last, data2, arms, T);
  if (check.holds) active = {last.best_hat};
  log2.estimate = last;
  log2.stop_verdict = check;
  log2.active_after = active;
  rec.close_batch(std::move(log2));

  // Batches 3, 4, ...: phased elimination.
  for (int ell = 3; rec.t() < horizon && active.size() > 1; ++ell) {
    const double rate = sched.rate(ell, T, d, k);
    BatchLog log;
    log.active_before = active;
    const BatchData data = rec.explore(detail::design_counts(arms, active, rate), rng, log);
    last = least_squares(data, arms);
    active = detail::eliminate(last, active, 2.0 * std::sqrt(d * log_inv_delta / rate));
    log.estimate = last;
    log.active_after = active;
    rec.close_batch(std::move(log));
  }

  const int chosen = active.size() == 1 ? active.front() : detail::best_active(last, active);
  rec.exploit(chosen, active);
  return rec.finish(chosen);
}

/// Phased elimination with D-optimal design: batch i explores the active set
/// at rate T_i = T^{1 - 2^{-i}} and eliminates with threshold 2 eps_i,
/// eps_i = sqrt(d log(K T^2) / T_i).
inline TrialResult run_phaelimd(const Instance& inst, std::int64_t horizon, Rng& rng) {
  if (horizon < 16) throw BanditError("run_phaelimd: horizon must be >= 16");
  const double T = static_cast<double>(horizon);
  const int k = inst.num_arms();
  const int d = inst.dim();
  const Matrix& arms = inst.arms();
  const double log_inv_delta = std::log(static_cast<double>(k) * T * T);

  detail::TrialRecorder rec(inst, horizon, "phaelimd");
  std::vector<int> active = detail::all_arms(k);
  std::optional<Estimate> last;
  for (int i = 1; rec.t() < horizon && active.size() > 1; ++i) {
    const double rate = std::pow(T, 1.0 - std::ldexp(1.0, -i));
    BatchLog log;
    log.active_before = active;
    const BatchData data = rec.explore(detail::design_counts(arms, active, rate), rng, log);
    last = least_squares(data, arms);
    active = detail::eliminate(*last, active, 2.0 * std::sqrt(d * log_inv_delta / rate));
    log.estimate = last;
    log.active_after = active;
    rec.close_batch(std::move(log));
  }
  const int chosen = active.size() == 1 ? active.front() : detail::best_active(*last, active);
  rec.exploit(chosen, active);
  return rec.finish(chosen);
}

/// Rarely-switching OFUL with ridge parameter lambda = 1. The ridge
/// estimate and confidence radius are recomputed only when
/// det(V_t) > (1 + C) det(V_tau); between recomputations the optimistic arm
/// is fixed. Every recomputation opens a new batch.
inline TrialResult run_rs_oful(const Instance& inst, std::int64_t horizon, double switch_c, Rng& rng) {
  if (horizon < 1) throw BanditError("run_rs_oful: horizon must be >= 1");
  if (!(switch_c > 0.0)) throw BanditError("run_rs_oful: C must be positive");
  constexpr double kLambda = 1.0;
  const int k = inst.num_arms();
  const int d = inst.dim();
  const Matrix& arms = inst.arms();
  const double s_bound = inst.theta_star().norm();
  const double l_bound_sq = arms.rowwise().squaredNorm().maxCoeff();
  const double log_inv_delta = std::log(static_cast<double>(horizon));
  const double log_switch = std::log1p(switch_c);

  detail::TrialRecorder rec(inst, horizon, "rsoful");
  Matrix v = kLambda * Matrix::Identity(d, d);
  Matrix v_inv = Matrix::Identity(d, d) / kLambda;
  Vector b = Vector::Zero(d);
  double log_det = d * std::log(kLambda);
  double log_det_tau = log_det;
  std::vector<int> active = detail::all_arms(k);

  auto choose = [&](BatchLog& log) {
    const Vector theta = v_inv * b;
    const double t = static_cast<double>(rec.t());
    const double radius = std::sqrt(kLambda) * s_bound +
                          std::sqrt(2.0 * log_inv_delta + d * std::log1p(t * l_bound_sq / (kLambda * d)));
    int best = 0;
    double best_ucb = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a) {
      const Vector x = arms.row(a).transpose();
      const double ucb = x.dot(theta) + radius * std::sqrt(std::max(0.0, x.dot(v_inv * x)));
      if (ucb > best_ucb) {
        best_ucb = ucb;
        best = a;
      }
    }
    log.estimate = estimate_from_theta(theta, arms);
    log.active_before = active;
    log.active_after = active;
    log.pulls.assign(k, 0);
    log.reward_sums.assign(k, 0.0);
    return best;
  };

  BatchLog log;
  int arm = choose(log);
  while (rec.t() < horizon) {
    const Vector x = arms.row(arm).transpose();
    const double r = sample_reward(inst, arm, rng);
    const Vector vx = v_inv * x;
    const double q = x.dot(vx);
    v_inv.noalias() -= (vx * vx.transpose()) / (1.0 + q);
    v.noalias() += x * x.transpose();
    log_det += std::log1p(q);
    b.noalias() += r * x;
    log.pulls[arm] += 1;
    log.reward_sums[arm] += r;
    log.size += 1;
    rec.advance(arm, 1);
    if (rec.t() < horizon && log_det > log_det_tau + log_switch) {
      // Refresh the Sherman-Morrison inverse at every switch.
      const linalg::CholeskySystem chol(v);
      v_inv = chol.solve(Matrix::Identity(d, d));
      log_det = chol.log_det();
      log_det_tau = log_det;
      rec.close_batch(std::move(log));
      log = BatchLog{};
      arm = choose(log);
    }
  }
  if (log.size > 0) rec.close_batch(std::move(log));
  const Vector theta = v_inv * b;
  return rec.finish(estimate_from_theta(theta, arms).best_hat);
}

}  // namespace e4
