#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "e4bandit/allocation.hpp"
#include "oracles.hpp"

namespace {

using e4::Matrix;
using e4::Vector;

using oracle::certified;
using oracle::constraint_values;

double grid_oracle(const Matrix& arms, int best, const Vector& coefs, double cap, double lo, double hi,
                   double ratio) {
  return oracle::grid_allocation(arms, best, coefs, cap, lo, hi, ratio);
}

e4::Instance two_arm(double gap) {
  Matrix arms = Matrix::Identity(2, 2);
  Vector theta(2);
  theta << 1.0, 1.0 - gap;
  return e4::Instance(arms, theta, 1.0, "two-arm");
}

TEST(AllocConfig, HorizonConstants) {
  const auto cfg = e4::AllocConfig::for_horizon(1e4, 2);
  const double lt = std::log(1e4), llt = std::log(lt);
  EXPECT_NEAR(cfg.epsilon, 1.0 / llt, 1e-15);
  EXPECT_NEAR(cfg.alpha, (1 + 1 / llt) * (1 + 2 * llt / lt), 1e-15);
  EXPECT_GT(cfg.alpha, 1.0);
  EXPECT_GT(cfg.epsilon, 0.0);
  EXPECT_NEAR(cfg.cap(1e4), std::pow(lt, 0.9) / cfg.alpha, 1e-12);
  auto fixed = cfg;
  fixed.cap_override = 5.0;
  EXPECT_EQ(fixed.cap(1e4), 5.0);
  EXPECT_THROW(e4::AllocConfig::for_horizon(15, 2), e4::BanditError);
  EXPECT_THROW(e4::AllocConfig::for_horizon(1e4, 2, 1.0), e4::BanditError);
  EXPECT_THROW(e4::AllocConfig::for_horizon(1e4, 2, 0.9, 0.0), e4::BanditError);
}

TEST(SolveAllocation, OrthogonalPairHugeCap) {
  const Matrix arms = Matrix::Identity(2, 2);
  Vector theta(2);
  theta << 1.0, 0.0;
  const auto est = e4::estimate_from_theta(theta, arms);
  e4::AllocConfig cfg;
  cfg.epsilon = 0.0;
  cfg.cap_override = e4::kOracleCap;
  const auto a = e4::solve_allocation(est, arms, cfg, 1e4);
  EXPECT_TRUE(a.feasible);
  EXPECT_EQ(a.best_index, 0);
  EXPECT_EQ(a.w(0), e4::kOracleCap);
  EXPECT_EQ(a.cap_value, e4::kOracleCap);
  EXPECT_NEAR(a.w(1), 2.0, 1e-5);
  EXPECT_NEAR(a.objective, 2.0, 1e-5);
}

TEST(SolveAllocation, GapFloorApplies) {
  const Matrix arms = Matrix::Identity(2, 2);
  Vector theta(2);
  theta << 1.0, 0.4;
  const auto est = e4::estimate_from_theta(theta, arms);
  auto cfg = e4::AllocConfig::for_horizon(1e4, 2);  // 4 eps ~ 1.8 > gap
  const auto a = e4::solve_allocation(est, arms, cfg, 1e4);
  EXPECT_NEAR(a.coefficients(1), 0.3, 1e-15);
  EXPECT_NEAR(a.cap_value, cfg.cap(1e4), 1e-15);
  EXPECT_LE(a.w(0), a.cap_value + 1e-9);
}

TEST(SolveAllocation, PropertyHomogeneity) {
  const auto inst = e4::make_end_of_optimism(3, 0.1);
  const auto gaps = e4::compute_gaps(inst);
  const auto base = e4::solve_allocation_program(inst.arms(), 0, gaps.gaps, 50.0);
  for (double s : {0.25, 3.0}) {
    const auto scaled = e4::solve_allocation_program(inst.arms(), 0, s * gaps.gaps, 50.0 / (s * s));
    EXPECT_NEAR(scaled.objective, base.objective / s, 1e-5 * base.objective / s);
    for (int i = 1; i < inst.num_arms(); ++i)
      EXPECT_NEAR(scaled.w(i), base.w(i) / (s * s), 1e-4 * base.w.maxCoeff() / (s * s));
  }
}

TEST(SolveAllocation, DegenerateEstimateThrows) {
  const Matrix arms = Matrix::Identity(2, 2);
  Vector theta(2);
  theta << 1.0, 1.0;
  const auto est = e4::estimate_from_theta(theta, arms);
  EXPECT_THROW(e4::solve_allocation(est, arms, e4::AllocConfig{}, 1e4), e4::BanditError);
  EXPECT_THROW(e4::solve_allocation(est, arms, e4::AllocConfig{}, 10), e4::BanditError);
}

TEST(SolveAllocation, TiedArmFlaggedInfeasible) {
  Matrix arms(3, 2);
  arms << 1, 0, 0, 1, 1, 0.0;
  arms(2, 1) = 1e-3;
  Vector theta(2);
  theta << 1.0, 0.0;
  const auto est = e4::estimate_from_theta(theta, arms);
  ASSERT_EQ(est.gaps_hat(2), 0.0);
  const auto a = e4::solve_allocation(est, arms, e4::AllocConfig{}, 1e4);
  EXPECT_FALSE(a.feasible);
  EXPECT_EQ(a.w(2), 0.0);
  EXPECT_GT(a.w(1), 0.0);
}

TEST(OracleAllocation, OrthogonalPair) {
  const auto a = e4::solve_oracle_allocation(e4::compute_gaps(two_arm(0.5)), Matrix::Identity(2, 2));
  EXPECT_TRUE(a.feasible);
  EXPECT_NEAR(a.objective, 4.0, 4e-6);
}

TEST(OracleAllocation, MatchesGridSearch) {
  for (double eps : {0.2, 0.01}) {
    const auto inst = e4::make_end_of_optimism(2, eps);
    const auto gaps = e4::compute_gaps(inst);
    const auto a = e4::solve_oracle_allocation(gaps, inst.arms());
    ASSERT_TRUE(a.feasible);
    const double oracle = grid_oracle(inst.arms(), 0, gaps.gaps, e4::kOracleCap, 1e-2, 1e8, 1.002);
    EXPECT_LE(a.objective, oracle * 1.02) << "eps " << eps;
    EXPECT_GE(a.objective, oracle * 0.98) << "eps " << eps;
    EXPECT_NEAR(e4::c_star(inst), a.objective, 1e-12);
  }
}

TEST(OracleAllocation, PropertyPermutationEquivariance) {
  const auto inst = e4::make_random_instance(3, 6, 21);
  const auto a = e4::solve_oracle_allocation(e4::compute_gaps(inst), inst.arms());
  std::vector<int> perm = {4, 2, 5, 0, 3, 1};
  Matrix arms(6, 3);
  for (int i = 0; i < 6; ++i) arms.row(i) = inst.arm(perm[i]).transpose();
  const e4::Instance permuted(arms, inst.theta_star(), 1.0, "perm");
  const auto b = e4::solve_oracle_allocation(e4::compute_gaps(permuted), arms);
  EXPECT_NEAR(a.objective, b.objective, 1e-6 * a.objective);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(b.w(i), a.w(perm[i]), 1e-4 * std::max(1.0, a.w(perm[i])));
}

TEST(CStar, TwoArmClosedForm) {
  for (double gap : {0.25, 0.5, 1.0}) EXPECT_NEAR(e4::c_star(two_arm(gap)), 2.0 / gap, 1e-6 * 2.0 / gap);
}

TEST(CStar, PropertyThetaScaling) {
  const auto inst = e4::make_random_instance(3, 7, 4);
  const double base = e4::c_star(inst);
  for (double s : {0.5, 4.0}) {
    const e4::Instance scaled(inst.arms(), s * inst.theta_star(), 1.0, "scaled");
    EXPECT_NEAR(e4::c_star(scaled), base / s, 1e-4 * base / s);
  }
}

TEST(Allocation, PropertyFeasibilityCertificate) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const int d = 2 + static_cast<int>(seed % 4);
    const auto inst = e4::make_random_instance(d, d + 2 + static_cast<int>(seed % 5), seed);
    const auto gaps = e4::compute_gaps(inst);
    for (double cap : {e4::kOracleCap, 20.0, 3.0}) {
      const auto a = e4::solve_allocation_program(inst.arms(), gaps.best_index, gaps.gaps, cap);
      for (Eigen::Index i = 0; i < a.w.size(); ++i) EXPECT_GE(a.w(i), 0.0);
      EXPECT_LE(a.w(gaps.best_index), a.cap_value + 1e-9);
      if (!a.feasible) continue;
      ++checked;
      EXPECT_TRUE(certified(inst.arms(), gaps.best_index, gaps.gaps, a.w, 1e-6)) << "seed " << seed;
      EXPECT_NEAR(a.objective, a.coefficients.dot(a.w), 1e-9 * a.objective);
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(Allocation, PropertyUpScalingNeverBreaksConstraints) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = e4::make_random_instance(3, 6, 100 + rep);
    const int best = e4::compute_gaps(inst).best_index;
    Vector w(6);
    for (int i = 0; i < 6; ++i) w(i) = u(rng);
    const Vector before = constraint_values(inst.arms(), best, w);
    for (double c : {1.0, 1.5, 10.0}) {
      Vector scaled = c * w;
      scaled(best) = w(best);
      const Vector after = constraint_values(inst.arms(), best, scaled);
      for (int i = 0; i < 6; ++i) EXPECT_LE(after(i), before(i) * (1.0 + 1e-10));
    }
  }
}

TEST(Allocation, PropertyConvergesToOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = seed < 5 ? e4::make_end_of_optimism(2 + static_cast<int>(seed), 0.05 + 0.05 * seed)
                               : e4::make_random_instance(3, 8, seed);
    const auto est = e4::estimate_from_theta(inst.theta_star(), inst.arms());
    e4::AllocConfig cfg;
    cfg.epsilon = 0.0;
    cfg.cap_override = 1e6;
    const auto finite = e4::solve_allocation(est, inst.arms(), cfg, 1e4);
    const auto oracle = e4::solve_oracle_allocation(e4::compute_gaps(inst), inst.arms());
    EXPECT_NEAR(finite.objective, oracle.objective, 0.01 * oracle.objective) << inst.label();
  }
}

TEST(Allocation, PropertyRandomTwoDimensionalGridCheck) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto inst = e4::make_random_instance(2, 3, seed);
    const auto gaps = e4::compute_gaps(inst);
    const auto a = e4::solve_oracle_allocation(gaps, inst.arms());
    ASSERT_TRUE(a.feasible);
    const double oracle = grid_oracle(inst.arms(), gaps.best_index, gaps.gaps, e4::kOracleCap, 1e-3, 1e9, 1.002);
    EXPECT_LE(a.objective, oracle * 1.02) << "seed " << seed;
  }
}

}  // namespace
