#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "e4bandit/design.hpp"

namespace {

using e4::Matrix;
using e4::Vector;

Matrix endoa_arms() {
  Matrix a(3, 2);
  a << 1, 0, 0, 1, 0.8, 0.4;
  return a;
}

Matrix random_arms(int k, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(k, d);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(rng);
  return a;
}

// g(pi) for three 2-d arms with the 2x2 inverse written out by hand.
double g_two_dim(const Matrix& arms, double p0, double p1, double p2) {
  const double w[3] = {p0, p1, p2};
  double h00 = 0, h01 = 0, h11 = 0;
  for (int i = 0; i < 3; ++i) {
    h00 += w[i] * arms(i, 0) * arms(i, 0);
    h01 += w[i] * arms(i, 0) * arms(i, 1);
    h11 += w[i] * arms(i, 1) * arms(i, 1);
  }
  const double det = h00 * h11 - h01 * h01;
  if (det <= 1e-14) return std::numeric_limits<double>::infinity();
  double g = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double x = arms(i, 0), y = arms(i, 1);
    g = std::max(g, (h11 * x * x - 2 * h01 * x * y + h00 * y * y) / det);
  }
  return g;
}

TEST(FrankWolfe, OrthonormalArmsUniform) {
  for (int d = 1; d <= 6; ++d) {
    const auto w = e4::frank_wolfe_design(Matrix::Identity(d, d));
    EXPECT_TRUE(w.converged);
    EXPECT_NEAR(w.g_value, d, 1e-12);
    for (double p : w.probs) EXPECT_NEAR(p, 1.0 / d, 1e-12);
  }
}

TEST(FrankWolfe, EndOfOptimismActiveSetCertificate) {
  const auto w = e4::frank_wolfe_design(endoa_arms());
  EXPECT_TRUE(w.converged);
  EXPECT_LE(w.g_value, 2.0 * (1.0 + 1e-3));
  EXPECT_GE(w.g_value, 2.0 - 1e-9);
}

TEST(FrankWolfe, MatchesSimplexGridSearch) {
  const Matrix arms = endoa_arms();
  double best_g = std::numeric_limits<double>::infinity();
  int bi = 0, bj = 0;
  const int n = 1000;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j) {
      const double g = g_two_dim(arms, i / double(n), j / double(n), (n - i - j) / double(n));
      if (g < best_g) {
        best_g = g;
        bi = i;
        bj = j;
      }
    }
  const double oracle[3] = {bi / double(n), bj / double(n), (n - bi - bj) / double(n)};
  const auto w = e4::frank_wolfe_design(arms);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(w.probs[i], oracle[i], 1e-2) << "arm " << i;
  EXPECT_NEAR(w.g_value, best_g, 5e-3);
}

TEST(FrankWolfe, PropertyKieferWolfowitzRandomSets) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int d = 2 + static_cast<int>(seed % 7);
    const int k = d + static_cast<int>(seed % 11);
    const Matrix arms = random_arms(k, d, seed);
    const auto w = e4::frank_wolfe_design(arms);
    ASSERT_TRUE(w.converged) << "seed " << seed;
    EXPECT_EQ(w.effective_dim, d);
    // Certificate by recomputation from the returned weights.
    const double g = e4::design_g_value(arms, w.probs);
    EXPECT_NEAR(g, w.g_value, 1e-8 * g);
    EXPECT_LE(g, (1.0 + 1e-3) * d);
    double total = 0.0;
    for (double p : w.probs) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(FrankWolfe, PropertyScalingInvariance) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const Matrix arms = random_arms(8, 3, seed);
    const auto base = e4::frank_wolfe_design(arms);
    for (double s : {-2.0, 0.1, 7.5}) {
      const auto scaled = e4::frank_wolfe_design(s * arms);
      ASSERT_EQ(scaled.probs.size(), base.probs.size());
      for (std::size_t i = 0; i < base.probs.size(); ++i) EXPECT_NEAR(scaled.probs[i], base.probs[i], 1e-9);
      EXPECT_NEAR(scaled.g_value, base.g_value, 1e-9 * base.g_value);
    }
  }
}

// Plain Fedorov-Wynn replay with explicit inverses: log det H must rise at
// every step, and the library's running minimum of g must never rise as the
// iteration budget grows.
TEST(FrankWolfe, PropertyMonotoneProgress) {
  const Matrix arms = random_arms(12, 4, 77);
  const int n = static_cast<int>(arms.rows());
  Vector pi = Vector::Constant(n, 1.0 / n);
  double prev_logdet = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const Matrix h = arms.transpose() * pi.asDiagonal() * arms;
    const double logdet = std::log(h.determinant());
    EXPECT_GE(logdet, prev_logdet - 1e-12) << "iteration " << it;
    prev_logdet = logdet;
    const Matrix hinv = h.inverse();
    Eigen::Index k = 0;
    double g = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double l = arms.row(i) * hinv * arms.row(i).transpose();
      if (l > g) {
        g = l;
        k = i;
      }
    }
    const double step = (g / 4.0 - 1.0) / (g - 1.0);
    pi *= 1.0 - step;
    pi(k) += step;
  }

  double prev_g = std::numeric_limits<double>::infinity();
  for (int budget : {0, 1, 2, 5, 10, 20, 50, 100, 400}) {
    const auto w = e4::frank_wolfe_design(arms, {1e-9, budget});
    EXPECT_LE(w.g_value, prev_g);
    prev_g = w.g_value;
  }
}

TEST(FrankWolfe, RankDeficientSetUsesSpan) {
  Matrix arms(3, 3);
  arms << 1, 0, 0, 0, 1, 0, 1, 1, 0;
  const auto w = e4::frank_wolfe_design(arms);
  EXPECT_EQ(w.effective_dim, 2);
  EXPECT_TRUE(w.converged);
  EXPECT_LE(w.g_value, 2.0 * (1.0 + 1e-3));
  EXPECT_NEAR(e4::design_g_value(arms, w.probs), w.g_value, 1e-8);
}

TEST(FrankWolfe, SingleArm) {
  Matrix arms(1, 2);
  arms << 3, 4;
  const auto w = e4::frank_wolfe_design(arms);
  EXPECT_EQ(w.effective_dim, 1);
  EXPECT_DOUBLE_EQ(w.probs[0], 1.0);
  EXPECT_NEAR(w.g_value, 1.0, 1e-12);
}

TEST(FrankWolfe, RejectsEmptyAndZero) {
  EXPECT_THROW(e4::frank_wolfe_design(Matrix(0, 2)), e4::BanditError);
  EXPECT_THROW(e4::frank_wolfe_design(Matrix::Zero(3, 2)), e4::BanditError);
}

TEST(PullCounts, DirectFormula) {
  e4::DesignWeights w;
  w.probs = {0.5, 0.5, 0.0};
  w.g_value = 2.0;
  const auto c = e4::pull_counts(w, 100.0, 2);
  EXPECT_EQ(c[0], 100);
  EXPECT_EQ(c[1], 100);
  EXPECT_EQ(c[2], 0);
}

TEST(PullCounts, UniformThreeArms) {
  const auto w = e4::frank_wolfe_design(Matrix::Identity(3, 3));
  // ceil(2 * (1/3) * 3 * 10 / 3) = ceil(6.67)
  const double unrounded = 2.0 * (1.0 / 3.0) * 3.0 * 10.0 / 3.0;
  const auto c = e4::pull_counts(w, 10.0, 3);
  for (auto n : c) {
    EXPECT_EQ(n, static_cast<std::int64_t>(std::ceil(unrounded)));
    EXPECT_EQ(n, 7);
  }
}

TEST(PullCounts, PropertyTotalsDominateUnrounded) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int d = 2 + static_cast<int>(seed % 4);
    const auto w = e4::frank_wolfe_design(random_arms(3 * d, d, seed));
    for (double m : {1.0, 3.3, 97.0, 1e4}) {
      const auto c = e4::pull_counts(w, m, d);
      double total = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double raw = 2.0 * w.probs[i] * w.g_value * m / d;
        EXPECT_GE(static_cast<double>(c[i]), raw);
        EXPECT_LT(static_cast<double>(c[i]), raw + 1.0);
        total += static_cast<double>(c[i]);
      }
      EXPECT_GE(total, 2.0 * w.g_value * m / d * (1.0 - 1e-12));
    }
  }
}

TEST(PullCounts, RejectsBadRate) {
  e4::DesignWeights w;
  w.probs = {1.0};
  w.g_value = 1.0;
  EXPECT_THROW(e4::pull_counts(w, 0.0, 1), e4::BanditError);
  EXPECT_THROW(e4::pull_counts(w, -1.0, 1), e4::BanditError);
  EXPECT_THROW(e4::pull_counts(w, 1.0, 0), e4::BanditError);
}

}  // namespace
