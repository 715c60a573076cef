#pragma once

// Bandit environments: the instance type, the End-of-Optimism and random
// benchmark families, reward sampling, gap profiles and the plain-text
// instance file format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "e4bandit/linalg.hpp"

namespace e4 {

using Rng = std::mt19937_64;

/// A finite-armed linear bandit: K arms in R^d, hidden weight theta*, and
/// Gaussian reward noise. Invariants (checked on construction): K >= 2,
/// d >= 1, the arms span R^d, and the best arm is unique.
class Instance {
 public:
  Instance(Matrix arms, Vector theta_star, double noise_std, std::string label)
      : arms_(std::move(arms)),
        theta_(std::move(theta_star)),
        noise_std_(noise_std),
        label_(std::move(label)) {
    validate();
    means_ = arms_ * theta_;
    reward_bound_ = means_.cwiseAbs().maxCoeff();
  }

  const Matrix& arms() const { return arms_; }
  const Vector& theta_star() const { return theta_; }
  double noise_std() const { return noise_std_; }
  const std::string& label() const { return label_; }

  int num_arms() const { return static_cast<int>(arms_.rows()); }
  int dim() const { return static_cast<int>(arms_.cols()); }

  /// Feature vector of arm i.
  Vector arm(int i) const { return arms_.row(i).transpose(); }
  double mean(int i) const { return means_(i); }
  const Vector& means() const { return means_; }

  /// L with |<x, theta*>| <= L for every arm (recorded post hoc).
  double reward_bound() const { return reward_bound_; }

  Instance with_noise(double noise_std) const {
    return Instance(arms_, theta_, noise_std, label_);
  }

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.arms_ == b.arms_ && a.theta_ == b.theta_ && a.noise_std_ == b.noise_std_ &&
           a.label_ == b.label_;
  }

 private:
  void validate() const {
    if (arms_.cols() < 1) throw BanditError("instance needs d >= 1");
    if (arms_.rows() < 2) throw BanditError("instance needs K >= 2 arms");
    if (theta_.size() != arms_.cols())
      throw BanditError("theta* dimension does not match arm dimension");
    if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_))
      throw BanditError("noise_std must be a finite value >= 0");
    if (!arms_.allFinite() || !theta_.allFinite())
      throw BanditError("instance contains non-finite values");
    if (linalg::rank(arms_) != arms_.cols())
      throw BanditError("arms do not span R^d");
    const Vector mu = arms_ * theta_;
    Eigen::Index best = 0;
    const double top = mu.maxCoeff(&best);
    const double tie_tol = 1e-12 * std::max(1.0, std::abs(top));
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      if (i != best && mu(i) >= top - tie_tol)
        throw BanditError("best arm is not unique");
  }

  Matrix arms_;
  Vector theta_;
  double noise_std_;
  std::string label_;
  Vector means_;
  double reward_bound_ = 0.0;
};

/// Suboptimality gaps Delta_x = <x* - x, theta*>.
struct GapProfile {
  Vector gaps;
  int best_index = 0;
  double delta_min = 0.0;
};

inline GapProfile compute_gaps(const Instance& inst) {
  const Vector& mu = inst.means();
  Eigen::Index best = 0;
  const double top = mu.maxCoeff(&best);
  GapProfile out;
  out.best_index = static_cast<int>(best);
  out.gaps = (Vector::Constant(mu.size(), top) - mu);
  out.gaps(best) = 0.0;
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (i == best) continue;
    if (!(out.gaps(i) > 0.0)) throw BanditError("best arm is not unique (zero gap)");
    dmin = std::min(dmin, out.gaps(i));
  }
  out.delta_min = dmin;
  return out;
}

/// End-of-Optimism family: theta* = e_1, arms {e_i} plus
/// (1 - eps) e_1 + 2 eps e_j for j = 2..d, so K = 2d - 1.
inline Instance make_end_of_optimism(int d, double epsilon, double noise_std = 1.0) {
  if (d < 2) throw BanditError("end-of-optimism instance needs d >= 2");
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw BanditError("end-of-optimism epsilon must lie in (0, 0.5)");
  const int k = 2 * d - 1;
  Matrix arms = Matrix::Zero(k, d);
  for (int i = 0; i < d; ++i) arms(i, i) = 1.0;
  for (int j = 1; j < d; ++j) {
    arms(d - 1 + j, 0) = 1.0 - epsilon;
    arms(d - 1 + j, j) = 2.0 * epsilon;
  }
  Vector theta = Vector::Zero(d);
  theta(0) = 1.0;
  std::ostringstream label;
  label << "endoa:d=" << d << ",eps=" << epsilon;
  return Instance(std::move(arms), std::move(theta), noise_std, label.str());
}

/// Random family: arm coordinates i.i.d. U[0,1], theta* uniform on the unit
/// sphere. Draws are repeated (up to 100 times) until the arms span R^d and
/// the best arm is unique.
inline Instance make_random_instance(int d, int k, std::uint64_t seed, double noise_std = 1.0) {
  if (d < 1 || k < d || k < 2) throw BanditError("random instance needs K >= d >= 1 and K >= 2");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::ostringstream label;
  label << "random:d=" << d << ",k=" << k << ",seed=" << seed;
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Matrix arms(k, d);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d; ++j) arms(i, j) = unif(rng);
    Vector theta(d);
    for (int j = 0; j < d; ++j) theta(j) = normal(rng);
    const double norm = theta.norm();
    if (!(norm > 0.0)) continue;
    theta /= norm;
    try {
      return Instance(std::move(arms), std::move(theta), noise_std, label.str());
    } catch (const BanditError&) {
      continue;
    }
  }
  throw BanditError("random instance: no valid configuration after 100 attempts");
}

/// <x_i, theta*> + noise_std * z with z ~ N(0, 1) drawn from `rng`.
inline double sample_reward(const Instance& inst, int arm_index, Rng& rng) {
  if (arm_index < 0 || arm_index >= inst.num_arms())
    throw BanditError("arm index out of range");
  const double mu = inst.mean(arm_index);
  if (inst.noise_std() == 0.0) return mu;
  std::normal_distribution<double> normal(0.0, 1.0);
  return mu + inst.noise_std() * normal(rng);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok) {
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw BanditError("malformed number '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

/// Writes the line-oriented text format:
///   d K noise_std
///   theta* (d reals)
///   K lines of d reals
/// The label travels in a "# label:" comment. Numbers use shortest
/// round-trip formatting, so load(save(x)) == x exactly.
inline void write_instance(std::ostream& out, const Instance& inst) {
  out << "# label: " << inst.label() << "\n";
  out << inst.dim() << ' ' << inst.num_arms() << ' ' << detail::format_double(inst.noise_std())
      << "\n";
  for (int j = 0; j < inst.dim(); ++j)
    out << (j ? " " : "") << detail::format_double(inst.theta_star()(j));
  out << "\n";
  for (int i = 0; i < inst.num_arms(); ++i) {
    for (int j = 0; j < inst.dim(); ++j)
      out << (j ? " " : "") << detail::format_double(inst.arms()(i, j));
    out << "\n";
  }
}

inline Instance read_instance(std::istream& in, const std::string& fallback_label = "file") {
  std::string label = fallback_label;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      const std::string comment = line.substr(hash + 1);
      const std::string key = " label:";
      if (comment.rfind(key, 0) == 0) {
        label = comment.substr(key.size());
        while (!label.empty() && label.front() == ' ') label.erase(label.begin());
        while (!label.empty() && (label.back() == '\r' || label.back() == ' ')) label.pop_back();
      }
      line.resize(hash);
    }
    auto toks = detail::split_ws(line);
    if (!toks.empty()) rows.push_back(std::move(toks));
  }
  if (rows.empty()) throw BanditError("instance file is empty");
  if (rows[0].size() != 3) throw BanditError("instance header must be 'd K noise_std'");
  const double d_real = detail::parse_double(rows[0][0]);
  const double k_real = detail::parse_double(rows[0][1]);
  const int d = static_cast<int>(d_real);
  const int k = static_cast<int>(k_real);
  if (d != d_real || k != k_real || d < 1) throw BanditError("instance header: bad d or K");
  if (k < 2) throw BanditError("instance file declares K < 2");
  const double noise = detail::parse_double(rows[0][2]);
  if (rows.size() != static_cast<std::size_t>(k) + 2)
    throw BanditError("instance file: expected " + std::to_string(k + 2) + " data lines, got " +
                      std::to_string(rows.size()));
  auto read_row = [&](const std::vector<std::string>& toks) {
    if (toks.size() != static_cast<std::size_t>(d))
      throw BanditError("instance file: row has " + std::to_string(toks.size()) +
                        " entries, expected " + std::to_string(d));
    Vector v(d);
    for (int j = 0; j < d; ++j) v(j) = detail::parse_double(toks[j]);
    return v;
  };
  Vector theta = read_row(rows[1]);
  Matrix arms(k, d);
  for (int i = 0; i < k; ++i) arms.row(i) = read_row(rows[i + 2]).transpose();
  return Instance(std::move(arms), std::move(theta), noise, label);
}

inline void save_instance(const std::string& path, const Instance& inst) {
  std::ofstream out(path);
  if (!out) throw BanditError("cannot open '" + path + "' for writing");
  write_instance(out, inst);
  if (!out) throw BanditError("failed writing '" + path + "'");
}

inline Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BanditError("cannot open instance file '" + path + "'");
  return read_instance(in, "file:" + path);
}

}  // namespace e4
