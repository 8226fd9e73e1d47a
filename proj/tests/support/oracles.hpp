#pragma once

// Independent reference computations used only by the tests. Each one is
// written as the most literal loop over the definition, with no shared code
// from the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Mann-Whitney statistic by visiting every (target, non-target) pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels,
                           int target = 1) {
  std::uint64_t twice_wins = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == target) ++n_pos; else ++n_neg;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != target) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == target) continue;
      if (scores[i] > scores[j]) twice_wins += 2;
      else if (scores[i] == scores[j]) twice_wins += 1;
    }
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double kl(const std::vector<double>& f1, const std::vector<double>& f2) {
  double s = 0.0;
  for (std::size_t b = 0; b < f1.size(); ++b) {
    if (f1[b] > 0.0) s += f1[b] * std::log(f1[b] / f2[b]);
  }
  return s;
}

// Largest violation of the optimality conditions of
//   ||y - X b||^2 + l1 sum d1_j |b_j| + l2 sum d2_j^2 b_j^2.
inline double kkt_violation(const Matrix& X, const Vector& y, const std::vector<double>& d1,
                            const std::vector<double>& d2, double l1, double l2, const Vector& b) {
  const Vector r = y - X * b;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double g = 2.0 * X.col(j).dot(r) - 2.0 * l2 * d2[j] * d2[j] * b[j];
    const double w = l1 * d1[j];
    const double v = b[j] != 0.0 ? std::abs(g - w * (b[j] > 0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(g) - w);
    worst = std::max(worst, v);
  }
  return worst;
}

// (X^T X + l2 D2^2)^{-1} X^T y through a fresh QR of the stacked system.
inline Vector ridge(const Matrix& X, const Vector& y, const std::vector<double>& d2, double l2) {
  const auto n = X.rows(), p = X.cols();
  Matrix A(n + p, p);
  A.topRows(n) = X;
  A.bottomRows(p).setZero();
  for (Eigen::Index j = 0; j < p; ++j) A(n + j, j) = std::sqrt(l2) * d2[j];
  Vector b(n + p);
  b << y, Vector::Zero(p);
  return A.colPivHouseholderQr().solve(b);
}

inline double soft_threshold(double z, double t) {
  return z > t ? z - t : (z < -t ? z + t : 0.0);
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> nd;
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = nd(rng);
  return M;
}

inline Vector random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline std::vector<double> random_positive(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
