#include "klsda/larsen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "klsda/error.hpp"
#include "klsda/kernels.hpp"

namespace klsda::larsen {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::BudgetReached: return "budget_reached";
    case Termination::CorrelationsVanished: return "correlations_vanished";
    case Termination::MaxSteps: return "max_steps";
    case Termination::MaxNonzeros: return "max_nonzeros";
    case Termination::DegenerateStep: return "degenerate_step";
  }
  return "unknown";
}

int PathStep::nonzeros() const {
  return static_cast<int>((beta.array() != 0.0).count());
}

namespace {

std::span<const double> col_span(const Matrix& M, Eigen::Index j) {
  return {M.col(j).data(), static_cast<std::size_t>(M.rows())};
}

void check_finite(const Matrix& X, const Vector& y) {
  if (!X.allFinite()) throw NumericalError("design matrix contains non-finite values");
  if (!y.allFinite()) throw NumericalError("response contains non-finite values");
  if (X.rows() != y.size()) throw DataError("design rows and response length differ");
}

Matrix gram_of(const Matrix& X) {
  const auto p = X.cols();
  Matrix G(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = j; i < p; ++i) {
      const double v = kernels::dot(col_span(X, i), col_span(X, j));
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

Vector correlate_with(const Matrix& X, const Vector& y) {
  Vector c(X.cols());
  const std::span<const double> ys(y.data(), y.size());
  for (Eigen::Index j = 0; j < X.cols(); ++j) c[j] = kernels::dot(col_span(X, j), ys);
  return c;
}

// Cholesky factor R (upper) of the active Gram block, G_AA = R^T R, kept in
// insertion order of the active set.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(Eigen::Index capacity) : R_(Matrix::Zero(capacity, capacity)) {}

  int size() const { return m_; }

  // Appends variable j. Returns false (leaving the factor unchanged) when the
  // new pivot is non-positive or the diagonal-ratio condition estimate
  // exceeds `cond_limit`.
  bool add(const Matrix& G, const std::vector<int>& active, int j, double cond_limit,
           double* cond_out) {
    Vector r(m_);
    for (int k = 0; k < m_; ++k) {
      double s = G(active[k], j);
      for (int l = 0; l < k; ++l) s -= R_(l, k) * r[l];
      r[k] = s / R_(k, k);
    }
    const double pivot_sq = G(j, j) - r.squaredNorm();
    double dmax = pivot_sq, dmin = pivot_sq;
    for (int k = 0; k < m_; ++k) {
      const double d = R_(k, k) * R_(k, k);
      dmax = std::max(dmax, d);
      dmin = std::min(dmin, d);
    }
    const double cond = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();
    if (cond_out) *cond_out = cond;
    if (!(pivot_sq > 0.0) || cond > cond_limit) return false;

    if (m_ + 1 > R_.rows()) {
      const Eigen::Index grown = std::max<Eigen::Index>(2 * R_.rows(), 16);
      Matrix bigger = Matrix::Zero(grown, grown);
      bigger.topLeftCorner(m_, m_) = R_.topLeftCorner(m_, m_);
      R_.swap(bigger);
    }
    for (int k = 0; k < m_; ++k) R_(k, m_) = r[k];
    R_(m_, m_) = std::sqrt(pivot_sq);
    ++m_;
    return true;
  }

  // Removes the variable at position `pos`, restoring triangularity with Givens rotations.
  void remove(int pos) {
    for (int c = pos; c + 1 < m_; ++c) R_.col(c).head(m_) = R_.col(c + 1).head(m_);
    R_.col(m_ - 1).setZero();
    for (int k = pos; k + 1 < m_; ++k) {
      const double a = R_(k, k);
      const double b = R_(k + 1, k);
      const double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double cs = a / h;
      const double sn = b / h;
      for (int c = k; c + 1 < m_; ++c) {
        const double u = R_(k, c);
        const double v = R_(k + 1, c);
        R_(k, c) = cs * u + sn * v;
        R_(k + 1, c) = -sn * u + cs * v;
      }
      R_(k + 1, k) = 0.0;
    }
    R_.row(m_ - 1).head(m_).setZero();
    --m_;
  }

  void refactor(const Matrix& G, const std::vector<int>& active) {
    Matrix sub(m_, m_);
    for (int a = 0; a < m_; ++a)
      for (int b = 0; b < m_; ++b) sub(a, b) = G(active[a], active[b]);
    Eigen::LLT<Matrix> llt(sub);
    if (llt.info() != Eigen::Success) return;  // keep the updated factor
    R_.topLeftCorner(m_, m_) = llt.matrixU();
  }

  // Solves R^T R x = b.
  Vector solve(const Vector& b) const {
    const auto R = R_.topLeftCorner(m_, m_);
    Vector z = R.transpose().triangularView<Eigen::Lower>().solve(b);
    return R.triangularView<Eigen::Upper>().solve(z);
  }

 private:
  Matrix R_;
  int m_ = 0;
};

struct AlphaStep {
  Vector alpha;
  std::vector<int> active;
  double l1 = 0.0;
  double lambda1 = 0.0;
};

struct AlphaPath {
  std::vector<AlphaStep> steps;
  Termination termination = Termination::CorrelationsVanished;
  int degenerate_feature = -1;
  std::string diagnostic;
};

constexpr int kRefactorEvery = 50;

// LASSO-modified LARS driven entirely by the Gram matrix G = Z^T Z and the
// initial correlations c0 = Z^T y of the working design Z. Correlations along
// the path are c = c0 - G alpha.
AlphaPath lars_gram(const Matrix& G, const Vector& c0, const SolverLimits& limits) {
  const auto p = G.rows();
  AlphaPath out;
  Vector alpha = Vector::Zero(p);
  Vector c = c0;
  std::vector<char> eligible(p), in_active(p, 0);
  for (Eigen::Index j = 0; j < p; ++j) eligible[j] = G(j, j) > 0.0;

  auto record = [&](const std::vector<int>& active_segment, double C) {
    AlphaStep s;
    s.alpha = alpha;
    s.active = active_segment;
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) l1 += std::abs(alpha[j]);
    s.l1 = l1;
    s.lambda1 = 2.0 * C;
    out.steps.push_back(std::move(s));
  };

  // Most correlated eligible variable, lowest index within tie_tol.
  double C = 0.0;
  int first = -1;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!eligible[j]) continue;
    if (first < 0 || std::abs(c[j]) > C + limits.tie_tol * std::max(1.0, C)) {
      C = std::abs(c[j]);
      first = static_cast<int>(j);
    }
  }
  record({}, C);
  if (first < 0 || C == 0.0 || !(limits.t_max > 0.0)) {
    out.termination = Termination::CorrelationsVanished;
    if (!(limits.t_max > 0.0)) out.termination = Termination::BudgetReached;
    return out;
  }

  const double C0 = C;
  const double gamma_floor = 1e-14 * C0;
  std::vector<int> active;
  ActiveCholesky chol(std::min<Eigen::Index>(p, 64));
  int next_add = first;
  // A dropped variable may not re-enter on the next step with the sign it
  // left with; that root sits at gamma ~ 0. Crossing to the other side is allowed.
  int barred = -1;
  double barred_sign = 0.0;
  double l1 = 0.0;
  int steps = 0;

  while (true) {
    if (steps >= limits.max_steps) {
      out.termination = Termination::MaxSteps;
      break;
    }
    if (next_add >= 0) {
      if (static_cast<int>(active.size()) + 1 > limits.max_nonzeros) {
        out.termination = Termination::MaxNonzeros;
        break;
      }
      double cond = 0.0;
      if (!chol.add(G, active, next_add, limits.condition_limit, &cond)) {
        out.termination = Termination::DegenerateStep;
        out.degenerate_feature = next_add;
        std::ostringstream msg;
        msg << "active Gram ill-conditioned when adding feature " << next_add
            << " (condition estimate " << cond << ")";
        out.diagnostic = msg.str();
        break;
      }
      active.push_back(next_add);
      in_active[next_add] = 1;
    }

    const int m = static_cast<int>(active.size());
    Vector sgn(m);
    for (int k = 0; k < m; ++k) sgn[k] = c[active[k]] >= 0.0 ? 1.0 : -1.0;
    const Vector w = chol.solve(sgn);

    // a = G[:, A] w : change in correlations per unit step.
    Vector a = Vector::Zero(p);
    for (int k = 0; k < m; ++k) {
      kernels::axpy(w[k], col_span(G, active[k]), std::span<double>(a.data(), p));
    }

    enum class Event { Vanish, Enter, Drop } event = Event::Vanish;
    double gamma = C;
    int event_var = -1;
    const double tie = limits.tie_tol * std::max(1.0, C);

    for (Eigen::Index j = 0; j < p; ++j) {
      if (!eligible[j] || in_active[j]) continue;
      double g = std::numeric_limits<double>::infinity();
      const double d1 = 1.0 - a[j];
      const double d2 = 1.0 + a[j];
      const bool skip_pos = j == barred && barred_sign > 0.0;
      const bool skip_neg = j == barred && barred_sign < 0.0;
      if (d1 > 0.0 && !skip_pos) {
        const double v = (C - c[j]) / d1;
        if (v > gamma_floor) g = std::min(g, v);
      }
      if (d2 > 0.0 && !skip_neg) {
        const double v = (C + c[j]) / d2;
        if (v > gamma_floor) g = std::min(g, v);
      }
      if (g < gamma - tie) {
        gamma = g;
        event = Event::Enter;
        event_var = static_cast<int>(j);
      }
    }

    for (int k = 0; k < m; ++k) {
      const int j = active[k];
      if (w[k] == 0.0 || alpha[j] == 0.0) continue;
      const double g = -alpha[j] / w[k];
      if (g > gamma_floor && g < gamma) {
        gamma = g;
        event = Event::Drop;
        event_var = k;
      }
    }

    double slope = 0.0;
    for (int k = 0; k < m; ++k) {
      const int j = active[k];
      const double s = alpha[j] != 0.0 ? (alpha[j] > 0.0 ? 1.0 : -1.0) : sgn[k];
      slope += s * w[k];
    }
    if (!(slope > 0.0)) {
      out.termination = Termination::DegenerateStep;
      out.degenerate_feature = active.back();
      out.diagnostic = "non-increasing l1 mass along the equiangular direction";
      break;
    }

    bool truncated = false;
    if (l1 + gamma * slope >= limits.t_max) {
      gamma = (limits.t_max - l1) / slope;
      truncated = true;
    }

    for (int k = 0; k < m; ++k) alpha[active[k]] += gamma * w[k];
    const std::vector<int> segment = active;
    ++steps;

    next_add = -1;
    barred = -1;
    if (!truncated && event == Event::Drop) {
      const int j = active[event_var];
      barred_sign = alpha[j] - gamma * w[event_var] > 0.0 ? 1.0 : -1.0;
      alpha[j] = 0.0;
      chol.remove(event_var);
      active.erase(active.begin() + event_var);
      in_active[j] = 0;
      barred = j;
    } else if (!truncated && event == Event::Enter) {
      next_add = event_var;
    }

    if (steps % kRefactorEvery == 0 && !active.empty()) chol.refactor(G, active);

    // Correlations recomputed from alpha to keep drift out of the KKT conditions.
    c = c0;
    for (int j : active) kernels::axpy(-alpha[j], col_span(G, j), std::span<double>(c.data(), p));
    C = (truncated || event != Event::Vanish) ? C - gamma : 0.0;
    if (C < 0.0) C = 0.0;

    record(segment, C);
    l1 = out.steps.back().l1;
    if (truncated) {
      out.steps.back().l1 = limits.t_max;
      l1 = limits.t_max;
      out.termination = Termination::BudgetReached;
      break;
    }
    if (event == Event::Vanish || C <= gamma_floor) {
      out.termination = Termination::CorrelationsVanished;
      break;
    }
  }
  return out;
}

double residual_sq(const Matrix& X, const Vector& y, const Vector& beta) {
  Vector r = y;
  std::span<double> rs(r.data(), r.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) kernels::axpy(-beta[j], col_span(X, j), rs);
  }
  return kernels::squared_norm(rs);
}

void check_penalties(const PenaltyPair& pp, Eigen::Index p) {
  if (pp.d1.size() != p || pp.d2.size() != p) {
    throw DataError("penalty weights do not match the number of features");
  }
  if (!(pp.lambda2 >= 0.0) || !std::isfinite(pp.lambda2)) {
    throw UsageError("lambda2 must be finite and non-negative");
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(pp.d1.diag[j] > 0.0) || !(pp.d2.diag[j] > 0.0)) {
      throw DataError("penalty weights must be strictly positive (feature " + std::to_string(j) +
                      ")");
    }
  }
}

SolverPath finish(AlphaPath&& ap, const Vector& d1, const Matrix& X, const Vector& y) {
  SolverPath path;
  path.termination = ap.termination;
  path.degenerate_feature = ap.degenerate_feature;
  path.diagnostic = std::move(ap.diagnostic);
  path.steps.reserve(ap.steps.size());
  for (auto& s : ap.steps) {
    PathStep step;
    step.beta = s.alpha.cwiseQuotient(d1);
    step.l1_mass = s.l1;
    step.active_set = std::move(s.active);
    step.implied_lambda1 = s.lambda1;
    step.residual_sq = residual_sq(X, y, step.beta);
    path.steps.push_back(std::move(step));
  }
  return path;
}

}  // namespace

Augmented augment(const Matrix& X, const Vector& y, const PenaltyPair& pp) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw DataError("augment: response length does not match design rows");
  check_penalties(pp, p);
  Augmented out;
  if (pp.lambda2 == 0.0) {
    out.X = X;
    out.y = y;
    return out;
  }
  out.X = Matrix::Zero(n + p, p);
  out.X.topRows(n) = X;
  const double s = std::sqrt(pp.lambda2);
  for (Eigen::Index j = 0; j < p; ++j) out.X(n + j, j) = s * pp.d2.diag[j];
  out.y = Vector::Zero(n + p);
  out.y.head(n) = y;
  return out;
}

SolverPath lars_lasso_path(const Matrix& X_work, const Vector& y_work, const SolverLimits& limits) {
  check_finite(X_work, y_work);
  const Matrix G = gram_of(X_work);
  const Vector c0 = correlate_with(X_work, y_work);
  return finish(lars_gram(G, c0, limits), Vector::Ones(X_work.cols()), X_work, y_work);
}

GramCache::GramCache(const Matrix& X) : X_(&X), gram_(gram_of(X)) {
  if (!X.allFinite()) throw NumericalError("design matrix contains non-finite values");
}

Vector GramCache::correlate(const Vector& y) const { return correlate_with(*X_, y); }

SolverPath generalized_enet(const GramCache& gram, const Vector& y, const PenaltyPair& pp,
                            const SolverLimits& limits) {
  const Matrix& X = gram.design();
  check_finite(X, y);
  const auto p = X.cols();
  check_penalties(pp, p);

  const Vector d1 = Eigen::Map<const Vector>(pp.d1.diag.data(), p);
  const Vector d2 = Eigen::Map<const Vector>(pp.d2.diag.data(), p);
  const Vector inv_d1 = d1.cwiseInverse();

  // Working design Z = [X; sqrt(l2) D2] D1^{-1}:
  //   Z^T Z = D1^{-1} (X^T X + l2 D2^2) D1^{-1},  Z^T y~ = D1^{-1} X^T y.
  Matrix G = inv_d1.asDiagonal() * gram.gram() * inv_d1.asDiagonal();
  if (pp.lambda2 > 0.0) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double r = d2[j] * inv_d1[j];
      G(j, j) += pp.lambda2 * r * r;
    }
  }
  const Vector c0 = inv_d1.cwiseProduct(gram.correlate(y));
  return finish(lars_gram(G, c0, limits), d1, X, y);
}

SolverPath generalized_enet(const Matrix& X, const Vector& y, const PenaltyPair& pp,
                            const SolverLimits& limits) {
  check_finite(X, y);
  const GramCache gram(X);
  return generalized_enet(gram, y, pp, limits);
}

CdResult cd_reference_solver(const Matrix& X, const Vector& y, const PenaltyPair& pp,
                             double lambda1, double tol, int max_sweeps) {
  const auto n = X.rows();
  const auto p = X.cols();
  check_penalties(pp, p);
  if (y.size() != n) throw DataError("cd solver: response length does not match design rows");

  std::vector<double> col_sq(p), curvature(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += X(i, j) * X(i, j);
    col_sq[j] = s;
    curvature[j] = s + pp.lambda2 * pp.d2.diag[j] * pp.d2.diag[j];
  }

  CdResult res;
  res.beta = Vector::Zero(p);
  Vector r = y;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (curvature[j] == 0.0) continue;
      double rho = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) rho += X(i, j) * r[i];
      rho += col_sq[j] * res.beta[j];
      const double thresh = 0.5 * lambda1 * pp.d1.diag[j];
      double z = 0.0;
      if (rho > thresh) z = (rho - thresh) / curvature[j];
      else if (rho < -thresh) z = (rho + thresh) / curvature[j];
      const double delta = z - res.beta[j];
      if (delta != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) r[i] -= X(i, j) * delta;
        res.beta[j] = z;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    res.sweeps = sweep;
    res.final_delta = max_delta;
    if (max_delta < tol) return res;
  }
  std::ostringstream msg;
  msg << "coordinate descent did not converge after " << max_sweeps
      << " sweeps (final max delta " << res.final_delta << ")";
  throw NumericalError(msg.str());
}

void write_path_csv(std::ostream& out, const SolverPath& path) {
  out << "step,implied_lambda1,l1_mass,n_nonzero,residual_sq\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const auto& s = path.steps[k];
    out << k << ',' << s.implied_lambda1 << ',' << s.l1_mass << ',' << s.nonzeros() << ','
        << s.residual_sq << '\n';
  }
}

}  // namespace klsda::larsen
