#include "klsda/discriminant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "klsda/error.hpp"
#include "klsda/parallel.hpp"

namespace klsda::discriminant {

std::string_view to_string(ConfigId id) {
  switch (id) {
    case ConfigId::Klsda0: return "klsda0";
    case ConfigId::Klsda1: return "klsda1";
    case ConfigId::Klsda2: return "klsda2";
    case ConfigId::Klsda3: return "klsda3";
  }
  return "unknown";
}

std::optional<ConfigId> parse_config(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (auto id : {ConfigId::Klsda0, ConfigId::Klsda1, ConfigId::Klsda2, ConfigId::Klsda3}) {
    if (lower == to_string(id)) return id;
  }
  return std::nullopt;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw UsageError("log grid needs 0 < lo <= hi and count >= 1");
  }
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) g[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

void KlsdaConfig::validate() const {
  if (lambda2_grid.empty()) throw UsageError("lambda2 grid is empty");
  for (std::size_t i = 0; i < lambda2_grid.size(); ++i) {
    if (!(lambda2_grid[i] > 0.0) || !std::isfinite(lambda2_grid[i])) {
      throw UsageError("lambda2 grid values must be positive and finite");
    }
    if (i > 0 && !(lambda2_grid[i] > lambda2_grid[i - 1])) {
      throw UsageError("lambda2 grid must be strictly increasing");
    }
  }
  if (q < 1) throw UsageError("q must be at least 1");
  if (max_outer_iters < 1) throw UsageError("max_outer_iters must be at least 1");
  if (!(convergence_tol > 0.0)) throw UsageError("convergence_tol must be positive");
  if (n_bins < 2) throw UsageError("n_bins must be at least 2");
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  if (!(limits.t_max > 0.0)) throw UsageError("t_max must be positive");
  if (limits.max_steps < 1 || limits.max_nonzeros < 1) {
    throw UsageError("solver step and nonzero limits must be positive");
  }
  if (!(limits.tie_tol > 0.0)) throw UsageError("tie_tol must be positive");
}

PenaltyFactory build_penalties(ConfigId id, const AnisotropyMatrix& d) {
  const auto I = AnisotropyMatrix::identity(d.size());
  switch (id) {
    case ConfigId::Klsda0: return {I, I};
    case ConfigId::Klsda1: return {d, I};
    case ConfigId::Klsda2: return {I, d};
    case ConfigId::Klsda3: return {d, d};
  }
  return {I, I};
}

Matrix init_theta(int K, int q) {
  if (K < 1 || q < 1) throw UsageError("init_theta: K and q must be positive");
  if (q > K) throw UsageError("init_theta: q=" + std::to_string(q) + " exceeds K=" + std::to_string(K));
  return Matrix::Identity(K, q);
}

namespace {

constexpr double kStationaryScoreTol = 1e-12;

// Removes the pi-projection onto each nonzero column of `basis`.
Vector deflate(const Vector& v, const Matrix& basis, const Vector& pi) {
  Vector out = v;
  for (Eigen::Index l = 0; l < basis.cols(); ++l) {
    const auto t = basis.col(l);
    const double nrm = t.dot(pi.cwiseProduct(t));
    if (nrm == 0.0) continue;
    out -= t * (t.dot(pi.cwiseProduct(v)) / nrm);
  }
  return out;
}

double pi_norm(const Vector& theta, const Vector& pi) {
  return std::sqrt(theta.dot(pi.cwiseProduct(theta)));
}

// Starting score for direction j: e_j with the trivial constant score and the
// earlier directions projected out, then normalized. Falls back to the next
// unit vector if that projection vanishes.
Vector initial_score(int j, const Matrix& Theta_prev, const Vector& pi) {
  const auto K = pi.size();
  Matrix basis(K, Theta_prev.cols() + 1);
  basis.col(0) = Vector::Ones(K);
  basis.rightCols(Theta_prev.cols()) = Theta_prev;
  const Matrix eye = init_theta(static_cast<int>(K), static_cast<int>(K));
  for (Eigen::Index off = 0; off < K; ++off) {
    const Vector cand = deflate(eye.col((j + off) % K), basis, pi);
    const double nrm = pi_norm(cand, pi);
    if (nrm > 1e-10) return cand / nrm;
  }
  throw NumericalError("no admissible initial score vector for direction " + std::to_string(j + 1));
}

struct Iterate {
  Vector beta;
  Vector theta;
  Selection selection;
  larsen::Termination termination = larsen::Termination::CorrelationsVanished;
};

}  // namespace

Vector update_theta(const Matrix& Y, const Vector& x_proj, const Matrix& Theta_prev,
                    const Vector& pi) {
  if (Y.rows() != x_proj.size()) throw DataError("update_theta: Y and X beta differ in length");
  if ((pi.array() <= 0.0).any()) throw DataError("update_theta: every class must be nonempty");
  Vector v = (Y.transpose() * x_proj).cwiseQuotient(pi);
  // (I - Theta Theta^T pi) v
  if (Theta_prev.cols() > 0) v -= Theta_prev * (Theta_prev.transpose() * pi.cwiseProduct(v));
  const double nrm = pi_norm(v, pi);
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw NumericalError("degenerate direction: score update vanished");
  }
  return v / nrm;
}

Selection select_optimal(const ResidualTable& table) {
  Selection best;
  for (std::size_t g = 0; g < table.residual.size(); ++g) {
    const auto& row = table.residual[g];
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double r = row[k];
      if (!std::isfinite(r)) continue;
      const double l2 = table.lambda2[g];
      const int kappa = static_cast<int>(k) + 1;
      bool better = best.grid_index < 0 || r < best.residual_sq;
      if (!better && r == best.residual_sq) {
        better = l2 > best.lambda2 || (l2 == best.lambda2 && kappa < best.kappa);
      }
      if (better) best = {static_cast<int>(g), l2, kappa, r};
    }
  }
  if (best.grid_index < 0) throw NumericalError("no path vertex within t_max");
  return best;
}

KlsdaModel fit(const Matrix& X, const Matrix& Y, const std::optional<AnisotropyMatrix>& d,
               const KlsdaConfig& cfg) {
  cfg.validate();
  const auto n = X.rows();
  const auto p = X.cols();
  const auto K = Y.cols();
  if (Y.rows() != n) throw DataError("fit: X and Y differ in rows");
  if (K < 2) throw DataError("fit: need at least two classes");
  if (cfg.q > K - 1) {
    throw UsageError("fit: q=" + std::to_string(cfg.q) + " exceeds K-1=" + std::to_string(K - 1));
  }
  if (d && d->size() != p) throw DataError("fit: anisotropy size does not match p");

  KlsdaModel model;
  model.config = cfg;
  model.pi = Y.colwise().sum().transpose() / static_cast<double>(n);
  if ((model.pi.array() <= 0.0).any()) throw DataError("fit: every class must be nonempty");
  model.d_matrix = d ? *d : AnisotropyMatrix::identity(static_cast<int>(p));
  model.column_means = Vector::Zero(p);

  const PenaltyFactory penalties = build_penalties(cfg.config_id, model.d_matrix);
  const larsen::GramCache gram(X);
  const int grid = static_cast<int>(cfg.lambda2_grid.size());

  model.B = Matrix::Zero(p, cfg.q);
  model.Theta = Matrix::Zero(K, cfg.q);

  for (int j = 0; j < cfg.q; ++j) {
    const Matrix Theta_prev = model.Theta.leftCols(j);
    Vector theta = initial_score(j, Theta_prev, model.pi);
    std::optional<Iterate> best;
    std::optional<Vector> beta_old;
    DirectionFit info;

    for (int it = 1; it <= cfg.max_outer_iters; ++it) {
      const Vector y = Y * theta;
      std::vector<larsen::SolverPath> paths(grid);
      parallel_for_indexed(grid, cfg.threads, [&](int g) {
        paths[g] = larsen::generalized_enet(gram, y, penalties.at(cfg.lambda2_grid[g]), cfg.limits);
      });

      ResidualTable table;
      table.lambda2 = cfg.lambda2_grid;
      table.residual.resize(grid);
      for (int g = 0; g < grid; ++g) {
        for (std::size_t k = 1; k < paths[g].steps.size(); ++k) {
          table.residual[g].push_back(paths[g].steps[k].residual_sq);
        }
      }
      const Selection sel = select_optimal(table);
      Iterate cur{paths[sel.grid_index].steps[sel.kappa].beta, theta, sel,
                  paths[sel.grid_index].termination};
      if ((cur.beta.array() == 0.0).all()) {
        throw NumericalError("degenerate direction " + std::to_string(j + 1) +
                             ": selected coefficient vector is all zero");
      }
      info.outer_iterations = it;

      if (best && sel.residual_sq > best->selection.residual_sq +
                                        1e-9 * std::max(1.0, best->selection.residual_sq)) {
        std::ostringstream msg;
        msg << "direction " << j + 1 << ": residual rose from " << best->selection.residual_sq
            << " to " << sel.residual_sq << " at outer iteration " << it
            << "; keeping the best iterate";
        model.warnings.push_back(msg.str());
        break;
      }

      const double delta = beta_old ? (cur.beta - *beta_old).cwiseAbs().maxCoeff()
                                     : std::numeric_limits<double>::infinity();
      info.last_delta = delta;
      const Vector x_proj = X * cur.beta;
      const Vector theta_next = update_theta(Y, x_proj, Theta_prev, model.pi);
      // A stationary score means the next solve repeats this one; near an
      // interpolating vertex, last-bit noise in theta would otherwise keep
      // the beta test from ever firing.
      const bool stationary = (theta_next - theta).cwiseAbs().maxCoeff() <=
                              kStationaryScoreTol * theta.cwiseAbs().maxCoeff();
      beta_old = cur.beta;
      if (!best || sel.residual_sq <= best->selection.residual_sq) best = std::move(cur);
      if (delta < cfg.convergence_tol || stationary) {
        info.converged = true;
        break;
      }
      theta = theta_next;
    }

    if (!info.converged) {
      std::ostringstream msg;
      msg << "direction " << j + 1 << " did not converge in " << info.outer_iterations
          << " outer iterations (last delta " << info.last_delta << ")";
      model.warnings.push_back(msg.str());
    }
    info.selection = best->selection;
    info.termination = best->termination;
    model.B.col(j) = best->beta;
    model.Theta.col(j) = best->theta;
    model.directions.push_back(info);
  }
  return model;
}

}  // namespace klsda::discriminant
