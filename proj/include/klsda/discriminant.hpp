#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "klsda/divergence.hpp"
#include "klsda/larsen.hpp"

namespace klsda::discriminant {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using divergence::AnisotropyMatrix;

// Where the anisotropy matrix D enters the penalty:
//   Klsda0 (I, I)   Klsda1 (D, I)   Klsda2 (I, D)   Klsda3 (D, D)
// as (l1 weights, l2 weights). Klsda0 is plain sparse discriminant analysis.
enum class ConfigId { Klsda0, Klsda1, Klsda2, Klsda3 };

std::string_view to_string(ConfigId id);
std::optional<ConfigId> parse_config(std::string_view name);

// `count` values log-spaced from lo to hi, endpoints included.
std::vector<double> log_grid(double lo, double hi, int count);

struct KlsdaConfig {
  ConfigId config_id = ConfigId::Klsda0;
  std::vector<double> lambda2_grid = log_grid(1e-8, 1e-1, 8);
  larsen::SolverLimits limits;
  int q = 1;
  int max_outer_iters = 30;
  double convergence_tol = 1e-6;
  int n_bins = divergence::kDefaultBins;
  double epsilon = divergence::kDefaultEpsilon;
  int threads = 1;  // concurrent lambda2 solves

  // Throws UsageError.
  void validate() const;
};

struct PenaltyFactory {
  AnisotropyMatrix d1;
  AnisotropyMatrix d2;

  larsen::PenaltyPair at(double lambda2) const { return {d1, d2, lambda2}; }
};

PenaltyFactory build_penalties(ConfigId id, const AnisotropyMatrix& d);

// K x q, ones on the main diagonal. Throws UsageError when q > K.
Matrix init_theta(int K, int q);

// theta = (I - Theta_prev Theta_prev^T pi) pi^{-1} Y^T x_proj, scaled so that
// theta^T pi theta = 1. `Theta_prev` holds the j-1 earlier score vectors
// (zero columns for the first direction). Throws NumericalError when the
// update vanishes.
Vector update_theta(const Matrix& Y, const Vector& x_proj, const Matrix& Theta_prev,
                    const Vector& pi);

// Residual ||Y theta - X beta||^2 for every (lambda2 grid index, path step >= 1).
struct ResidualTable {
  std::vector<double> lambda2;
  std::vector<std::vector<double>> residual;  // [grid][kappa - 1]; shorter rows = absent
};

struct Selection {
  int grid_index = -1;
  double lambda2 = 0.0;
  int kappa = 0;
  double residual_sq = 0.0;
};

// Arg-min over finite entries; ties go to the larger lambda2, then the smaller
// kappa. Throws NumericalError when the table has no finite entry.
Selection select_optimal(const ResidualTable& table);

struct DirectionFit {
  Selection selection;
  int outer_iterations = 0;
  bool converged = false;
  double last_delta = 0.0;
  larsen::Termination termination = larsen::Termination::CorrelationsVanished;
};

struct KlsdaModel {
  Matrix B;      // p x q
  Matrix Theta;  // K x q
  std::vector<DirectionFit> directions;
  Vector pi;
  KlsdaConfig config;
  AnisotropyMatrix d_matrix;
  Vector column_means;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Alternating optimal-scoring fit with residual-minimizing (lambda2, kappa)
// selection. `d` = nullopt runs with identity weights regardless of the
// configuration. X must be column-centered.
KlsdaModel fit(const Matrix& X_centered, const Matrix& Y, const std::optional<AnisotropyMatrix>& d,
               const KlsdaConfig& cfg);

}  // namespace klsda::discriminant
