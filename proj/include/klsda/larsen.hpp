#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "klsda/divergence.hpp"

namespace klsda::larsen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using divergence::AnisotropyMatrix;

// Objective: ||y - X b||^2 + lambda1 ||D1 b||_1 + lambda2 ||D2 b||_2^2.
// No 1/(2n) factor and no elastic-net rescaling of the coefficients.
struct PenaltyPair {
  AnisotropyMatrix d1;
  AnisotropyMatrix d2;
  double lambda2 = 0.0;

  static PenaltyPair unweighted(int p, double lambda2) {
    return {AnisotropyMatrix::identity(p), AnisotropyMatrix::identity(p), lambda2};
  }
};

struct SolverLimits {
  double t_max = std::numeric_limits<double>::infinity();  // budget on ||D1 b||_1
  int max_steps = 2000;
  int max_nonzeros = std::numeric_limits<int>::max();
  double tie_tol = 1e-12;
  double condition_limit = 1e12;
};

enum class Termination {
  BudgetReached,         // final step truncated onto t_max
  CorrelationsVanished,  // least-squares end of the path
  MaxSteps,
  MaxNonzeros,
  DegenerateStep,        // active Gram ill-conditioned; see degenerate_feature
};

std::string_view to_string(Termination t);

struct PathStep {
  Vector beta;
  double l1_mass = 0.0;          // ||D1 beta||_1
  std::vector<int> active_set;   // variables free on the segment ending here
  double residual_sq = 0.0;      // ||y - X beta||^2 on the unaugmented problem
  double implied_lambda1 = 0.0;  // penalty for which this vertex is optimal

  int nonzeros() const;
};

struct SolverPath {
  std::vector<PathStep> steps;  // steps[0] is the zero vector
  Termination termination = Termination::CorrelationsVanished;
  int degenerate_feature = -1;
  std::string diagnostic;

  int kappa() const { return static_cast<int>(steps.size()) - 1; }
};

struct Augmented {
  Matrix X;  // (n+p) x p when lambda2 > 0, else n x p
  Vector y;
};

// Stacks sqrt(lambda2) * D2 under X and p zeros under y.
Augmented augment(const Matrix& X, const Vector& y, const PenaltyPair& pp);

// Plain LASSO path (LARS with the drop step) on the given design, in its own coordinates.
SolverPath lars_lasso_path(const Matrix& X_work, const Vector& y_work, const SolverLimits& limits);

// X^T X and the design, shared across many solves on the same X.
class GramCache {
 public:
  explicit GramCache(const Matrix& X);

  const Matrix& design() const { return *X_; }
  const Matrix& gram() const { return gram_; }
  Vector correlate(const Vector& y) const;  // X^T y

 private:
  const Matrix* X_;
  Matrix gram_;
};

SolverPath generalized_enet(const Matrix& X, const Vector& y, const PenaltyPair& pp,
                            const SolverLimits& limits);
SolverPath generalized_enet(const GramCache& gram, const Vector& y, const PenaltyPair& pp,
                            const SolverLimits& limits);

struct CdResult {
  Vector beta;
  int sweeps = 0;
  double final_delta = 0.0;
};

// Cyclic coordinate descent on the same objective. Independent of the path
// code; used as a test oracle. Throws NumericalError on non-convergence.
CdResult cd_reference_solver(const Matrix& X, const Vector& y, const PenaltyPair& pp,
                             double lambda1, double tol = 1e-10, int max_sweeps = 100000);

// CSV `step,implied_lambda1,l1_mass,n_nonzero,residual_sq`.
void write_path_csv(std::ostream& out, const SolverPath& path);

}  // namespace klsda::larsen
