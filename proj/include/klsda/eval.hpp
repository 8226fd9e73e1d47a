#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "klsda/dataset.hpp"
#include "klsda/discriminant.hpp"

namespace klsda::eval {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Sample covariance estimates with 1/n normalization.
struct CovarianceSummary {
  Matrix sigma_w;
  Matrix sigma_b;
  Matrix sigma_t;
  Matrix mu_k;  // K x p class means
  Vector mu;    // overall mean
};

CovarianceSummary covariance_summary(const Matrix& X, const std::vector<int>& labels, int n_classes);

// Two-class Fisher direction pinv(Sigma_t) (mu_1 - mu_2). Singular values
// below 1e-10 * sigma_max are treated as zero.
Vector flda_direction(const Matrix& X, const std::vector<int>& labels);

Vector project(const Matrix& X, const Vector& beta);

// Post-projection rule for two classes. Class 1 is the target.
struct Classifier1D {
  double direction_sign = 1.0;  // +1 or -1, makes the target mean the larger one
  double threshold = 0.0;
  double prior_target = 0.5;
  double prior_nontarget = 0.5;

  Vector oriented(const Vector& raw_scores) const { return direction_sign * raw_scores; }
  // 1 for target, 2 for non-target.
  int predict(double oriented_score) const { return oriented_score > threshold ? 1 : 2; }
};

Classifier1D train_classifier(const Vector& raw_scores, const std::vector<int>& labels,
                              int target_class = 1);

// Mann-Whitney AUC via mid-ranks: ties between a target and a non-target count
// one half. Throws DataError when either class is missing.
double roc_auc(std::span<const double> scores, std::span<const int> labels, int target_class = 1);

struct Sparsity {
  int count = 0;
  double fraction = 0.0;
};

// Exact zero test per direction (column of B).
std::vector<Sparsity> sparsity_stats(const discriminant::KlsdaModel& model);
Sparsity sparsity_of(const Vector& beta);

// A cross-validated method: one of the four KLSDA configurations or FLDA.
struct Method {
  bool flda = false;
  discriminant::ConfigId config = discriminant::ConfigId::Klsda0;

  std::string name() const;
  static std::optional<Method> parse(std::string_view name);
};

struct EvalReport {
  std::string config_id;
  int k = 0;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::string scaling = "none";
  std::uint64_t fold_hash = 0;
  std::vector<double> fold_auc;           // failed folds hold NaN
  std::vector<double> sparsity_fraction;  // first direction, per fold
  std::vector<int> nonzero_count;
  std::vector<double> lambda2_selected;   // per fold, KLSDA only
  std::vector<int> kappa_selected;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample standard deviation across successful folds
  double mean_sparsity = 0.0;
  int failed_folds = 0;
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
};

// Per fold: center (and optionally scale) with training statistics, J map +
// D from the training rows, fit, orient on training scores, score the test
// rows, AUC. Two classes only. Directions are reported in raw feature units.
EvalReport cross_validate(const dataset::EpochDataset& ds, const Method& method,
                          const discriminant::KlsdaConfig& cfg, int k, std::uint64_t seed,
                          bool stratify = true,
                          dataset::Scaling scaling = dataset::Scaling::None);

// Several methods sharing one fold assignment; jobs run on `threads` workers
// and are reduced in (method, fold) order.
std::vector<EvalReport> cross_validate_all(const dataset::EpochDataset& ds,
                                           const std::vector<Method>& methods,
                                           const discriminant::KlsdaConfig& cfg, int k,
                                           std::uint64_t seed, bool stratify, int threads,
                                           dataset::Scaling scaling = dataset::Scaling::None);

// Anisotropy matrix built from the given training rows only.
divergence::AnisotropyMatrix training_anisotropy(const dataset::EpochDataset& ds,
                                                 const std::vector<int>& train_rows, int n_bins,
                                                 double epsilon);

}  // namespace klsda::eval
