#include "klsda/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "klsda/error.hpp"
#include "klsda/kernels.hpp"
#include "klsda/parallel.hpp"

namespace klsda::eval {

CovarianceSummary covariance_summary(const Matrix& X, const std::vector<int>& labels,
                                     int n_classes) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw DataError("labels do not match rows");
  CovarianceSummary s;
  s.mu_k = Matrix::Zero(n_classes, p);
  std::vector<int> counts(n_classes, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = labels[i] - 1;
    if (k < 0 || k >= n_classes) throw DataError("class id out of range");
    s.mu_k.row(k) += X.row(i);
    counts[k] += 1;
  }
  for (int k = 0; k < n_classes; ++k) {
    if (counts[k] == 0) throw DataError("class " + std::to_string(k + 1) + " is empty");
    s.mu_k.row(k) /= counts[k];
  }
  s.mu = X.colwise().mean().transpose();

  const Matrix Xt = X.rowwise() - s.mu.transpose();
  s.sigma_t = (Xt.transpose() * Xt) / static_cast<double>(n);

  Matrix Xw(n, p);
  for (Eigen::Index i = 0; i < n; ++i) Xw.row(i) = X.row(i) - s.mu_k.row(labels[i] - 1);
  s.sigma_w = (Xw.transpose() * Xw) / static_cast<double>(n);

  s.sigma_b = Matrix::Zero(p, p);
  for (int k = 0; k < n_classes; ++k) {
    const Vector dk = s.mu_k.row(k).transpose() - s.mu;
    s.sigma_b += (static_cast<double>(counts[k]) / n) * dk * dk.transpose();
  }
  return s;
}

Vector flda_direction(const Matrix& X, const std::vector<int>& labels) {
  const CovarianceSummary s = covariance_summary(X, labels, 2);
  const Vector diff = (s.mu_k.row(0) - s.mu_k.row(1)).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.sigma_t);
  if (eig.info() != Eigen::Success) throw NumericalError("FLDA: eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  const double smax = ev.cwiseAbs().maxCoeff();
  const double cutoff = 1e-10 * smax;
  const Matrix& V = eig.eigenvectors();
  Vector coef = V.transpose() * diff;
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef[i] = ev[i] > cutoff ? coef[i] / ev[i] : 0.0;
  return V * coef;
}

Vector project(const Matrix& X, const Vector& beta) {
  if (X.cols() != beta.size()) throw DataError("project: dimension mismatch");
  Vector s = Vector::Zero(X.rows());
  std::span<double> out(s.data(), s.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] == 0.0) continue;
    kernels::axpy(beta[j], std::span<const double>(X.col(j).data(), X.rows()), out);
  }
  return s;
}

Classifier1D train_classifier(const Vector& raw, const std::vector<int>& labels, int target_class) {
  if (static_cast<Eigen::Index>(labels.size()) != raw.size()) {
    throw DataError("classifier: labels do not match scores");
  }
  double sum_t = 0.0, sum_n = 0.0;
  int n_t = 0, n_n = 0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (labels[i] == target_class) { sum_t += raw[i]; ++n_t; }
    else { sum_n += raw[i]; ++n_n; }
  }
  if (n_t == 0 || n_n == 0) throw DataError("classifier: both classes are required");
  Classifier1D c;
  const double m_t = sum_t / n_t;
  const double m_n = sum_n / n_n;
  c.direction_sign = m_t < m_n ? -1.0 : 1.0;
  c.prior_target = static_cast<double>(n_t) / (n_t + n_n);
  c.prior_nontarget = 1.0 - c.prior_target;

  const double ot = c.direction_sign * m_t;
  const double on = c.direction_sign * m_n;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double m = labels[i] == target_class ? m_t : m_n;
    ss += (raw[i] - m) * (raw[i] - m);
  }
  const double pooled = n_t + n_n > 2 ? ss / (n_t + n_n - 2) : 0.0;
  c.threshold = 0.5 * (ot + on);
  if (ot > on && pooled > 0.0) {
    c.threshold -= pooled * std::log(c.prior_target / c.prior_nontarget) / (ot - on);
  }
  return c;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels, int target_class) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: scores/labels size mismatch");
  const std::size_t n = scores.size();
  for (double v : scores) {
    if (std::isnan(v)) throw DataError("roc_auc: NaN score");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Twice the mid-rank keeps everything in integers.
  std::uint64_t rank2_sum = 0;
  std::uint64_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_mid = static_cast<std::uint64_t>(i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == target_class) {
        rank2_sum += twice_mid;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes are required");
  // U = R_pos - n_pos (n_pos + 1) / 2, in halves.
  const std::uint64_t u2 = rank2_sum - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Sparsity sparsity_of(const Vector& beta) {
  Sparsity s;
  s.count = static_cast<int>((beta.array() != 0.0).count());
  s.fraction = beta.size() ? static_cast<double>(s.count) / beta.size() : 0.0;
  return s;
}

std::vector<Sparsity> sparsity_stats(const discriminant::KlsdaModel& model) {
  std::vector<Sparsity> out;
  for (Eigen::Index j = 0; j < model.B.cols(); ++j) out.push_back(sparsity_of(model.B.col(j)));
  return out;
}

std::string Method::name() const {
  return flda ? "flda" : std::string(discriminant::to_string(config));
}

std::optional<Method> Method::parse(std::string_view name) {
  if (name == "flda" || name == "FLDA") return Method{true, discriminant::ConfigId::Klsda0};
  if (auto id = discriminant::parse_config(name)) return Method{false, *id};
  return std::nullopt;
}

divergence::AnisotropyMatrix training_anisotropy(const dataset::EpochDataset& ds,
                                                 const std::vector<int>& train_rows, int n_bins,
                                                 double epsilon) {
  const dataset::EpochDataset train = dataset::subset(ds, train_rows);
  return divergence::anisotropy_from_jmap(divergence::j_map(train, n_bins), epsilon);
}

namespace {

struct FoldResult {
  double auc = std::numeric_limits<double>::quiet_NaN();
  Sparsity sparsity;
  double lambda2 = std::numeric_limits<double>::quiet_NaN();
  int kappa = 0;
  std::vector<std::string> warnings;
  bool failed = false;
};

FoldResult run_fold(const dataset::EpochDataset& ds, const dataset::Fold& fold, const Method& method,
                    const discriminant::KlsdaConfig& cfg, dataset::Scaling scaling) {
  FoldResult r;
  try {
    const dataset::EpochDataset train = dataset::subset(ds, fold.train);
    const dataset::Centered centered = dataset::center_columns(train.X);
    const Vector factors = scaling == dataset::Scaling::UnitNorm
                               ? dataset::unit_norm_factors(centered.X)
                               : Vector::Ones(ds.p());
    const Matrix X_fit = centered.X * factors.asDiagonal();
    Vector beta;
    if (method.flda) {
      beta = flda_direction(X_fit, train.labels);
    } else {
      const auto Y = dataset::indicator(train).Y;
      const auto D = divergence::anisotropy_from_jmap(divergence::j_map(train, cfg.n_bins),
                                                      cfg.epsilon);
      discriminant::KlsdaConfig c = cfg;
      c.config_id = method.config;
      c.q = 1;
      const auto model = discriminant::fit(X_fit, Y, D, c);
      beta = model.B.col(0);
      r.lambda2 = model.directions[0].selection.lambda2;
      r.kappa = model.directions[0].selection.kappa;
      r.warnings = model.warnings;
    }
    beta = beta.cwiseProduct(factors);
    const Classifier1D clf = train_classifier(project(centered.X, beta), train.labels);

    Matrix X_test(fold.test.size(), ds.p());
    std::vector<int> y_test(fold.test.size());
    for (std::size_t i = 0; i < fold.test.size(); ++i) {
      X_test.row(i) = ds.X.row(fold.test[i]);
      y_test[i] = ds.labels[fold.test[i]];
    }
    const Vector scores =
        clf.oriented(project(dataset::apply_centering(X_test, centered.means), beta));
    r.auc = roc_auc(std::span<const double>(scores.data(), scores.size()), y_test);
    r.sparsity = sparsity_of(beta);
  } catch (const std::exception& e) {
    r.failed = true;
    r.warnings.push_back(std::string("fold failed: ") + e.what());
  }
  return r;
}

EvalReport assemble(const Method& method, int k, std::uint64_t seed, bool stratify,
                    dataset::Scaling scaling, std::uint64_t hash,
                    const std::vector<FoldResult>& folds, double wall) {
  EvalReport rep;
  rep.config_id = method.name();
  rep.k = k;
  rep.seed = seed;
  rep.stratified = stratify;
  rep.scaling = std::string(dataset::to_string(scaling));
  rep.fold_hash = hash;
  rep.wall_time_s = wall;
  std::vector<double> ok;
  double sp_sum = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fr = folds[f];
    rep.fold_auc.push_back(fr.auc);
    rep.sparsity_fraction.push_back(fr.sparsity.fraction);
    rep.nonzero_count.push_back(fr.sparsity.count);
    if (!method.flda) {
      rep.lambda2_selected.push_back(fr.lambda2);
      rep.kappa_selected.push_back(fr.kappa);
    }
    for (const auto& w : fr.warnings) rep.warnings.push_back("fold " + std::to_string(f) + ": " + w);
    if (fr.failed) {
      ++rep.failed_folds;
    } else {
      ok.push_back(fr.auc);
      sp_sum += fr.sparsity.fraction;
    }
  }
  if (!ok.empty()) {
    rep.mean_auc = std::accumulate(ok.begin(), ok.end(), 0.0) / ok.size();
    rep.mean_sparsity = sp_sum / ok.size();
    if (ok.size() > 1) {
      double ss = 0.0;
      for (double a : ok) ss += (a - rep.mean_auc) * (a - rep.mean_auc);
      rep.std_auc = std::sqrt(ss / (ok.size() - 1));
    }
  } else {
    rep.mean_auc = std::numeric_limits<double>::quiet_NaN();
    rep.std_auc = std::numeric_limits<double>::quiet_NaN();
  }
  if (rep.failed_folds > 0) {
    rep.warnings.push_back(std::to_string(rep.failed_folds) + " fold(s) excluded from the mean");
  }
  return rep;
}

}  // namespace

std::vector<EvalReport> cross_validate_all(const dataset::EpochDataset& ds,
                                           const std::vector<Method>& methods,
                                           const discriminant::KlsdaConfig& cfg, int k,
                                           std::uint64_t seed, bool stratify, int threads,
                                           dataset::Scaling scaling) {
  if (ds.n_classes != 2) throw DataError("cross-validation with AUC needs exactly two classes");
  const auto folds = dataset::split_kfold(ds.n(), k, seed, ds.labels, stratify);
  const auto hash = dataset::fold_hash(folds);
  const int jobs = static_cast<int>(methods.size()) * k;
  std::vector<FoldResult> results(jobs);
  std::vector<double> seconds(jobs, 0.0);
  discriminant::KlsdaConfig inner = cfg;
  if (threads > 1) inner.threads = 1;
  parallel_for_indexed(jobs, threads, [&](int job) {
    const auto t0 = std::chrono::steady_clock::now();
    results[job] = run_fold(ds, folds[job % k], methods[job / k], inner, scaling);
    seconds[job] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<EvalReport> reports;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<FoldResult> mine(results.begin() + m * k, results.begin() + (m + 1) * k);
    double wall = 0.0;
    for (int f = 0; f < k; ++f) wall += seconds[m * k + f];
    reports.push_back(assemble(methods[m], k, seed, stratify, scaling, hash, mine, wall));
  }
  return reports;
}

EvalReport cross_validate(const dataset::EpochDataset& ds, const Method& method,
                          const discriminant::KlsdaConfig& cfg, int k, std::uint64_t seed,
                          bool stratify, dataset::Scaling scaling) {
  return cross_validate_all(ds, {method}, cfg, k, seed, stratify, 1, scaling).front();
}

}  // namespace klsda::eval
