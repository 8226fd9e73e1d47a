#include <doctest.h>

#include <cmath>
#include <random>

#include "klsda/error.hpp"
#include "klsda/eval.hpp"
#include "oracles.hpp"

using namespace klsda;
using namespace klsda::eval;

namespace {

double auc(const std::vector<double>& s, const std::vector<int>& l, int target = 1) {
  return roc_auc(std::span<const double>(s), std::span<const int>(l), target);
}

std::vector<double> tied_scores(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> u(-6, 6);
  std::vector<double> s(n);
  for (auto& v : s) v = u(rng);
  return s;
}

std::vector<int> two_class_labels(std::mt19937_64& rng, int n) {
  std::vector<int> l(n);
  for (auto& v : l) v = 1 + static_cast<int>(rng() % 2);
  l[0] = 1;
  l[1] = 2;
  return l;
}

dataset::EpochDataset small_synthetic(double amplitude, std::uint64_t seed) {
  dataset::SyntheticConfig cfg;
  cfg.n_target = 40;
  cfg.n_nontarget = 80;
  cfg.n_channels = 4;
  cfg.n_times = 16;
  cfg.fs_hz = 64.0;
  cfg.active_channels = {1};
  cfg.bump_amplitude = amplitude;
  cfg.seed = seed;
  return dataset::generate_synthetic(cfg);
}

discriminant::KlsdaConfig quick_config() {
  discriminant::KlsdaConfig cfg;
  cfg.lambda2_grid = discriminant::log_grid(1e-6, 1e-2, 3);
  cfg.limits.t_max = 1.0;
  return cfg;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("AUC hand values") {
  CHECK(auc({0.9, 0.8, 0.4, 0.3}, {1, 1, 2, 2}) == 1.0);
  CHECK(auc({0.1, 0.9}, {1, 2}) == 0.0);
  CHECK(auc({0.5, 0.5}, {1, 2}) == 0.5);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), DataError);
  CHECK_THROWS_AS(auc({std::nan(""), 0.2}, {1, 2}), DataError);
}

TEST_CASE("AUC equals pair counting, is antisymmetric and rank-only") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> len(2, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    const auto s = tied_scores(rng, n);
    const auto l = two_class_labels(rng, n);
    const double a = auc(s, l);
    CHECK(a == oracle::pairwise_auc(s, l));

    std::vector<double> neg(n), mono(n), expo(n);
    for (int i = 0; i < n; ++i) {
      neg[i] = -s[i];
      mono[i] = 3.0 * s[i] + 7.0;
      expo[i] = std::exp(s[i] / 10.0);
    }
    CHECK(a + auc(neg, l) == 1.0);
    CHECK(auc(mono, l) == a);
    CHECK(auc(expo, l) == a);
    CHECK(auc(s, l, 2) == auc(neg, l));
  }
}

TEST_CASE("covariance identity") {
  std::mt19937_64 rng(22);
  const Matrix X = oracle::random_matrix(rng, 30, 4);
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[i] = 1 + i % 3;
  const auto s = covariance_summary(X, labels, 3);
  CHECK((s.sigma_t - s.sigma_w - s.sigma_b).cwiseAbs().maxCoeff() <= 1e-12);
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  CHECK((s.sigma_t - Xc.transpose() * Xc / 30.0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.mu - X.colwise().mean().transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("FLDA direction") {
  Matrix X(4, 2);
  X << 1, 1, 1, -1, -1, 1, -1, -1;
  // Total covariance is the identity; class means (1,0) and (-1,0).
  const Vector w = flda_direction(X, {1, 1, 2, 2});
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(std::abs(w[1]) <= 1e-12);

  Matrix same(4, 2);
  same << 1, 2, -1, -2, 1, 2, -1, -2;
  CHECK(flda_direction(same, {1, 1, 2, 2}).isZero(1e-12));
}

TEST_CASE("FLDA is parallel to least squares on class codes") {
  std::mt19937_64 rng(23);
  const Matrix X = oracle::random_matrix(rng, 50, 6);
  std::vector<int> labels(50);
  Vector y(50);
  for (int i = 0; i < 50; ++i) {
    labels[i] = i < 20 ? 1 : 2;
    y[i] = i < 20 ? 1.0 : -1.0;
  }
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  const Vector ols = oracle::ridge(Xc, y, std::vector<double>(6, 1.0), 0.0);
  const Vector w = flda_direction(X, labels);
  CHECK(std::abs(w.dot(ols)) / (w.norm() * ols.norm()) >= 1.0 - 1e-10);
}

TEST_CASE("projection and classifier") {
  std::mt19937_64 rng(24);
  const Matrix X = oracle::random_matrix(rng, 8, 3);
  CHECK(project(X, Vector::Zero(3)).isZero(0.0));
  CHECK(project(X, Vector::Unit(3, 0)) == X.col(0));

  const Vector raw = (Vector(4) << -2, -1, 1, 2).finished();
  const auto clf = train_classifier(raw, {1, 1, 2, 2});
  CHECK(clf.direction_sign == -1.0);
  const Vector o = clf.oriented(raw);
  CHECK(clf.predict(o[0]) == 1);
  CHECK(clf.predict(o[3]) == 2);
}

TEST_CASE("sparsity and method names") {
  const auto s = sparsity_of((Vector(4) << 0, 1, 0, -2).finished());
  CHECK(s.count == 2);
  CHECK(s.fraction == 0.5);
  CHECK(Method::parse("flda")->flda);
  CHECK(Method::parse("klsda2")->config == discriminant::ConfigId::Klsda2);
  CHECK(Method::parse("klsda2")->name() == "klsda2");
  CHECK_FALSE(Method::parse("svm").has_value());
}

TEST_CASE("cross-validation report") {
  const auto ds = small_synthetic(1.5, 3);
  const auto cfg = quick_config();
  const std::vector<Method> methods{*Method::parse("klsda0"), *Method::parse("klsda3"),
                                    *Method::parse("flda")};
  const auto reports = cross_validate_all(ds, methods, cfg, 3, 11, true, 1);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) {
    CHECK(r.fold_auc.size() == 3);
    CHECK(r.failed_folds == 0);
    CHECK(r.fold_hash == reports[0].fold_hash);
    CHECK(r.stratified);
    double m = 0.0;
    for (double a : r.fold_auc) m += a / 3.0;
    CHECK(r.mean_auc == doctest::Approx(m).epsilon(1e-14));
  }
  CHECK(reports[0].mean_auc > 0.7);
  CHECK(reports[0].lambda2_selected.size() == 3);
  CHECK(reports[2].lambda2_selected.empty());

  const auto threaded = cross_validate_all(ds, methods, cfg, 3, 11, true, 4);
  for (std::size_t m = 0; m < reports.size(); ++m) {
    CHECK(threaded[m].fold_auc == reports[m].fold_auc);
    CHECK(threaded[m].nonzero_count == reports[m].nonzero_count);
  }
  const auto single = cross_validate(ds, methods[1], cfg, 3, 11);
  CHECK(single.fold_auc == reports[1].fold_auc);
}

TEST_CASE("no class signal gives chance-level AUC") {
  double total = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto ds = small_synthetic(0.0, seed);
    total += cross_validate(ds, *Method::parse("klsda0"), quick_config(), 3, seed).mean_auc;
  }
  CHECK(total / 4.0 == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("unit-norm scaling reports raw-unit sparsity and keeps folds") {
  const auto ds = small_synthetic(1.5, 4);
  const auto a = cross_validate(ds, *Method::parse("klsda1"), quick_config(), 3, 5, true,
                                dataset::Scaling::UnitNorm);
  const auto b = cross_validate(ds, *Method::parse("klsda1"), quick_config(), 3, 5);
  CHECK(a.scaling == "unit-norm");
  CHECK(b.scaling == "none");
  CHECK(a.fold_hash == b.fold_hash);
  CHECK(a.failed_folds == 0);
}

TEST_CASE("anisotropy uses the training rows only") {
  auto ds = small_synthetic(1.0, 6);
  const auto folds = dataset::split_kfold(ds.n(), 3, 1, ds.labels);
  const auto before = training_anisotropy(ds, folds[0].train, 20, 1e-12);
  for (int i : folds[0].test) ds.X.row(i).setConstant(1e6);
  const auto after = training_anisotropy(ds, folds[0].train, 20, 1e-12);
  CHECK(before.diag == after.diag);
}

}
