#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "klsda/dataset.hpp"
#include "klsda/error.hpp"

using namespace klsda;
using namespace klsda::dataset;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("klsda_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("make_dataset bookkeeping") {
  Matrix X(4, 2);
  X << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto ds = make_dataset(X, {1, 1, 2, 2}, 2, 1, 2, 100.0);
  CHECK(ds.n() == 4);
  CHECK(ds.p() == 2);
  CHECK(ds.class_counts == std::vector<int>{2, 2});
  CHECK(ds.class_indices[1] == std::vector<int>{2, 3});
}

TEST_CASE("make_dataset rejects bad input") {
  Matrix X = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(make_dataset(X, {1, 1, 3, 2}, 2, 1, 2, 1.0), DataError);
  CHECK_THROWS_AS(make_dataset(X, {1, 1, 2}, 2, 1, 2, 1.0), DataError);
  CHECK_THROWS_AS(make_dataset(X, {1, 1, 2, 2}, 2, 2, 2, 1.0), DataError);
  X(2, 1) = std::nan("");
  CHECK_THROWS_AS(make_dataset(X, {1, 1, 2, 2}, 2, 1, 2, 1.0), DataError);
}

TEST_CASE("indicator and class proportions") {
  const auto a = indicator(std::vector<int>{1, 2}, 2);
  CHECK(a.Y == (Matrix(2, 2) << 1, 0, 0, 1).finished());
  CHECK(a.pi.isApprox(Vector::Constant(2, 0.5)));
  const auto b = indicator(std::vector<int>{1, 1, 1, 2}, 2);
  CHECK(b.pi[0] == 0.75);
  CHECK(b.pi[1] == 0.25);
}

TEST_CASE("centering") {
  Matrix X(2, 1);
  X << 1, 3;
  const auto c = center_columns(X);
  CHECK(c.X(0, 0) == -1.0);
  CHECK(c.X(1, 0) == 1.0);
  CHECK(c.means[0] == 2.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(5.0, 2.0);
  Matrix R(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 3; ++j) R(i, j) = nd(rng);
  const auto cr = center_columns(R);
  CHECK(cr.X.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(apply_centering(R, cr.means) == cr.X);
  const auto again = center_columns(cr.X);
  CHECK(again.means.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unit-norm factors") {
  Matrix X(3, 2);
  X << 3, 0, 0, 0, -4, 0;
  const Vector f = unit_norm_factors(X);
  CHECK(f[0] == doctest::Approx(0.2));
  CHECK(f[1] == 1.0);
  CHECK(parse_scaling("unit-norm") == Scaling::UnitNorm);
  CHECK_FALSE(parse_scaling("zscore").has_value());
}

TEST_CASE("synthetic generator shape and determinism") {
  SyntheticConfig cfg;
  const auto a = generate_synthetic(cfg);
  CHECK(a.n() == 600);
  CHECK(a.p() == 512);
  CHECK(a.class_counts == std::vector<int>{100, 500});
  const auto b = generate_synthetic(cfg);
  CHECK(a.X == b.X);
  CHECK(a.labels == b.labels);
  cfg.seed = 8;
  CHECK_FALSE(generate_synthetic(cfg).X == a.X);
}

TEST_CASE("synthetic bump sits on the active channels") {
  SyntheticConfig cfg;
  cfg.n_target = 400;
  cfg.n_nontarget = 400;
  const auto ds = generate_synthetic(cfg);
  const int peak_t = static_cast<int>(std::lround(cfg.center_s() * cfg.fs_hz));
  auto mean_diff = [&](int ch, int t) {
    double s1 = 0, s2 = 0;
    for (int i = 0; i < ds.n(); ++i) (ds.labels[i] == 1 ? s1 : s2) += ds.X(i, ds.column(ch, t));
    return s1 / 400 - s2 / 400;
  };
  CHECK(mean_diff(2, peak_t) > 0.7);
  CHECK(mean_diff(3, peak_t) > 0.7);
  CHECK(std::abs(mean_diff(0, peak_t)) < 0.3);
  CHECK(std::abs(mean_diff(2, cfg.n_times - 1)) < 0.3);
}

TEST_CASE("synthetic geometry is validated") {
  SyntheticConfig cfg;
  cfg.bump_center_s = 0.24;
  cfg.bump_width_s = 0.02;
  CHECK_THROWS_AS(validate(cfg), DataError);
  cfg.bump_center_s = 0.1;
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("k-fold partitions") {
  const std::vector<int> labels{1, 1, 1, 2, 2, 2};
  for (bool strat : {false, true}) {
    const auto folds = split_kfold(6, 3, 11, labels, strat);
    REQUIRE(folds.size() == 3);
    std::multiset<int> seen;
    for (const auto& f : folds) {
      CHECK(f.test.size() == 2);
      CHECK(f.train.size() == 4);
      seen.insert(f.test.begin(), f.test.end());
      for (int i : f.test) CHECK(std::find(f.train.begin(), f.train.end(), i) == f.train.end());
      if (strat) CHECK(labels[f.test[0]] != labels[f.test[1]]);
    }
    CHECK(seen == std::multiset<int>{0, 1, 2, 3, 4, 5});
  }
}

TEST_CASE("stratified folds on the oddball ratio") {
  const auto ds = generate_synthetic(SyntheticConfig{});
  const auto folds = split_kfold(ds.n(), 3, 11, ds.labels, true);
  for (const auto& f : folds) {
    int targets = 0;
    for (int i : f.test) targets += ds.labels[i] == 1;
    CHECK(targets >= 33);
    CHECK(targets <= 34);
  }
  CHECK(fold_hash(folds) == fold_hash(split_kfold(ds.n(), 3, 11, ds.labels, true)));
  CHECK(fold_hash(folds) != fold_hash(split_kfold(ds.n(), 3, 12, ds.labels, true)));
}

TEST_CASE("file round trip is exact") {
  const auto dir = scratch("roundtrip");
  SyntheticConfig cfg;
  cfg.n_target = 5;
  cfg.n_nontarget = 7;
  cfg.n_channels = 2;
  cfg.n_times = 16;
  cfg.active_channels = {1};
  const auto ds = generate_synthetic(cfg);
  save_epochs(ds, dir);
  const auto back = load_epochs(dir / "epochs.f64", dir / "labels.txt", dir / "meta.json");
  CHECK(back.X == ds.X);
  CHECK(back.labels == ds.labels);
  CHECK(back.n_channels == 2);
  CHECK(back.fs_hz == ds.fs_hz);
}

TEST_CASE("loader errors name the offending file") {
  const auto dir = scratch("missing");
  try {
    load_epochs(dir / "epochs.f64", dir / "labels.txt", dir / "meta.json");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("meta.json") != std::string::npos);
  }

  SyntheticConfig cfg;
  cfg.n_target = 2;
  cfg.n_nontarget = 2;
  cfg.n_channels = 1;
  cfg.n_times = 8;
  cfg.active_channels = {0};
  save_epochs(generate_synthetic(cfg), dir);
  {
    std::ofstream f(dir / "labels.txt");
    f << "1\n3\n2\n1\n";
  }
  CHECK_THROWS_AS(load_epochs(dir / "epochs.f64", dir / "labels.txt", dir / "meta.json"),
                  DataError);
  fs::resize_file(dir / "epochs.f64", 8);
  CHECK_THROWS_AS(load_epochs(dir / "epochs.f64", dir / "labels.txt", dir / "meta.json"),
                  DataError);
}

}
