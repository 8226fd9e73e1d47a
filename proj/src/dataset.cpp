#include "klsda/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "klsda/error.hpp"

namespace klsda::dataset {

namespace fs = std::filesystem;

EpochDataset make_dataset(Matrix X, std::vector<int> labels, int n_classes, int n_channels,
                          int n_times, double fs_hz) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match n=" +
                    std::to_string(n));
  }
  if (n_channels <= 0 || n_times <= 0 || static_cast<Eigen::Index>(n_channels) * n_times != p) {
    throw DataError("p=" + std::to_string(p) + " is not n_channels*n_times (" +
                    std::to_string(n_channels) + "*" + std::to_string(n_times) + ")");
  }
  if (n_classes < 1) throw DataError("number of classes must be positive");
  if (!(fs_hz > 0.0)) throw DataError("sampling rate must be positive");

  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(X(i, j))) {
        throw DataError("non-finite value at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      }
    }
  }

  EpochDataset ds;
  ds.class_counts.assign(n_classes, 0);
  ds.class_indices.assign(n_classes, {});
  for (Eigen::Index i = 0; i < n; ++i) {
    const int z = labels[i];
    if (z < 1 || z > n_classes) {
      throw DataError("unknown class id " + std::to_string(z) + " at row " + std::to_string(i) +
                      " (K=" + std::to_string(n_classes) + ")");
    }
    ds.class_counts[z - 1] += 1;
    ds.class_indices[z - 1].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < n_classes; ++k) {
    if (ds.class_counts[k] == 0) {
      throw DataError("class " + std::to_string(k + 1) + " has no members");
    }
  }

  ds.X = std::move(X);
  ds.labels = std::move(labels);
  ds.n_classes = n_classes;
  ds.n_channels = n_channels;
  ds.n_times = n_times;
  ds.fs_hz = fs_hz;
  return ds;
}

EpochDataset subset(const EpochDataset& ds, const std::vector<int>& rows) {
  Matrix X(rows.size(), ds.p());
  std::vector<int> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    X.row(r) = ds.X.row(rows[r]);
    labels[r] = ds.labels[rows[r]];
  }
  return make_dataset(std::move(X), std::move(labels), ds.n_classes, ds.n_channels, ds.n_times,
                      ds.fs_hz);
}

IndicatorMatrix indicator(const std::vector<int>& labels, int n_classes) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  IndicatorMatrix out;
  out.Y = Matrix::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) out.Y(i, labels[i] - 1) = 1.0;
  out.pi = out.Y.colwise().sum().transpose() / static_cast<double>(n);
  return out;
}

IndicatorMatrix indicator(const EpochDataset& ds) { return indicator(ds.labels, ds.n_classes); }

Centered center_columns(const Matrix& X) {
  Centered c;
  c.means = X.colwise().mean().transpose();
  c.X = X.rowwise() - c.means.transpose();
  return c;
}

Matrix apply_centering(const Matrix& X, const Vector& means) {
  return X.rowwise() - means.transpose();
}

std::string_view to_string(Scaling s) { return s == Scaling::UnitNorm ? "unit-norm" : "none"; }

std::optional<Scaling> parse_scaling(std::string_view name) {
  if (name == "none") return Scaling::None;
  if (name == "unit-norm") return Scaling::UnitNorm;
  return std::nullopt;
}

Vector unit_norm_factors(const Matrix& X_centered) {
  Vector f(X_centered.cols());
  for (Eigen::Index j = 0; j < X_centered.cols(); ++j) {
    const double norm = X_centered.col(j).norm();
    f[j] = norm > 0.0 ? 1.0 / norm : 1.0;
  }
  return f;
}

void validate(const SyntheticConfig& cfg) {
  if (cfg.n_target < 1 || cfg.n_nontarget < 1) throw DataError("both classes need epochs");
  if (cfg.n_channels < 1 || cfg.n_times < 1) throw DataError("empty epoch geometry");
  if (!(cfg.fs_hz > 0.0)) throw DataError("sampling rate must be positive");
  if (!(cfg.noise_sigma > 0.0)) throw DataError("noise_sigma must be positive");
  if (!(cfg.ar_coefficient >= 0.0 && cfg.ar_coefficient < 1.0)) {
    throw DataError("ar_coefficient must lie in [0,1)");
  }
  if (!(cfg.width_s() > 0.0)) throw DataError("bump width must be positive");
  if (!(cfg.center_s() + 2.0 * cfg.width_s() < cfg.duration_s())) {
    throw DataError("bump center + 2 widths must fall inside the epoch");
  }
  for (int c : cfg.active_channels) {
    if (c < 0 || c >= cfg.n_channels) {
      throw DataError("active channel " + std::to_string(c) + " out of range");
    }
  }
}

EpochDataset generate_synthetic(const SyntheticConfig& cfg) {
  validate(cfg);
  const int n = cfg.n_target + cfg.n_nontarget;
  const int T = cfg.n_times;
  const int p = cfg.n_channels * T;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<int> labels(n);
  std::fill(labels.begin(), labels.begin() + cfg.n_target, 1);
  std::fill(labels.begin() + cfg.n_target, labels.end(), 2);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<double> bump(T);
  const double c = cfg.center_s();
  const double w = cfg.width_s();
  for (int t = 0; t < T; ++t) {
    const double u = (t / cfg.fs_hz - c) / w;
    bump[t] = cfg.bump_amplitude * std::exp(-0.5 * u * u);
  }
  std::vector<char> active(cfg.n_channels, 0);
  for (int ch : cfg.active_channels) active[ch] = 1;

  // Stationary AR(1): marginal standard deviation equals noise_sigma.
  const double a = cfg.ar_coefficient;
  const double innovation = cfg.noise_sigma * std::sqrt(1.0 - a * a);

  Matrix X(n, p);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < cfg.n_channels; ++ch) {
      double x = cfg.noise_sigma * normal(rng);
      for (int t = 0; t < T; ++t) {
        if (t > 0) x = a * x + innovation * normal(rng);
        double v = x;
        if (labels[i] == 1 && active[ch]) v += bump[t];
        X(i, ch * T + t) = v;
      }
    }
  }
  return make_dataset(std::move(X), std::move(labels), 2, cfg.n_channels, T, cfg.fs_hz);
}

std::vector<Fold> split_kfold(int n, int k, std::uint64_t seed, const std::vector<int>& labels,
                              bool stratify) {
  if (k < 2) throw UsageError("k-fold split needs k >= 2");
  if (n < k) throw DataError("fewer samples than folds");
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(n, -1);

  if (stratify) {
    if (static_cast<int>(labels.size()) != n) throw DataError("labels do not match n");
    const int K = *std::max_element(labels.begin(), labels.end());
    std::vector<std::vector<int>> members(K);
    for (int i = 0; i < n; ++i) members[labels[i] - 1].push_back(i);
    // Continue the round-robin deal across classes so fold sizes stay balanced.
    int next = 0;
    for (int cls = 0; cls < K; ++cls) {
      auto& m = members[cls];
      if (m.empty()) continue;
      if (static_cast<int>(m.size()) < k) {
        throw DataError("class " + std::to_string(cls + 1) + " has " + std::to_string(m.size()) +
                        " members, fewer than k=" + std::to_string(k));
      }
      std::shuffle(m.begin(), m.end(), rng);
      for (int idx : m) {
        fold_of[idx] = next;
        next = (next + 1) % k;
      }
    }
  } else {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int r = 0; r < n; ++r) fold_of[perm[r]] = r % k;
  }

  std::vector<Fold> folds(k);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

std::uint64_t fold_hash(const std::vector<Fold>& folds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& f : folds) {
    mix(f.test.size());
    for (int i : f.test) mix(static_cast<std::uint64_t>(i));
  }
  return h;
}

// --- file formats -------------------------------------------------------

namespace {

Meta read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open meta file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    Meta m;
    m.n = j.at("n").get<int>();
    m.p = j.at("p").get<int>();
    m.n_channels = j.at("n_channels").get<int>();
    m.n_times = j.at("n_times").get<int>();
    m.fs_hz = j.at("fs_hz").get<double>();
    m.k = j.at("k").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed meta file " + path.string() + ": " + e.what());
  }
}

}  // namespace

EpochDataset load_epochs(const fs::path& data_path, const fs::path& labels_path,
                         const fs::path& meta_path) {
  for (const auto& p : {meta_path, data_path, labels_path}) {
    if (!fs::exists(p)) throw DataError("missing file " + p.string());
  }
  const Meta meta = read_meta(meta_path);
  if (meta.n < 1 || meta.p < 1) throw DataError("meta declares an empty matrix");
  if (meta.p != meta.n_channels * meta.n_times) {
    throw DataError("meta p=" + std::to_string(meta.p) + " != n_channels*n_times");
  }

  const auto expected = static_cast<std::uintmax_t>(meta.n) * meta.p * sizeof(double);
  const auto actual = fs::file_size(data_path);
  if (actual != expected) {
    throw DataError(data_path.string() + " holds " + std::to_string(actual) + " bytes, expected " +
                    std::to_string(expected) + " for n=" + std::to_string(meta.n) +
                    ", p=" + std::to_string(meta.p));
  }

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw DataError("cannot open data file " + data_path.string());
  std::vector<unsigned char> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("short read on " + data_path.string());

  Matrix X(meta.n, meta.p);
  for (int i = 0; i < meta.n; ++i) {
    for (int j = 0; j < meta.p; ++j) {
      std::uint64_t bits = 0;
      const unsigned char* b = raw.data() + (static_cast<std::size_t>(i) * meta.p + j) * 8;
      for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[k];  // little-endian
      X(i, j) = std::bit_cast<double>(bits);
    }
  }

  std::ifstream lin(labels_path);
  if (!lin) throw DataError("cannot open labels file " + labels_path.string());
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(lin, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    int z = 0;
    std::string rest;
    if (!(ls >> z) || (ls >> rest)) {
      throw DataError(labels_path.string() + ":" + std::to_string(lineno) +
                      ": expected one integer class id");
    }
    labels.push_back(z);
  }
  if (static_cast<int>(labels.size()) != meta.n) {
    throw DataError(labels_path.string() + " has " + std::to_string(labels.size()) +
                    " labels, meta declares n=" + std::to_string(meta.n));
  }
  return make_dataset(std::move(X), std::move(labels), meta.k, meta.n_channels, meta.n_times,
                      meta.fs_hz);
}

void save_epochs(const EpochDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "epochs.f64", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "epochs.f64").string());
    std::vector<unsigned char> row(static_cast<std::size_t>(ds.p()) * 8);
    for (int i = 0; i < ds.n(); ++i) {
      for (int j = 0; j < ds.p(); ++j) {
        const auto bits = std::bit_cast<std::uint64_t>(ds.X(i, j));
        for (int k = 0; k < 8; ++k) row[static_cast<std::size_t>(j) * 8 + k] = (bits >> (8 * k)) & 0xff;
      }
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("write failed on " + (dir / "epochs.f64").string());
  }
  {
    std::ofstream out(dir / "labels.txt", std::ios::trunc);
    for (int z : ds.labels) out << z << '\n';
    if (!out) throw DataError("write failed on " + (dir / "labels.txt").string());
  }
  {
    nlohmann::ordered_json j;
    j["n"] = ds.n();
    j["p"] = ds.p();
    j["n_channels"] = ds.n_channels;
    j["n_times"] = ds.n_times;
    j["fs_hz"] = ds.fs_hz;
    j["k"] = ds.n_classes;
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed on " + (dir / "meta.json").string());
  }
}

}  // namespace klsda::dataset
