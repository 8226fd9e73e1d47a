#include "klsda/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "klsda/error.hpp"

namespace klsda::divergence {

HistogramPair estimate_class_histograms(std::span<const double> values,
                                        std::span<const int> labels, int n_classes, int n_bins,
                                        double smoothing) {
  if (values.size() != labels.size()) throw DataError("histogram: values/labels size mismatch");
  if (values.size() < 2) throw DataError("histogram: need at least two values");
  if (n_bins < 2) throw UsageError("histogram: need at least two bins");
  if (n_classes < 1) throw UsageError("histogram: need at least one class");

  HistogramPair h;
  h.probs = Eigen::MatrixXd::Zero(n_classes, n_bins);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  h.bin_edges.resize(n_bins + 1);
  if (!(hi > lo)) {
    for (int b = 0; b <= n_bins; ++b) h.bin_edges[b] = lo - 0.5 + static_cast<double>(b) / n_bins;
    h.probs.setConstant(1.0 / n_bins);
    return h;
  }

  const double width = (hi - lo) / n_bins;
  for (int b = 0; b <= n_bins; ++b) h.bin_edges[b] = lo + b * width;
  h.bin_edges[n_bins] = hi;

  std::vector<int> counts(n_classes, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int k = labels[i] - 1;
    if (k < 0 || k >= n_classes) throw DataError("histogram: class id out of range");
    int b = static_cast<int>((values[i] - lo) / width);
    b = std::clamp(b, 0, n_bins - 1);
    h.probs(k, b) += 1.0;
    counts[k] += 1;
  }
  for (int k = 0; k < n_classes; ++k) {
    if (counts[k] == 0) throw DataError("histogram: class " + std::to_string(k + 1) + " is empty");
    auto row = h.probs.row(k);
    row /= static_cast<double>(counts[k]);
    row.array() += smoothing;
    row /= row.sum();
  }
  return h;
}

namespace {

void check_distribution_pair(std::span<const double> f1, std::span<const double> f2) {
  if (f1.size() != f2.size()) throw std::invalid_argument("distributions differ in length");
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (f1[i] < 0.0 || f2[i] < 0.0) throw std::invalid_argument("negative probability");
  }
}

double kl_unchecked(std::span<const double> f1, std::span<const double> f2) {
  double s = 0.0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (f1[i] == 0.0) continue;
    if (f2[i] == 0.0) return std::numeric_limits<double>::infinity();
    s += f1[i] * std::log(f1[i] / f2[i]);
  }
  return s;
}

}  // namespace

double kl_divergence(std::span<const double> f1, std::span<const double> f2) {
  check_distribution_pair(f1, f2);
  return kl_unchecked(f1, f2);
}

double j_divergence(std::span<const double> f1, std::span<const double> f2) {
  check_distribution_pair(f1, f2);
  // IEEE addition commutes, so swapping the arguments is bit-identical.
  return 0.5 * (kl_unchecked(f1, f2) + kl_unchecked(f2, f1));
}

double j_divergence_multi(const Eigen::MatrixXd& distributions) {
  const auto K = distributions.rows();
  if (K < 2) throw std::invalid_argument("need at least two distributions");
  // Row-major copies so each row is a contiguous span.
  std::vector<std::vector<double>> rows(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    rows[k].resize(distributions.cols());
    for (Eigen::Index b = 0; b < distributions.cols(); ++b) rows[k][b] = distributions(k, b);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) total += j_divergence(rows[i], rows[j]);
  }
  return total;
}

JMap j_map(const dataset::EpochDataset& ds, int n_bins, double smoothing) {
  if (ds.n_classes < 2) throw DataError("J map needs at least two classes");
  JMap out;
  out.n_channels = ds.n_channels;
  out.n_times = ds.n_times;
  out.values.resize(ds.p());
  for (int j = 0; j < ds.p(); ++j) {
    const auto col = ds.X.col(j);
    const HistogramPair h = estimate_class_histograms(
        std::span<const double>(col.data(), col.size()), ds.labels, ds.n_classes, n_bins,
        smoothing);
    out.values[j] = j_divergence_multi(h.probs);
  }
  return out;
}

double AnisotropyMatrix::log_det() const {
  double s = 0.0;
  for (double d : diag) s += std::log(d);
  return s;
}

AnisotropyMatrix anisotropy_from_values(std::span<const double> j_values, double epsilon) {
  if (!(epsilon > 0.0)) throw UsageError("anisotropy epsilon must be positive");
  if (j_values.empty()) throw DataError("empty J map");
  const auto p = j_values.size();
  std::vector<double> log_j(p);
  double mean_log = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double v = j_values[i];
    if (!std::isfinite(v) || v < 0.0) {
      throw DataError("J value at column " + std::to_string(i) + " is not finite and >= 0");
    }
    log_j[i] = std::log(v + epsilon);
    mean_log += log_j[i];
  }
  mean_log /= static_cast<double>(p);

  AnisotropyMatrix d;
  d.epsilon_used = epsilon;
  d.diag.resize(p);
  // log d_i = log C - log J'_i with log C the mean of log J'.
  for (std::size_t i = 0; i < p; ++i) d.diag[i] = std::exp(mean_log - log_j[i]);
  return d;
}

AnisotropyMatrix anisotropy_from_jmap(const JMap& jmap, double epsilon) {
  return anisotropy_from_values(jmap.values, epsilon);
}

}  // namespace klsda::divergence
