#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "klsda/dataset.hpp"

namespace klsda::divergence {

inline constexpr int kDefaultBins = 20;
inline constexpr double kDefaultBinSmoothing = 1e-6;
inline constexpr double kDefaultEpsilon = 1e-12;

// Per-class probability mass over shared equal-width bins.
struct HistogramPair {
  std::vector<double> bin_edges;   // B+1, strictly increasing
  Eigen::MatrixXd probs;           // K x B, rows sum to 1
};

// Bins span the pooled [min, max] of `values`. Each class row is
// count/n_k + smoothing, renormalized. A constant feature yields uniform
// rows. `labels` are 1-based class ids in {1..n_classes}.
HistogramPair estimate_class_histograms(std::span<const double> values,
                                        std::span<const int> labels, int n_classes, int n_bins,
                                        double smoothing = kDefaultBinSmoothing);

// Natural-log KL divergence with 0 log 0 = 0. Returns +inf when f1 has mass
// where f2 has none. Throws std::invalid_argument on size mismatch or
// negative entries.
double kl_divergence(std::span<const double> f1, std::span<const double> f2);

// Symmetrized: mean of both KL orders.
double j_divergence(std::span<const double> f1, std::span<const double> f2);

// Sum of J over all unordered pairs of rows.
double j_divergence_multi(const Eigen::MatrixXd& distributions);

struct JMap {
  std::vector<double> values;  // p entries, >= 0
  int n_channels = 0;
  int n_times = 0;

  double at(int channel, int time) const { return values[channel * n_times + time]; }
};

// J divergence of every column's class histograms. Callers pass training rows only.
JMap j_map(const dataset::EpochDataset& ds, int n_bins = kDefaultBins,
           double smoothing = kDefaultBinSmoothing);

struct AnisotropyMatrix {
  std::vector<double> diag;
  double epsilon_used = 0.0;

  static AnisotropyMatrix identity(int p) { return {std::vector<double>(p, 1.0), 0.0}; }
  int size() const { return static_cast<int>(diag.size()); }
  double log_det() const;
};

// d_i = C / (J_i + eps) with C the geometric mean of J + eps, so det(D) = 1.
AnisotropyMatrix anisotropy_from_jmap(const JMap& jmap, double epsilon = kDefaultEpsilon);
AnisotropyMatrix anisotropy_from_values(std::span<const double> j_values,
                                        double epsilon = kDefaultEpsilon);

}  // namespace klsda::divergence
