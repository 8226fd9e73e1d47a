#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace klsda::dataset {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// n x p epochs, columns flattened channel-major: column = channel * n_times + time.
// Class ids are 1-based. Immutable once validated.
struct EpochDataset {
  Matrix X;
  std::vector<int> labels;
  int n_classes = 0;
  int n_channels = 0;
  int n_times = 0;
  double fs_hz = 0.0;
  std::vector<int> class_counts;                 // size K
  std::vector<std::vector<int>> class_indices;   // I_k, 0-based rows

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  int column(int channel, int time) const { return channel * n_times + time; }
};

// Checks shape, labels and finiteness, then fills the class bookkeeping.
// Throws DataError with row/column coordinates on the first violation.
EpochDataset make_dataset(Matrix X, std::vector<int> labels, int n_classes, int n_channels,
                          int n_times, double fs_hz);

// Rows selected in the given order; metadata carried over.
EpochDataset subset(const EpochDataset& ds, const std::vector<int>& rows);

struct IndicatorMatrix {
  Matrix Y;    // n x K, one 1 per row
  Vector pi;   // diagonal of Y^T Y / n
};

IndicatorMatrix indicator(const EpochDataset& ds);
IndicatorMatrix indicator(const std::vector<int>& labels, int n_classes);

struct Centered {
  Matrix X;
  Vector means;
};

Centered center_columns(const Matrix& X);
// Subtracts means computed elsewhere (e.g. on a training fold).
Matrix apply_centering(const Matrix& X, const Vector& means);

// Optional column scaling applied after centering. Off by default.
enum class Scaling { None, UnitNorm };

std::string_view to_string(Scaling s);
std::optional<Scaling> parse_scaling(std::string_view name);  // "none", "unit-norm"

// Factors 1/||x_j|| that bring centered columns to unit Euclidean norm.
// Zero columns keep the factor 1.
Vector unit_norm_factors(const Matrix& X_centered);

struct SyntheticConfig {
  int n_target = 100;
  int n_nontarget = 500;
  int n_channels = 8;
  int n_times = 64;
  double fs_hz = 256.0;
  double bump_amplitude = 1.0;
  // Negative means "derive from the epoch length": 0.3 and 0.075 of the
  // epoch duration, i.e. 300 ms / 75 ms for a one-second epoch.
  double bump_center_s = -1.0;
  double bump_width_s = -1.0;
  std::vector<int> active_channels{2, 3};
  double noise_sigma = 1.0;
  double ar_coefficient = 0.5;
  std::uint64_t seed = 7;

  double duration_s() const { return n_times / fs_hz; }
  double center_s() const { return bump_center_s >= 0.0 ? bump_center_s : 0.3 * duration_s(); }
  double width_s() const { return bump_width_s >= 0.0 ? bump_width_s : 0.075 * duration_s(); }
};

void validate(const SyntheticConfig& cfg);

// Target epochs carry class id 1, non-target epochs class id 2.
EpochDataset generate_synthetic(const SyntheticConfig& cfg);

struct Fold {
  std::vector<int> train;
  std::vector<int> test;
};

// Deterministic k-fold split. With `stratify` every class is shuffled and
// dealt round-robin so per-class fold counts differ by at most one.
std::vector<Fold> split_kfold(int n, int k, std::uint64_t seed, const std::vector<int>& labels,
                              bool stratify = true);

// FNV-1a over the concatenated test index lists.
std::uint64_t fold_hash(const std::vector<Fold>& folds);

// --- file formats -------------------------------------------------------

struct Meta {
  int n = 0;
  int p = 0;
  int n_channels = 0;
  int n_times = 0;
  double fs_hz = 0.0;
  int k = 0;
};

EpochDataset load_epochs(const std::filesystem::path& data_path,
                         const std::filesystem::path& labels_path,
                         const std::filesystem::path& meta_path);

// Writes epochs.f64, labels.txt and meta.json into `dir`.
void save_epochs(const EpochDataset& ds, const std::filesystem::path& dir);

}  // namespace klsda::dataset
