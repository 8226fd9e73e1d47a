#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "klsda/discriminant.hpp"
#include "klsda/divergence.hpp"
#include "klsda/eval.hpp"

namespace klsda::io {

using Json = nlohmann::ordered_json;

// `channel,time_index,time_s,j_value`, one row per feature in column order.
void write_jmap_csv(std::ostream& out, const divergence::JMap& jmap, double fs_hz);
// Channels x time heatmap, linear scale from 0 to max.
void write_jmap_svg(std::ostream& out, const divergence::JMap& jmap, double fs_hz);

// On-disk model: sparse directions plus everything needed to score new epochs.
struct SparseDirection {
  std::vector<int> indices;
  std::vector<double> values;
};

struct ModelFile {
  std::string config_id;  // klsda0..klsda3 or flda
  int q = 1;
  int p = 0;
  int n_channels = 0;
  int n_times = 0;
  std::vector<double> lambda2_selected;
  std::vector<int> kappa_selected;
  std::vector<double> residual_selected;
  std::vector<double> lambda2_grid;
  std::vector<SparseDirection> beta;
  std::vector<std::vector<double>> theta;  // K rows of q entries
  std::vector<double> pi;
  double d_min = 1.0, d_max = 1.0, d_geometric_mean = 1.0;
  std::vector<double> column_means;
  std::string scaling = "none";  // beta is always stored in raw feature units
  double t_max = 0.0;
  int n_bins = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  Eigen::VectorXd dense_beta(int direction) const;
};

ModelFile to_model_file(const discriminant::KlsdaModel& model, int n_channels, int n_times,
                        std::uint64_t seed);
ModelFile flda_model_file(const Eigen::VectorXd& beta, const Eigen::VectorXd& column_means,
                          const Eigen::VectorXd& pi, int n_channels, int n_times,
                          std::uint64_t seed);

Json to_json(const ModelFile& m);
ModelFile model_from_json(const Json& j);
void save_model(const ModelFile& m, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

Json to_json(const eval::EvalReport& r, bool include_timing = true);
// `config,mean_auc,std_auc,mean_sparsity`
void write_summary_csv(std::ostream& out, const std::vector<eval::EvalReport>& reports);

// `index,channel,time_index,value` for every nonzero of one direction.
void write_beta_csv(std::ostream& out, const ModelFile& m, int direction = 0);
// Stem plot of the direction, nonzero count in the title.
void write_beta_svg(std::ostream& out, const ModelFile& m, int direction = 0);

// Fixed-precision number formatting shared by the CSV writers.
std::string fmt(double v);

}  // namespace klsda::io
