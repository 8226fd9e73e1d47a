#include "klsda/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "klsda/error.hpp"

namespace klsda::io {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// White -> dark red ramp.
std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 75 * t));
  const int g = static_cast<int>(std::lround(255 * (1.0 - t)));
  const int b = static_cast<int>(std::lround(255 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void write_jmap_csv(std::ostream& out, const divergence::JMap& jmap, double fs_hz) {
  out << "channel,time_index,time_s,j_value\n";
  for (int c = 0; c < jmap.n_channels; ++c) {
    for (int t = 0; t < jmap.n_times; ++t) {
      out << c << ',' << t << ',' << fmt(t / fs_hz) << ',' << fmt(jmap.at(c, t)) << '\n';
    }
  }
}

void write_jmap_svg(std::ostream& out, const divergence::JMap& jmap, double fs_hz) {
  const int cell_w = std::max(2, 640 / std::max(1, jmap.n_times));
  const int cell_h = std::max(8, 320 / std::max(1, jmap.n_channels));
  const int left = 60, top = 30;
  const int width = left + cell_w * jmap.n_times + 20;
  const int height = top + cell_h * jmap.n_channels + 40;
  const double vmax = jmap.values.empty()
                          ? 0.0
                          : *std::max_element(jmap.values.begin(), jmap.values.end());

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"12\">J divergence (max "
      << fmt(vmax) << ")</text>\n";
  for (int c = 0; c < jmap.n_channels; ++c) {
    out << "<text x=\"4\" y=\"" << top + c * cell_h + cell_h / 2 + 4
        << "\" font-size=\"10\">ch " << c << "</text>\n";
    for (int t = 0; t < jmap.n_times; ++t) {
      const double v = vmax > 0.0 ? jmap.at(c, t) / vmax : 0.0;
      out << "<rect x=\"" << left + t * cell_w << "\" y=\"" << top + c * cell_h << "\" width=\""
          << cell_w << "\" height=\"" << cell_h << "\" fill=\"" << heat_color(v) << "\"/>\n";
    }
  }
  const double dur = jmap.n_times / fs_hz;
  out << "<text x=\"" << left << "\" y=\"" << height - 10 << "\" font-size=\"10\">0 s</text>\n";
  out << "<text x=\"" << width - 60 << "\" y=\"" << height - 10 << "\" font-size=\"10\">"
      << fmt(dur) << " s</text>\n";
  out << "</svg>\n";
}

Eigen::VectorXd ModelFile::dense_beta(int direction) const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  const auto& d = beta.at(direction);
  for (std::size_t k = 0; k < d.indices.size(); ++k) b[d.indices[k]] = d.values[k];
  return b;
}

namespace {

SparseDirection sparse_of(const Eigen::VectorXd& v) {
  SparseDirection s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      s.indices.push_back(static_cast<int>(i));
      s.values.push_back(v[i]);
    }
  }
  return s;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

ModelFile to_model_file(const discriminant::KlsdaModel& model, int n_channels, int n_times,
                        std::uint64_t seed) {
  ModelFile m;
  m.config_id = std::string(discriminant::to_string(model.config.config_id));
  m.q = static_cast<int>(model.B.cols());
  m.p = static_cast<int>(model.B.rows());
  m.n_channels = n_channels;
  m.n_times = n_times;
  for (const auto& d : model.directions) {
    m.lambda2_selected.push_back(d.selection.lambda2);
    m.kappa_selected.push_back(d.selection.kappa);
    m.residual_selected.push_back(d.selection.residual_sq);
  }
  m.lambda2_grid = model.config.lambda2_grid;
  for (Eigen::Index j = 0; j < model.B.cols(); ++j) m.beta.push_back(sparse_of(model.B.col(j)));
  for (Eigen::Index k = 0; k < model.Theta.rows(); ++k) {
    m.theta.push_back(to_std(model.Theta.row(k).transpose()));
  }
  m.pi = to_std(model.pi);
  const auto& dd = model.d_matrix.diag;
  if (!dd.empty()) {
    m.d_min = *std::min_element(dd.begin(), dd.end());
    m.d_max = *std::max_element(dd.begin(), dd.end());
    m.d_geometric_mean = std::exp(model.d_matrix.log_det() / dd.size());
  }
  m.column_means = to_std(model.column_means);
  m.t_max = model.config.limits.t_max;
  m.n_bins = model.config.n_bins;
  m.epsilon = model.config.epsilon;
  m.seed = seed;
  m.warnings = model.warnings;
  return m;
}

ModelFile flda_model_file(const Eigen::VectorXd& beta, const Eigen::VectorXd& column_means,
                          const Eigen::VectorXd& pi, int n_channels, int n_times,
                          std::uint64_t seed) {
  ModelFile m;
  m.config_id = "flda";
  m.q = 1;
  m.p = static_cast<int>(beta.size());
  m.n_channels = n_channels;
  m.n_times = n_times;
  m.beta.push_back(sparse_of(beta));
  m.pi = to_std(pi);
  m.column_means = to_std(column_means);
  m.seed = seed;
  return m;
}

Json to_json(const ModelFile& m) {
  Json j;
  j["config_id"] = m.config_id;
  j["q"] = m.q;
  j["p"] = m.p;
  j["n_channels"] = m.n_channels;
  j["n_times"] = m.n_times;
  j["lambda2_selected"] = m.lambda2_selected;
  j["kappa_selected"] = m.kappa_selected;
  j["residual_selected"] = m.residual_selected;
  j["lambda2_grid"] = m.lambda2_grid;
  Json beta = Json::array();
  for (const auto& d : m.beta) beta.push_back({{"indices", d.indices}, {"values", d.values}});
  j["beta"] = beta;
  j["theta"] = m.theta;
  j["pi"] = m.pi;
  j["d_diag_summary"] = {{"min", m.d_min}, {"max", m.d_max}, {"geometric_mean", m.d_geometric_mean}};
  j["column_means"] = m.column_means;
  j["scaling"] = m.scaling;
  j["t_max"] = number_or_null(m.t_max);
  j["n_bins"] = m.n_bins;
  j["epsilon"] = m.epsilon;
  j["seed"] = m.seed;
  j["warnings"] = m.warnings;
  return j;
}

ModelFile model_from_json(const Json& j) {
  try {
    ModelFile m;
    m.config_id = j.at("config_id").get<std::string>();
    m.q = j.at("q").get<int>();
    m.p = j.at("p").get<int>();
    m.n_channels = j.value("n_channels", 0);
    m.n_times = j.value("n_times", 0);
    m.lambda2_selected = j.value("lambda2_selected", std::vector<double>{});
    m.kappa_selected = j.value("kappa_selected", std::vector<int>{});
    m.residual_selected = j.value("residual_selected", std::vector<double>{});
    m.lambda2_grid = j.value("lambda2_grid", std::vector<double>{});
    for (const auto& d : j.at("beta")) {
      SparseDirection s;
      s.indices = d.at("indices").get<std::vector<int>>();
      s.values = d.at("values").get<std::vector<double>>();
      if (s.indices.size() != s.values.size()) throw DataError("model: beta indices/values differ");
      for (int idx : s.indices) {
        if (idx < 0 || idx >= m.p) throw DataError("model: beta index out of range");
      }
      m.beta.push_back(std::move(s));
    }
    m.theta = j.value("theta", std::vector<std::vector<double>>{});
    m.pi = j.value("pi", std::vector<double>{});
    if (j.contains("d_diag_summary")) {
      const auto& d = j.at("d_diag_summary");
      m.d_min = d.at("min").get<double>();
      m.d_max = d.at("max").get<double>();
      m.d_geometric_mean = d.at("geometric_mean").get<double>();
    }
    m.column_means = j.value("column_means", std::vector<double>{});
    m.scaling = j.value("scaling", std::string("none"));
    m.t_max = j.at("t_max").is_null() ? std::numeric_limits<double>::infinity()
                                      : j.at("t_max").get<double>();
    m.n_bins = j.value("n_bins", 0);
    m.epsilon = j.value("epsilon", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelFile& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
  if (!out) throw DataError("write failed on " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

Json to_json(const eval::EvalReport& r, bool include_timing) {
  Json j;
  j["config_id"] = r.config_id;
  j["k"] = r.k;
  j["seed"] = r.seed;
  j["stratified"] = r.stratified;
  j["scaling"] = r.scaling;
  j["fold_hash"] = r.fold_hash;
  Json auc = Json::array();
  for (double a : r.fold_auc) auc.push_back(number_or_null(a));
  j["fold_auc"] = auc;
  j["mean_auc"] = number_or_null(r.mean_auc);
  j["std_auc"] = number_or_null(r.std_auc);
  j["sparsity_fraction"] = r.sparsity_fraction;
  j["nonzero_count"] = r.nonzero_count;
  if (!r.lambda2_selected.empty()) {
    Json l2 = Json::array();
    for (double v : r.lambda2_selected) l2.push_back(number_or_null(v));
    j["lambda2_selected"] = l2;
    j["kappa_selected"] = r.kappa_selected;
  }
  j["mean_sparsity"] = r.mean_sparsity;
  j["failed_folds"] = r.failed_folds;
  j["warnings"] = r.warnings;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

void write_summary_csv(std::ostream& out, const std::vector<eval::EvalReport>& reports) {
  out << "config,mean_auc,std_auc,mean_sparsity\n";
  for (const auto& r : reports) {
    out << r.config_id << ',' << fmt(r.mean_auc) << ',' << fmt(r.std_auc) << ','
        << fmt(r.mean_sparsity) << '\n';
  }
}

void write_beta_csv(std::ostream& out, const ModelFile& m, int direction) {
  out << "index,channel,time_index,value\n";
  const auto& d = m.beta.at(direction);
  const int T = m.n_times > 0 ? m.n_times : m.p;
  for (std::size_t k = 0; k < d.indices.size(); ++k) {
    const int idx = d.indices[k];
    out << idx << ',' << idx / T << ',' << idx % T << ',' << fmt(d.values[k]) << '\n';
  }
}

void write_beta_svg(std::ostream& out, const ModelFile& m, int direction) {
  const auto& d = m.beta.at(direction);
  const int width = 800, height = 300, left = 40, right = 20, top = 30, bottom = 30;
  double amax = 0.0;
  for (double v : d.values) amax = std::max(amax, std::abs(v));
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double zero_y = top + plot_h / 2.0;
  auto x_of = [&](int idx) { return left + plot_w * (m.p > 1 ? idx / double(m.p - 1) : 0.5); };
  auto y_of = [&](double v) { return zero_y - (amax > 0.0 ? v / amax : 0.0) * plot_h / 2.0; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"12\">" << m.config_id << " ("
      << d.indices.size() << ")</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << zero_y << "\" x2=\"" << width - right
      << "\" y2=\"" << zero_y << "\" stroke=\"#888\"/>\n";
  if (m.n_times > 0) {
    for (int c = 1; c * m.n_times < m.p; ++c) {
      const double x = x_of(c * m.n_times);
      out << "<line x1=\"" << fmt(x) << "\" y1=\"" << top << "\" x2=\"" << fmt(x) << "\" y2=\""
          << height - bottom << "\" stroke=\"#ddd\"/>\n";
    }
  }
  for (std::size_t k = 0; k < d.indices.size(); ++k) {
    const double x = x_of(d.indices[k]);
    const double y = y_of(d.values[k]);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(zero_y) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#1f4e9c\"/>"
        << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"2\" fill=\"#1f4e9c\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace klsda::io
