#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "klsda/error.hpp"
#include "klsda/export.hpp"

using namespace klsda;
using namespace klsda::io;

namespace {

ModelFile sample_model() {
  ModelFile m;
  m.config_id = "klsda1";
  m.q = 1;
  m.p = 6;
  m.n_channels = 2;
  m.n_times = 3;
  m.lambda2_selected = {1e-3};
  m.kappa_selected = {4};
  m.residual_selected = {12.5};
  m.lambda2_grid = {1e-4, 1e-3};
  m.beta = {{{1, 4}, {0.1 + 0.2, -1.0 / 3.0}}};
  m.theta = {{2.0}, {-0.5}};
  m.pi = {0.2, 0.8};
  m.column_means = {0, 1, 2, 3, 4, 5};
  m.t_max = 50.0;
  m.n_bins = 20;
  m.epsilon = 1e-12;
  m.seed = 7;
  return m;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("export") {

TEST_CASE("model JSON round trip") {
  const auto m = sample_model();
  const auto back = model_from_json(to_json(m));
  CHECK(back.config_id == m.config_id);
  CHECK(back.beta[0].indices == m.beta[0].indices);
  CHECK(back.beta[0].values == m.beta[0].values);
  CHECK(back.theta == m.theta);
  CHECK(back.lambda2_grid == m.lambda2_grid);
  CHECK(back.t_max == 50.0);
  CHECK(back.dense_beta(0)[4] == -1.0 / 3.0);
  CHECK(to_json(back).dump() == to_json(m).dump());
}

TEST_CASE("malformed model files are data errors") {
  auto j = to_json(sample_model());
  j["beta"][0]["indices"] = {1, 99};
  CHECK_THROWS_AS(model_from_json(j), DataError);
  CHECK_THROWS_AS(model_from_json(Json::object()), DataError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
}

TEST_CASE("beta CSV reconstructs the sparse vector exactly") {
  const auto m = sample_model();
  std::ostringstream os;
  write_beta_csv(os, m);
  const auto ls = lines(os.str());
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == "index,channel,time_index,value");
  CHECK(ls[2].rfind("4,1,1,", 0) == 0);
  Eigen::VectorXd rebuilt = Eigen::VectorXd::Zero(m.p);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream row(ls[i]);
    std::string idx, ch, t, v;
    std::getline(row, idx, ',');
    std::getline(row, ch, ',');
    std::getline(row, t, ',');
    std::getline(row, v, ',');
    rebuilt[std::stoi(idx)] = std::stod(v);
  }
  CHECK(rebuilt == m.dense_beta(0));
}

TEST_CASE("empty direction gives a header-only CSV") {
  auto m = sample_model();
  m.beta[0] = {};
  std::ostringstream os;
  write_beta_csv(os, m);
  CHECK(os.str() == "index,channel,time_index,value\n");
  std::ostringstream svg;
  write_beta_svg(svg, m);
  CHECK(svg.str().find("klsda1 (0)") != std::string::npos);
}

TEST_CASE("beta SVG title carries the nonzero count") {
  std::ostringstream svg;
  write_beta_svg(svg, sample_model());
  CHECK(svg.str().find("(2)") != std::string::npos);
  CHECK(svg.str().rfind("<svg", 0) == 0);
}

TEST_CASE("J map CSV and SVG") {
  divergence::JMap jm{{0.0, 0.5, 1.0, 0.25}, 2, 2};
  std::ostringstream csv;
  write_jmap_csv(csv, jm, 4.0);
  const auto ls = lines(csv.str());
  REQUIRE(ls.size() == 5);
  CHECK(ls[0] == "channel,time_index,time_s,j_value");
  CHECK(ls[2] == "0,1,0.25,0.5");
  CHECK(ls[3] == "1,0,0,1");
  std::ostringstream os;
  write_jmap_svg(os, jm, 4.0);
  const std::string svg = os.str();
  CHECK(std::count(svg.begin(), svg.end(), '<') > 4);
  CHECK(svg.find("<rect") != std::string::npos);
}

TEST_CASE("report JSON and summary CSV") {
  eval::EvalReport r;
  r.config_id = "klsda0";
  r.k = 3;
  r.seed = 11;
  r.fold_auc = {0.9, std::nan(""), 0.8};
  r.mean_auc = 0.85;
  r.std_auc = 0.07;
  r.mean_sparsity = 0.1;
  r.wall_time_s = 1.5;
  const auto j = to_json(r);
  CHECK(j["fold_auc"][1].is_null());
  CHECK(j["wall_time_s"] == 1.5);
  CHECK_FALSE(to_json(r, false).contains("wall_time_s"));
  std::ostringstream os;
  write_summary_csv(os, {r});
  CHECK(os.str() == "config,mean_auc,std_auc,mean_sparsity\nklsda0,0.84999999999999998,"
                    "0.070000000000000007,0.10000000000000001\n");
}

}
