#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "klsda/dataset.hpp"
#include "klsda/discriminant.hpp"
#include "klsda/divergence.hpp"
#include "klsda/error.hpp"
#include "klsda/eval.hpp"
#include "klsda/export.hpp"
#include "klsda/kernels.hpp"
#include "klsda/parallel.hpp"

namespace klsda::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 3) throw UsageError("grid spec must be lo:hi:count, got '" + spec + "'");
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("bad number '" + s + "' in grid spec");
    return v;
  };
  const double lo = number(parts[0]);
  const double hi = number(parts[1]);
  const double count = number(parts[2]);
  if (count != std::floor(count) || count < 1 || count > 1e6) {
    throw UsageError("grid count must be a positive integer");
  }
  if (count > 1 && !(hi > lo)) throw UsageError("grid needs lo < hi when count > 1");
  return discriminant::log_grid(lo, hi, static_cast<int>(count));
}

namespace {

struct Globals {
  std::uint64_t seed = 7;
  std::string out;
  bool quiet = false;
  int threads = 0;
};

// Single owner per output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / ".klsda.lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw UsageError("output directory is in use (lock file " + path_.string() + ")");
      }
      throw DataError("cannot create lock file " + path_.string());
    }
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << body;
  if (!f) throw DataError("write failed on " + path.string());
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& w) {
  std::ostringstream os;
  w(os);
  write_file(path, os.str());
}

dataset::EpochDataset load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  return dataset::load_epochs(dir / "epochs.f64", dir / "labels.txt", dir / "meta.json");
}

Json globals_json(const Globals& g) {
  return {{"seed", g.seed},
          {"out", g.out},
          {"quiet", g.quiet},
          {"threads", g.threads},
          {"threads_resolved", resolve_threads(g.threads)},
          {"simd", std::string(kernels::isa_name(kernels::active()))}};
}

void write_run_json(const Globals& g, const std::string& command, Json options) {
  Json j;
  j["command"] = command;
  j["globals"] = globals_json(g);
  j["options"] = std::move(options);
  write_file(fs::path(g.out) / "run.json", j.dump(2) + "\n");
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out is required");
  return fs::path(g.out);
}

// Options shared by fit, eval and bench.
struct FitKnobs {
  std::string grid_spec = "1e-8:1e-1:8";
  double t_max = 50.0;
  int q = 1;
  int bins = divergence::kDefaultBins;
  double epsilon = divergence::kDefaultEpsilon;
  int max_steps = larsen::SolverLimits{}.max_steps;
  int max_outer = 30;
  double tol = 1e-6;
  std::string scale = "none";

  dataset::Scaling scaling() const {
    const auto s = dataset::parse_scaling(scale);
    if (!s) throw UsageError("--scale must be none or unit-norm");
    return *s;
  }

  void add_to(CLI::App* app, bool t_max_required, CLI::Option** t_max_opt = nullptr) {
    app->add_option("--lambda2-grid", grid_spec, "lambda2 grid as lo:hi:count (log-spaced)")
        ->capture_default_str();
    auto* opt = app->add_option("--t-max", t_max, "l1 budget on the weighted coefficients");
    if (t_max_required) {
      if (t_max_opt) *t_max_opt = opt;
    } else {
      opt->capture_default_str();
    }
    app->add_option("--q", q, "number of discriminant directions")->capture_default_str();
    app->add_option("--bins", bins, "histogram bins for the J map")->capture_default_str();
    app->add_option("--epsilon", epsilon, "J-divergence floor for D")->capture_default_str();
    app->add_option("--max-steps", max_steps, "path step limit")->capture_default_str();
    app->add_option("--max-outer", max_outer, "alternating iterations")->capture_default_str();
    app->add_option("--tol", tol, "outer convergence tolerance")->capture_default_str();
    app->add_option("--scale", scale, "column scaling after centering: none or unit-norm")
        ->capture_default_str();
  }

  discriminant::KlsdaConfig config(discriminant::ConfigId id, int threads) const {
    discriminant::KlsdaConfig cfg;
    cfg.config_id = id;
    cfg.lambda2_grid = parse_grid_spec(grid_spec);
    cfg.limits.t_max = t_max;
    cfg.limits.max_steps = max_steps;
    cfg.q = q;
    cfg.max_outer_iters = max_outer;
    cfg.convergence_tol = tol;
    cfg.n_bins = bins;
    cfg.epsilon = epsilon;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
  }

  Json to_json() const {
    return {{"lambda2_grid_spec", grid_spec},
            {"lambda2_grid", parse_grid_spec(grid_spec)},
            {"t_max", t_max},
            {"q", q},
            {"bins", bins},
            {"epsilon", epsilon},
            {"max_steps", max_steps},
            {"max_outer", max_outer},
            {"tol", tol},
            {"scale", scale}};
  }
};

std::vector<eval::Method> parse_methods(const std::string& list) {
  std::vector<eval::Method> methods;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    auto m = eval::Method::parse(item);
    if (!m) throw UsageError("unknown configuration '" + item + "'");
    for (const auto& prev : methods) {
      if (prev.name() == m->name()) throw UsageError("configuration listed twice: " + item);
    }
    methods.push_back(*m);
  }
  if (methods.empty()) throw UsageError("no configurations given");
  return methods;
}

// --- synth --------------------------------------------------------------

struct SynthArgs {
  dataset::SyntheticConfig cfg;
};

int cmd_synth(const Globals& g, SynthArgs a, std::ostream& out) {
  const fs::path dir = require_out(g);
  a.cfg.seed = g.seed;
  dataset::validate(a.cfg);
  OutputLock lock(dir);
  const auto ds = dataset::generate_synthetic(a.cfg);
  dataset::save_epochs(ds, dir);
  const auto& c = a.cfg;
  write_run_json(g, "synth",
                 {{"targets", c.n_target},
                  {"nontargets", c.n_nontarget},
                  {"channels", c.n_channels},
                  {"times", c.n_times},
                  {"fs", c.fs_hz},
                  {"amplitude", c.bump_amplitude},
                  {"center_s", c.center_s()},
                  {"width_s", c.width_s()},
                  {"active_channels", c.active_channels},
                  {"sigma", c.noise_sigma},
                  {"ar", c.ar_coefficient}});
  if (!g.quiet) out << "wrote n=" << ds.n() << " p=" << ds.p() << " to " << dir.string() << "\n";
  return kOk;
}

// --- klmap --------------------------------------------------------------

struct KlmapArgs {
  std::string data;
  int bins = divergence::kDefaultBins;
  double smoothing = divergence::kDefaultBinSmoothing;
  bool svg = false;
};

int cmd_klmap(const Globals& g, const KlmapArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  if (a.bins < 2) throw UsageError("--bins must be at least 2");
  if (!(a.smoothing >= 0.0)) throw UsageError("--smoothing must be non-negative");
  const auto ds = load_dir(a.data);
  OutputLock lock(dir);
  const auto jm = divergence::j_map(ds, a.bins, a.smoothing);
  write_with(dir / "jmap.csv", [&](std::ostream& os) { io::write_jmap_csv(os, jm, ds.fs_hz); });
  if (a.svg) {
    write_with(dir / "jmap.svg", [&](std::ostream& os) { io::write_jmap_svg(os, jm, ds.fs_hz); });
  }
  write_run_json(g, "klmap",
                 {{"data", a.data}, {"bins", a.bins}, {"smoothing", a.smoothing}, {"svg", a.svg}});
  if (!g.quiet) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(jm.values.size()); ++i) {
      if (jm.values[i] > jm.values[best]) best = i;
    }
    out << "max J " << io::fmt(jm.values[best]) << " at channel " << best / jm.n_times
        << ", t=" << io::fmt((best % jm.n_times) / ds.fs_hz) << " s\n";
  }
  return kOk;
}

// --- fit ----------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string config;
  FitKnobs knobs;
  CLI::Option* t_max_opt = nullptr;
};

int cmd_fit(const Globals& g, const FitArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  const auto method = eval::Method::parse(a.config);
  if (!method) throw UsageError("unknown configuration '" + a.config + "'");
  if (!method->flda && a.t_max_opt->count() == 0) throw UsageError("--t-max is required");
  const int threads = resolve_threads(g.threads);
  std::optional<discriminant::KlsdaConfig> cfg;
  if (!method->flda) cfg = a.knobs.config(method->config, threads);
  const auto scaling = a.knobs.scaling();
  const auto ds = load_dir(a.data);
  OutputLock lock(dir);

  const auto centered = dataset::center_columns(ds.X);
  const auto ind = dataset::indicator(ds);
  const Eigen::VectorXd factors = scaling == dataset::Scaling::UnitNorm
                                      ? dataset::unit_norm_factors(centered.X)
                                      : Eigen::VectorXd::Ones(ds.p());
  const Eigen::MatrixXd X_fit = centered.X * factors.asDiagonal();
  io::ModelFile mf;
  if (method->flda) {
    const Eigen::VectorXd beta = eval::flda_direction(X_fit, ds.labels).cwiseProduct(factors);
    mf = io::flda_model_file(beta, centered.means, ind.pi, ds.n_channels, ds.n_times, g.seed);
  } else {
    const auto d = divergence::anisotropy_from_jmap(divergence::j_map(ds, cfg->n_bins),
                                                    cfg->epsilon);
    auto model = discriminant::fit(X_fit, ind.Y, d, *cfg);
    model.B = factors.asDiagonal() * model.B;
    model.column_means = centered.means;
    model.seed = g.seed;
    mf = io::to_model_file(model, ds.n_channels, ds.n_times, g.seed);
  }
  mf.scaling = std::string(dataset::to_string(scaling));
  io::save_model(mf, dir / "model.json");

  Json opts = {{"data", a.data}, {"config", method->name()}};
  if (method->flda) {
    opts["scale"] = a.knobs.scale;
  } else {
    opts.update(a.knobs.to_json());
  }
  write_run_json(g, "fit", opts);

  if (!g.quiet) {
    out << mf.config_id;
    for (std::size_t j = 0; j < mf.beta.size(); ++j) {
      out << " | direction " << j << ": " << mf.beta[j].indices.size() << " nonzeros";
      if (j < mf.lambda2_selected.size()) {
        out << ", lambda2=" << io::fmt(mf.lambda2_selected[j])
            << ", kappa=" << mf.kappa_selected[j];
      }
    }
    out << "\n";
    for (const auto& w : mf.warnings) out << "warning: " << w << "\n";
  }
  return kOk;
}

// --- eval / bench -------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string configs = "klsda0,klsda1,klsda2,klsda3,flda";
  int folds = 3;
  bool unstratified = false;
  FitKnobs knobs;
};

std::string markdown_table(const std::vector<eval::EvalReport>& reports) {
  std::ostringstream os;
  os << "| config | mean AUC | std AUC | mean sparsity | nonzeros per fold | failed |\n";
  os << "|---|---|---|---|---|---|\n";
  char buf[64];
  for (const auto& r : reports) {
    os << "| " << r.config_id << " | ";
    std::snprintf(buf, sizeof buf, "%.4f | %.4f | %.4f", r.mean_auc, r.std_auc, r.mean_sparsity);
    os << buf << " | ";
    for (std::size_t f = 0; f < r.nonzero_count.size(); ++f) {
      os << (f ? "/" : "") << r.nonzero_count[f];
    }
    os << " | " << r.failed_folds << " |\n";
  }
  return os.str();
}

// Folds on which klsda1 keeps at least as many nonzeros as klsda0.
Json l1_weighting_comparison(const std::vector<eval::EvalReport>& reports) {
  const eval::EvalReport* r0 = nullptr;
  const eval::EvalReport* r1 = nullptr;
  for (const auto& r : reports) {
    if (r.config_id == "klsda0") r0 = &r;
    if (r.config_id == "klsda1") r1 = &r;
  }
  if (!r0 || !r1) return nullptr;
  int ge = 0;
  for (std::size_t f = 0; f < r0->nonzero_count.size() && f < r1->nonzero_count.size(); ++f) {
    if (r1->nonzero_count[f] >= r0->nonzero_count[f]) ++ge;
  }
  return {{"klsda0_nonzeros", r0->nonzero_count},
          {"klsda1_nonzeros", r1->nonzero_count},
          {"folds_klsda1_ge_klsda0", ge}};
}

int run_evaluation(const Globals& g, const EvalArgs& a, const std::string& command,
                   std::ostream& out) {
  const fs::path dir = require_out(g);
  const auto methods = parse_methods(a.configs);
  if (a.folds < 2) throw UsageError("--folds must be at least 2");
  const int threads = resolve_threads(g.threads);
  const auto cfg = a.knobs.config(discriminant::ConfigId::Klsda0, 1);
  const auto scaling = a.knobs.scaling();
  const auto ds = load_dir(a.data);
  OutputLock lock(dir);

  const auto reports = eval::cross_validate_all(ds, methods, cfg, a.folds, g.seed,
                                                !a.unstratified, threads, scaling);

  bool any_failed = false;
  for (const auto& r : reports) {
    write_file(dir / ("report_" + r.config_id + ".json"), io::to_json(r).dump(2) + "\n");
    any_failed = any_failed || r.failed_folds > 0;
  }
  write_with(dir / "summary.csv", [&](std::ostream& os) { io::write_summary_csv(os, reports); });

  Json opts = {{"data", a.data},
               {"configs", [&] {
                  Json names = Json::array();
                  for (const auto& m : methods) names.push_back(m.name());
                  return names;
                }()},
               {"folds", a.folds},
               {"stratified", !a.unstratified}};
  opts.update(a.knobs.to_json());
  write_run_json(g, command, opts);

  const std::string table = markdown_table(reports);
  if (command == "bench") {
    write_file(dir / "table.md", table);
    Json b;
    b["reports"] = Json::array();
    for (const auto& r : reports) b["reports"].push_back(io::to_json(r, false));
    b["l1_weighting"] = l1_weighting_comparison(reports);
    write_file(dir / "bench.json", b.dump(2) + "\n");
  }
  if (!g.quiet) out << table;
  return any_failed ? kNumerical : kOk;
}

// --- betaplot -----------------------------------------------------------

struct BetaplotArgs {
  std::string model;
  int direction = 0;
  bool svg = false;
};

int cmd_betaplot(const Globals& g, const BetaplotArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  const auto mf = io::load_model(a.model);
  if (a.direction < 0 || a.direction >= static_cast<int>(mf.beta.size())) {
    throw UsageError("--direction out of range");
  }
  OutputLock lock(dir);
  write_with(dir / "beta.csv", [&](std::ostream& os) { io::write_beta_csv(os, mf, a.direction); });
  if (a.svg) {
    write_with(dir / "beta.svg",
               [&](std::ostream& os) { io::write_beta_svg(os, mf, a.direction); });
  }
  write_run_json(g, "betaplot", {{"model", a.model}, {"direction", a.direction}, {"svg", a.svg}});
  if (!g.quiet) {
    out << mf.config_id << ": " << mf.beta[a.direction].indices.size() << " nonzeros of " << mf.p
        << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kullback-Leibler penalized sparse discriminant analysis"};
  app.name("klsda");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "seed for synthesis and fold assignment")->capture_default_str();
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--quiet", g.quiet, "suppress progress output");
  app.add_option("--threads", g.threads, "worker threads, 0 = auto (KLSDA_THREADS)")
      ->capture_default_str();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic ERP dataset");
  s->add_option("--targets", synth.cfg.n_target)->capture_default_str();
  s->add_option("--nontargets", synth.cfg.n_nontarget)->capture_default_str();
  s->add_option("--channels", synth.cfg.n_channels)->capture_default_str();
  s->add_option("--times", synth.cfg.n_times)->capture_default_str();
  s->add_option("--fs", synth.cfg.fs_hz)->capture_default_str();
  s->add_option("--amplitude", synth.cfg.bump_amplitude)->capture_default_str();
  s->add_option("--center", synth.cfg.bump_center_s, "bump center in seconds");
  s->add_option("--width", synth.cfg.bump_width_s, "bump width in seconds");
  s->add_option("--active", synth.cfg.active_channels, "channels carrying the bump")
      ->delimiter(',');
  s->add_option("--sigma", synth.cfg.noise_sigma)->capture_default_str();
  s->add_option("--ar", synth.cfg.ar_coefficient)->capture_default_str();

  KlmapArgs klmap;
  auto* k = app.add_subcommand("klmap", "J-divergence map over channels and time");
  k->add_option("--data", klmap.data, "dataset directory")->required();
  k->add_option("--bins", klmap.bins)->capture_default_str();
  k->add_option("--smoothing", klmap.smoothing)->capture_default_str();
  k->add_flag("--svg", klmap.svg, "also write jmap.svg");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit one configuration on a whole dataset");
  f->add_option("--data", fit.data, "dataset directory")->required();
  f->add_option("--config", fit.config, "klsda0..klsda3 or flda")->required();
  fit.knobs.add_to(f, true, &fit.t_max_opt);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "cross-validated AUC for several configurations");
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--configs", ev.configs, "comma-separated list")->capture_default_str();
  e->add_option("--folds", ev.folds)->capture_default_str();
  e->add_flag("--unstratified", ev.unstratified, "plain shuffled folds");
  ev.knobs.add_to(e, false);

  EvalArgs bench;
  auto* b = app.add_subcommand("bench", "eval over all configurations plus comparison table");
  b->add_option("--data", bench.data, "dataset directory")->required();
  b->add_option("--folds", bench.folds)->capture_default_str();
  b->add_flag("--unstratified", bench.unstratified, "plain shuffled folds");
  bench.knobs.add_to(b, false);

  BetaplotArgs bp;
  auto* p = app.add_subcommand("betaplot", "nonzero coefficients of a fitted model");
  p->add_option("--model", bp.model, "model.json")->required()->check(CLI::ExistingFile);
  p->add_option("--direction", bp.direction)->capture_default_str();
  p->add_flag("--svg", bp.svg, "also write beta.svg");

  std::vector<std::string> argv_store{"klsda"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(g, synth, out);
    if (k->parsed()) return cmd_klmap(g, klmap, out);
    if (f->parsed()) return cmd_fit(g, fit, out);
    if (e->parsed()) return run_evaluation(g, ev, "eval", out);
    if (b->parsed()) return run_evaluation(g, bench, "bench", out);
    if (p->parsed()) return cmd_betaplot(g, bp, out);
    return kUsage;
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kNumerical;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace klsda::cli
