// sparsevar command line: simulate, fit, test, granger, evaluate, experiment.
//
// Exit codes: 0 success, 1 runtime or cell failure, 2 usage or config error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sparsevar/config.hpp"
#include "sparsevar/experiment.hpp"
#include "sparsevar/io.hpp"

namespace fs = std::filesystem;
using namespace sparsevar;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& output_help) {
  cmd->add_option("--config", args.config, "Configuration file ([benchmark] and [experiment] sections)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "Master seed (overrides the configuration)");
  cmd->add_option("--output", args.output, output_help);
}

/// Bad configuration files and bad flag values; exits with kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
auto usage_checked(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig cfg = args.config.empty() ? ExperimentConfig{} : usage_checked([&] { return load_config(args.config); });
  if (args.seed) cfg.benchmark.master_seed = *args.seed;
  return cfg;
}

/// --output, then SPARSEVAR_OUTPUT_DIR, then the configured directory.
fs::path output_dir(const CommonArgs& args, const ExperimentConfig& cfg) {
  if (!args.output.empty()) return args.output;
  if (const char* env = std::getenv("SPARSEVAR_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

TimeSeriesMatrix read_input(const std::string& path, bool standardize_input) {
  TimeSeriesMatrix s = io::read_sample(path);
  return standardize_input ? standardize(s) : s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse causal discovery for VAR time series"};
  app.require_subcommand(1);

  // simulate
  CommonArgs sim_args;
  std::string sim_regime;
  Index sim_index = 0;
  auto* sim = app.add_subcommand("simulate", "Generate one benchmark instance");
  add_common(sim, sim_args, "Instance directory");
  sim->add_option("--regime", sim_regime, "Noise regime: none, white or mixed (default: first configured)");
  sim->add_option("--index", sim_index, "Instance index within the regime")->check(CLI::NonNegativeNumber);

  // fit
  CommonArgs fit_args;
  std::string fit_input, fit_method = "group_lasso";
  Index fit_order = 5;
  std::optional<double> fit_lambda;
  bool fit_raw = false;
  auto* fit = app.add_subcommand("fit", "Fit one estimator to one sample");
  add_common(fit, fit_args, "Directory for coeffs.csv, coeffs.json and fit.json");
  fit->add_option("--input", fit_input, "Sample CSV (T rows, M columns)")->required()->check(CLI::ExistingFile);
  fit->add_option("--method", fit_method, "ols, ridge, lasso or group_lasso");
  fit->add_option("--order", fit_order, "Model order P")->check(CLI::PositiveNumber);
  fit->add_option("--lambda", fit_lambda, "Penalty (default: cross-validated)");
  fit->add_flag("--raw", fit_raw, "Do not standardize the series first");

  // test
  CommonArgs test_args;
  std::string test_input;
  Index test_order = 5;
  std::optional<double> test_lambda;
  std::optional<Index> test_samples;
  bool test_raw = false, test_all_lags = false;
  auto* test = app.add_subcommand("test", "Ridge regression significance test with max-t adjusted p-values");
  add_common(test, test_args, "Directory for the test report");
  test->add_option("--input", test_input, "Sample CSV")->required()->check(CLI::ExistingFile);
  test->add_option("--order", test_order, "Model order P")->check(CLI::PositiveNumber);
  test->add_option("--lambda", test_lambda, "Ridge penalty (default: cross-validated)");
  test->add_option("--mc-samples", test_samples, "Monte Carlo samples per probability")->check(CLI::PositiveNumber);
  test->add_flag("--all-lags", test_all_lags, "Integrate every lag, not only the strongest of each pair");
  test->add_flag("--raw", test_raw, "Do not standardize the series first");

  // granger
  CommonArgs gr_args;
  std::string gr_input;
  Index gr_order = 5;
  std::optional<Index> gr_blocks;
  std::optional<std::string> gr_mode;
  bool gr_raw = false;
  auto* gr = app.add_subcommand("granger", "Jackknife-normalized Granger causality scores");
  add_common(gr, gr_args, "Directory for the Granger report");
  gr->add_option("--input", gr_input, "Sample CSV")->required()->check(CLI::ExistingFile);
  gr->add_option("--order", gr_order, "Model order P")->check(CLI::PositiveNumber);
  gr->add_option("--blocks", gr_blocks, "Jackknife blocks")->check(CLI::Range(2, 1000000));
  gr->add_option("--mode", gr_mode, "Restricted model: directional or pairwise");
  gr->add_flag("--raw", gr_raw, "Do not standardize the series first");

  // evaluate
  CommonArgs ev_args;
  std::string ev_scores, ev_truth;
  auto* ev = app.add_subcommand("evaluate", "ROC curve and AUC of an edge score matrix");
  add_common(ev, ev_args, "ROC CSV path (fpr,tpr,threshold)");
  ev->add_option("--scores", ev_scores, "M x M score CSV, entry (j, i) scores i -> j")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "graph.json of the instance")->required()->check(CLI::ExistingFile);

  // experiment
  CommonArgs ex_args;
  std::optional<Index> ex_jobs;
  bool ex_quiet = false;
  auto* ex = app.add_subcommand("experiment", "Full benchmark: all regimes, instances, methods and orders");
  add_common(ex, ex_args, "Output directory (overrides SPARSEVAR_OUTPUT_DIR and the config)");
  ex->add_option("--jobs", ex_jobs, "Worker threads")->check(CLI::PositiveNumber);
  ex->add_flag("--quiet", ex_quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) {
      const ExperimentConfig cfg = load(sim_args);
      const NoiseRegime regime = sim_regime.empty() ? cfg.regimes.front() : usage_checked([&] { return parse_noise_regime(sim_regime); });
      BenchmarkConfig bc = cfg.benchmark;
      bc.noise_regime = regime;
      const auto seed = instance_seed(bc.master_seed, regime, sim_index);
      const fs::path dir = output_dir(sim_args, cfg);
      io::write_instance(dir, make_instance(bc, seed));
      std::cout << "wrote instance (regime " << to_string(regime) << ", seed " << seed << ") to " << dir.string() << "\n";
      return 0;
    }
    if (*fit) {
      const ExperimentConfig cfg = load(fit_args);
      const Method method = usage_checked([&] { return parse_method(fit_method); });
      const DesignPair d = build_design(read_input(fit_input, !fit_raw), fit_order);
      FitResult res;
      switch (method) {
        case Method::ols: res.coeffs = ols_fit(d); break;
        case Method::ridge:
        case Method::lasso:
        case Method::group_lasso: {
          const double lambda = fit_lambda ? *fit_lambda
                                           : cross_validate(d, method, cfg.cv_folds,
                                                            default_cv_grid(d, method, cfg.cv_grid_size));
          if (method == Method::ridge) res = ridge_fit(d, lambda);
          else if (method == Method::lasso) res = lasso_fit(d, lambda);
          else res = group_lasso_fit(d, GroupStructure::var(d.dim, d.order), lambda);
          break;
        }
      }
      const fs::path dir = output_dir(fit_args, cfg);
      io::write_fit(dir, method, res);
      std::cout << to_string(method) << " lambda=" << io::format_double(res.penalty)
                << " objective=" << io::format_double(res.objective_value) << " -> " << dir.string() << "\n";
      return 0;
    }
    if (*test) {
      const ExperimentConfig cfg = load(test_args);
      const DesignPair d = build_design(read_input(test_input, !test_raw), test_order);
      const double lambda = test_lambda ? *test_lambda
                                        : cross_validate(d, Method::ridge, cfg.cv_folds,
                                                         default_cv_grid(d, Method::ridge, cfg.cv_grid_size));
      RidgeTestOptions opt;
      opt.n_samples = test_samples.value_or(cfg.mc_samples);
      opt.seed = cfg.benchmark.master_seed;
      opt.strongest_lag_only = !test_all_lags;
      const TestReport rep = ridge_test(d, lambda, opt);
      const fs::path dir = output_dir(test_args, cfg);
      io::write_test_report(dir, rep);
      io::write_matrix_csv(dir / "edge_scores.csv", edge_scores_from_pvalues(rep).scores);
      std::cout << "lambda=" << io::format_double(lambda) << " max MC standard error="
                << io::format_double(rep.mc_standard_error_max) << " -> " << dir.string() << "\n";
      return 0;
    }
    if (*gr) {
      const ExperimentConfig cfg = load(gr_args);
      const RestrictedMode mode = gr_mode ? usage_checked([&] { return parse_restricted_mode(*gr_mode); }) : cfg.restricted_mode;
      const GrangerReport rep =
          jackknife_normalize(read_input(gr_input, !gr_raw), gr_order, gr_blocks.value_or(cfg.jackknife_blocks), mode);
      const fs::path dir = output_dir(gr_args, cfg);
      io::write_granger_report(dir, rep, mode);
      std::cout << "granger scores -> " << dir.string() << "\n";
      return 0;
    }
    if (*ev) {
      const ExperimentConfig cfg = load(ev_args);
      const RocCurve roc = roc_curve(EdgeScoreMatrix(io::read_matrix_csv(ev_scores)), io::read_graph(ev_truth));
      fs::path out = output_dir(ev_args, cfg);
      if (ev_args.output.empty()) out /= "roc.csv";
      io::write_roc(out, roc);
      std::cout << "AUC " << io::format_double(roc.auc) << "\n";
      return 0;
    }
    if (*ex) {
      ExperimentConfig cfg = load(ex_args);
      if (ex_jobs) cfg.jobs = *ex_jobs;
      const fs::path dir = output_dir(ex_args, cfg);
      std::function<void(const std::string&)> progress;
      if (!ex_quiet) progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
      const ExperimentResult res = run_experiment(cfg, dir, progress);
      std::cout << io::open_in(dir / "summary.csv").rdbuf();
      if (!res.ok()) {
        std::cerr << res.failed_cells << " cell(s) failed; see " << (dir / "manifest.json").string() << "\n";
        return kExitFailure;
      }
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
