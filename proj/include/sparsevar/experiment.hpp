#pragma once

/** @file
 * End-to-end benchmark runner. One work unit is one (regime, instance) pair:
 * the instance is generated once and every (fit order, method) cell is run
 * on it. All seeds are derived before dispatch and results are stored by
 * index, so output bytes do not depend on the number of worker threads.
 *
 * Output layout under the output directory:
 *   summary.csv                          rows regime x order, columns methods
 *   manifest.json                        config, seeds, per-cell AUCs and errors
 *   curves/<regime>_p<order>_<method>.csv  vertically averaged ROC (n >= 2)
 *   instances/<regime>/<idx>/            instance files, per-cell scores and ROC
 */

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsevar/config.hpp"
#include "sparsevar/evaluation.hpp"
#include "sparsevar/io.hpp"

namespace sparsevar {

/// Seed of noise regime `r`; keyed on the regime itself so that running a
/// subset of regimes reproduces the same instances.
inline std::uint64_t regime_seed(std::uint64_t master, NoiseRegime r) {
  return derive_seed(master, static_cast<std::uint64_t>(r));
}

inline std::uint64_t instance_seed(std::uint64_t master, NoiseRegime r, Index idx) {
  return derive_seed(regime_seed(master, r), static_cast<std::uint64_t>(idx));
}

inline std::uint64_t ridge_mc_seed(std::uint64_t inst_seed, Index order) {
  return derive_seed(inst_seed, 100 + static_cast<std::uint64_t>(order));
}

/// Method settings shared by the experiment and the single-shot CLI commands.
struct ScoringOptions {
  Index cv_folds = 10;
  Index cv_grid_size = 30;
  Index path_points = 50;
  Index mc_samples = kDefaultMcSamples;
  Index jackknife_blocks = kDefaultJackknifeBlocks;
  RestrictedMode restricted_mode = RestrictedMode::directional;

  static ScoringOptions from(const ExperimentConfig& c) {
    return {c.cv_folds, c.cv_grid_size, c.path_points, c.mc_samples, c.jackknife_blocks, c.restricted_mode};
  }
};

struct MethodScores {
  EdgeScoreMatrix scores;
  /// Cross-validated ridge penalty; NaN for other methods.
  double penalty = std::numeric_limits<double>::quiet_NaN();
};

/// Reduces one method run on `sample` at `order` to an edge score matrix.
inline MethodScores score_edges(const TimeSeriesMatrix& sample, Index order, DiscoveryMethod method,
                                const ScoringOptions& opt, std::uint64_t mc_seed) {
  switch (method) {
    case DiscoveryMethod::granger:
      return {EdgeScoreMatrix(jackknife_normalize(sample, order, opt.jackknife_blocks, opt.restricted_mode).normalized)};
    case DiscoveryMethod::ridge: {
      const DesignPair d = build_design(sample, order);
      const double lambda =
          cross_validate(d, Method::ridge, opt.cv_folds, default_cv_grid(d, Method::ridge, opt.cv_grid_size));
      RidgeTestOptions t;
      t.n_samples = opt.mc_samples;
      t.seed = mc_seed;
      t.strongest_lag_only = true;
      return {edge_scores_from_pvalues(ridge_test(d, lambda, t)), lambda};
    }
    case DiscoveryMethod::lasso:
    case DiscoveryMethod::group_lasso: {
      const DesignPair d = build_design(sample, order);
      const Method m = method == DiscoveryMethod::lasso ? Method::lasso : Method::group_lasso;
      return {edge_scores_from_path(regularization_path(d, m, opt.path_points))};
    }
  }
  throw Error(ErrorCode::invalid_input, "unknown method");
}

struct CellOutcome {
  std::optional<RocCurve> roc;
  std::string error;
  double penalty = std::numeric_limits<double>::quiet_NaN();
};

struct UnitOutcome {
  std::string error;  // instance generation failure
  std::uint64_t seed = 0;
  /// Indexed [order_idx][method_idx].
  std::vector<std::vector<CellOutcome>> cells;
};

struct ExperimentResult {
  std::vector<NoiseRegime> regimes;
  /// Indexed [regime_idx][instance].
  std::vector<std::vector<UnitOutcome>> units;
  Index failed_cells = 0;

  bool ok() const noexcept { return failed_cells == 0; }
};

/// "0.971 ± 0.016"; stderr is "nan" for a single instance, the cell "n/a"
/// when no instance succeeded.
inline std::string format_cell(const std::vector<double>& aucs) {
  if (aucs.empty()) return "n/a";
  double mean = 0.0;
  for (double a : aucs) mean += a;
  mean /= static_cast<double>(aucs.size());
  char buf[64];
  if (aucs.size() < 2) {
    std::snprintf(buf, sizeof buf, "%.3f ± nan", mean);
  } else {
    double ss = 0.0;
    for (double a : aucs) ss += (a - mean) * (a - mean);
    const double n = static_cast<double>(aucs.size());
    std::snprintf(buf, sizeof buf, "%.3f ± %.3f", mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
  }
  return buf;
}

namespace detail {

inline UnitOutcome run_unit(const ExperimentConfig& cfg, NoiseRegime regime, Index idx, const std::filesystem::path& dir) {
  UnitOutcome out;
  out.seed = instance_seed(cfg.benchmark.master_seed, regime, idx);
  out.cells.assign(cfg.fit_orders.size(), std::vector<CellOutcome>(cfg.methods.size()));
  std::optional<ProblemInstance> inst;
  try {
    BenchmarkConfig bc = cfg.benchmark;
    bc.noise_regime = regime;
    inst = make_instance(bc, out.seed);
    io::write_instance(dir, *inst);
  } catch (const std::exception& e) {
    out.error = e.what();
    for (auto& row : out.cells)
      for (auto& c : row) c.error = "instance generation failed: " + out.error;
    return out;
  }
  const ScoringOptions opt = ScoringOptions::from(cfg);
  std::optional<TimeSeriesMatrix> sample;
  std::string prep_error;
  try {
    sample = cfg.standardize ? standardize(inst->sample) : inst->sample;
  } catch (const std::exception& e) {
    prep_error = e.what();
  }
  for (std::size_t o = 0; o < cfg.fit_orders.size(); ++o) {
    const Index order = cfg.fit_orders[o];
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      CellOutcome& cell = out.cells[o][m];
      if (!sample) {
        cell.error = prep_error;
        continue;
      }
      const std::string stem = "p" + std::to_string(order) + "_" + to_string(cfg.methods[m]);
      try {
        const MethodScores s = score_edges(*sample, order, cfg.methods[m], opt, ridge_mc_seed(out.seed, order));
        cell.penalty = s.penalty;
        cell.roc = roc_curve(s.scores, inst->truth);
        io::write_matrix_csv(dir / (stem + "_scores.csv"), s.scores.scores);
        io::write_roc(dir / (stem + "_roc.csv"), *cell.roc);
      } catch (const std::exception& e) {
        cell.roc.reset();
        cell.error = e.what();
      }
    }
  }
  return out;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json regimes = nlohmann::json::array(), methods = nlohmann::json::array();
  for (auto r : c.regimes) regimes.push_back(to_string(r));
  for (auto m : c.methods) methods.push_back(to_string(m));
  const auto& b = c.benchmark;
  return {{"benchmark",
           {{"m", b.m}, {"t", b.t}, {"p_true", b.p_true}, {"n_edges", b.n_edges}, {"coef_std", b.coef_std},
            {"snr", b.snr}, {"n_instances", b.n_instances}, {"master_seed", b.master_seed},
            {"mixed_ar_order", b.mixed_ar_order}, {"noise_regime", regimes}}},
          {"experiment",
           {{"methods", methods}, {"fit_orders", c.fit_orders}, {"cv_folds", c.cv_folds},
            {"cv_grid_size", c.cv_grid_size}, {"path_points", c.path_points}, {"mc_samples", c.mc_samples},
            {"jackknife_blocks", c.jackknife_blocks}, {"restricted_mode", to_string(c.restricted_mode)},
            {"standardize", c.standardize}}}};
}

}  // namespace detail

/// Runs every cell, writes all artifacts and returns the outcomes. Cell
/// failures are recorded, never thrown; only I/O on the summary files throws.
/// `progress` (optional) is called after each finished unit, serialized.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& output_dir,
                                       const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(output_dir);

  ExperimentResult res;
  res.regimes = cfg.regimes;
  const std::size_t n_inst = static_cast<std::size_t>(cfg.benchmark.n_instances);
  res.units.assign(cfg.regimes.size(), std::vector<UnitOutcome>(n_inst));

  const std::size_t total = cfg.regimes.size() * n_inst;
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    for (std::size_t u; (u = next.fetch_add(1)) < total;) {
      const std::size_t r = u / n_inst, i = u % n_inst;
      const NoiseRegime regime = cfg.regimes[r];
      const auto dir = output_dir / "instances" / to_string(regime) / std::to_string(i);
      res.units[r][i] = detail::run_unit(cfg, regime, static_cast<Index>(i), dir);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(std::string(to_string(regime)) + " instance " + std::to_string(i) + " done");
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Summary, curves and manifest, all in index order.
  nlohmann::json cells = nlohmann::json::array();
  auto summary = io::open_out(output_dir / "summary.csv");
  summary << "regime,order";
  for (auto m : cfg.methods) summary << ',' << to_string(m);
  summary << '\n';
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r) {
    for (std::size_t o = 0; o < cfg.fit_orders.size(); ++o) {
      summary << to_string(cfg.regimes[r]) << ',' << cfg.fit_orders[o];
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        std::vector<RocCurve> curves;
        std::vector<double> aucs;
        nlohmann::json per = nlohmann::json::array();
        for (std::size_t i = 0; i < n_inst; ++i) {
          const CellOutcome& c = res.units[r][i].cells[o][m];
          nlohmann::json e{{"instance", i}, {"seed", res.units[r][i].seed}};
          if (c.roc) {
            curves.push_back(*c.roc);
            aucs.push_back(c.roc->auc);
            e["auc"] = c.roc->auc;
            if (std::isfinite(c.penalty)) {
              e["lambda"] = c.penalty;
              e["mc_seed"] = ridge_mc_seed(res.units[r][i].seed, cfg.fit_orders[o]);
            }
          } else {
            ++res.failed_cells;
            e["error"] = c.error;
          }
          per.push_back(e);
        }
        const std::string name = std::string(to_string(cfg.regimes[r])) + "_p" + std::to_string(cfg.fit_orders[o]) +
                                 "_" + to_string(cfg.methods[m]);
        nlohmann::json cell{{"regime", to_string(cfg.regimes[r])}, {"order", cfg.fit_orders[o]},
                            {"method", to_string(cfg.methods[m])}, {"instances", per}, {"summary", format_cell(aucs)}};
        if (curves.size() >= 2) {
          const AggregateResult agg = aggregate(curves, aucs);
          io::write_roc(output_dir / "curves" / (name + ".csv"), agg.mean_curve);
          cell["mean_auc"] = agg.mean_auc;
          cell["stderr_auc"] = agg.stderr_auc;
        } else if (curves.size() == 1) {
          cell["mean_auc"] = aucs.front();
        }
        cells.push_back(std::move(cell));
        summary << ',' << format_cell(aucs);
      }
      summary << '\n';
    }
  }

  nlohmann::json seeds = nlohmann::json::object();
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r) {
    nlohmann::json inst = nlohmann::json::array();
    for (std::size_t i = 0; i < n_inst; ++i) inst.push_back(res.units[r][i].seed);
    seeds[to_string(cfg.regimes[r])] = {{"regime_seed", regime_seed(cfg.benchmark.master_seed, cfg.regimes[r])},
                                        {"instances", inst}};
  }
  io::write_json(output_dir / "manifest.json",
                 {{"config", detail::config_to_json(cfg)}, {"seeds", seeds}, {"cells", cells},
                  {"failed_cells", res.failed_cells}});
  return res;
}

}  // namespace sparsevar
