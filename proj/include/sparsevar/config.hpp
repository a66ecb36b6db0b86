#pragma once

/** @file
 * Experiment configuration files: `key = value` lines grouped under
 * `[benchmark]` and `[experiment]` sections. `#` and `;` start comments and
 * list values are comma separated.
 *
 *   [benchmark]
 *   m = 7
 *   noise_regime = none, white, mixed
 *
 *   [experiment]
 *   methods = granger, ridge, lasso, group_lasso
 *   fit_orders = 5, 10
 */

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "sparsevar/estimators.hpp"
#include "sparsevar/granger.hpp"
#include "sparsevar/ridge_testing.hpp"
#include "sparsevar/sim_bench.hpp"

namespace sparsevar {

/// The four causal discovery methods compared by the benchmark.
enum class DiscoveryMethod { granger, ridge, lasso, group_lasso };

inline const char* to_string(DiscoveryMethod m) {
  switch (m) {
    case DiscoveryMethod::granger: return "granger";
    case DiscoveryMethod::ridge: return "ridge";
    case DiscoveryMethod::lasso: return "lasso";
    case DiscoveryMethod::group_lasso: return "group_lasso";
  }
  return "granger";
}

inline DiscoveryMethod parse_discovery_method(const std::string& s) {
  if (s == "granger") return DiscoveryMethod::granger;
  if (s == "ridge") return DiscoveryMethod::ridge;
  if (s == "lasso") return DiscoveryMethod::lasso;
  if (s == "group_lasso" || s == "glasso") return DiscoveryMethod::group_lasso;
  throw Error(ErrorCode::parse, "unknown method '" + s + "'");
}

struct ExperimentConfig {
  BenchmarkConfig benchmark;
  std::vector<NoiseRegime> regimes{NoiseRegime::none, NoiseRegime::white, NoiseRegime::mixed};
  std::vector<DiscoveryMethod> methods{DiscoveryMethod::granger, DiscoveryMethod::ridge, DiscoveryMethod::lasso,
                                       DiscoveryMethod::group_lasso};
  std::vector<Index> fit_orders{5, 10};
  Index cv_folds = 10;
  Index cv_grid_size = 30;
  Index path_points = 50;
  Index mc_samples = kDefaultMcSamples;
  Index jackknife_blocks = kDefaultJackknifeBlocks;
  RestrictedMode restricted_mode = RestrictedMode::directional;
  /// Z-score every series before any method sees it.
  bool standardize = true;
  Index jobs = 1;
  std::string output_dir = "results";

  void validate() const {
    benchmark.validate();
    if (regimes.empty()) throw Error(ErrorCode::invalid_input, "at least one noise regime is required");
    if (methods.empty()) throw Error(ErrorCode::invalid_input, "at least one method is required");
    if (fit_orders.empty()) throw Error(ErrorCode::invalid_input, "at least one fit order is required");
    for (Index p : fit_orders)
      if (p < 1 || p >= benchmark.t) throw Error(ErrorCode::invalid_order, "fit orders must be in [1, t)");
    if (cv_folds < 2) throw Error(ErrorCode::invalid_folds, "cv_folds must be >= 2");
    if (cv_grid_size < 1) throw Error(ErrorCode::invalid_input, "cv_grid_size must be >= 1");
    if (path_points < 2) throw Error(ErrorCode::invalid_input, "path_points must be >= 2");
    if (mc_samples < 100) throw Error(ErrorCode::invalid_input, "mc_samples must be >= 100");
    if (jackknife_blocks < 2) throw Error(ErrorCode::invalid_input, "jackknife_blocks must be >= 2");
    if (jobs < 1) throw Error(ErrorCode::invalid_input, "jobs must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text) {
  // Stream extraction wraps negative input for unsigned types.
  if constexpr (std::is_unsigned_v<T>) {
    if (text.find('-') != std::string::npos) throw std::invalid_argument(text);
  }
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw std::invalid_argument(text);
  return v;
}

inline bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument(text);
}

}  // namespace detail

/// Parses configuration text; `source` names it in error messages.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "config") {
  using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
  // Keyed by "section.key".
  static const std::map<std::string, Setter> fields = {
      {"benchmark.m", [](ExperimentConfig& c, const std::string& v) { c.benchmark.m = detail::parse_number<long long>(v); }},
      {"benchmark.t", [](ExperimentConfig& c, const std::string& v) { c.benchmark.t = detail::parse_number<long long>(v); }},
      {"benchmark.p_true", [](ExperimentConfig& c, const std::string& v) { c.benchmark.p_true = detail::parse_number<long long>(v); }},
      {"benchmark.n_edges", [](ExperimentConfig& c, const std::string& v) { c.benchmark.n_edges = detail::parse_number<long long>(v); }},
      {"benchmark.coef_std", [](ExperimentConfig& c, const std::string& v) { c.benchmark.coef_std = detail::parse_number<double>(v); }},
      {"benchmark.snr", [](ExperimentConfig& c, const std::string& v) { c.benchmark.snr = detail::parse_number<double>(v); }},
      {"benchmark.n_instances", [](ExperimentConfig& c, const std::string& v) { c.benchmark.n_instances = detail::parse_number<long long>(v); }},
      {"benchmark.master_seed", [](ExperimentConfig& c, const std::string& v) { c.benchmark.master_seed = detail::parse_number<std::uint64_t>(v); }},
      {"benchmark.mixed_ar_order", [](ExperimentConfig& c, const std::string& v) { c.benchmark.mixed_ar_order = detail::parse_number<long long>(v); }},
      {"benchmark.noise_regime",
       [](ExperimentConfig& c, const std::string& v) {
         c.regimes.clear();
         for (const auto& item : detail::split_list(v)) c.regimes.push_back(parse_noise_regime(item));
         if (c.regimes.empty()) throw std::invalid_argument(v);
         c.benchmark.noise_regime = c.regimes.front();
       }},
      {"experiment.methods",
       [](ExperimentConfig& c, const std::string& v) {
         c.methods.clear();
         for (const auto& item : detail::split_list(v)) c.methods.push_back(parse_discovery_method(item));
       }},
      {"experiment.fit_orders",
       [](ExperimentConfig& c, const std::string& v) {
         c.fit_orders.clear();
         for (const auto& item : detail::split_list(v)) c.fit_orders.push_back(detail::parse_number<long long>(item));
       }},
      {"experiment.cv_folds", [](ExperimentConfig& c, const std::string& v) { c.cv_folds = detail::parse_number<long long>(v); }},
      {"experiment.cv_grid_size", [](ExperimentConfig& c, const std::string& v) { c.cv_grid_size = detail::parse_number<long long>(v); }},
      {"experiment.path_points", [](ExperimentConfig& c, const std::string& v) { c.path_points = detail::parse_number<long long>(v); }},
      {"experiment.mc_samples", [](ExperimentConfig& c, const std::string& v) { c.mc_samples = detail::parse_number<long long>(v); }},
      {"experiment.jackknife_blocks", [](ExperimentConfig& c, const std::string& v) { c.jackknife_blocks = detail::parse_number<long long>(v); }},
      {"experiment.restricted_mode", [](ExperimentConfig& c, const std::string& v) { c.restricted_mode = parse_restricted_mode(v); }},
      {"experiment.standardize", [](ExperimentConfig& c, const std::string& v) { c.standardize = detail::parse_bool(v); }},
      {"experiment.jobs", [](ExperimentConfig& c, const std::string& v) { c.jobs = detail::parse_number<long long>(v); }},
      {"experiment.output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
      {"experiment.master_seed", [](ExperimentConfig& c, const std::string& v) { c.benchmark.master_seed = detail::parse_number<std::uint64_t>(v); }},
  };

  ExperimentConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = source + ":" + std::to_string(lineno);
    const auto cut = line.find_first_of("#;");
    line = detail::trim(cut == std::string::npos ? line : line.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::parse, where + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "benchmark" && section != "experiment") {
        throw Error(ErrorCode::parse, where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::parse, where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw Error(ErrorCode::parse, where + ": field '" + key + "' outside of a section");
    const std::string field = section + "." + key;
    const auto it = fields.find(field);
    if (it == fields.end()) throw Error(ErrorCode::parse, where + ": unknown field '" + field + "'");
    try {
      it->second(cfg, value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, where + ": invalid value '" + value + "' for field '" + field + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, source + ": " + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  return parse_config(in, path.string());
}

}  // namespace sparsevar
