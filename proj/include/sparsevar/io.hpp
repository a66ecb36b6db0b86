#pragma once

/** @file
 * On-disk formats. Matrices are headerless CSV with 17 significant digits;
 * metadata travels in small JSON sidecars.
 *
 *   sample.csv                  T x M time series
 *   coeffs.csv + coeffs.json    stacked MP x M coefficients, {"M", "P"}
 *   graph.json                  {"M", "adjacency": [[0|1, ...], ...], "edges": [[target, source], ...]}
 *   fit.json                    {"method", "lambda", "objective", "iterations"}
 *   roc.csv                     header "fpr,tpr,threshold", one point per row
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsevar/estimators.hpp"
#include "sparsevar/evaluation.hpp"
#include "sparsevar/granger.hpp"
#include "sparsevar/ridge_testing.hpp"
#include "sparsevar/sim_bench.hpp"

namespace sparsevar::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  return in;
}

inline void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::parse, path.string() + ": empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

inline void write_sample(const fs::path& path, const TimeSeriesMatrix& s) { write_matrix_csv(path, s.data()); }
inline TimeSeriesMatrix read_sample(const fs::path& path) { return TimeSeriesMatrix(read_matrix_csv(path)); }

/// `stem`.csv holds the stacked matrix, `stem`.json the {"M", "P"} sidecar.
inline void write_coefficients(const fs::path& dir, const std::string& stem, const VarCoefficients& c) {
  write_matrix_csv(dir / (stem + ".csv"), c.stacked());
  write_json(dir / (stem + ".json"), json{{"M", c.dim()}, {"P", c.order()}});
}

inline VarCoefficients read_coefficients(const fs::path& dir, const std::string& stem) {
  const json meta = read_json(dir / (stem + ".json"));
  const Matrix a = read_matrix_csv(dir / (stem + ".csv"));
  Index m = 0, p = 0;
  try {
    m = meta.at("M").get<Index>();
    p = meta.at("P").get<Index>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, (dir / (stem + ".json")).string() + ": " + e.what());
  }
  if (a.rows() != m * p || a.cols() != m) throw Error(ErrorCode::parse, "coefficient CSV does not match its sidecar");
  return VarCoefficients::from_stacked(a, m);
}

inline json graph_to_json(const GroundTruthGraph& g) {
  json adj = json::array(), edges = json::array();
  for (Index j = 0; j < g.dim(); ++j) {
    json row = json::array();
    for (Index i = 0; i < g.dim(); ++i) {
      row.push_back(g.adjacency(j, i) ? 1 : 0);
      if (i != j && g.adjacency(j, i)) edges.push_back({j, i});
    }
    adj.push_back(row);
  }
  return json{{"M", g.dim()}, {"adjacency", adj}, {"edges", edges}};
}

inline GroundTruthGraph graph_from_json(const json& j) {
  const Index m = j.at("M").get<Index>();
  const auto& adj = j.at("adjacency");
  if (static_cast<Index>(adj.size()) != m) throw Error(ErrorCode::parse, "graph adjacency has wrong row count");
  GroundTruthGraph g{BoolMatrix::Constant(m, m, false)};
  for (Index r = 0; r < m; ++r) {
    const auto& row = adj.at(static_cast<std::size_t>(r));
    if (static_cast<Index>(row.size()) != m) throw Error(ErrorCode::parse, "graph adjacency has wrong column count");
    for (Index c = 0; c < m; ++c) g.adjacency(r, c) = r != c && row.at(static_cast<std::size_t>(c)).get<int>() != 0;
  }
  return g;
}

inline void write_graph(const fs::path& path, const GroundTruthGraph& g) { write_json(path, graph_to_json(g)); }
/// Runs `f`, turning JSON access errors into parse errors naming `path`.
template <class F>
auto json_guard(const fs::path& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

inline GroundTruthGraph read_graph(const fs::path& path) {
  return json_guard(path, [&] { return graph_from_json(read_json(path)); });
}

inline void write_instance(const fs::path& dir, const ProblemInstance& inst) {
  write_sample(dir / "sample.csv", inst.sample);
  write_coefficients(dir, "coeffs", inst.coeffs);
  write_graph(dir / "graph.json", inst.truth);
  write_json(dir / "instance.json",
             json{{"seed", inst.seed}, {"noise_regime", to_string(inst.noise_regime)},
                  {"T", inst.sample.steps()}, {"M", inst.sample.series()}, {"P", inst.coeffs.order()}});
}

inline ProblemInstance read_instance(const fs::path& dir) {
  return json_guard(dir / "instance.json", [&] {
    const json meta = read_json(dir / "instance.json");
    return ProblemInstance{read_sample(dir / "sample.csv"), read_graph(dir / "graph.json"),
                           read_coefficients(dir, "coeffs"),
                           parse_noise_regime(meta.at("noise_regime").get<std::string>()),
                           meta.at("seed").get<std::uint64_t>()};
  });
}

inline void write_fit(const fs::path& dir, Method method, const FitResult& fit) {
  write_coefficients(dir, "coeffs", fit.coeffs);
  write_json(dir / "fit.json", json{{"method", to_string(method)}, {"lambda", fit.penalty},
                                    {"objective", fit.objective_value}, {"iterations", fit.iterations}});
}

inline void write_test_report(const fs::path& dir, const TestReport& r) {
  write_matrix_csv(dir / "statistics.csv", r.statistics);
  write_matrix_csv(dir / "p_adjusted.csv", r.p_adjusted);
  write_matrix_csv(dir / "sigma.csv", r.sigma_sq);
  write_matrix_csv(dir / "correlation.csv", r.correlation);
  write_json(dir / "report.json", json{{"lambda", r.penalty}, {"n_samples", r.n_samples}, {"seed", r.seed},
                                       {"mc_standard_error_max", r.mc_standard_error_max},
                                       {"M", r.dim}, {"P", r.order}});
}

inline TestReport read_test_report(const fs::path& dir) {
  return json_guard(dir / "report.json", [&] {
    const json meta = read_json(dir / "report.json");
    TestReport r;
    r.statistics = read_matrix_csv(dir / "statistics.csv");
    r.p_adjusted = read_matrix_csv(dir / "p_adjusted.csv");
    r.sigma_sq = read_matrix_csv(dir / "sigma.csv").col(0);
    r.correlation = read_matrix_csv(dir / "correlation.csv");
    r.penalty = meta.at("lambda").get<double>();
    r.n_samples = meta.at("n_samples").get<Index>();
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.mc_standard_error_max = meta.at("mc_standard_error_max").get<double>();
    r.dim = meta.at("M").get<Index>();
    r.order = meta.at("P").get<Index>();
    return r;
  });
}

inline void write_granger_report(const fs::path& dir, const GrangerReport& r, RestrictedMode mode) {
  write_matrix_csv(dir / "raw_scores.csv", r.raw_scores);
  write_matrix_csv(dir / "jackknife_std.csv", r.jackknife_std);
  write_matrix_csv(dir / "normalized.csv", r.normalized);
  write_json(dir / "granger.json", json{{"order", r.order}, {"n_blocks", r.n_blocks}, {"restricted_mode", to_string(mode)}});
}

inline void write_roc(const fs::path& path, const RocCurve& roc) {
  auto out = open_out(path);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : roc.points) {
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ',' << format_double(p.threshold) << '\n';
  }
}

/// Reads points only; the AUC is recomputed by the trapezoid rule.
inline RocCurve read_roc(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("fpr,tpr,threshold", 0) != 0) throw Error(ErrorCode::parse, path.string() + ": missing ROC header");
  RocCurve roc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    try {
      roc.points.push_back({std::stod(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, path.string() + ": bad ROC row '" + line + "'");
    }
  }
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    roc.auc += (roc.points[k].fpr - roc.points[k - 1].fpr) * 0.5 * (roc.points[k].tpr + roc.points[k - 1].tpr);
  }
  return roc;
}

}  // namespace sparsevar::io
