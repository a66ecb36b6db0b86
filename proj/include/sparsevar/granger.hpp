#pragma once

/** @file
 * Complete (conditional) Granger causality scores.
 *
 * score(i -> j) = log(RSS_restricted / RSS_full) where the full model
 * regresses series j on P lags of every series and the restricted model
 * drops the lags of source i. Both are ordinary least squares fits.
 * Scores are normalized by a delete-one-block jackknife standard deviation.
 */

#include <cmath>
#include <string>
#include <vector>

#include "sparsevar/estimators.hpp"
#include "sparsevar/var_core.hpp"

namespace sparsevar {

enum class RestrictedMode {
  /// score(i->j) removes only the influence of i on j.
  directional,
  /// score(i->j) = score(j->i) removes both cross influences and sums the
  /// two log RSS ratios.
  pairwise,
};

inline RestrictedMode parse_restricted_mode(const std::string& s) {
  if (s == "directional") return RestrictedMode::directional;
  if (s == "pairwise") return RestrictedMode::pairwise;
  throw Error(ErrorCode::parse, "unknown restricted_mode '" + s + "'");
}

inline const char* to_string(RestrictedMode m) {
  return m == RestrictedMode::directional ? "directional" : "pairwise";
}

inline constexpr Index kDefaultJackknifeBlocks = 20;

struct GrangerReport {
  Matrix raw_scores;
  Matrix jackknife_std;
  Matrix normalized;
  Index order = 0;
  Index n_blocks = 0;
};

namespace detail {

/// Residual sum of squares of the least-squares fit of column `target`
/// restricted to design columns `keep`.
inline double restricted_rss(const Gram& g, Index target, const std::vector<Index>& keep) {
  const Index n = static_cast<Index>(keep.size());
  Matrix a(n, n);
  Vector c(n);
  for (Index r = 0; r < n; ++r) {
    c(r) = g.xty(keep[static_cast<std::size_t>(r)], target);
    for (Index s = 0; s < n; ++s) a(r, s) = g.xtx(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(s)]);
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw Error(ErrorCode::singular_design, "least-squares normal equations are singular");
  }
  const Vector beta = llt.solve(c);
  return g.yty(target) - c.dot(beta);
}

inline std::vector<Index> columns_without(Index m, Index order, Index dropped_source) {
  std::vector<Index> keep;
  for (Index p = 0; p < order; ++p)
    for (Index i = 0; i < m; ++i)
      if (i != dropped_source) keep.push_back(p * m + i);
  return keep;
}

inline double log_rss_ratio(double restricted, double full) {
  if (!(full > 0.0) || !(restricted > 0.0)) throw Error(ErrorCode::singular_design, "zero residual sum of squares");
  return std::log(restricted / full);
}

inline Matrix granger_from_gram(const Gram& g, Index m, Index order, RestrictedMode mode) {
  std::vector<Index> all(static_cast<std::size_t>(m * order));
  for (Index i = 0; i < m * order; ++i) all[static_cast<std::size_t>(i)] = i;
  Vector full(m);
  for (Index j = 0; j < m; ++j) full(j) = restricted_rss(g, j, all);

  Matrix directional = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    const auto keep = columns_without(m, order, i);
    for (Index j = 0; j < m; ++j)
      if (i != j) directional(j, i) = log_rss_ratio(restricted_rss(g, j, keep), full(j));
  }
  if (mode == RestrictedMode::directional) return directional;
  Matrix sym = directional + directional.transpose();
  sym.diagonal().setZero();
  return sym;
}

}  // namespace detail

/// M x M matrix, entry (j, i) = score(i -> j), zero diagonal.
inline Matrix granger_scores(const TimeSeriesMatrix& sample, Index order,
                             RestrictedMode mode = RestrictedMode::directional) {
  const DesignPair d = build_design(sample, order);
  return detail::granger_from_gram(detail::Gram::from(d.x, d.y), d.dim, order, mode);
}

/// sqrt((B-1)/B * sum_b (s_b - mean)^2), entrywise over the block scores.
inline Matrix jackknife_std(const std::vector<Matrix>& block_scores) {
  if (block_scores.size() < 2) throw Error(ErrorCode::invalid_input, "jackknife needs at least 2 blocks");
  const double b = static_cast<double>(block_scores.size());
  Matrix mean = Matrix::Zero(block_scores[0].rows(), block_scores[0].cols());
  for (const auto& s : block_scores) mean += s;
  mean /= b;
  Matrix ss = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& s : block_scores) ss += (s - mean).cwiseAbs2();
  return ((b - 1.0) / b * ss).cwiseSqrt();
}

/// raw / std with zero wherever std is zero.
inline Matrix jackknife_ratio(const Matrix& raw, const Matrix& std_dev) {
  Matrix out = Matrix::Zero(raw.rows(), raw.cols());
  for (Index r = 0; r < raw.rows(); ++r)
    for (Index c = 0; c < raw.cols(); ++c)
      if (r != c && std_dev(r, c) > 0.0) out(r, c) = raw(r, c) / std_dev(r, c);
  return out;
}

inline GrangerReport jackknife_normalize(const TimeSeriesMatrix& sample, Index order,
                                         Index n_blocks = kDefaultJackknifeBlocks,
                                         RestrictedMode mode = RestrictedMode::directional) {
  if (n_blocks < 2) throw Error(ErrorCode::invalid_input, "jackknife needs at least 2 blocks");
  const DesignPair d = build_design(sample, order);
  if (d.rows() < n_blocks) throw Error(ErrorCode::invalid_input, "fewer design rows than jackknife blocks");
  const auto total = detail::Gram::from(d.x, d.y);

  GrangerReport rep;
  rep.order = order;
  rep.n_blocks = n_blocks;
  rep.raw_scores = detail::granger_from_gram(total, d.dim, order, mode);

  std::vector<Matrix> blocks;
  for (const auto& [begin, end] : contiguous_folds(d.rows(), n_blocks)) {
    const auto held = detail::Gram::from(d.x.middleRows(begin, end - begin), d.y.middleRows(begin, end - begin));
    try {
      blocks.push_back(detail::granger_from_gram(total - held, d.dim, order, mode));
    } catch (const Error& e) {
      throw Error(e.code(), "jackknife block " + std::to_string(blocks.size()) + ": " + e.what());
    }
  }
  rep.jackknife_std = jackknife_std(blocks);
  rep.jackknife_std.diagonal().setZero();
  rep.normalized = jackknife_ratio(rep.raw_scores, rep.jackknife_std);
  return rep;
}

}  // namespace sparsevar
