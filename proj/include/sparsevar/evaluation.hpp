#pragma once

/** @file
 * Edge scoring and ROC analysis. Every method is reduced to an M x M edge
 * score matrix (entry (j, i) scores the edge i -> j, higher means more
 * evidence); ROC curves sweep a threshold over the off-diagonal entries.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "sparsevar/estimators.hpp"
#include "sparsevar/ridge_testing.hpp"
#include "sparsevar/sim_bench.hpp"

namespace sparsevar {

struct EdgeScoreMatrix {
  Matrix scores;

  EdgeScoreMatrix() = default;
  explicit EdgeScoreMatrix(Matrix s) : scores(std::move(s)) {
    if (scores.rows() != scores.cols()) throw Error(ErrorCode::invalid_input, "edge score matrix must be square");
    for (Index r = 0; r < scores.rows(); ++r)
      for (Index c = 0; c < scores.cols(); ++c)
        if (r != c && !std::isfinite(scores(r, c))) throw Error(ErrorCode::invalid_input, "non-finite edge score");
  }

  Index dim() const noexcept { return scores.rows(); }
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// True if coefficient group (source -> target) has any nonzero lag.
inline bool edge_active(const VarCoefficients& coeffs, Index target, Index source) {
  return coeffs.influences(target, source);
}

/// Path persistence score: with n path points ordered by decreasing penalty,
/// an edge first active at position idx scores (n - idx) / n; never-active
/// edges score 0. Thresholding at (n - idx) / n yields the union of supports
/// of the first idx + 1 path points.
inline EdgeScoreMatrix edge_scores_from_path(const std::vector<FitResult>& path) {
  if (path.empty()) throw Error(ErrorCode::invalid_input, "empty regularization path");
  for (std::size_t n = 1; n < path.size(); ++n) {
    if (path[n].penalty > path[n - 1].penalty) throw Error(ErrorCode::invalid_input, "path must be ordered by decreasing penalty");
  }
  const Index m = path.front().coeffs.dim();
  const double n = static_cast<double>(path.size());
  Matrix s = Matrix::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) {
      if (i == j) continue;
      for (std::size_t idx = 0; idx < path.size(); ++idx) {
        if (edge_active(path[idx].coeffs, j, i)) {
          s(j, i) = (n - static_cast<double>(idx)) / n;
          break;
        }
      }
    }
  }
  return EdgeScoreMatrix(std::move(s));
}

/// score(j, i) = 1 - min over lags of the adjusted p-value of source i in
/// target column j. Thresholding at 1 - gamma rejects at level gamma.
inline EdgeScoreMatrix edge_scores_from_pvalues(const TestReport& report) {
  const Index m = report.dim;
  if (m < 1 || report.p_adjusted.rows() != m * report.order || report.p_adjusted.cols() != m) {
    throw Error(ErrorCode::invalid_input, "test report shape does not match its (order, dim)");
  }
  Matrix s = Matrix::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) {
      if (i == j) continue;
      double best = 1.0;
      for (Index p = 0; p < report.order; ++p) best = std::min(best, report.p_adjusted(p * m + i, j));
      s(j, i) = 1.0 - best;
    }
  }
  return EdgeScoreMatrix(std::move(s));
}

/// Threshold sweep over off-diagonal entries with tied scores grouped into a
/// single step; AUC by the trapezoid rule (equal to the Mann-Whitney
/// statistic with ties counted one half).
inline RocCurve roc_curve(const EdgeScoreMatrix& scores, const GroundTruthGraph& truth) {
  const Index m = scores.dim();
  if (truth.dim() != m) throw Error(ErrorCode::invalid_input, "score and truth dimensions differ");
  std::vector<std::pair<double, bool>> items;
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i)
      if (i != j) items.emplace_back(scores.scores(j, i), truth.adjacency(j, i));
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double pos = 0, neg = 0;
  for (const auto& it : items) (it.second ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::undefined_roc, "truth needs at least one positive and one negative edge");

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double tp = 0, fp = 0, area = 0;
  for (std::size_t k = 0; k < items.size();) {
    const double thr = items[k].first;
    double dtp = 0, dfp = 0;
    for (; k < items.size() && items[k].first == thr; ++k) (items[k].second ? dtp : dfp) += 1.0;
    area += dfp * (2.0 * tp + dtp) * 0.5;
    tp += dtp;
    fp += dfp;
    roc.points.push_back({fp / neg, tp / pos, thr});
  }
  roc.auc = area / (pos * neg);
  return roc;
}

/// Linear interpolation of tpr at `fpr`; at vertical segments the top value.
inline double tpr_at(const RocCurve& curve, double fpr) {
  const auto& pts = curve.points;
  std::size_t last = 0;
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (pts[k].fpr <= fpr) last = k;
  if (pts[last].fpr == fpr || last + 1 == pts.size()) return pts[last].tpr;
  const auto& a = pts[last];
  const auto& b = pts[last + 1];
  return a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
}

inline constexpr int kAverageGridPoints = 101;

struct AggregateResult {
  RocCurve mean_curve;
  double mean_auc = 0.0;
  double stderr_auc = 0.0;
};

/// Vertical averaging on a fixed 101-point fpr grid; AUC mean and standard
/// error (sample standard deviation / sqrt(n)). The averaged curve keeps
/// an explicit (0, 0) start and has NaN thresholds.
inline AggregateResult aggregate(const std::vector<RocCurve>& curves, const std::vector<double>& aucs) {
  if (curves.size() != aucs.size()) throw Error(ErrorCode::invalid_input, "curve and AUC counts differ");
  if (curves.size() < 2) throw Error(ErrorCode::invalid_input, "aggregation needs at least 2 instances");
  const double n = static_cast<double>(curves.size());
  AggregateResult out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.mean_curve.points.push_back({0.0, 0.0, nan});
  for (int g = 0; g < kAverageGridPoints; ++g) {
    const double x = static_cast<double>(g) / (kAverageGridPoints - 1);
    double sum = 0.0;
    for (const auto& c : curves) sum += tpr_at(c, x);
    out.mean_curve.points.push_back({x, sum / n, nan});
  }
  out.mean_curve.points.back().tpr = 1.0;
  double area = 0.0;
  const auto& pts = out.mean_curve.points;
  for (std::size_t k = 1; k < pts.size(); ++k) area += (pts[k].fpr - pts[k - 1].fpr) * 0.5 * (pts[k].tpr + pts[k - 1].tpr);
  out.mean_curve.auc = area;

  double mean = 0.0;
  for (double a : aucs) mean += a;
  mean /= n;
  double ss = 0.0;
  for (double a : aucs) ss += (a - mean) * (a - mean);
  out.mean_auc = mean;
  out.stderr_auc = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

}  // namespace sparsevar
