#pragma once

/** @file
 * VAR coefficient estimators: OLS, Ridge, Lasso and Group Lasso, together
 * with regularization paths and time-blocked cross-validation.
 *
 * All penalized fits decompose over the M target columns of the stacked
 * coefficient matrix. The sparse solvers work on Gram quantities
 * (X'X, X'y, y'y), so one column problem costs O((MP)^2) per sweep
 * independently of the sample length.
 *
 * Group Lasso minimizes, per target column k,
 *
 *     ||y_k - X a_k||^2 + lambda * sum_g ||a_{k,g}||_2
 *
 * with one group per source series (its P lags). The self-lag group of
 * column k is penalized like every other group. This is the Lagrangian form
 * of the norm-ball constrained problem; sweeping lambda traces the same
 * solution family. Each block update is solved exactly through an
 * eigendecomposition of the group Gram block and a scalar secular equation,
 * so the objective is non-increasing sweep by sweep. Only active groups are
 * revisited between full passes; a full pass re-screens every inactive group
 * against its KKT bound.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "sparsevar/var_core.hpp"

namespace sparsevar {

using Partition = std::vector<std::vector<Index>>;

/// Per-column partition of the MP coefficient indices into penalty groups.
class GroupStructure {
 public:
  GroupStructure() = default;

  /// The same partition for every target column.
  static GroupStructure uniform(Partition partition, Index n_coeffs, Index n_columns) {
    GroupStructure g;
    g.columns_.assign(static_cast<std::size_t>(n_columns), std::move(partition));
    g.n_coeffs_ = n_coeffs;
    g.validate();
    return g;
  }

  /// VAR grouping: for column k, group i collects the P lags of source i.
  /// Group k is the self-lag ("diagonal") group.
  static GroupStructure var(Index m, Index order) {
    GroupStructure g;
    g.n_coeffs_ = m * order;
    for (Index k = 0; k < m; ++k) {
      Partition part(static_cast<std::size_t>(m));
      for (Index i = 0; i < m; ++i)
        for (Index p = 0; p < order; ++p) part[static_cast<std::size_t>(i)].push_back(p * m + i);
      g.columns_.push_back(std::move(part));
    }
    g.validate();
    return g;
  }

  /// Every coefficient its own group (plain l1).
  static GroupStructure singletons(Index n_coeffs, Index n_columns) {
    Partition part;
    for (Index i = 0; i < n_coeffs; ++i) part.push_back({i});
    return uniform(std::move(part), n_coeffs, n_columns);
  }

  const Partition& column(Index k) const { return columns_.at(static_cast<std::size_t>(k)); }
  Index n_columns() const noexcept { return static_cast<Index>(columns_.size()); }
  Index n_coeffs() const noexcept { return n_coeffs_; }

 private:
  void validate() const {
    for (const auto& part : columns_) {
      std::vector<int> seen(static_cast<std::size_t>(n_coeffs_), 0);
      for (const auto& group : part) {
        if (group.empty()) throw Error(ErrorCode::invalid_input, "empty coefficient group");
        for (Index idx : group) {
          if (idx < 0 || idx >= n_coeffs_) throw Error(ErrorCode::invalid_input, "group index out of range");
          if (seen[static_cast<std::size_t>(idx)]++) throw Error(ErrorCode::invalid_input, "groups overlap");
        }
      }
      if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw Error(ErrorCode::invalid_input, "groups do not cover every coefficient");
      }
    }
  }

  std::vector<Partition> columns_;
  Index n_coeffs_ = 0;
};

enum class Method { ols, ridge, lasso, group_lasso };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::ols: return "ols";
    case Method::ridge: return "ridge";
    case Method::lasso: return "lasso";
    case Method::group_lasso: return "group_lasso";
  }
  return "ols";
}

inline Method parse_method(const std::string& s) {
  if (s == "ols") return Method::ols;
  if (s == "ridge") return Method::ridge;
  if (s == "lasso") return Method::lasso;
  if (s == "group_lasso" || s == "glasso") return Method::group_lasso;
  throw Error(ErrorCode::parse, "unknown method '" + s + "'");
}

struct FitResult {
  VarCoefficients coeffs;
  double penalty = 0.0;
  double objective_value = 0.0;
  long iterations = 0;
};

struct SolverOptions {
  double tol = 1e-7;
  long max_sweeps = 100000;
  /// KKT slack accepted at termination; negative means 10 * tol.
  double kkt_tol = -1.0;
  /// Starting point (MP x M stacked), e.g. a neighbouring path solution.
  std::optional<Matrix> warm_start;
  /// Called with (column, objective) after every sweep; costs one extra
  /// quadratic form per sweep, so leave empty outside of tests.
  std::function<void(Index, double)> on_sweep;

  double kkt_slack() const { return kkt_tol < 0.0 ? 10.0 * tol : kkt_tol; }
};

namespace detail {

inline void check_design(const DesignPair& d) {
  if (d.x.rows() < 1 || d.x.rows() != d.y.rows()) throw Error(ErrorCode::invalid_data, "design X and Y row mismatch");
  if (d.dim < 1 || d.order < 1 || d.x.cols() != d.dim * d.order || d.y.cols() != d.dim) {
    throw Error(ErrorCode::invalid_data, "design shape does not match (order, dim) bookkeeping");
  }
  if (!d.x.allFinite() || !d.y.allFinite()) throw Error(ErrorCode::invalid_data, "design contains non-finite values");
}

/// X'X, X'Y and per-column y'y.
struct Gram {
  Matrix xtx;
  Matrix xty;
  Vector yty;

  static Gram from(const Matrix& x, const Matrix& y) {
    Gram g;
    g.xtx = Matrix::Zero(x.cols(), x.cols());
    g.xtx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    g.xtx.triangularView<Eigen::StrictlyUpper>() = g.xtx.transpose();
    g.xty = x.transpose() * y;
    g.yty = y.colwise().squaredNorm().transpose();
    return g;
  }

  Gram operator-(const Gram& o) const { return Gram{xtx - o.xtx, xty - o.xty, yty - o.yty}; }
};

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

inline double quad_loss(const Matrix& xtx, const Vector& xty, double yty, const Vector& beta) {
  return yty - 2.0 * xty.dot(beta) + beta.dot(xtx * beta);
}

inline std::vector<Index> nonzero_indices(const Vector& beta) {
  std::vector<Index> nz;
  for (Index i = 0; i < beta.size(); ++i)
    if (beta(i) != 0.0) nz.push_back(i);
  return nz;
}

/// Cyclic coordinate descent for ||y - X b||^2 + lambda ||b||_1 on Gram data.
/// Returns sweeps used.
inline long lasso_column(const Matrix& xtx, const Vector& xty, double yty, double lambda, Vector& beta,
                         const SolverOptions& opt, Index column) {
  const Index n = beta.size();
  const double half = 0.5 * lambda;
  const double kkt = opt.kkt_slack();
  std::vector<char> active(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) active[static_cast<std::size_t>(j)] = beta(j) != 0.0;

  auto partial = [&](Index j) {
    // c_j - sum_{l != j} G_jl b_l, summed over nonzero coordinates only.
    double b = xty(j);
    for (Index l = 0; l < n; ++l)
      if (l != j && beta(l) != 0.0) b -= xtx(j, l) * beta(l);
    return b;
  };
  auto update = [&](Index j) {
    const double gjj = xtx(j, j);
    const double old = beta(j);
    beta(j) = gjj > 0.0 ? soft_threshold(partial(j), half) / gjj : 0.0;
    active[static_cast<std::size_t>(j)] = active[static_cast<std::size_t>(j)] || beta(j) != 0.0;
    return std::abs(beta(j) - old);
  };
  auto kkt_ok = [&]() {
    const Vector grad = 2.0 * (xty - xtx * beta);  // -d(loss)/d(beta)
    for (Index j = 0; j < n; ++j) {
      if (beta(j) != 0.0) {
        if (std::abs(grad(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0)) > kkt) return false;
      } else if (std::abs(grad(j)) > lambda + kkt) {
        return false;
      }
    }
    return true;
  };
  auto report = [&]() {
    if (opt.on_sweep) opt.on_sweep(column, quad_loss(xtx, xty, yty, beta) + lambda * beta.lpNorm<1>());
  };

  long sweeps = 0;
  while (true) {
    double delta = 0.0;
    for (Index j = 0; j < n; ++j) delta = std::max(delta, update(j));
    ++sweeps;
    report();
    if (delta < opt.tol && kkt_ok()) return sweeps;
    // Converge on the active set before the next full screening pass.
    while (true) {
      if (sweeps >= opt.max_sweeps) {
        throw Error(ErrorCode::non_convergence, "lasso exceeded " + std::to_string(opt.max_sweeps) + " sweeps");
      }
      double d = 0.0;
      for (Index j = 0; j < n; ++j)
        if (active[static_cast<std::size_t>(j)]) d = std::max(d, update(j));
      ++sweeps;
      report();
      if (d < opt.tol) break;
    }
  }
}

/// Exact minimizer of b'Gb - 2 c'b + lambda ||b||_2 given the eigensystem of
/// G. Zero iff ||c|| <= lambda / 2.
struct GroupBlock {
  std::vector<Index> idx;
  Matrix gram;          // G restricted to the group
  Matrix eigvecs;
  Vector eigvals;

  explicit GroupBlock(const Matrix& xtx, std::vector<Index> indices) : idx(std::move(indices)) {
    const Index s = static_cast<Index>(idx.size());
    gram.resize(s, s);
    for (Index a = 0; a < s; ++a)
      for (Index b = 0; b < s; ++b) gram(a, b) = xtx(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    eigvecs = es.eigenvectors();
    eigvals = es.eigenvalues().cwiseMax(0.0);
  }

  Vector solve(const Vector& c, double lambda) const {
    const double half = 0.5 * lambda;
    if (c.norm() <= half) return Vector::Zero(c.size());
    const Vector w = eigvecs.transpose() * c;
    const Vector w2 = w.cwiseAbs2();
    if (half == 0.0) {
      // Unpenalized block: plain least squares on the range of G.
      Vector z(w.size());
      for (Index i = 0; i < w.size(); ++i) z(i) = eigvals(i) > 0.0 ? w(i) / eigvals(i) : 0.0;
      return eigvecs * z;
    }
    // ||b|| = rho solves h(rho) = sum w_i^2 / (e_i rho + half)^2 = 1. h is
    // convex and decreasing, so Newton from rho = 0 increases monotonically
    // to the root.
    double rho = 0.0;
    for (int it = 0; it < 200; ++it) {
      double h = 0.0, dh = 0.0;
      for (Index i = 0; i < w.size(); ++i) {
        const double den = eigvals(i) * rho + half;
        h += w2(i) / (den * den);
        dh -= 2.0 * w2(i) * eigvals(i) / (den * den * den);
      }
      if (h <= 1.0 || dh >= 0.0) break;
      const double next = rho - (h - 1.0) / dh;
      if (!(next > rho)) break;
      const bool done = next - rho <= 1e-15 * next;
      rho = next;
      if (done) break;
    }
    Vector z(w.size());
    for (Index i = 0; i < w.size(); ++i) z(i) = w(i) * rho / (eigvals(i) * rho + half);
    return eigvecs * z;
  }
};

inline double group_penalty(const Partition& part, const Vector& beta) {
  double s = 0.0;
  for (const auto& g : part) {
    double sq = 0.0;
    for (Index i : g) sq += beta(i) * beta(i);
    s += std::sqrt(sq);
  }
  return s;
}

inline long group_lasso_column(const Matrix& xtx, const Vector& xty, double yty, const std::vector<GroupBlock>& blocks,
                               const Partition& part, double lambda, Vector& beta, const SolverOptions& opt,
                               Index column) {
  const Index n_groups = static_cast<Index>(blocks.size());
  const double kkt = opt.kkt_slack();
  std::vector<char> active(static_cast<std::size_t>(n_groups));
  auto group_nonzero = [&](Index g) {
    for (Index i : blocks[static_cast<std::size_t>(g)].idx)
      if (beta(i) != 0.0) return true;
    return false;
  };
  for (Index g = 0; g < n_groups; ++g) active[static_cast<std::size_t>(g)] = group_nonzero(g);

  std::vector<Index> support = nonzero_indices(beta);
  auto refresh_support = [&]() { support = nonzero_indices(beta); };

  auto update = [&](Index g) {
    const GroupBlock& blk = blocks[static_cast<std::size_t>(g)];
    const Index s = static_cast<Index>(blk.idx.size());
    Vector c(s), old(s);
    for (Index a = 0; a < s; ++a) {
      const Index row = blk.idx[static_cast<std::size_t>(a)];
      old(a) = beta(row);
      double v = xty(row);
      for (Index l : support) v -= xtx(row, l) * beta(l);
      c(a) = v;
    }
    c.noalias() += blk.gram * old;  // add back the group's own contribution
    const Vector fresh = blk.solve(c, lambda);
    bool was_zero = old.isZero(0.0), now_zero = fresh.isZero(0.0);
    for (Index a = 0; a < s; ++a) beta(blk.idx[static_cast<std::size_t>(a)]) = fresh(a);
    if (was_zero != now_zero || !now_zero) refresh_support();
    if (!now_zero) active[static_cast<std::size_t>(g)] = 1;
    return (fresh - old).cwiseAbs().maxCoeff();
  };
  auto kkt_ok = [&]() {
    const Vector grad = 2.0 * (xty - xtx * beta);
    for (const auto& blk : blocks) {
      const Index s = static_cast<Index>(blk.idx.size());
      Vector gg(s), bg(s);
      for (Index a = 0; a < s; ++a) {
        gg(a) = grad(blk.idx[static_cast<std::size_t>(a)]);
        bg(a) = beta(blk.idx[static_cast<std::size_t>(a)]);
      }
      const double nb = bg.norm();
      if (nb > 0.0) {
        if ((gg - lambda * bg / nb).cwiseAbs().maxCoeff() > kkt) return false;
      } else if (gg.norm() > lambda + kkt) {
        return false;
      }
    }
    return true;
  };
  auto report = [&]() {
    if (opt.on_sweep) opt.on_sweep(column, quad_loss(xtx, xty, yty, beta) + lambda * group_penalty(part, beta));
  };

  long sweeps = 0;
  while (true) {
    double delta = 0.0;
    for (Index g = 0; g < n_groups; ++g) delta = std::max(delta, update(g));
    ++sweeps;
    report();
    if (delta < opt.tol && kkt_ok()) return sweeps;
    while (true) {
      if (sweeps >= opt.max_sweeps) {
        throw Error(ErrorCode::non_convergence, "group lasso exceeded " + std::to_string(opt.max_sweeps) + " sweeps");
      }
      double d = 0.0;
      for (Index g = 0; g < n_groups; ++g)
        if (active[static_cast<std::size_t>(g)]) d = std::max(d, update(g));
      ++sweeps;
      report();
      if (d < opt.tol) break;
    }
  }
}

/// Thin SVD of X, reused for ridge solves at many penalties.
struct SvdSystem {
  Matrix u;
  Vector s;
  Matrix v;

  explicit SvdSystem(const Matrix& x) {
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
  }

  bool full_rank() const {
    if (s.size() == 0 || s(s.size() - 1) <= 0.0) return false;
    const double ratio = s(0) / s(s.size() - 1);
    return ratio * ratio < 1e12;
  }

  /// (X'X + lambda I)^{-1} X'Y.
  Matrix ridge(const Matrix& y, double lambda) const {
    Vector shrink(s.size());
    for (Index i = 0; i < s.size(); ++i) {
      const double den = s(i) * s(i) + lambda;
      shrink(i) = den > 0.0 ? s(i) / den : 0.0;
    }
    return v * (shrink.asDiagonal() * (u.transpose() * y));
  }
};

inline void require_full_rank(const SvdSystem& svd, Index rows, Index cols) {
  if (rows < cols || !svd.full_rank()) {
    throw Error(ErrorCode::singular_design, "X'X is singular or has condition number >= 1e12");
  }
}

inline double ridge_objective(const DesignPair& d, const Matrix& a, double lambda) {
  return (d.x * a - d.y).squaredNorm() + lambda * a.squaredNorm();
}

}  // namespace detail

inline VarCoefficients ols_fit(const DesignPair& design) {
  detail::check_design(design);
  detail::SvdSystem svd(design.x);
  detail::require_full_rank(svd, design.x.rows(), design.x.cols());
  return VarCoefficients::from_stacked(svd.ridge(design.y, 0.0), design.dim);
}

inline FitResult ridge_fit(const DesignPair& design, double penalty) {
  detail::check_design(design);
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) throw Error(ErrorCode::invalid_input, "ridge penalty must be >= 0");
  detail::SvdSystem svd(design.x);
  if (penalty == 0.0) detail::require_full_rank(svd, design.x.rows(), design.x.cols());
  const Matrix a = svd.ridge(design.y, penalty);
  return FitResult{VarCoefficients::from_stacked(a, design.dim), penalty, detail::ridge_objective(design, a, penalty), 1};
}

/// Smallest penalty whose solution has every penalized coefficient zero,
/// maximised over target columns.
inline double lambda_max(const DesignPair& design, Method method, const GroupStructure* groups = nullptr) {
  detail::check_design(design);
  const Matrix xty = design.x.transpose() * design.y;
  if (method == Method::lasso) return 2.0 * xty.cwiseAbs().maxCoeff();
  if (method != Method::group_lasso) throw Error(ErrorCode::invalid_input, "lambda_max is defined for lasso and group_lasso");
  const GroupStructure fallback = groups ? GroupStructure{} : GroupStructure::var(design.dim, design.order);
  const GroupStructure& gs = groups ? *groups : fallback;
  double best = 0.0;
  for (Index k = 0; k < xty.cols(); ++k) {
    for (const auto& g : gs.column(k)) {
      double sq = 0.0;
      for (Index i : g) sq += xty(i, k) * xty(i, k);
      best = std::max(best, 2.0 * std::sqrt(sq));
    }
  }
  return best;
}

namespace detail {

inline Matrix initial_coefficients(const SolverOptions& opt, Index rows, Index cols) {
  if (!opt.warm_start) return Matrix::Zero(rows, cols);
  if (opt.warm_start->rows() != rows || opt.warm_start->cols() != cols) {
    throw Error(ErrorCode::invalid_input, "warm start has the wrong shape");
  }
  return *opt.warm_start;
}

inline double lasso_objective(const DesignPair& d, const Matrix& a, double lambda) {
  return (d.x * a - d.y).squaredNorm() + lambda * a.cwiseAbs().sum();
}

inline double group_objective(const DesignPair& d, const GroupStructure& gs, const Matrix& a, double lambda) {
  double pen = 0.0;
  for (Index k = 0; k < a.cols(); ++k) pen += group_penalty(gs.column(k), a.col(k));
  return (d.x * a - d.y).squaredNorm() + lambda * pen;
}

inline Matrix lasso_gram(const Gram& g, double lambda, const SolverOptions& opt, long& sweeps) {
  Matrix a = initial_coefficients(opt, g.xtx.rows(), g.xty.cols());
  for (Index k = 0; k < a.cols(); ++k) {
    Vector beta = a.col(k);
    sweeps += lasso_column(g.xtx, g.xty.col(k), g.yty(k), lambda, beta, opt, k);
    a.col(k) = beta;
  }
  return a;
}

inline std::vector<std::vector<GroupBlock>> make_blocks(const Gram& g, const GroupStructure& gs) {
  std::vector<std::vector<GroupBlock>> blocks;
  for (Index k = 0; k < gs.n_columns(); ++k) {
    std::vector<GroupBlock> col;
    for (const auto& grp : gs.column(k)) col.emplace_back(g.xtx, grp);
    blocks.push_back(std::move(col));
  }
  return blocks;
}

inline Matrix group_lasso_gram(const Gram& g, const GroupStructure& gs,
                               const std::vector<std::vector<GroupBlock>>& blocks, double lambda,
                               const SolverOptions& opt, long& sweeps) {
  Matrix a = initial_coefficients(opt, g.xtx.rows(), g.xty.cols());
  for (Index k = 0; k < a.cols(); ++k) {
    Vector beta = a.col(k);
    sweeps += group_lasso_column(g.xtx, g.xty.col(k), g.yty(k), blocks[static_cast<std::size_t>(k)], gs.column(k),
                                 lambda, beta, opt, k);
    a.col(k) = beta;
  }
  return a;
}

inline void check_groups(const DesignPair& d, const GroupStructure& gs) {
  if (gs.n_coeffs() != d.x.cols() || gs.n_columns() != d.y.cols()) {
    throw Error(ErrorCode::invalid_input, "group structure does not match the design");
  }
}

}  // namespace detail

inline FitResult lasso_fit(const DesignPair& design, double penalty, const SolverOptions& opt = {}) {
  detail::check_design(design);
  if (!(penalty > 0.0) || !std::isfinite(penalty)) throw Error(ErrorCode::invalid_input, "lasso penalty must be > 0");
  const auto gram = detail::Gram::from(design.x, design.y);
  long sweeps = 0;
  const Matrix a = detail::lasso_gram(gram, penalty, opt, sweeps);
  return FitResult{VarCoefficients::from_stacked(a, design.dim), penalty, detail::lasso_objective(design, a, penalty),
                   sweeps};
}

inline FitResult lasso_fit(const DesignPair& design, double penalty, double tol) {
  SolverOptions opt;
  opt.tol = tol;
  return lasso_fit(design, penalty, opt);
}

inline FitResult group_lasso_fit(const DesignPair& design, const GroupStructure& groups, double penalty,
                                 const SolverOptions& opt = {}) {
  detail::check_design(design);
  detail::check_groups(design, groups);
  if (!(penalty > 0.0) || !std::isfinite(penalty)) throw Error(ErrorCode::invalid_input, "group lasso penalty must be > 0");
  const auto gram = detail::Gram::from(design.x, design.y);
  const auto blocks = detail::make_blocks(gram, groups);
  long sweeps = 0;
  const Matrix a = detail::group_lasso_gram(gram, groups, blocks, penalty, opt, sweeps);
  return FitResult{VarCoefficients::from_stacked(a, design.dim), penalty,
                   detail::group_objective(design, groups, a, penalty), sweeps};
}

inline FitResult group_lasso_fit(const DesignPair& design, const GroupStructure& groups, double penalty, double tol) {
  SolverOptions opt;
  opt.tol = tol;
  return group_lasso_fit(design, groups, penalty, opt);
}

/// n values log-spaced from hi down to lo (hi first).
inline std::vector<double> log_grid(double hi, double lo, Index n) {
  if (n < 1 || !(hi > 0.0) || !(lo > 0.0)) throw Error(ErrorCode::invalid_input, "log grid needs n >= 1 and positive ends");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = hi;
    return out;
  }
  const double lh = std::log(hi), ll = std::log(lo);
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(lh + (ll - lh) * double(i) / double(n - 1));
  out.front() = hi;
  out.back() = lo;
  return out;
}

inline constexpr double kPathRatio = 1e-4;

/// Solutions on n_points penalties log-spaced over [lambda_max * 1e-4,
/// lambda_max], ordered by decreasing penalty. Solved dense to sparse with
/// warm starts.
inline std::vector<FitResult> regularization_path(const DesignPair& design, Method method, Index n_points,
                                                  const SolverOptions& base = {}) {
  detail::check_design(design);
  if (n_points < 2) throw Error(ErrorCode::invalid_input, "a path needs at least 2 points");
  if (method != Method::lasso && method != Method::group_lasso) {
    throw Error(ErrorCode::invalid_input, "paths are defined for lasso and group_lasso");
  }
  const GroupStructure groups = GroupStructure::var(design.dim, design.order);
  const double top = lambda_max(design, method, &groups);
  if (!(top > 0.0)) throw Error(ErrorCode::degenerate_design, "X'Y is zero; the path is degenerate");
  const auto lambdas = log_grid(top, top * kPathRatio, n_points);

  const auto gram = detail::Gram::from(design.x, design.y);
  std::vector<std::vector<detail::GroupBlock>> blocks;
  if (method == Method::group_lasso) blocks = detail::make_blocks(gram, groups);

  std::vector<FitResult> path(lambdas.size());
  SolverOptions opt = base;
  for (std::size_t n = lambdas.size(); n-- > 0;) {
    const double lambda = lambdas[n];
    long sweeps = 0;
    Matrix a = method == Method::lasso ? detail::lasso_gram(gram, lambda, opt, sweeps)
                                       : detail::group_lasso_gram(gram, groups, blocks, lambda, opt, sweeps);
    const double obj = method == Method::lasso ? detail::lasso_objective(design, a, lambda)
                                               : detail::group_objective(design, groups, a, lambda);
    opt.warm_start = a;
    path[n] = FitResult{VarCoefficients::from_stacked(a, design.dim), lambda, obj, sweeps};
  }
  return path;
}

/// Contiguous row blocks [begin, end) for time-respecting K-fold splits.
inline std::vector<std::pair<Index, Index>> contiguous_folds(Index rows, Index folds) {
  if (folds < 2) throw Error(ErrorCode::invalid_folds, "need at least 2 folds");
  if (rows < folds) throw Error(ErrorCode::invalid_folds, "a fold would have fewer than one row");
  std::vector<std::pair<Index, Index>> out;
  for (Index f = 0; f < folds; ++f) out.emplace_back(f * rows / folds, (f + 1) * rows / folds);
  return out;
}

struct CrossValidation {
  double penalty = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_error;  // aligned with grid
};

inline CrossValidation cross_validate_detailed(const DesignPair& design, Method method, Index folds,
                                               std::vector<double> grid, const SolverOptions& base = {}) {
  detail::check_design(design);
  if (grid.empty()) throw Error(ErrorCode::invalid_input, "cross-validation grid is empty");
  if (method != Method::ridge && method != Method::lasso && method != Method::group_lasso) {
    throw Error(ErrorCode::invalid_input, "cross-validation supports ridge, lasso and group_lasso");
  }
  for (double l : grid) {
    const bool ok = method == Method::ridge ? l >= 0.0 : l > 0.0;
    if (!ok || !std::isfinite(l)) throw Error(ErrorCode::invalid_input, "invalid penalty in cross-validation grid");
  }
  const auto blocks = contiguous_folds(design.rows(), folds);
  // Decreasing penalties so sparse solvers warm-start from sparser neighbours.
  std::sort(grid.begin(), grid.end(), std::greater<>());
  const Index n = static_cast<Index>(grid.size());
  std::vector<double> err(grid.size(), 0.0);

  const GroupStructure groups = GroupStructure::var(design.dim, design.order);
  const auto total = method == Method::ridge ? detail::Gram{} : detail::Gram::from(design.x, design.y);

  for (const auto& [begin, end] : blocks) {
    const Index len = end - begin;
    const Matrix x_test = design.x.middleRows(begin, len);
    const Matrix y_test = design.y.middleRows(begin, len);
    auto fold_error = [&](const Matrix& a) {
      return (x_test * a - y_test).squaredNorm() / static_cast<double>(len * design.dim);
    };
    if (method == Method::ridge) {
      Matrix x_train(design.rows() - len, design.x.cols());
      Matrix y_train(design.rows() - len, design.dim);
      x_train << design.x.topRows(begin), design.x.bottomRows(design.rows() - end);
      y_train << design.y.topRows(begin), design.y.bottomRows(design.rows() - end);
      const detail::SvdSystem svd(x_train);
      for (Index i = 0; i < n; ++i) {
        if (grid[static_cast<std::size_t>(i)] == 0.0) detail::require_full_rank(svd, x_train.rows(), x_train.cols());
        err[static_cast<std::size_t>(i)] += fold_error(svd.ridge(y_train, grid[static_cast<std::size_t>(i)]));
      }
    } else {
      const auto train = total - detail::Gram::from(x_test, y_test);
      std::vector<std::vector<detail::GroupBlock>> gb;
      if (method == Method::group_lasso) gb = detail::make_blocks(train, groups);
      SolverOptions opt = base;
      opt.warm_start.reset();
      for (Index i = 0; i < n; ++i) {
        long sweeps = 0;
        const double lambda = grid[static_cast<std::size_t>(i)];
        Matrix a = method == Method::lasso ? detail::lasso_gram(train, lambda, opt, sweeps)
                                           : detail::group_lasso_gram(train, groups, gb, lambda, opt, sweeps);
        err[static_cast<std::size_t>(i)] += fold_error(a);
        opt.warm_start = std::move(a);
      }
    }
  }
  CrossValidation cv;
  cv.grid = grid;
  cv.mean_error.resize(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cv.mean_error[i] = err[i] / static_cast<double>(folds);
    // Grid is decreasing, so strict improvement keeps ties at the larger penalty.
    if (cv.mean_error[i] < cv.mean_error[best]) best = i;
  }
  cv.penalty = grid[best];
  return cv;
}

inline double cross_validate(const DesignPair& design, Method method, Index folds, const std::vector<double>& grid,
                             const SolverOptions& base = {}) {
  return cross_validate_detailed(design, method, folds, grid, base).penalty;
}

/// Default CV grids: log-spaced over [lambda_max * 1e-4, lambda_max] for the
/// sparse methods, and over [1e-3 * s_min^2, s_max^2] of the design singular
/// values for ridge.
inline std::vector<double> default_cv_grid(const DesignPair& design, Method method, Index size) {
  if (method == Method::ridge) {
    const detail::SvdSystem svd(design.x);
    const double smax = svd.s(0);
    const double smin = std::max(svd.s(svd.s.size() - 1), 1e-6 * smax);
    return log_grid(smax * smax, 1e-3 * smin * smin, size);
  }
  const double top = lambda_max(design, method);
  return log_grid(top, top * kPathRatio, size);
}

}  // namespace sparsevar
