#pragma once

/** @file
 * Vector autoregressive model primitives: sample and coefficient containers,
 * regression design construction, the block companion matrix and process
 * simulation.
 *
 * A VAR(P) process on M series follows
 *
 *     z(t) = sum_{p=1..P} A^(p) z(t-p) + e(t),   e(t) ~ N(0, s^2 I)
 *
 * and series i influences series j iff A^(p)(j, i) != 0 for some lag p.
 *
 * Stacked coefficient layout used everywhere in this library: the MP x M
 * regression matrix A has row p*M + i (p zero-based lag) and column j equal
 * to A^(p+1)(j, i). Design columns follow the same lag-major, series-minor
 * order, so Y ~= X * A.
 */

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sparsevar/error.hpp"
#include "sparsevar/random.hpp"

namespace sparsevar {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Simulation accepts coefficient sets only when the companion spectral
/// radius is strictly below this margin. Modulus exactly one gives a
/// non-stationary process, so a strict margin with numerical headroom is used.
inline constexpr double kStabilityMargin = 0.95;

/// T x M sample, one row per time step, one column per series.
class TimeSeriesMatrix {
 public:
  TimeSeriesMatrix() = default;

  explicit TimeSeriesMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw Error(ErrorCode::invalid_data, "sample must have at least one row and column");
    }
    if (!data_.allFinite()) {
      throw Error(ErrorCode::invalid_data, "sample contains non-finite values");
    }
  }

  const Matrix& data() const noexcept { return data_; }
  Index steps() const noexcept { return data_.rows(); }
  Index series() const noexcept { return data_.cols(); }

 private:
  Matrix data_;
};

/// Lag matrices A^(1) ... A^(P), each M x M.
class VarCoefficients {
 public:
  VarCoefficients() = default;

  explicit VarCoefficients(std::vector<Matrix> lags) : lags_(std::move(lags)) {
    if (lags_.empty()) {
      throw Error(ErrorCode::invalid_order, "VAR order must be at least 1");
    }
    const Index m = lags_.front().rows();
    if (m < 1) throw Error(ErrorCode::invalid_data, "VAR dimension must be at least 1");
    for (const auto& a : lags_) {
      if (a.rows() != m || a.cols() != m) {
        throw Error(ErrorCode::invalid_data, "lag matrices must all be M x M");
      }
      if (!a.allFinite()) throw Error(ErrorCode::invalid_data, "non-finite VAR coefficient");
    }
  }

  static VarCoefficients zeros(Index m, Index order) {
    return VarCoefficients(std::vector<Matrix>(static_cast<std::size_t>(order), Matrix::Zero(m, m)));
  }

  /// Inverse of stacked(): `a` is MP x M.
  static VarCoefficients from_stacked(const Matrix& a, Index m) {
    if (m < 1 || a.cols() != m || a.rows() % m != 0 || a.rows() == 0) {
      throw Error(ErrorCode::invalid_data, "stacked coefficient matrix must be MP x M");
    }
    const Index order = a.rows() / m;
    std::vector<Matrix> lags;
    lags.reserve(static_cast<std::size_t>(order));
    for (Index p = 0; p < order; ++p) lags.emplace_back(a.middleRows(p * m, m).transpose());
    return VarCoefficients(std::move(lags));
  }

  Index order() const noexcept { return static_cast<Index>(lags_.size()); }
  Index dim() const noexcept { return lags_.empty() ? 0 : lags_.front().rows(); }

  /// Zero-based: lag(0) is A^(1).
  const Matrix& lag(Index p) const { return lags_.at(static_cast<std::size_t>(p)); }
  const std::vector<Matrix>& lags() const noexcept { return lags_; }

  /// MP x M regression matrix, row p*M + i, column j holds A^(p+1)(j, i).
  Matrix stacked() const {
    const Index m = dim();
    Matrix a(m * order(), m);
    for (Index p = 0; p < order(); ++p) a.middleRows(p * m, m) = lags_[static_cast<std::size_t>(p)].transpose();
    return a;
  }

  /// True iff some lag couples source i into target j.
  bool influences(Index target, Index source) const {
    for (const auto& a : lags_) {
      if (a(target, source) != 0.0) return true;
    }
    return false;
  }

 private:
  std::vector<Matrix> lags_;
};

/// Regression view of a sample: Y ~= X A with X of shape (T-P) x MP.
struct DesignPair {
  Matrix x;
  Matrix y;
  Index order = 0;
  Index dim = 0;

  Index rows() const noexcept { return x.rows(); }
  /// Design column of series `source` at zero-based lag `p`.
  Index column(Index p, Index source) const noexcept { return p * dim + source; }
};

struct CompanionMatrix {
  Matrix data;
};

/// Row r of Y is z(P + r); row r of X is (z(P + r - 1), ..., z(r)).
inline DesignPair build_design(const TimeSeriesMatrix& sample, Index order) {
  const Matrix& z = sample.data();
  if (!z.allFinite()) throw Error(ErrorCode::invalid_data, "sample contains non-finite values");
  if (order < 1 || order >= sample.steps()) {
    throw Error(ErrorCode::invalid_order, "order must satisfy 1 <= P < T (P=" + std::to_string(order) +
                                              ", T=" + std::to_string(sample.steps()) + ")");
  }
  const Index m = sample.series();
  const Index n = sample.steps() - order;
  DesignPair d;
  d.order = order;
  d.dim = m;
  d.y = z.bottomRows(n);
  d.x.resize(n, m * order);
  for (Index p = 1; p <= order; ++p) d.x.middleCols((p - 1) * m, m) = z.middleRows(order - p, n);
  return d;
}

/// Centers every series and scales it to unit (biased) variance.
inline TimeSeriesMatrix standardize(const TimeSeriesMatrix& sample) {
  Matrix z = sample.data();
  for (Index c = 0; c < z.cols(); ++c) {
    z.col(c).array() -= z.col(c).mean();
    const double sd = std::sqrt(z.col(c).squaredNorm() / static_cast<double>(z.rows()));
    if (!(sd > 0.0)) throw Error(ErrorCode::invalid_data, "series " + std::to_string(c) + " has zero variance");
    z.col(c) /= sd;
  }
  return TimeSeriesMatrix(std::move(z));
}

inline CompanionMatrix companion(const VarCoefficients& coeffs) {
  const Index m = coeffs.dim();
  const Index order = coeffs.order();
  CompanionMatrix c{Matrix::Zero(m * order, m * order)};
  for (Index p = 0; p < order; ++p) c.data.block(0, p * m, m, m) = coeffs.lag(p);
  if (order > 1) c.data.block(m, 0, m * (order - 1), m * (order - 1)).setIdentity();
  return c;
}

/// Largest eigenvalue modulus of the companion matrix.
inline double spectral_radius(const CompanionMatrix& c) {
  if (c.data.rows() != c.data.cols() || c.data.rows() == 0 || !c.data.allFinite()) {
    throw Error(ErrorCode::numeric, "spectral radius needs a finite nonempty square matrix");
  }
  Eigen::EigenSolver<Matrix> solver(c.data, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::numeric, "eigenvalue solver did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const VarCoefficients& coeffs) { return spectral_radius(companion(coeffs)); }

inline Index burn_in_length(const VarCoefficients& coeffs) { return 10 * coeffs.order() * coeffs.dim(); }

/// Simulates `steps` rows of the process after discarding burn_in_length()
/// steps. Initial P states are drawn from the innovation distribution.
inline TimeSeriesMatrix simulate_var(const VarCoefficients& coeffs, Index steps, double noise_std,
                                     std::uint64_t rng_seed) {
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw Error(ErrorCode::invalid_data, "noise_std must be finite and nonnegative");
  }
  const double radius = spectral_radius(coeffs);
  if (!(radius < kStabilityMargin)) {
    throw Error(ErrorCode::stability, "companion spectral radius " + std::to_string(radius) +
                                          " is not below " + std::to_string(kStabilityMargin));
  }
  const Index burn = burn_in_length(coeffs);
  if (steps <= burn) {
    throw Error(ErrorCode::invalid_length, "steps (" + std::to_string(steps) + ") must exceed burn-in (" +
                                               std::to_string(burn) + ")");
  }
  const Index m = coeffs.dim();
  const Index order = coeffs.order();
  const Index total = order + burn + steps;

  Rng rng = make_rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(total, m);
  for (Index t = 0; t < order; ++t) {
    for (Index i = 0; i < m; ++i) z(t, i) = noise_std * normal(rng);
  }
  Vector next(m);
  for (Index t = order; t < total; ++t) {
    for (Index i = 0; i < m; ++i) next(i) = noise_std * normal(rng);
    for (Index p = 0; p < order; ++p) next.noalias() += coeffs.lag(p) * z.row(t - p - 1).transpose();
    z.row(t) = next.transpose();
  }
  return TimeSeriesMatrix(z.bottomRows(steps));
}

}  // namespace sparsevar
