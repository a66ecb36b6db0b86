#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sparsevar/estimators.hpp"
#include "sparsevar/sim_bench.hpp"

using namespace sparsevar;

namespace {

DesignPair random_design(Index rows, Index dim, Index order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix x = oracle::random_matrix(rows, dim * order, rng);
  const Matrix a = oracle::random_matrix(dim * order, dim, rng);
  const Matrix y = x * a + oracle::random_matrix(rows, dim, rng);
  return oracle::design_of(x, y);
}

DesignPair instance_design(NoiseRegime regime, std::uint64_t seed, Index order = 5) {
  BenchmarkConfig cfg;
  cfg.noise_regime = regime;
  return build_design(standardize(make_instance(cfg, seed).sample), order);
}

}  // namespace

TEST(Ols, IdentityDesignReturnsY) {
  const Matrix y = (Matrix(3, 3) << 1, 2, 3, 4, 5, 6, 7, 8, 9).finished();
  const DesignPair d = oracle::design_of(Matrix::Identity(3, 3), y);
  EXPECT_LT((ols_fit(d).stacked() - y).norm(), 1e-14);
}

TEST(Ols, DuplicatedColumnIsSingular) {
  DesignPair d = random_design(40, 2, 2, 1);
  d.x.col(3) = d.x.col(1);
  try {
    ols_fit(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_design);
  }
  EXPECT_THROW(ridge_fit(d, 0.0), Error);
  EXPECT_NO_THROW(ridge_fit(d, 0.1));
}

TEST(Ols, RecoversNoiselessPaperScaleSystem) {
  const auto [c, g] = draw_sparse_var(7, 5, 10, 0.2, 3);
  const DesignPair d = oracle::noiseless_design(c, 20, 50, 3);
  EXPECT_LT((ols_fit(d).stacked() - c.stacked()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ridge, HandExample) {
  const DesignPair d = oracle::single_response(Matrix::Identity(2, 2), (Vector(2) << 2, 4).finished());
  const FitResult f = ridge_fit(d, 1.0);
  EXPECT_NEAR(f.coeffs.stacked()(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(f.coeffs.stacked()(1, 0), 2.0, 1e-14);
  // ||(1,2) - (2,4)||^2 + ||(1,2)||^2 = 5 + 5.
  EXPECT_NEAR(f.objective_value, 10.0, 1e-12);
}

TEST(Ridge, ZeroPenaltyIsOls) {
  const DesignPair d = random_design(60, 3, 2, 5);
  EXPECT_LT((ridge_fit(d, 0.0).coeffs.stacked() - ols_fit(d).stacked()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, MatchesNormalEquations) {
  const DesignPair d = random_design(50, 2, 3, 6);
  const Matrix xtx = d.x.transpose() * d.x;
  const Matrix ref = (xtx + 0.7 * Matrix::Identity(6, 6)).ldlt().solve(d.x.transpose() * d.y);
  EXPECT_LT((ridge_fit(d, 0.7).coeffs.stacked() - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ridge, HugePenaltyShrinksToZero) {
  const DesignPair d = random_design(50, 2, 3, 7);
  const double bound = 1e-6 * (d.x.transpose() * d.y).norm();
  EXPECT_LT(ridge_fit(d, 1e12).coeffs.stacked().norm(), bound);
}

TEST(Ridge, ShrinkageIsMonotone) {
  const DesignPair d = random_design(50, 2, 3, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double norm = ridge_fit(d, lambda).coeffs.stacked().norm();
    EXPECT_LE(norm, prev * (1 + 1e-12));
    prev = norm;
  }
}

TEST(Ridge, RejectsNegativePenalty) { EXPECT_THROW(ridge_fit(random_design(10, 1, 2, 1), -1.0), Error); }

TEST(Lasso, OrthonormalSoftThreshold) {
  // X = I, y = 3: minimizer of (b - 3)^2 + 2|b| is 2.
  const DesignPair d = oracle::single_response(Matrix::Identity(1, 1), Vector::Constant(1, 3.0));
  EXPECT_NEAR(lasso_fit(d, 2.0).coeffs.stacked()(0, 0), 2.0, 1e-12);
}

TEST(Lasso, ZeroAboveLambdaMax) {
  const DesignPair d = random_design(40, 3, 2, 9);
  const double top = lambda_max(d, Method::lasso);
  EXPECT_NEAR(top, 2.0 * (d.x.transpose() * d.y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(lasso_fit(d, top).coeffs.stacked().isZero(0.0));
  EXPECT_FALSE(lasso_fit(d, 0.9 * top).coeffs.stacked().isZero(0.0));
}

TEST(Lasso, MatchesSignPatternEnumeration) {
  std::mt19937_64 rng(10);
  const Matrix x = oracle::random_matrix(6, 4, rng);
  const Vector y = oracle::random_matrix(6, 1, rng);
  const FitResult f = lasso_fit(oracle::single_response(x, y), 1.0, 1e-10);
  const double ref = oracle::lasso_bruteforce(x, y, 1.0);
  EXPECT_NEAR(f.objective_value, ref, 1e-6 * std::max(1.0, ref));
  EXPECT_NEAR(oracle::lasso_objective(x, y, f.coeffs.stacked().col(0), 1.0), f.objective_value, 1e-8 * ref);
}

TEST(Lasso, SubgradientConditions) {
  const DesignPair d = random_design(80, 3, 3, 11);
  const double lambda = 0.2 * lambda_max(d, Method::lasso);
  const double tol = 1e-7;
  const Matrix a = lasso_fit(d, lambda, tol).coeffs.stacked();
  const Matrix grad = 2.0 * d.x.transpose() * (d.y - d.x * a);
  for (Index k = 0; k < a.cols(); ++k)
    for (Index j = 0; j < a.rows(); ++j) {
      if (a(j, k) != 0.0) EXPECT_NEAR(grad(j, k), lambda * (a(j, k) > 0 ? 1.0 : -1.0), 10 * tol);
      else EXPECT_LE(std::abs(grad(j, k)), lambda + 10 * tol);
    }
}

TEST(Lasso, IterationCapRaisesNonConvergence) {
  const DesignPair d = random_design(80, 3, 3, 11);
  SolverOptions opt;
  opt.tol = 1e-14;
  opt.max_sweeps = 2;
  try {
    lasso_fit(d, 0.01, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_convergence);
  }
}

TEST(GroupLasso, SingletonGroupsAreLasso) {
  const DesignPair d = random_design(60, 3, 1, 12);
  const double lambda = 0.3 * lambda_max(d, Method::lasso);
  const Matrix a = lasso_fit(d, lambda, 1e-10).coeffs.stacked();
  const Matrix b = group_lasso_fit(d, GroupStructure::singletons(3, 3), lambda, 1e-10).coeffs.stacked();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GroupLasso, ZeroAtLambdaMax) {
  const DesignPair d = random_design(60, 3, 4, 13);
  const GroupStructure gs = GroupStructure::var(3, 4);
  const double top = lambda_max(d, Method::group_lasso, &gs);
  const Matrix xty = d.x.transpose() * d.y;
  double ref = 0.0;
  for (Index k = 0; k < 3; ++k)
    for (Index i = 0; i < 3; ++i) {
      double sq = 0.0;
      for (Index p = 0; p < 4; ++p) sq += xty(p * 3 + i, k) * xty(p * 3 + i, k);
      ref = std::max(ref, 2.0 * std::sqrt(sq));
    }
  EXPECT_NEAR(top, ref, 1e-12 * ref);
  EXPECT_TRUE(group_lasso_fit(d, gs, top).coeffs.stacked().isZero(0.0));
}

TEST(GroupLasso, MatchesProximalGradient) {
  std::mt19937_64 rng(14);
  const Matrix x = oracle::random_matrix(20, 6, rng);
  const Vector y = oracle::random_matrix(20, 1, rng);
  const Partition groups{{0, 1, 2}, {3, 4, 5}};
  const DesignPair d = oracle::single_response(x, y);
  const FitResult f = group_lasso_fit(d, GroupStructure::uniform(groups, 6, 1), 1.0, 1e-10);
  const Vector ref = oracle::group_lasso_proximal(x, y, groups, 1.0);
  const double ref_obj = oracle::group_objective(x, y, ref, groups, 1.0);
  EXPECT_NEAR(f.objective_value, ref_obj, 1e-5 * ref_obj);
}

TEST(GroupLasso, ObjectiveNeverIncreasesAcrossSweeps) {
  const DesignPair d = random_design(100, 4, 3, 15);
  const GroupStructure gs = GroupStructure::var(4, 3);
  SolverOptions opt;
  std::vector<std::vector<double>> trace(4);
  opt.on_sweep = [&](Index k, double obj) { trace[static_cast<std::size_t>(k)].push_back(obj); };
  group_lasso_fit(d, gs, 0.1 * lambda_max(d, Method::group_lasso, &gs), opt);
  for (const auto& t : trace) {
    ASSERT_FALSE(t.empty());
    for (std::size_t s = 1; s < t.size(); ++s) EXPECT_LE(t[s], t[s - 1] * (1 + 1e-12) + 1e-12);
  }
}

TEST(GroupLasso, KktCertificatesAndAllOrNoneSupport) {
  const DesignPair d = random_design(120, 4, 3, 16);
  const GroupStructure gs = GroupStructure::var(4, 3);
  const double tol = 1e-7;
  for (double frac : {0.05, 0.2, 0.6}) {
    const double lambda = frac * lambda_max(d, Method::group_lasso, &gs);
    const Matrix a = group_lasso_fit(d, gs, lambda, tol).coeffs.stacked();
    for (Index k = 0; k < 4; ++k) {
      EXPECT_LE(oracle::group_kkt_violation(d.x, d.y.col(k), a.col(k), gs.column(k), lambda), 10 * tol);
      for (const auto& g : gs.column(k)) {
        int nonzero = 0;
        for (Index i : g) nonzero += a(i, k) != 0.0;
        EXPECT_TRUE(nonzero == 0 || nonzero == static_cast<int>(g.size()));
      }
    }
  }
}

TEST(GroupLasso, ColumnsDecompose) {
  const DesignPair d = random_design(80, 3, 2, 17);
  const GroupStructure gs = GroupStructure::var(3, 2);
  const double lambda = 0.2 * lambda_max(d, Method::group_lasso, &gs);
  const Matrix joint = group_lasso_fit(d, gs, lambda, 1e-12).coeffs.stacked();
  for (Index k = 0; k < 3; ++k) {
    // Column k alone, with its own partition.
    DesignPair single = oracle::single_response(d.x, d.y.col(k));
    const Matrix col = group_lasso_fit(single, GroupStructure::uniform(gs.column(k), 6, 1), lambda, 1e-12)
                           .coeffs.stacked();
    EXPECT_LT((col.col(0) - joint.col(k)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(GroupLasso, ObjectiveValueIsRecomputable) {
  const DesignPair d = random_design(80, 3, 2, 18);
  const GroupStructure gs = GroupStructure::var(3, 2);
  const double lambda = 0.3 * lambda_max(d, Method::group_lasso, &gs);
  const FitResult f = group_lasso_fit(d, gs, lambda);
  const Matrix a = f.coeffs.stacked();
  double obj = 0.0;
  for (Index k = 0; k < 3; ++k) obj += oracle::group_objective(d.x, d.y.col(k), a.col(k), gs.column(k), lambda);
  EXPECT_NEAR(f.objective_value, obj, 1e-8 * obj);
}

TEST(GroupStructure, Validation) {
  EXPECT_THROW(GroupStructure::uniform({{0, 1}, {1, 2}}, 3, 1), Error);
  EXPECT_THROW(GroupStructure::uniform({{0}, {2}}, 3, 1), Error);
  EXPECT_THROW(GroupStructure::uniform({{0}, {}}, 1, 1), Error);
  const GroupStructure gs = GroupStructure::var(3, 2);
  EXPECT_EQ(gs.column(1).at(2), (std::vector<Index>{2, 5}));
}

TEST(Path, EndsAndOrdering) {
  const DesignPair d = instance_design(NoiseRegime::white, 31);
  const auto path = regularization_path(d, Method::group_lasso, 20);
  ASSERT_EQ(path.size(), 20u);
  for (std::size_t n = 1; n < path.size(); ++n) EXPECT_LT(path[n].penalty, path[n - 1].penalty);
  EXPECT_NEAR(path.back().penalty, path.front().penalty * kPathRatio, 1e-9 * path.front().penalty);
  auto off_diagonal_edges = [](const VarCoefficients& c) {
    Index n = 0;
    for (Index j = 0; j < c.dim(); ++j)
      for (Index i = 0; i < c.dim(); ++i) n += i != j && c.influences(j, i);
    return n;
  };
  EXPECT_EQ(off_diagonal_edges(path.front().coeffs), 0);
  EXPECT_GE(off_diagonal_edges(path.back().coeffs), 38);  // >= 90% of 42
  EXPECT_GE(off_diagonal_edges(path.back().coeffs), off_diagonal_edges(path.front().coeffs));
}

TEST(Path, LassoPathMatchesColdStarts) {
  const DesignPair d = random_design(80, 3, 2, 19);
  const auto path = regularization_path(d, Method::lasso, 6);
  for (const auto& f : path) {
    const FitResult cold = lasso_fit(d, f.penalty);
    EXPECT_NEAR(cold.objective_value, f.objective_value, 1e-7 * std::max(1.0, cold.objective_value));
  }
  EXPECT_THROW(regularization_path(d, Method::ridge, 6), Error);
  EXPECT_THROW(regularization_path(d, Method::lasso, 1), Error);
}

TEST(CrossValidation, Folds) {
  const auto folds = contiguous_folds(10, 3);
  ASSERT_EQ(folds.size(), 3u);
  EXPECT_EQ(folds[0], (std::pair<Index, Index>{0, 3}));
  EXPECT_EQ(folds[2], (std::pair<Index, Index>{6, 10}));
  try {
    contiguous_folds(3, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_folds);
  }
  EXPECT_THROW(contiguous_folds(10, 1), Error);
}

TEST(CrossValidation, SingletonGrid) {
  const DesignPair d = random_design(50, 2, 2, 20);
  EXPECT_EQ(cross_validate(d, Method::ridge, 5, {3.5}), 3.5);
  EXPECT_EQ(cross_validate(d, Method::lasso, 5, {0.25}), 0.25);
}

TEST(CrossValidation, PureNoisePrefersHeavyRidgeShrinkage) {
  // Diagonal of X'X is about 400 here, so a penalty above 100 shrinks
  // every coefficient by at least a fifth. The error curve is flat at the
  // top of the grid, so the exact maximum is not always selected.
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const TimeSeriesMatrix s = simulate_var(VarCoefficients::zeros(3, 2), 400, 1.0, seed);
    const DesignPair d = build_design(s, 2);
    const auto grid = log_grid(1e4, 1e-2, 15);
    const double chosen = cross_validate(d, Method::ridge, 10, grid);
    EXPECT_GE(chosen, 100.0) << seed;
    hits += chosen == grid.front();
  }
  EXPECT_GE(hits, 5);
}

TEST(CrossValidation, NoiselessSystemPrefersSmallestPenalty) {
  const auto [c, g] = draw_sparse_var(3, 2, 3, 0.3, 4);
  const DesignPair d = oracle::noiseless_design(c, 20, 30, 4);
  const auto grid = log_grid(10.0, 1e-6, 12);
  EXPECT_EQ(cross_validate(d, Method::ridge, 10, grid), grid.back());
  EXPECT_EQ(cross_validate(d, Method::lasso, 10, grid), grid.back());
}

TEST(CrossValidation, DefaultGridsAreDecreasingAndSized) {
  const DesignPair d = random_design(60, 2, 2, 21);
  for (Method m : {Method::ridge, Method::lasso, Method::group_lasso}) {
    const auto grid = default_cv_grid(d, m, 30);
    ASSERT_EQ(grid.size(), 30u);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LT(grid[i], grid[i - 1]);
  }
  EXPECT_NEAR(default_cv_grid(d, Method::lasso, 30).front(), lambda_max(d, Method::lasso), 1e-12);
}

TEST(Methods, Parse) {
  EXPECT_EQ(parse_method("glasso"), Method::group_lasso);
  EXPECT_EQ(std::string(to_string(Method::ridge)), "ridge");
  EXPECT_THROW(parse_method("elastic"), Error);
}
