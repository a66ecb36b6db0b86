#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sparsevar/config.hpp"
#include "sparsevar/experiment.hpp"

using namespace sparsevar;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.benchmark.m = 4;
  c.benchmark.t = 300;
  c.benchmark.p_true = 2;
  c.benchmark.n_edges = 3;
  c.benchmark.n_instances = 2;
  c.benchmark.master_seed = 2024;
  c.regimes = {NoiseRegime::none, NoiseRegime::white};
  c.fit_orders = {2};
  c.cv_folds = 5;
  c.cv_grid_size = 6;
  c.path_points = 10;
  c.mc_samples = 1000;
  c.jackknife_blocks = 5;
  return c;
}

class ExperimentDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("sparsevar_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

}  // namespace

TEST(Seeds, RegimeAndInstanceDerivation) {
  EXPECT_EQ(regime_seed(5, NoiseRegime::white), derive_seed(5, static_cast<std::uint64_t>(NoiseRegime::white)));
  EXPECT_EQ(instance_seed(5, NoiseRegime::mixed, 3), derive_seed(regime_seed(5, NoiseRegime::mixed), 3));
  EXPECT_EQ(ridge_mc_seed(77, 10), derive_seed(77, 110));
  EXPECT_NE(instance_seed(5, NoiseRegime::white, 0), instance_seed(5, NoiseRegime::none, 0));
}

TEST(FormatCell, Variants) {
  EXPECT_EQ(format_cell({}), "n/a");
  EXPECT_EQ(format_cell({0.9}), "0.900 ± nan");
  EXPECT_EQ(format_cell({0.9, 1.0}), "0.950 ± 0.050");
}

TEST(ScoreEdges, EveryMethodGivesFiniteScores) {
  ExperimentConfig c = small_config();
  BenchmarkConfig b = c.benchmark;
  const ProblemInstance inst = make_instance(b, 3);
  const TimeSeriesMatrix s = standardize(inst.sample);
  for (auto m : c.methods) {
    const MethodScores ms = score_edges(s, 2, m, ScoringOptions::from(c), 9);
    EXPECT_EQ(ms.scores.dim(), 4);
    EXPECT_EQ(std::isfinite(ms.penalty), m == DiscoveryMethod::ridge) << to_string(m);
    const double auc = roc_curve(ms.scores, inst.truth).auc;
    EXPECT_GE(auc, 0.0);
    EXPECT_LE(auc, 1.0);
  }
}

TEST_F(ExperimentDir, WritesAllArtifacts) {
  const ExperimentConfig c = small_config();
  std::vector<std::string> progress;
  const ExperimentResult res = run_experiment(c, root_, [&](const std::string& m) { progress.push_back(m); });
  EXPECT_TRUE(res.ok());
  EXPECT_EQ(progress.size(), 4u);

  std::istringstream summary(slurp(root_ / "summary.csv"));
  std::string line;
  std::getline(summary, line);
  EXPECT_EQ(line, "regime,order,granger,ridge,lasso,group_lasso");
  int rows = 0;
  while (std::getline(summary, line)) {
    ++rows;
    EXPECT_EQ(line.find("n/a"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 2);

  for (const char* r : {"none", "white"})
    for (const char* m : {"granger", "ridge", "lasso", "group_lasso"}) {
      EXPECT_TRUE(fs::exists(root_ / "curves" / (std::string(r) + "_p2_" + m + ".csv"))) << r << m;
      for (const char* i : {"0", "1"}) {
        const fs::path dir = root_ / "instances" / r / i;
        EXPECT_TRUE(fs::exists(dir / (std::string("p2_") + m + "_scores.csv")));
        EXPECT_TRUE(fs::exists(dir / (std::string("p2_") + m + "_roc.csv")));
        EXPECT_TRUE(fs::exists(dir / "graph.json"));
      }
    }

  const auto manifest = io::read_json(root_ / "manifest.json");
  EXPECT_EQ(manifest.at("failed_cells").get<int>(), 0);
  EXPECT_EQ(manifest.at("cells").size(), 8u);
  EXPECT_EQ(manifest.at("seeds").at("white").at("regime_seed").get<std::uint64_t>(),
            regime_seed(2024, NoiseRegime::white));
  EXPECT_FALSE(manifest.at("config").at("experiment").contains("jobs"));
  for (const auto& cell : manifest.at("cells")) {
    for (const auto& inst : cell.at("instances")) {
      EXPECT_TRUE(inst.contains("auc"));
      EXPECT_EQ(inst.contains("lambda"), cell.at("method") == "ridge");
    }
  }
}

TEST_F(ExperimentDir, DeterministicAcrossRunsAndJobCounts) {
  ExperimentConfig c = small_config();
  run_experiment(c, root_ / "a");
  c.jobs = 3;
  run_experiment(c, root_ / "b");
  for (const char* f : {"summary.csv", "manifest.json", "curves/white_p2_ridge.csv", "instances/none/1/sample.csv",
                        "instances/white/0/p2_group_lasso_scores.csv"}) {
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
  }
}

TEST_F(ExperimentDir, RegimeSubsetReproducesInstances) {
  ExperimentConfig c = small_config();
  c.methods = {DiscoveryMethod::lasso};
  run_experiment(c, root_ / "both");
  c.regimes = {NoiseRegime::white};
  run_experiment(c, root_ / "white");
  EXPECT_EQ(slurp(root_ / "both/instances/white/1/sample.csv"), slurp(root_ / "white/instances/white/1/sample.csv"));
}

TEST_F(ExperimentDir, FailedCellsAreRecordedNotThrown) {
  ExperimentConfig c = small_config();
  c.methods = {DiscoveryMethod::granger, DiscoveryMethod::lasso};
  c.jackknife_blocks = 1000;  // more blocks than design rows
  const ExperimentResult res = run_experiment(c, root_);
  EXPECT_FALSE(res.ok());
  EXPECT_EQ(res.failed_cells, 4);
  const std::string summary = slurp(root_ / "summary.csv");
  EXPECT_NE(summary.find("none,2,n/a,"), std::string::npos) << summary;
  const auto manifest = io::read_json(root_ / "manifest.json");
  EXPECT_TRUE(manifest.at("cells")[0].at("instances")[0].contains("error"));
  EXPECT_TRUE(manifest.at("cells")[1].at("instances")[0].contains("auc"));
}

TEST_F(ExperimentDir, InvalidConfigThrowsBeforeWriting) {
  ExperimentConfig c = small_config();
  c.fit_orders = {};
  EXPECT_THROW(run_experiment(c, root_ / "x"), Error);
  EXPECT_FALSE(fs::exists(root_ / "x"));
}

// Command line behaviour, run against the built binary.

namespace {

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "sparsevar_cli_stdout.txt";
  const std::string cmd = env + " '" SPARSEVAR_CLI "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

}  // namespace

TEST_F(ExperimentDir, CliSubcommandsEndToEnd) {
  const std::string inst = (root_ / "inst").string();
  CliRun r = cli("simulate --regime white --index 1 --seed 7 --output '" + inst + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string sample = inst + "/sample.csv", graph = inst + "/graph.json";
  EXPECT_TRUE(fs::exists(sample));

  BenchmarkConfig b;
  b.noise_regime = NoiseRegime::white;
  b.master_seed = 7;
  EXPECT_EQ(io::read_matrix_csv(sample), make_instance(b, instance_seed(7, NoiseRegime::white, 1)).sample.data());

  r = cli("fit --input '" + sample + "' --method lasso --order 3 --lambda 20 --output '" + (root_ / "fit").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(io::read_json(root_ / "fit" / "fit.json").at("lambda").get<double>(), 20.0);
  EXPECT_EQ(io::read_coefficients(root_ / "fit", "coeffs").order(), 3);

  r = cli("test --input '" + sample + "' --order 2 --mc-samples 500 --output '" + (root_ / "test").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(io::read_test_report(root_ / "test").p_adjusted.rows(), 14);

  r = cli("granger --input '" + sample + "' --order 2 --blocks 5 --output '" + (root_ / "gr").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(io::read_matrix_csv(root_ / "gr" / "normalized.csv").rows(), 7);

  r = cli("evaluate --scores '" + (root_ / "test" / "edge_scores.csv").string() + "' --truth '" + graph +
          "' --output '" + (root_ / "roc.csv").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("AUC ", 0), 0u) << r.out;
  const double auc = std::stod(r.out.substr(4));
  EXPECT_NEAR(io::read_roc(root_ / "roc.csv").auc, auc, 1e-15);
}

TEST_F(ExperimentDir, CliExperimentAndOutputPrecedence) {
  const fs::path cfg = root_ / "small.cfg";
  std::ofstream(cfg) << "[benchmark]\nm = 4\nt = 300\np_true = 2\nn_edges = 3\nn_instances = 2\nnoise_regime = white\n"
                        "[experiment]\nmethods = lasso, granger\nfit_orders = 2\njackknife_blocks = 5\npath_points = 8\n"
                        "output_dir = "
                     << (root_ / "from_config").string() << "\n";
  CliRun r = cli("experiment --quiet --config '" + cfg.string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("regime,order,lasso,granger"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "from_config" / "summary.csv"));

  r = cli("experiment --quiet --config '" + cfg.string() + "'", "SPARSEVAR_OUTPUT_DIR='" + (root_ / "env").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(root_ / "env" / "summary.csv"));

  r = cli("experiment --quiet --jobs 2 --config '" + cfg.string() + "' --output '" + (root_ / "flag").string() + "'",
          "SPARSEVAR_OUTPUT_DIR='" + (root_ / "env2").string() + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(root_ / "flag" / "summary.csv"));
  EXPECT_FALSE(fs::exists(root_ / "env2"));
  EXPECT_EQ(slurp(root_ / "flag" / "summary.csv"), slurp(root_ / "from_config" / "summary.csv"));
  EXPECT_EQ(slurp(root_ / "flag" / "manifest.json"), slurp(root_ / "env" / "manifest.json"));
}

TEST_F(ExperimentDir, CliExitCodes) {
  const fs::path bad = root_ / "bad.cfg";
  std::ofstream(bad) << "[benchmark]\nsnr = loud\n";
  const fs::path failing = root_ / "failing.cfg";
  std::ofstream(failing) << "[benchmark]\nm = 3\nt = 200\nn_edges = 2\np_true = 1\nn_instances = 1\nnoise_regime = none\n"
                            "[experiment]\nmethods = granger\nfit_orders = 2\njackknife_blocks = 1000\n";

  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
  CliRun r = cli("experiment --config '" + bad.string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad.cfg:2"), std::string::npos) << r.out;
  EXPECT_EQ(cli("experiment --config /nonexistent.cfg").code, 2);
  EXPECT_EQ(cli("simulate --regime pink --output '" + (root_ / "x").string() + "'").code, 2);
  EXPECT_EQ(cli("experiment --jobs 0").code, 2);

  ASSERT_EQ(cli("simulate --output '" + (root_ / "inst").string() + "'").code, 0);
  const std::string sample = (root_ / "inst" / "sample.csv").string();
  EXPECT_EQ(cli("fit --input '" + sample + "' --method bayes").code, 2);
  EXPECT_EQ(cli("granger --input '" + sample + "' --mode sideways").code, 2);
  r = cli("fit --input '" + sample + "' --method ols --order 5000");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("invalid-order"), std::string::npos) << r.out;

  r = cli("experiment --quiet --config '" + failing.string() + "' --output '" + (root_ / "fail").string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("n/a"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(root_ / "fail" / "manifest.json"));
}
