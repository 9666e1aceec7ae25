#include "sketchdfo/bench.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sketchdfo;
using namespace sketchdfo::bench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sketchdfo_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

CampaignConfig small_config(const fs::path& out) {
  CampaignConfig cfg;
  cfg.solvers = {"sketch"};
  cfg.problems = {{"sphere-shifted", 4}};
  cfg.seeds = {0};
  cfg.budget = 30;
  cfg.taus = {1e-3};
  cfg.output = out;
  return cfg;
}

std::size_t count_files(const fs::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string s = e.path().filename().string();
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) ++n;
  }
  return n;
}

void expect_profile_sane(const ProfileTable& t) {
  for (Index s = 0; s < t.values.cols(); ++s) {
    for (Index a = 0; a < t.values.rows(); ++a) {
      EXPECT_GE(t.values(a, s), 0.0);
      EXPECT_LE(t.values(a, s), 1.0);
      if (a > 0) EXPECT_GE(t.values(a, s), t.values(a - 1, s));
    }
  }
}

}  // namespace

TEST(ConvergenceMetric, Examples) {
  EXPECT_DOUBLE_EQ(convergence_metric({0.5, 0.1}, 10.0, 0.0, 0.1, 4), 1.0 / 5.0);
  EXPECT_TRUE(std::isinf(convergence_metric({10.0, 9.0, 8.0}, 10.0, 0.0, 1e-3, 2)));
  std::vector<double> trace(40, 5.0);
  trace[32] = 0.001;
  EXPECT_DOUBLE_EQ(convergence_metric(trace, 5.0, 0.0, 1e-3, 10), 3.0);
  EXPECT_EQ(convergence_metric({1.0}, 1.0, 1.0, 1e-3, 3), 0.0);
}

TEST(ConvergenceMetric, NonzeroOptimum) {
  // Threshold f* + tau (f0 - f*) = 2 + 0.1 * 8 = 2.8.
  EXPECT_DOUBLE_EQ(convergence_metric({10.0, 3.0, 2.8, 2.0}, 10.0, 2.0, 0.1, 1), 1.5);
}

TEST(Aggregate, MedianAndWorst) {
  EXPECT_EQ(aggregate({3.0, 1.0, 2.0}, Aggregation::Median), 2.0);
  EXPECT_EQ(aggregate({4.0, 1.0, 2.0, 3.0}, Aggregation::Median), 2.5);
  EXPECT_EQ(aggregate({4.0, 1.0, 2.0, 3.0}, Aggregation::Worst), 4.0);
  EXPECT_TRUE(std::isinf(aggregate({1.0, INFINITY}, Aggregation::Worst)));
  EXPECT_EQ(aggregate({1.0, 2.0, INFINITY}, Aggregation::Median), 2.0);
  EXPECT_TRUE(std::isinf(aggregate({1.0, INFINITY, INFINITY}, Aggregation::Median)));
  EXPECT_EQ(parse_aggregation("worst"), Aggregation::Worst);
  EXPECT_THROW(parse_aggregation("mean"), std::invalid_argument);
}

TEST(AlphaGrid, GeometricOneToSixtyFour) {
  const auto g = default_alpha_grid();
  ASSERT_EQ(g.size(), 64u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 64.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(64.0, 1.0 / 63.0), 1e-12);
}

TEST(PerformanceProfile, HandBuiltTable) {
  Matrix n(2, 2);
  n << 2, 4, 8, 4;  // rows are problems, columns solvers A and B
  const ProfileTable t = performance_profile({"A", "B"}, {"p1", "p2"}, n, {1.0, 2.0});
  EXPECT_EQ(t.values(0, 0), 0.5);
  EXPECT_EQ(t.values(0, 1), 0.5);
  EXPECT_EQ(t.values(1, 0), 1.0);
  EXPECT_EQ(t.values(1, 1), 1.0);
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "alpha,A,B\n1,0.5,0.5\n2,1,1\n");
}

TEST(PerformanceProfile, SingleSolverIsOne) {
  Matrix n(3, 1);
  n << 1, 7, 2;
  const ProfileTable t = performance_profile({"only"}, {"a", "b", "c"}, n, default_alpha_grid());
  EXPECT_TRUE(t.values.isOnes());
}

TEST(PerformanceProfile, InfinityNeverCounts) {
  Matrix n(3, 2);
  n << 1, INFINITY, INFINITY, INFINITY, 2, 1;
  const ProfileTable t = performance_profile({"A", "B"}, {"a", "b", "c"}, n, default_alpha_grid());
  ASSERT_EQ(t.excluded, (std::vector<std::string>{"b"}));
  ASSERT_EQ(t.problems.size(), 2u);
  EXPECT_EQ(t.values(0, 0), 0.5);
  EXPECT_EQ(t.values(0, 1), 0.5);
  EXPECT_EQ(t.values(63, 0), 1.0);
  EXPECT_EQ(t.values(63, 1), 0.5);
}

TEST(PerformanceProfile, RandomTablesAreMonotoneAndCoverWins) {
  CounterRng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Index np = 1 + t % 7, ns = 1 + t % 4;
    Matrix n(np, ns);
    for (Index i = 0; i < np; ++i)
      for (Index j = 0; j < ns; ++j) n(i, j) = rng.uniform() < 0.2 ? INFINITY : 1.0 + 20.0 * rng.uniform();
    std::vector<std::string> solvers, problems;
    for (Index j = 0; j < ns; ++j) solvers.push_back("s" + std::to_string(j));
    for (Index i = 0; i < np; ++i) problems.push_back("p" + std::to_string(i));
    const ProfileTable prof = performance_profile(solvers, problems, n, default_alpha_grid());
    expect_profile_sane(prof);
    if (!prof.problems.empty()) {
      // At alpha = 1 every included problem has at least one winner.
      EXPECT_GE(prof.values.row(0).sum() * static_cast<double>(prof.problems.size()),
                static_cast<double>(prof.problems.size()) - 1e-12);
    }
  }
}

TEST(PerformanceProfile, ShapeMismatchThrows) {
  EXPECT_THROW(performance_profile({"A"}, {"p"}, Matrix::Ones(2, 1), {1.0}), std::invalid_argument);
}

TEST(CampaignConfig, ParsesDocumentedKeys) {
  std::istringstream is(
      "# campaign\n"
      "solvers = sketch, baseline\n"
      "problems = extended-rosenbrock:10, sphere-shifted:5\n"
      "seeds = 0..2, 7\n"
      "budget = 50   # in units of n+1\n"
      "taus = 1e-1, 1e-3\n"
      "workers = 2\n"
      "output = out/dir\n"
      "stop_tau = 1e-3\n");
  const CampaignConfig cfg = CampaignConfig::parse(is);
  EXPECT_EQ(cfg.solvers, (std::vector<std::string>{"sketch", "baseline"}));
  ASSERT_EQ(cfg.problems.size(), 2u);
  EXPECT_EQ(cfg.problems[0].key(), "extended-rosenbrock:10");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2, 7}));
  EXPECT_EQ(cfg.budget, 50.0);
  EXPECT_EQ(cfg.taus, (std::vector<double>{1e-1, 1e-3}));
  EXPECT_EQ(cfg.workers, 2);
  EXPECT_EQ(cfg.output, fs::path("out/dir"));
  ASSERT_TRUE(cfg.stop_tau.has_value());
  EXPECT_EQ(*cfg.stop_tau, 1e-3);
}

TEST(CampaignConfig, DefaultSeedsAndErrors) {
  std::istringstream ok("solvers = sketch\nproblems = sphere-shifted:3\n");
  const CampaignConfig cfg = CampaignConfig::parse(ok);
  ASSERT_EQ(cfg.seeds.size(), 30u);
  EXPECT_EQ(cfg.seeds.back(), 29u);

  auto fails = [](const std::string& text) {
    std::istringstream is(text);
    EXPECT_THROW(CampaignConfig::parse(is), std::invalid_argument) << text;
  };
  fails("problems = sphere-shifted:3\n");
  fails("solvers = sketch\n");
  fails("solvers = nope\nproblems = sphere-shifted:3\n");
  fails("solvers = sketch\nproblems = sphere-shifted:3\ntaus = 1.5\n");
  fails("solvers = sketch\nproblems = sphere-shifted:3\ncolour = blue\n");
  fails("solvers = sketch\nproblems = extended-rosenbrock:3\n");
  fails("solvers = sketch\nproblems = sphere-shifted\n");
  fails("solvers = sketch\nproblems = sphere-shifted:3\nbudget = lots\n");
}

TEST(SolverPresets, Modes) {
  const ProblemSpec p = get_problem("sphere-shifted", 4);
  EXPECT_EQ(solver_preset("baseline", p, 100, 0).mode, SolverMode::DeterministicBaseline);
  EXPECT_EQ(solver_preset("sketch", p, 100, 0).estimator, EstimatorMode::Practical);
  EXPECT_EQ(solver_preset("sketch-full", p, 100, 0).estimator, EstimatorMode::Full);
  EXPECT_THROW(solver_preset("other", p, 100, 0), std::invalid_argument);
  EXPECT_TRUE(preset_is_deterministic("baseline"));
  EXPECT_FALSE(preset_is_deterministic("sketch"));
}

TEST(Fnv1a, KnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(format_tau(1e-3), "0.001");
  EXPECT_EQ(format_tau(1e-5), "1e-05");
}

TEST(Campaign, SingleCellAndResume) {
  const fs::path dir = fresh_dir("single");
  const CampaignConfig cfg = small_config(dir);
  const CampaignResult r = run_campaign(cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.cells[0].error.empty());
  EXPECT_EQ(count_files(dir / "runs", ".history.csv"), 1u);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "metadata.json"));
  EXPECT_TRUE(fs::exists(dir / "profiles" / "profile_tau0.001_median.csv"));
  EXPECT_TRUE(fs::exists(dir / "profiles" / "profile_tau0.001_worst.csv"));
  const std::string summary = slurp(dir / "summary.json");

  const CampaignResult again = run_campaign(cfg);
  EXPECT_EQ(again.resumed, 1u);
  EXPECT_TRUE(again.cells[0].resumed);
  EXPECT_EQ(again.cells[0].n_values, r.cells[0].n_values);
  EXPECT_EQ(slurp(dir / "summary.json"), summary);
  fs::remove_all(dir);
}

TEST(Campaign, HistoryMatchesDirectRun) {
  const fs::path dir = fresh_dir("direct");
  const CampaignConfig cfg = small_config(dir);
  const CampaignResult r = run_campaign(cfg);
  const ProblemSpec p = get_problem("sphere-shifted", 4);
  const RunHistory h = run_solver(p, p.x0, solver_preset("sketch", p, 30 * 5, 0));
  fs::path file;
  for (const auto& e : fs::directory_iterator(dir / "runs"))
    if (e.path().string().find(".history.csv") != std::string::npos) file = e.path();
  EXPECT_EQ(slurp(file), h.to_csv());
  EXPECT_EQ(r.cells[0].n_values[0], convergence_metric(h, p.f_star, 1e-3));
  fs::remove_all(dir);
}

TEST(Campaign, GridConsistencyAndDeterminism) {
  const fs::path d1 = fresh_dir("grid1"), d2 = fresh_dir("grid2");
  CampaignConfig cfg;
  cfg.solvers = {"sketch", "sketch-full"};
  cfg.problems = {{"sphere-shifted", 4}, {"extended-rosenbrock", 4}, {"broyden-tridiagonal", 4}};
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.budget = 20;
  cfg.taus = {1e-1, 1e-3};
  cfg.output = d1;
  const CampaignResult r1 = run_campaign(cfg);
  EXPECT_EQ(count_files(d1 / "runs", ".history.csv"), 30u);
  cfg.output = d2;
  cfg.workers = 3;
  run_campaign(cfg);
  EXPECT_EQ(slurp(d1 / "summary.json"), slurp(d2 / "summary.json"));

  std::vector<std::string> keys;
  for (const auto& p : cfg.problems) keys.push_back(p.key());
  for (std::size_t ti = 0; ti < cfg.taus.size(); ++ti) {
    for (Aggregation how : {Aggregation::Median, Aggregation::Worst}) {
      // Independent aggregation straight from the per-cell values.
      Matrix table(3, 2);
      for (Index p = 0; p < 3; ++p) {
        for (Index s = 0; s < 2; ++s) {
          std::vector<double> vals;
          for (const auto& c : r1.cells)
            if (c.solver == cfg.solvers[static_cast<std::size_t>(s)] && c.problem.key() == keys[static_cast<std::size_t>(p)])
              vals.push_back(c.n_values[ti]);
          std::sort(vals.begin(), vals.end());
          table(p, s) = how == Aggregation::Worst ? vals.back() : vals[vals.size() / 2];
        }
      }
      const ProfileTable expect = performance_profile(cfg.solvers, keys, table, default_alpha_grid());
      std::ostringstream os;
      expect.write_csv(os);
      const fs::path file = d1 / "profiles" / ("profile_tau" + format_tau(cfg.taus[ti]) + "_" + to_string(how) + ".csv");
      EXPECT_EQ(slurp(file), os.str());
      const ProfileTable from_summary = profile_from_summary(d1, cfg.taus[ti], how);
      EXPECT_TRUE(from_summary.values == expect.values);
      expect_profile_sane(from_summary);
    }
  }
  // A tau not in the summary is recomputed from the evaluation traces.
  const ProfileTable extra = profile_from_summary(d1, 1e-2, Aggregation::Median);
  expect_profile_sane(extra);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Campaign, SummaryHasNoTimestamps) {
  const fs::path dir = fresh_dir("stamps");
  run_campaign(small_config(dir));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_FALSE(summary.contains("started"));
  const auto meta = nlohmann::json::parse(slurp(dir / "metadata.json"));
  EXPECT_TRUE(meta.contains("started"));
  fs::remove_all(dir);
}

TEST(Campaign, DeterministicSolverRunsOnce) {
  const fs::path dir = fresh_dir("baseline_once");
  CampaignConfig cfg = small_config(dir);
  cfg.solvers = {"baseline"};
  cfg.seeds = {0, 1, 2};
  const CampaignResult r = run_campaign(cfg);
  EXPECT_EQ(r.cells.size(), 1u);
  fs::remove_all(dir);
}
