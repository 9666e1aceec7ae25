#include "sketchdfo/bench.hpp"
#include "sketchdfo/solver.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace sketchdfo;

namespace {

int cmd_problems_list() {
  for (const auto& p : list_problems()) {
    std::cout << p.name << "\t" << p.dimension_rule << "\t" << p.formula << "\n";
  }
  return 0;
}

struct SolveArgs {
  std::string problem;
  Index n = 0;
  std::string solver = "sketch";
  std::uint64_t seed = 0;
  double budget = 200.0;
  std::optional<double> C;
  std::string estimator = "practical";
  std::string combine = "plain";
  std::string out;
  std::string bank_out;
  std::string json_out;
};

int cmd_solve(const SolveArgs& a) {
  const ProblemSpec prob = get_problem(a.problem, a.n);
  const long max_evals = static_cast<long>(a.budget * static_cast<double>(a.n + 1));
  SolverConfig cfg = bench::solver_preset(a.solver == "sketch" ? "sketch" : "baseline", prob, max_evals, a.seed);
  if (a.C) cfg.C = *a.C;
  if (a.estimator == "full") cfg.estimator = EstimatorMode::Full;
  if (a.combine == "gauss-newton") cfg.combine = CombineRule::GaussNewton;

  PointBank bank;
  const RunHistory h = run_solver(prob, prob.x0, cfg, a.bank_out.empty() ? nullptr : &bank);
  if (a.out.empty()) {
    h.write_csv(std::cout);
  } else {
    std::ofstream os(a.out);
    h.write_csv(os);
  }
  if (!a.bank_out.empty()) {
    std::ofstream os(a.bank_out);
    bank.write_csv(os);
  }
  if (!a.json_out.empty()) {
    std::ofstream os(a.json_out);
    os << h.to_json() << "\n";
  }
  std::cerr << "status=" << to_string(h.status) << " evals=" << h.evals << " f0=" << format_double(h.f0)
            << " f=" << format_double(h.f_final) << " f*=" << format_double(prob.f_star) << "\n";
  return 0;
}

int cmd_bench_run(const std::string& config, const std::string& out_override, int workers) {
  bench::CampaignConfig cfg = bench::CampaignConfig::load(config);
  if (!out_override.empty()) cfg.output = out_override;
  if (workers > 0) cfg.workers = workers;
  const auto res = bench::run_campaign(cfg, &std::cerr);
  std::size_t failed = 0;
  for (const auto& c : res.cells) failed += c.error.empty() ? 0 : 1;
  std::cerr << "cells=" << res.cells.size() << " resumed=" << res.resumed << " failed=" << failed
            << " output=" << res.directory.string() << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_bench_profile(const std::string& dir, double tau, const std::string& agg, const std::string& out) {
  const bench::ProfileTable t = bench::profile_from_summary(dir, tau, bench::parse_aggregation(agg));
  if (out.empty()) {
    t.write_csv(std::cout);
  } else {
    std::ofstream os(out);
    t.write_csv(os);
  }
  for (const auto& p : t.excluded) std::cerr << "excluded (no solver converged): " << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Basis-sketching trust-region DFO solver and benchmark harness"};
  app.require_subcommand(1);

  auto* problems = app.add_subcommand("problems", "Problem registry");
  problems->require_subcommand(1);
  auto* list = problems->add_subcommand("list", "List registered problems");

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Run one solver on one problem; history CSV to stdout");
  solve->add_option("--problem", sa.problem, "Problem name")->required();
  solve->add_option("--n", sa.n, "Dimension")->required();
  solve->add_option("--solver", sa.solver, "sketch or baseline")->check(CLI::IsMember({"sketch", "baseline"}));
  solve->add_option("--seed", sa.seed, "Random seed");
  solve->add_option("--budget", sa.budget, "Evaluation budget in units of n+1");
  solve->add_option("--C", sa.C, "Variance accuracy constant (default 0.01 sqrt(n))");
  solve->add_option("--estimator", sa.estimator, "practical or full")->check(CLI::IsMember({"practical", "full"}));
  solve->add_option("--combine", sa.combine, "plain or gauss-newton")->check(CLI::IsMember({"plain", "gauss-newton"}));
  solve->add_option("--out", sa.out, "Write history CSV here instead of stdout");
  solve->add_option("--bank-out", sa.bank_out, "Write every evaluated point as CSV");
  solve->add_option("--json", sa.json_out, "Write the run history as JSON");

  auto* bench = app.add_subcommand("bench", "Benchmark campaigns");
  bench->require_subcommand(1);
  std::string config, out_dir, profile_dir, agg = "median", profile_out;
  int workers = 0;
  double tau = 1e-3;
  auto* run = bench->add_subcommand("run", "Run a campaign");
  run->add_option("--config", config, "Campaign config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--workers", workers, "Override the worker count");
  auto* profile = bench->add_subcommand("profile", "Performance profile CSV from a results directory");
  profile->add_option("--dir", profile_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  profile->add_option("--tau", tau, "Convergence tolerance")->required();
  profile->add_option("--agg", agg, "median or worst")->check(CLI::IsMember({"median", "worst"}));
  profile->add_option("--out", profile_out, "Write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) return cmd_problems_list();
    if (solve->parsed()) return cmd_solve(sa);
    if (run->parsed()) return cmd_bench_run(config, out_dir, workers);
    if (profile->parsed()) return cmd_bench_profile(profile_dir, tau, agg, profile_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
