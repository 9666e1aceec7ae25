#pragma once

// Convergence metric, performance profiles, and the campaign runner that
// executes solver x problem x seed grids with resumable on-disk results.

#include "sketchdfo/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sketchdfo::bench {

/// Index (1-based) of the first evaluation with f <= f* + tau (f0 - f*),
/// divided by n + 1. +inf if none; 0 when f0 <= f*.
double convergence_metric(const std::vector<double>& eval_trace, double f0, double f_star, double tau, Index n);
double convergence_metric(const RunHistory& history, double f_star, double tau);

enum class Aggregation { Median, Worst };

Aggregation parse_aggregation(const std::string& s);
std::string to_string(Aggregation a);

/// Median (mean of the middle pair for even counts) or maximum; +inf propagates.
double aggregate(std::vector<double> values, Aggregation how);

/// 64 geometric points from 1 to 64.
std::vector<double> default_alpha_grid();

struct ProfileTable {
  std::vector<std::string> solvers;
  std::vector<std::string> problems;  // included problems
  std::vector<std::string> excluded;  // no solver reached the test
  std::vector<double> alpha;
  Matrix values;  // alpha.size() x solvers.size()

  /// Header "alpha,<solver>...".
  void write_csv(std::ostream& os) const;
};

/// n_values is problems x solvers. Problems with no finite entry are
/// excluded and do not count in the denominator.
ProfileTable performance_profile(const std::vector<std::string>& solvers, const std::vector<std::string>& problems,
                                 const Matrix& n_values, const std::vector<double>& alpha);

struct ProblemRef {
  std::string name;
  Index n = 0;

  std::string key() const { return name + ":" + std::to_string(n); }
};

struct CampaignConfig {
  std::vector<std::string> solvers;
  std::vector<ProblemRef> problems;
  std::vector<std::uint64_t> seeds;
  double budget = 200.0;  // evaluations per run = budget * (n + 1)
  std::vector<double> taus{1e-3};
  int workers = 1;
  std::filesystem::path output = "results";
  /// When set, a run stops once it meets the convergence test at this tau.
  std::optional<double> stop_tau;

  /// key = value lines; '#' starts a comment. Throws std::invalid_argument.
  static CampaignConfig parse(std::istream& is);
  static CampaignConfig load(const std::filesystem::path& file);
  void validate() const;
};

/// Known presets: sketch, sketch-full, baseline.
std::vector<std::string> solver_presets();
bool preset_is_deterministic(const std::string& preset);
SolverConfig solver_preset(const std::string& preset, const ProblemSpec& problem, long max_evals, std::uint64_t seed);

struct CellResult {
  std::string solver;
  ProblemRef problem;
  std::uint64_t seed = 0;
  double f0 = 0.0;
  double f_star = 0.0;
  double f_final = 0.0;
  long evals = 0;
  std::string status;
  std::vector<double> n_values;  // one per tau
  std::string hash;
  bool resumed = false;
  std::string error;
};

struct CampaignResult {
  std::vector<CellResult> cells;
  std::filesystem::path directory;
  std::size_t resumed = 0;
};

/// Writes runs/<cell>.history.csv, runs/<cell>.evals.csv, runs/<cell>.cell.json,
/// summary.json, metadata.json and profiles/profile_tau<t>_<agg>.csv under
/// cfg.output. Cells whose files already exist are loaded, not rerun.
CampaignResult run_campaign(const CampaignConfig& cfg, std::ostream* log = nullptr);

/// Profile recomputed from a results directory's summary.json.
ProfileTable profile_from_summary(const std::filesystem::path& dir, double tau, Aggregation how);

/// Problems x solvers table of aggregated N values for one tau index.
Matrix aggregate_table(const std::vector<CellResult>& cells, const std::vector<std::string>& solvers,
                       const std::vector<std::string>& problems, std::size_t tau_index, Aggregation how);

std::uint64_t fnv1a64(const std::string& s);
std::string format_tau(double tau);

}  // namespace sketchdfo::bench
