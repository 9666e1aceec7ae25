#include "sketchdfo/bench.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sketchdfo::bench {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
namespace fs = std::filesystem;
using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("campaign config: bad number '" + s + "' for " + key);
  }
}

long parse_long(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("campaign config: bad integer '" + s + "' for " + key);
  }
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double from_json_num(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct CellPlan {
  std::string solver;
  ProblemRef problem;
  std::uint64_t seed = 0;
  std::string stem;
  std::string hash;
};

std::string cell_descriptor(const CampaignConfig& cfg, const CellPlan& c) {
  std::ostringstream os;
  os << "sketchdfo-cell-v1|" << c.solver << '|' << c.problem.name << '|' << c.problem.n << '|' << c.seed << '|'
     << format_double(cfg.budget) << '|' << (cfg.stop_tau ? format_double(*cfg.stop_tau) : std::string("none"));
  return os.str();
}

void write_text(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, p);
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<double> read_eval_trace(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::vector<double> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return out;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<std::string> problem_keys(const CampaignConfig& cfg) {
  std::vector<std::string> keys;
  for (const auto& p : cfg.problems) keys.push_back(p.key());
  return keys;
}

}  // namespace

double convergence_metric(const std::vector<double>& eval_trace, double f0, double f_star, double tau, Index n) {
  if (f0 <= f_star) return 0.0;
  const double threshold = f_star + tau * (f0 - f_star);
  for (std::size_t i = 0; i < eval_trace.size(); ++i) {
    if (eval_trace[i] <= threshold) return static_cast<double>(i + 1) / static_cast<double>(n + 1);
  }
  return kInf;
}

double convergence_metric(const RunHistory& history, double f_star, double tau) {
  return convergence_metric(history.eval_trace, history.f0, f_star, tau, history.n);
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "median") return Aggregation::Median;
  if (s == "worst") return Aggregation::Worst;
  throw std::invalid_argument("aggregation must be 'median' or 'worst'");
}

std::string to_string(Aggregation a) { return a == Aggregation::Median ? "median" : "worst"; }

double aggregate(std::vector<double> values, Aggregation how) {
  if (values.empty()) return kInf;
  std::sort(values.begin(), values.end());
  if (how == Aggregation::Worst) return values.back();
  const std::size_t k = values.size();
  if (k % 2 == 1) return values[k / 2];
  const double a = values[k / 2 - 1];
  const double b = values[k / 2];
  if (std::isinf(a) || std::isinf(b)) return kInf;
  return 0.5 * (a + b);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(64);
  for (int i = 0; i < 64; ++i) grid[static_cast<std::size_t>(i)] = std::pow(64.0, i / 63.0);
  grid.front() = 1.0;
  grid.back() = 64.0;
  return grid;
}

void ProfileTable::write_csv(std::ostream& os) const {
  os << "alpha";
  for (const auto& s : solvers) os << ',' << s;
  os << '\n';
  for (std::size_t a = 0; a < alpha.size(); ++a) {
    os << format_double(alpha[a]);
    for (Index s = 0; s < values.cols(); ++s) os << ',' << format_double(values(static_cast<Index>(a), s));
    os << '\n';
  }
}

ProfileTable performance_profile(const std::vector<std::string>& solvers, const std::vector<std::string>& problems,
                                 const Matrix& n_values, const std::vector<double>& alpha) {
  if (n_values.rows() != static_cast<Index>(problems.size()) ||
      n_values.cols() != static_cast<Index>(solvers.size())) {
    throw std::invalid_argument("performance_profile: table shape mismatch");
  }
  ProfileTable t;
  t.solvers = solvers;
  t.alpha = alpha;
  std::vector<Index> included;
  std::vector<double> best;
  for (Index p = 0; p < n_values.rows(); ++p) {
    double b = kInf;
    for (Index s = 0; s < n_values.cols(); ++s) b = std::min(b, n_values(p, s));
    if (std::isfinite(b)) {
      included.push_back(p);
      best.push_back(b);
      t.problems.push_back(problems[static_cast<std::size_t>(p)]);
    } else {
      t.excluded.push_back(problems[static_cast<std::size_t>(p)]);
    }
  }
  t.values = Matrix::Zero(static_cast<Index>(alpha.size()), static_cast<Index>(solvers.size()));
  if (included.empty()) return t;
  const double denom = static_cast<double>(included.size());
  for (std::size_t a = 0; a < alpha.size(); ++a) {
    for (Index s = 0; s < n_values.cols(); ++s) {
      int count = 0;
      for (std::size_t i = 0; i < included.size(); ++i) {
        const double v = n_values(included[i], s);
        if (std::isfinite(v) && v <= alpha[a] * best[i]) ++count;
      }
      t.values(static_cast<Index>(a), s) = count / denom;
    }
  }
  return t;
}

CampaignConfig CampaignConfig::parse(std::istream& is) {
  CampaignConfig cfg;
  cfg.seeds.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("campaign config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "solvers") {
      cfg.solvers = split_list(value);
    } else if (key == "problems") {
      cfg.problems.clear();
      for (const auto& item : split_list(value)) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw std::invalid_argument("campaign config: problem '" + item + "' needs :n");
        cfg.problems.push_back({trim(item.substr(0, colon)), parse_long(trim(item.substr(colon + 1)), key)});
      }
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& item : split_list(value)) {
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
          const long lo = parse_long(trim(item.substr(0, dots)), key);
          const long hi = parse_long(trim(item.substr(dots + 2)), key);
          if (lo < 0 || hi < lo) throw std::invalid_argument("campaign config: bad seed range '" + item + "'");
          for (long s = lo; s <= hi; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
          const long s = parse_long(item, key);
          if (s < 0) throw std::invalid_argument("campaign config: seeds must be nonnegative");
          cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        }
      }
    } else if (key == "budget") {
      cfg.budget = parse_double(value, key);
    } else if (key == "taus") {
      cfg.taus.clear();
      for (const auto& item : split_list(value)) cfg.taus.push_back(parse_double(item, key));
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(parse_long(value, key));
    } else if (key == "output") {
      cfg.output = value;
    } else if (key == "stop_tau") {
      if (value == "none" || value.empty()) {
        cfg.stop_tau.reset();
      } else {
        cfg.stop_tau = parse_double(value, key);
      }
    } else {
      throw std::invalid_argument("campaign config: unknown key '" + key + "'");
    }
  }
  if (cfg.seeds.empty()) {
    for (std::uint64_t s = 0; s < 30; ++s) cfg.seeds.push_back(s);
  }
  cfg.validate();
  return cfg;
}

CampaignConfig CampaignConfig::load(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw std::invalid_argument("cannot open campaign config " + file.string());
  return parse(is);
}

void CampaignConfig::validate() const {
  if (solvers.empty()) throw std::invalid_argument("campaign config: solvers is empty");
  if (problems.empty()) throw std::invalid_argument("campaign config: problems is empty");
  if (seeds.empty()) throw std::invalid_argument("campaign config: seeds is empty");
  if (taus.empty()) throw std::invalid_argument("campaign config: taus is empty");
  for (double t : taus) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("campaign config: taus must lie in (0, 1)");
  }
  if (stop_tau && !(*stop_tau > 0.0 && *stop_tau < 1.0)) {
    throw std::invalid_argument("campaign config: stop_tau must lie in (0, 1)");
  }
  if (!(budget >= 1.0)) throw std::invalid_argument("campaign config: budget must be >= 1");
  if (workers < 1) throw std::invalid_argument("campaign config: workers must be >= 1");
  const auto presets = solver_presets();
  for (const auto& s : solvers) {
    if (std::find(presets.begin(), presets.end(), s) == presets.end()) {
      throw std::invalid_argument("campaign config: unknown solver '" + s + "'");
    }
  }
  for (const auto& p : problems) get_problem(p.name, p.n);
}

std::vector<std::string> solver_presets() { return {"sketch", "sketch-full", "baseline"}; }

bool preset_is_deterministic(const std::string& preset) { return preset == "baseline"; }

SolverConfig solver_preset(const std::string& preset, const ProblemSpec& problem, long max_evals, std::uint64_t seed) {
  const double delta0 = SolverConfig::default_delta0(problem.x0);
  SolverConfig cfg = SolverConfig::defaults(problem.n, delta0, max_evals);
  cfg.seed = seed;
  if (preset == "sketch") {
    cfg.mode = SolverMode::Sketching;
    cfg.estimator = EstimatorMode::Practical;
  } else if (preset == "sketch-full") {
    cfg.mode = SolverMode::Sketching;
    cfg.estimator = EstimatorMode::Full;
  } else if (preset == "baseline") {
    cfg.mode = SolverMode::DeterministicBaseline;
  } else {
    throw std::invalid_argument("unknown solver preset '" + preset + "'");
  }
  return cfg;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_tau(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return buf;
}

Matrix aggregate_table(const std::vector<CellResult>& cells, const std::vector<std::string>& solvers,
                       const std::vector<std::string>& problems, std::size_t tau_index, Aggregation how) {
  Matrix t = Matrix::Constant(static_cast<Index>(problems.size()), static_cast<Index>(solvers.size()), kInf);
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (std::size_t s = 0; s < solvers.size(); ++s) {
      std::vector<double> vals;
      for (const auto& c : cells) {
        if (c.solver == solvers[s] && c.problem.key() == problems[p] && tau_index < c.n_values.size()) {
          vals.push_back(c.n_values[tau_index]);
        }
      }
      t(static_cast<Index>(p), static_cast<Index>(s)) = aggregate(vals, how);
    }
  }
  return t;
}

CampaignResult run_campaign(const CampaignConfig& cfg, std::ostream* log) {
  cfg.validate();
  const std::string started = iso_now();
  const fs::path dir = cfg.output;
  fs::create_directories(dir / "runs");
  fs::create_directories(dir / "profiles");

  std::vector<CellPlan> plan;
  for (const auto& solver : cfg.solvers) {
    for (const auto& prob : cfg.problems) {
      const std::size_t nseeds = preset_is_deterministic(solver) ? 1 : cfg.seeds.size();
      for (std::size_t si = 0; si < nseeds; ++si) {
        CellPlan c;
        c.solver = solver;
        c.problem = prob;
        c.seed = cfg.seeds[si];
        c.hash = hex16(fnv1a64(cell_descriptor(cfg, c)));
        c.stem = solver + "__" + prob.name + "-n" + std::to_string(prob.n) + "__seed" + std::to_string(c.seed) +
                 "__" + c.hash;
        plan.push_back(std::move(c));
      }
    }
  }

  CampaignResult result;
  result.directory = dir;
  result.cells.resize(plan.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> resumed{0};

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      const CellPlan& c = plan[i];
      CellResult& out = result.cells[i];
      out.solver = c.solver;
      out.problem = c.problem;
      out.seed = c.seed;
      out.hash = c.hash;
      const fs::path hist_path = dir / "runs" / (c.stem + ".history.csv");
      const fs::path eval_path = dir / "runs" / (c.stem + ".evals.csv");
      const fs::path cell_path = dir / "runs" / (c.stem + ".cell.json");
      try {
        const ProblemSpec prob = get_problem(c.problem.name, c.problem.n);
        out.f_star = prob.f_star;
        std::vector<double> trace;
        if (fs::exists(cell_path) && fs::exists(hist_path) && fs::exists(eval_path)) {
          const json cj = json::parse(read_text(cell_path));
          out.f0 = from_json_num(cj.at("f0"));
          out.f_final = from_json_num(cj.at("f_final"));
          out.evals = cj.at("evals").get<long>();
          out.status = cj.at("status").get<std::string>();
          trace = read_eval_trace(eval_path);
          out.resumed = true;
          ++resumed;
        } else {
          const long max_evals = static_cast<long>(std::llround(cfg.budget * static_cast<double>(prob.n + 1)));
          SolverConfig scfg = solver_preset(c.solver, prob, max_evals, c.seed);
          if (cfg.stop_tau) {
            const double f0 = prob.objective(prob.x0);
            scfg.f_target = prob.f_star + *cfg.stop_tau * (f0 - prob.f_star);
          }
          const RunHistory h = run_solver(prob, prob.x0, scfg);
          out.f0 = h.f0;
          out.f_final = h.f_final;
          out.evals = h.evals;
          out.status = to_string(h.status);
          trace = h.eval_trace;
          std::ostringstream hs;
          h.write_csv(hs);
          write_text(hist_path, hs.str());
          std::ostringstream es;
          h.write_eval_trace(es);
          write_text(eval_path, es.str());
          json cj{{"solver", c.solver}, {"problem", c.problem.name}, {"n", c.problem.n}, {"seed", c.seed},
                  {"f0", num(out.f0)}, {"f_final", num(out.f_final)}, {"evals", out.evals},
                  {"status", out.status}, {"hash", c.hash}};
          write_text(cell_path, cj.dump(2) + "\n");
        }
        for (double tau : cfg.taus) {
          out.n_values.push_back(convergence_metric(trace, out.f0, out.f_star, tau, c.problem.n));
        }
      } catch (const std::exception& e) {
        out.error = e.what();
        out.n_values.assign(cfg.taus.size(), kInf);
      }
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << "[" << (i + 1) << "/" << plan.size() << "] " << c.stem << (out.resumed ? " (resumed)" : "")
             << (out.error.empty() ? "" : " error: " + out.error) << '\n';
      }
    }
  };

  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(plan.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  result.resumed = resumed.load();

  // Summary: deterministic content only.
  json summary;
  summary["solvers"] = cfg.solvers;
  summary["problems"] = problem_keys(cfg);
  summary["seeds"] = cfg.seeds;
  summary["budget"] = cfg.budget;
  summary["taus"] = cfg.taus;
  summary["stop_tau"] = cfg.stop_tau ? json(*cfg.stop_tau) : json(nullptr);
  json cells = json::array();
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    json nv = json::object();
    for (std::size_t t = 0; t < cfg.taus.size(); ++t) nv[format_tau(cfg.taus[t])] = num(c.n_values[t]);
    cells.push_back({{"solver", c.solver}, {"problem", c.problem.name}, {"n", c.problem.n}, {"seed", c.seed},
                     {"f0", num(c.f0)}, {"f_star", c.f_star}, {"f_final", num(c.f_final)}, {"evals", c.evals},
                     {"status", c.status}, {"N", nv}, {"stem", plan[i].stem}, {"error", c.error}});
  }
  summary["cells"] = std::move(cells);
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  const auto keys = problem_keys(cfg);
  const auto alpha = default_alpha_grid();
  for (std::size_t t = 0; t < cfg.taus.size(); ++t) {
    for (Aggregation how : {Aggregation::Median, Aggregation::Worst}) {
      const ProfileTable prof = performance_profile(cfg.solvers, keys, aggregate_table(result.cells, cfg.solvers, keys, t, how), alpha);
      std::ostringstream os;
      prof.write_csv(os);
      write_text(dir / "profiles" / ("profile_tau" + format_tau(cfg.taus[t]) + "_" + to_string(how) + ".csv"),
                 os.str());
    }
  }

  json meta{{"started", started}, {"finished", iso_now()}, {"workers", cfg.workers},
            {"cells", result.cells.size()}, {"resumed", result.resumed}};
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  return result;
}

ProfileTable profile_from_summary(const fs::path& dir, double tau, Aggregation how) {
  const json summary = json::parse(read_text(dir / "summary.json"));
  const auto solvers = summary.at("solvers").get<std::vector<std::string>>();
  const auto problems = summary.at("problems").get<std::vector<std::string>>();
  const auto taus = summary.at("taus").get<std::vector<double>>();
  std::optional<std::string> tau_key;
  for (double t : taus) {
    if (std::abs(t - tau) <= 1e-12 * std::abs(tau)) tau_key = format_tau(t);
  }

  std::vector<CellResult> cells;
  for (const auto& cj : summary.at("cells")) {
    CellResult c;
    c.solver = cj.at("solver").get<std::string>();
    c.problem = {cj.at("problem").get<std::string>(), cj.at("n").get<Index>()};
    c.f0 = from_json_num(cj.at("f0"));
    c.f_star = cj.at("f_star").get<double>();
    if (tau_key) {
      c.n_values.push_back(from_json_num(cj.at("N").at(*tau_key)));
    } else {
      const fs::path eval_path = dir / "runs" / (cj.at("stem").get<std::string>() + ".evals.csv");
      double v = kInf;
      if (fs::exists(eval_path)) v = convergence_metric(read_eval_trace(eval_path), c.f0, c.f_star, tau, c.problem.n);
      c.n_values.push_back(v);
    }
    cells.push_back(std::move(c));
  }
  return performance_profile(solvers, problems, aggregate_table(cells, solvers, problems, 0, how),
                             default_alpha_grid());
}

}  // namespace sketchdfo::bench
