#include "sketchdfo/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace sketchdfo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_k w_k u_k u_k^T for the rows u_k of U.
Matrix weighted_outer(const Matrix& u, const Vector& w) {
  return u.transpose() * w.asDiagonal() * u;
}

struct CombinedWeights {
  Vector gradient;  // multiplies g_i
  Vector hessian;   // multiplies H_i
  double outer = 1.0;
};

CombinedWeights weights_for(const Vector& f, CombineRule rule) {
  CombinedWeights w;
  if (rule == CombineRule::Plain) {
    w.gradient = f;
    w.hessian = Vector::Ones(f.size());
    w.outer = 1.0;
  } else {
    w.gradient = 2.0 * f;
    w.hessian = 2.0 * f;
    w.outer = 2.0;
  }
  return w;
}

class Runner {
 public:
  Runner(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg, bool baseline)
      : problem_(problem), cfg_(cfg), baseline_(baseline), x_(x0), n_(x0.size()),
        oracle_(problem, cfg.max_evals > 0 ? std::optional<long>(cfg.max_evals) : std::nullopt),
        bank_(x0.size()), rng_(cfg.seed) {}

  RunHistory run(PointBank* bank_out) {
    hist_.n = n_;
    try {
      loop();
    } catch (const BudgetExhausted&) {
      hist_.status = RunStatus::BudgetExhausted;
    }
    hist_.x_final = x_;
    hist_.f_final = f_;
    hist_.evals = bank_.eval_count();
    if (bank_out) *bank_out = std::move(bank_);
    return std::move(hist_);
  }

 private:
  Index evaluate(const Vector& y) {
    const Vector r = oracle_.evaluate(y);
    const Index idx = bank_.append(y, r);
    const double total = bank_[idx].total;
    hist_.eval_trace.push_back(total);
    if (cfg_.f_target && total <= *cfg_.f_target) target_hit_ = true;
    return idx;
  }

  void loop() {
    const InitResult init = init_average_gradient_impl();
    if (hist_.status == RunStatus::InitialPointFailed) return;
    avg_ = init.averages;
    x_index_ = init.center_index;
    hist_.m = avg_.count();
    double delta = cfg_.tr.delta0;
    const Index cap = cfg_.max_interpolation_points > 0
                          ? cfg_.max_interpolation_points
                          : std::min<Index>(2 * n_ + 1, (n_ + 1) * (n_ + 2) / 2);

    for (long k = 0;; ++k) {
      if (target_hit_) {
        hist_.status = RunStatus::TargetReached;
        return;
      }
      IterationRecord rec;
      rec.k = k;
      rec.delta = delta;

      const SubspaceSelection sel = identify_initial_subspace(bank_, x_, delta, cfg_.geo);
      const Index s0 = sel.rank();
      rec.subspace_rank = s0;
      const CombinedWeights wts = weights_for(fx_, cfg_.combine);
      const Vector gbar_c = avg_.G * wts.gradient;

      Vector pi;
      if (baseline_) {
        rec.p_k = n_;
        pi = Vector::Ones(n_);
      } else {
        const SketchSizeChoice choice = choose_sketch_size(delta, sel.Q, cfg_.C, gbar_c, cfg_.b0);
        rec.p_k = choice.p;
        pi = choice.probs.pi;
      }
      std::vector<Index> J;
      if (baseline_) {
        for (Index i = 0; i < n_; ++i) J.push_back(i);
      } else {
        J = realize_subset(pi, rng_).J;
      }
      rec.J_size = static_cast<Index>(J.size());
      const bool zero_variance = static_cast<Index>(J.size()) == n_ && pi.minCoeff() >= 1.0;

      // Evaluate along realized directions the bank does not already cover.
      std::vector<Index> new_points;
      std::vector<Index> new_dirs;
      for (Index j : J) {
        if (j < s0) continue;
        const Index idx = evaluate(x_ + delta * sel.Q.col(j));
        if (bank_[idx].finite()) {
          new_points.push_back(idx);
          new_dirs.push_back(j);
        }
      }
      // Directions whose evaluation failed carry no information; treat them as unsampled.
      std::erase_if(J, [&](Index j) { return j >= s0 && std::find(new_dirs.begin(), new_dirs.end(), j) == new_dirs.end(); });

      const bool identity_basis = zero_variance && s0 + static_cast<Index>(new_dirs.size()) == n_;
      Matrix s_model;
      Matrix s_perp;
      if (identity_basis) {
        s_model = Matrix::Identity(n_, n_);
        s_perp = Matrix(0, n_);
      } else {
        std::vector<char> used(static_cast<std::size_t>(n_), 0);
        std::vector<Index> rows;
        for (Index j = 0; j < s0; ++j) rows.push_back(j);
        for (Index j : new_dirs) rows.push_back(j);
        for (Index j : rows) used[static_cast<std::size_t>(j)] = 1;
        s_model = sketch_rows(sel.Q, rows);
        std::vector<Index> rest;
        for (Index j = 0; j < n_; ++j) {
          if (!used[static_cast<std::size_t>(j)]) rest.push_back(j);
        }
        s_perp = sketch_rows(sel.Q, rest);
      }

      std::vector<Index> z{x_index_};
      z.insert(z.end(), sel.contributing_points.begin(), sel.contributing_points.end());
      z.insert(z.end(), new_points.begin(), new_points.end());

      InterpolationSet yset = determine_interpolation_set(s_model, s_perp, z, bank_, x_, delta, cfg_.geo, cap);
      Matrix u = yset.displacements(bank_, x_, delta);
      std::optional<BasisSketchSystem> sys;
      try {
        sys.emplace(s_model, s_perp, u);
      } catch (const PoisednessError&) {
        rec.poisedness_fallback = true;
        yset.points = z;
        u = yset.displacements(bank_, x_, delta);
        try {
          sys.emplace(s_model, s_perp, u);
        } catch (const PoisednessError&) {
          sys.reset();
        }
      }
      rec.interpolation_size = u.rows();

      if (!sys) {
        // No solvable model this iteration: shrink and retry.
        rec.rho = -kInf;
        const double next = cfg_.tr.nu1 * delta;
        finish_record(rec, false);
        if (stop_for_radius(next, kInf)) return;
        delta = next;
        continue;
      }

      // Right-hand sides relative to f(x), residualized by the average-Hessian prior.
      const Index P = u.rows();
      Matrix rhs(P, avg_.count());
      for (Index r = 0; r < P; ++r) {
        rhs.row(r) = (bank_[yset.points[static_cast<std::size_t>(r)]].residuals - fx_).transpose();
      }
      const Matrix mq = assemble_vandermonde(BasisSpec::quadratic_only(), u);
      const double d2 = delta * delta;
      rhs.noalias() -= d2 * (mq * avg_.B);
      const BasisSketchSystem::Batch batch = sys->solve(rhs);
      const Matrix& lambda = batch.lambda;

      // Component gradients on the model subspace, in x units.
      const Matrix g_hat = s_model.transpose() * batch.alpha.bottomRows(s_model.rows()) / delta;

      // Combined model pieces. H_hat_i = H_bar_i + 1/2 Delta^-2 sum_k lambda_ki u_k u_k^T.
      const Vector g_hat_c = g_hat * wts.gradient;
      const Matrix h_bar_sum = unpack_hessian(avg_.B * wts.hessian, n_);
      const Matrix h_bar_c = wts.outer * (avg_.G * avg_.G.transpose()) + h_bar_sum;
      const Matrix h_hat_c = wts.outer * (g_hat * g_hat.transpose()) + h_bar_sum +
                             (0.5 / d2) * weighted_outer(u, lambda * wts.hessian);

      Vector d = Vector::Zero(n_);
      double pred = 0.0;
      double g_tilde_norm = 0.0;
      Matrix s_k;
      if (identity_basis) {
        const StepResult step = solve_trsp(g_hat_c, h_hat_c, delta);
        d = step.d;
        pred = step.predicted_reduction;
        g_tilde_norm = g_hat_c.norm();
      } else if (!J.empty()) {
        s_k = sketch_rows(sel.Q, J);
        Vector w(static_cast<Index>(J.size()));
        for (std::size_t r = 0; r < J.size(); ++r) w(static_cast<Index>(r)) = 1.0 / pi(J[r]);
        if (cfg_.estimator == EstimatorMode::Practical) {
          const Vector g_sub = w.cwiseProduct(s_k * g_hat_c);
          const Matrix hb = s_k * h_bar_c * s_k.transpose();
          const Matrix hh = s_k * h_hat_c * s_k.transpose();
          const Matrix h_sub = hb - w.asDiagonal() * hb * w.asDiagonal() + w.asDiagonal() * hh * w.asDiagonal();
          const StepResult step = solve_trsp(g_sub, h_sub, delta);
          d = s_k.transpose() * step.d;
          pred = step.predicted_reduction;
          g_tilde_norm = g_sub.norm();
        } else {
          const Vector g_tilde = ameliorated_gradient(gbar_c, sel.Q, J, pi, g_hat_c, EstimatorMode::Full);
          const StepResult step = solve_trsp(g_tilde, h_hat_c, delta);
          d = step.d;
          pred = step.predicted_reduction;
          g_tilde_norm = g_tilde.norm();
        }
      } else if (cfg_.estimator == EstimatorMode::Full) {
        const StepResult step = solve_trsp(gbar_c, h_hat_c, delta);
        d = step.d;
        pred = step.predicted_reduction;
        g_tilde_norm = gbar_c.norm();
      }
      rec.g_tilde_norm = g_tilde_norm;

      // Sketch-and-project updates of the per-component averages on span(S_k).
      if (identity_basis) {
        avg_.G = g_hat;
        avg_.B.noalias() += (1.0 / d2) * (mq.transpose() * lambda);
      } else if (s_k.rows() > 0) {
        avg_.G += s_k.transpose() * (s_k * (g_hat - avg_.G));
        const Matrix z = u * s_k.transpose();
        const double ps = static_cast<double>(s_k.rows());
        const double direct_cost = static_cast<double>(quadratic_count(n_)) * static_cast<double>(P);
        const double sub_cost = static_cast<double>(P) * ps * ps + static_cast<double>(n_ * n_) * ps;
        if (sub_cost < direct_cost) {
          // sum_r lambda_ri phi_Q(S^T z_r) = pack(1/2 S^T (sum_r lambda_ri z_r z_r^T) S).
          for (Index i = 0; i < avg_.count(); ++i) {
            const Matrix mi = z.transpose() * lambda.col(i).asDiagonal() * z;
            avg_.B.col(i) += (0.5 / d2) * pack_hessian(s_k.transpose() * mi * s_k);
          }
        } else {
          const Matrix mq_p = assemble_vandermonde(BasisSpec::quadratic_only(), z * s_k);
          avg_.B.noalias() += (1.0 / d2) * (mq_p.transpose() * lambda);
        }
      }

      // Trial point.
      double rho = -kInf;
      Index trial = -1;
      if (pred > 0.0) {
        trial = evaluate(x_ + d);
        rho = acceptance_ratio(f_, bank_[trial].total, pred);
      }
      rec.rho = rho;
      const bool accepted = trial >= 0 && rho >= cfg_.tr.eta1;
      const double reference = cfg_.growth == GrowthTest::Radius ? delta : gbar_c.norm();
      const double next = update_radius(rho, delta, g_tilde_norm, cfg_.tr, reference);
      if (accepted) {
        x_ = bank_[trial].point;
        x_index_ = trial;
        fx_ = bank_[trial].residuals;
        f_ = bank_[trial].total;
        avg_.f = fx_;
      }
      finish_record(rec, accepted);
      if (target_hit_) {
        hist_.status = RunStatus::TargetReached;
        return;
      }
      if (stop_for_radius(next, g_tilde_norm)) return;
      delta = next;
    }
  }

  bool stop_for_radius(double next, double g_tilde_norm) {
    if (next < cfg_.delta_min) {
      hist_.status = RunStatus::SmallRadius;
      return true;
    }
    if (g_tilde_norm < cfg_.g_min && next < 10.0 * cfg_.delta_min) {
      hist_.status = RunStatus::SmallGradient;
      return true;
    }
    return false;
  }

  void finish_record(IterationRecord& rec, bool accepted) {
    rec.accepted = accepted;
    rec.x = x_;
    rec.f = f_;
    rec.evals = bank_.eval_count();
    hist_.records.push_back(std::move(rec));
  }

  InitResult init_average_gradient_impl() {
    InitResult out = init_average_gradient(oracle_, bank_, x_, cfg_.tr.delta0, cfg_.init);
    for (const BankEntry& e : bank_.entries()) {
      hist_.eval_trace.push_back(e.total);
      if (cfg_.f_target && e.total <= *cfg_.f_target) target_hit_ = true;
    }
    hist_.f0 = bank_[out.center_index].total;
    f_ = hist_.f0;
    fx_ = out.averages.f;
    if (!bank_[out.center_index].finite()) hist_.status = RunStatus::InitialPointFailed;
    return out;
  }

  const ProblemSpec& problem_;
  const SolverConfig& cfg_;
  bool baseline_;
  Vector x_;
  Index n_;
  CountingOracle oracle_;
  PointBank bank_;
  CounterRng rng_;
  RunHistory hist_;
  ComponentModelSet avg_;
  Vector fx_;
  double f_ = 0.0;
  Index x_index_ = 0;
  bool target_hit_ = false;
};

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::SmallRadius: return "small_radius";
    case RunStatus::SmallGradient: return "small_gradient";
    case RunStatus::TargetReached: return "target_reached";
    case RunStatus::InitialPointFailed: return "initial_point_failed";
  }
  return "unknown";
}

double SolverConfig::default_delta0(const Vector& x0) {
  const double inf_norm = x0.size() > 0 ? x0.cwiseAbs().maxCoeff() : 0.0;
  return 0.1 * std::max(1.0, inf_norm);
}

SolverConfig SolverConfig::defaults(Index n, double delta0, long max_evals) {
  SolverConfig cfg;
  cfg.tr = TrustRegionConfig::defaults(delta0);
  cfg.geo = GeometryConfig::defaults(n);
  cfg.C = 0.01 * std::sqrt(static_cast<double>(n));
  cfg.b0 = 1;
  cfg.max_evals = max_evals;
  cfg.delta_min = 1e-7 * delta0;
  cfg.g_min = 1e-8;
  return cfg;
}

void SolverConfig::validate(Index n) const {
  tr.validate();
  geo.validate();
  if (C < 0.0) throw std::invalid_argument("SolverConfig: C must be nonnegative");
  if (b0 < 1 || b0 > n) throw std::invalid_argument("SolverConfig: b0 must lie in [1, n]");
  if (max_evals > 0 && max_evals < n + 1) throw std::invalid_argument("SolverConfig: budget below n + 1");
  if (max_interpolation_points != 0 && max_interpolation_points < n + 1) {
    throw std::invalid_argument("SolverConfig: interpolation cap below n + 1");
  }
}

QuadraticModel combine_least_squares_model(const ComponentModelSet& models, const Vector& center,
                                           CombineRule rule) {
  const CombinedWeights w = weights_for(models.f, rule);
  const Index n = models.dim();
  const Vector g = models.G * w.gradient;
  const Matrix h = w.outer * (models.G * models.G.transpose()) + unpack_hessian(models.B * w.hessian, n);
  return QuadraticModel::make(center, models.f.squaredNorm(), g, h);
}

InitResult init_average_gradient(CountingOracle& oracle, PointBank& bank, const Vector& x0, double delta0,
                                 GradientInit init) {
  const Index n = x0.size();
  if (oracle.budget() && *oracle.budget() - oracle.count() < n + 1) {
    throw BudgetExhausted("init_average_gradient: budget below n + 1");
  }
  InitResult out;
  const Vector r0 = oracle.evaluate(x0);
  out.center_index = bank.append(x0, r0);
  const Index m = r0.size();
  out.averages.f = r0;
  out.averages.G = Matrix::Zero(n, m);
  out.averages.B = Matrix::Zero(quadratic_count(n), m);
  for (Index i = 0; i < n; ++i) {
    Vector y = x0;
    y(i) += delta0;
    const Vector r = oracle.evaluate(y);
    bank.append(y, r);
    if (init == GradientInit::SimplexGradient && r.allFinite()) {
      out.averages.G.row(i) = ((r - r0) / delta0).transpose();
    }
  }
  return out;
}

RunHistory run_basis_sketching(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg,
                               PointBank* bank_out) {
  cfg.validate(x0.size());
  Runner runner(problem, x0, cfg, false);
  return runner.run(bank_out);
}

RunHistory run_deterministic_baseline(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg,
                                      PointBank* bank_out) {
  cfg.validate(x0.size());
  Runner runner(problem, x0, cfg, true);
  return runner.run(bank_out);
}

RunHistory run_solver(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg, PointBank* bank_out) {
  return cfg.mode == SolverMode::DeterministicBaseline ? run_deterministic_baseline(problem, x0, cfg, bank_out)
                                                       : run_basis_sketching(problem, x0, cfg, bank_out);
}

void RunHistory::write_csv(std::ostream& os) const {
  os << "k,f,delta,rho,p_k,J_size,evals,accepted\n";
  for (const auto& r : records) {
    os << r.k << ',' << format_double(r.f) << ',' << format_double(r.delta) << ',' << format_double(r.rho) << ','
       << r.p_k << ',' << r.J_size << ',' << r.evals << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

std::string RunHistory::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

void RunHistory::write_eval_trace(std::ostream& os) const {
  os << "eval,f\n";
  for (std::size_t i = 0; i < eval_trace.size(); ++i) os << i + 1 << ',' << format_double(eval_trace[i]) << '\n';
}

std::string RunHistory::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["n"] = n;
  j["m"] = m;
  j["f0"] = num(f0);
  j["f_final"] = num(f_final);
  j["evals"] = evals;
  j["status"] = to_string(status);
  j["x_final"] = std::vector<double>(x_final.data(), x_final.data() + x_final.size());
  nlohmann::json its = nlohmann::json::array();
  for (const auto& r : records) {
    its.push_back({{"k", r.k},
                   {"f", num(r.f)},
                   {"delta", num(r.delta)},
                   {"rho", num(r.rho)},
                   {"p_k", r.p_k},
                   {"J_size", r.J_size},
                   {"evals", r.evals},
                   {"accepted", r.accepted},
                   {"subspace_rank", r.subspace_rank},
                   {"interpolation_size", r.interpolation_size},
                   {"g_tilde_norm", num(r.g_tilde_norm)},
                   {"poisedness_fallback", r.poisedness_fallback}});
  }
  j["iterations"] = std::move(its);
  return j.dump(2);
}

}  // namespace sketchdfo
