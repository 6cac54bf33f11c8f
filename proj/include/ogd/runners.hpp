#pragma once

// The four experiment runners behind the CLI. Each returns an in-memory
// table (header + rows) plus a meta document holding the per-run
// InitSummary and eta_max breakdown; the CLI writes both to disk. Work
// fans out one instance per (seed, policy) onto a bounded worker pool and
// rows are assembled in deterministic (seed, policy) order regardless of
// completion order.

#include "ogd/config.hpp"
#include "ogd/csv.hpp"
#include "ogd/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace ogd {

struct RunnerResult {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  nlohmann::json meta;
};

namespace detail {

inline void run_pool(std::vector<std::function<void()>>& tasks) {
  const unsigned workers = std::max(
      1u, std::min(std::thread::hardware_concurrency(), 8u));
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto drain = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < workers; ++i) pool.emplace_back(drain);
  drain();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace detail

// Generate the instance and resolve scheduler blanks: eta_max = 0 is filled
// from compute_eta_max, eta0 = 0 defaults to eta_max / 2.
struct ResolvedInstance {
  Problem prob;
  SchedulerConfig cfg;
  InitSummary summary;
  EtaMaxBreakdown breakdown;
  double L0 = 0.0;
};

inline ResolvedInstance resolve_instance(const ProblemSpec& spec,
                                         SchedulerConfig cfg) {
  ResolvedInstance out;
  out.prob = gen_problem(spec);
  out.L0 = out.prob.loss->value(out.prob.W1_0 * out.prob.W2_0.transpose());
  out.summary =
      compute_init_summary(out.prob.W1_0, out.prob.W2_0, *out.prob.loss);
  out.breakdown =
      compute_eta_max(out.summary, *out.prob.loss, out.L0, cfg.c, cfg.d);
  if (cfg.eta_max <= 0.0) cfg.eta_max = out.breakdown.eta_max;
  if (cfg.eta0 <= 0.0) cfg.eta0 = cfg.eta_max / 2.0;
  out.cfg = cfg;
  return out;
}

inline nlohmann::json meta_entry(const ResolvedInstance& r,
                                 std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["L0"] = json_double(r.L0);
  j["eta0"] = json_double(r.cfg.eta0);
  j["eta_max"] = json_double(r.breakdown.eta_max);
  j["eta0_1"] = json_double(r.breakdown.eta0_1);
  j["eta0_2"] = json_double(r.breakdown.eta0_2);
  j["log_bound"] = json_double(r.breakdown.log_bound);
  j["init_summary"] = {{"alpha1", json_double(r.summary.alpha1)},
                       {"alpha2", json_double(r.summary.alpha2)},
                       {"beta1", json_double(r.summary.beta1)},
                       {"beta2", json_double(r.summary.beta2)},
                       {"lambda_plus", json_double(r.summary.lambda_plus)},
                       {"lambda_minus", json_double(r.summary.lambda_minus)},
                       {"delta_under", json_double(r.summary.delta_under)},
                       {"delta_plus", json_double(r.summary.delta_plus)},
                       {"delta_minus", json_double(r.summary.delta_minus)},
                       {"D0_frobenius", json_double(r.summary.D0_frobenius)}};
  return j;
}

// Loss and both running envelopes against the a-priori constant-rate bound
// L0 * rho_bar(eta0, 0)^t, one block of rows per seed.
inline RunnerResult run_envelope(const ExperimentConfig& c) {
  if (c.sched.policy == StepPolicy::backtracking) {
    throw std::invalid_argument("run_envelope: certified policy required");
  }
  struct SeedOut {
    Trajectory traj;
    nlohmann::json meta;
  };
  std::vector<SeedOut> outs(static_cast<size_t>(c.run.seeds));
  std::vector<std::function<void()>> tasks;
  for (int i = 0; i < c.run.seeds; ++i) {
    tasks.push_back([&, i] {
      ProblemSpec spec = c.problem;
      spec.seed = c.problem.seed + static_cast<std::uint64_t>(i);
      const ResolvedInstance r = resolve_instance(spec, c.sched);
      TrainOptions opt;
      opt.max_iters = c.run.iters;
      opt.telemetry_every = c.run.thin_telemetry;
      opt.wallclock = c.run.wallclock;
      outs[static_cast<size_t>(i)].traj = train(r.prob, r.cfg, opt);
      outs[static_cast<size_t>(i)].meta = meta_entry(r, spec.seed);
    });
  }
  detail::run_pool(tasks);

  RunnerResult res;
  res.header = {"seed",         "t",
                "loss",         "envelope_rho",
                "envelope_rho_bar", "bound_constant"};
  res.meta = {{"runner", "envelope"}, {"config", serialize(c)}};
  res.meta["runs"] = nlohmann::json::array();
  for (int i = 0; i < c.run.seeds; ++i) {
    const SeedOut& o = outs[static_cast<size_t>(i)];
    const long long seed =
        static_cast<long long>(c.problem.seed + static_cast<std::uint64_t>(i));
    double bound = o.traj.L0;
    for (const TelemetryRow& row : o.traj.rows) {
      res.rows.push_back({seed, static_cast<long long>(row.t), row.loss,
                          row.envelope, row.envelope_bar, bound});
      bound *= o.traj.bc0.rho_bar_0;
    }
    res.meta["runs"].push_back(o.meta);
  }
  return res;
}

// Loss/step-size traces for adaptive_rho vs backtracking vs constant eta0 on
// identical instances; exactly seeds * (iters+1) * 3 rows.
inline RunnerResult run_compare(const ExperimentConfig& c) {
  static constexpr StepPolicy kPolicies[] = {
      StepPolicy::adaptive_rho, StepPolicy::backtracking, StepPolicy::constant};
  const auto label = [](StepPolicy p) -> std::string {
    return p == StepPolicy::constant ? "constant_eta0" : to_string(p);
  };

  struct CellOut {
    Trajectory traj;
    nlohmann::json meta;
  };
  const size_t cells = static_cast<size_t>(c.run.seeds) * 3;
  std::vector<CellOut> outs(cells);
  std::vector<std::function<void()>> tasks;
  for (int i = 0; i < c.run.seeds; ++i) {
    for (int k = 0; k < 3; ++k) {
      tasks.push_back([&, i, k] {
        ProblemSpec spec = c.problem;
        spec.seed = c.problem.seed + static_cast<std::uint64_t>(i);
        SchedulerConfig cfg = c.sched;
        cfg.policy = kPolicies[k];
        const ResolvedInstance r = resolve_instance(spec, cfg);
        TrainOptions opt;
        opt.max_iters = c.run.iters;
        opt.stop_loss = -std::numeric_limits<double>::infinity();
        opt.telemetry_every = c.run.thin_telemetry;
        opt.wallclock = c.run.wallclock;
        CellOut& cell = outs[static_cast<size_t>(i) * 3 + static_cast<size_t>(k)];
        cell.traj = train(r.prob, r.cfg, opt);
        cell.meta = meta_entry(r, spec.seed);
        cell.meta["policy"] = label(kPolicies[k]);
      });
    }
  }
  detail::run_pool(tasks);

  RunnerResult res;
  res.header = {"seed", "t", "policy", "loss", "eta_t", "wallclock_ns"};
  res.meta = {{"runner", "compare"}, {"config", serialize(c)}};
  res.meta["runs"] = nlohmann::json::array();
  for (size_t cell = 0; cell < cells; ++cell) {
    const CellOut& o = outs[cell];
    const long long seed = static_cast<long long>(
        c.problem.seed + static_cast<std::uint64_t>(cell / 3));
    const std::string pol = label(kPolicies[cell % 3]);
    for (const TelemetryRow& row : o.traj.rows) {
      res.rows.push_back({seed, static_cast<long long>(row.t), pol, row.loss,
                          row.eta_t, static_cast<long long>(row.wallclock_ns)});
    }
    res.meta["runs"].push_back(o.meta);
  }
  return res;
}

// Conditioning of T_0 and the corridor ratio alpha1/alpha2 across widths for
// scaled N(0, h^(-2p)) initializations. No training involved.
inline RunnerResult run_width_sweep(const ExperimentConfig& c,
                                    const std::vector<double>& p_list,
                                    const std::vector<Index>& h_list) {
  struct Point {
    double kappa = 0.0;
    double ratio = 0.0;
  };
  const size_t total = p_list.size() * h_list.size() *
                       static_cast<size_t>(c.run.seeds);
  std::vector<Point> pts(total);
  std::vector<std::function<void()>> tasks;
  size_t idx = 0;
  for (const double p : p_list) {
    for (const Index h : h_list) {
      for (int i = 0; i < c.run.seeds; ++i, ++idx) {
        tasks.push_back([&, p, h, i, idx] {
          ProblemSpec spec = c.problem;
          spec.init = InitScheme::scaled_normal;
          spec.p = p;
          spec.h = h;
          spec.seed = c.problem.seed + static_cast<std::uint64_t>(i);
          const Problem prob = gen_problem(spec);
          const OperatorBounds ops =
              operator_spectral_bounds(prob.W1_0, prob.W2_0);
          const InitSummary s =
              compute_init_summary(prob.W1_0, prob.W2_0, *prob.loss);
          pts[idx].kappa = std::sqrt(ops.sigma2_max / ops.sigma2_min);
          pts[idx].ratio = s.alpha1 / s.alpha2;
        });
      }
    }
  }
  detail::run_pool(tasks);

  RunnerResult res;
  res.header = {"p", "h", "seed", "kappa_T0", "alpha_ratio"};
  res.meta = {{"runner", "width_sweep"},
              {"config", serialize(c)},
              {"p_list", p_list},
              {"h_list", h_list}};
  idx = 0;
  for (const double p : p_list) {
    for (const Index h : h_list) {
      for (int i = 0; i < c.run.seeds; ++i, ++idx) {
        res.rows.push_back({p, static_cast<long long>(h),
                            static_cast<long long>(c.problem.seed +
                                                   static_cast<std::uint64_t>(i)),
                            pts[idx].kappa, pts[idx].ratio});
      }
    }
  }
  return res;
}

// Overparametrized adaptive_rho against plain GD at eta = 1/sigma_max^2(X)
// from the same starting product, on spectrum-band data, across widths.
inline RunnerResult run_baseline_match(const ExperimentConfig& c,
                                       const std::vector<Index>& h_list) {
  struct CellOut {
    std::vector<double> over;
    std::vector<double> nonover;
    nlohmann::json meta;
  };
  const size_t cells = h_list.size() * static_cast<size_t>(c.run.seeds);
  std::vector<CellOut> outs(cells);
  std::vector<std::function<void()>> tasks;
  size_t idx = 0;
  for (const Index h : h_list) {
    for (int i = 0; i < c.run.seeds; ++i, ++idx) {
      tasks.push_back([&, h, i, idx] {
        ProblemSpec spec = c.problem;
        spec.n = 5;
        spec.m = 5;
        spec.s = 5;
        spec.h = h;
        spec.init = InitScheme::scaled_normal;
        spec.p = 0.5;  // entries N(0, 1/h)
        spec.data = DataScheme::spectrum_band;
        spec.band_lo = 1.8;
        spec.band_hi = 2.3;
        spec.noise = 0.1;
        spec.seed = c.problem.seed + static_cast<std::uint64_t>(i);
        SchedulerConfig cfg = c.sched;
        cfg.policy = StepPolicy::adaptive_rho;
        const ResolvedInstance r = resolve_instance(spec, cfg);

        TrainOptions opt;
        opt.max_iters = c.run.iters;
        opt.stop_loss = -std::numeric_limits<double>::infinity();
        opt.telemetry_every = c.run.thin_telemetry;
        const Trajectory traj = train(r.prob, r.cfg, opt);

        CellOut& cell = outs[idx];
        for (const TelemetryRow& row : traj.rows) cell.over.push_back(row.loss);

        const double eta_plain = 1.0 / r.prob.loss->smoothness();
        Matrix W = r.prob.W1_0 * r.prob.W2_0.transpose();
        cell.nonover.push_back(r.prob.loss->value(W));
        for (long t = 0; t < c.run.iters; ++t) {
          W = gd_step_baseline(W, *r.prob.loss, eta_plain);
          cell.nonover.push_back(r.prob.loss->value(W));
        }
        cell.meta = meta_entry(r, spec.seed);
        cell.meta["h"] = static_cast<long long>(h);
      });
    }
  }
  detail::run_pool(tasks);

  RunnerResult res;
  res.header = {"h", "seed", "t", "loss_over", "loss_nonover"};
  res.meta = {{"runner", "baseline_match"},
              {"config", serialize(c)},
              {"h_list", h_list}};
  res.meta["runs"] = nlohmann::json::array();
  idx = 0;
  for (const Index h : h_list) {
    for (int i = 0; i < c.run.seeds; ++i, ++idx) {
      const CellOut& o = outs[idx];
      for (size_t t = 0; t < o.over.size(); ++t) {
        res.rows.push_back(
            {static_cast<long long>(h),
             static_cast<long long>(c.problem.seed +
                                    static_cast<std::uint64_t>(i)),
             static_cast<long long>(t), o.over[t],
             o.nonover[std::min(t, o.nonover.size() - 1)]});
      }
      res.meta["runs"].push_back(o.meta);
    }
  }
  return res;
}

} // namespace ogd
