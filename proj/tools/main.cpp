// ogd command line: experiment runners (envelope, compare, width-sweep,
// baseline-match), an eta-max inspector, and a selftest that exercises the
// core certificate invariants. Outputs one CSV per runner plus a
// <name>.meta.json sidecar in --out.

#include "ogd/config.hpp"
#include "ogd/runners.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CliState {
  std::string config_path;
  std::uint64_t seed = 0;
  int seeds = 0;
  std::string out_dir;
  long iters = -1;
  int thin = 0;
  bool wallclock = false;
  bool paper_scale = false;
  bool grid = false;
  nlohmann::json raw;  // parsed --config document, empty object if none
};

ogd::ExperimentConfig build_config(CliState& st, const CLI::App& cmd) {
  st.raw = nlohmann::json::object();
  if (!st.config_path.empty()) {
    std::ifstream in(st.config_path);
    if (!in) throw std::runtime_error("cannot open config " + st.config_path);
    in >> st.raw;
  }
  ogd::ExperimentConfig c = ogd::parse_config(st.raw);
  if (cmd.count("--seed") > 0) c.problem.seed = st.seed;
  if (cmd.count("--seeds") > 0) c.run.seeds = st.seeds;
  if (cmd.count("--out") > 0) c.run.out_dir = st.out_dir;
  if (cmd.count("--iters") > 0) c.run.iters = st.iters;
  if (cmd.count("--thin-telemetry") > 0) c.run.thin_telemetry = st.thin;
  if (st.wallclock) c.run.wallclock = true;
  if (st.paper_scale) c.run.paper_scale = true;
  return c;
}

void write_result(const ogd::RunnerResult& r, const std::string& out_dir,
                  const std::string& name) {
  const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
  std::filesystem::create_directories(dir);
  const std::filesystem::path csv_path = dir / (name + ".csv");
  {
    std::ofstream csv(csv_path, std::ios::binary);
    ogd::write_csv(csv, r.header, r.rows);
    if (!csv) throw std::runtime_error("failed writing " + csv_path.string());
  }
  const std::filesystem::path meta_path = dir / (name + ".meta.json");
  std::ofstream meta(meta_path, std::ios::binary);
  meta << r.meta.dump(2) << '\n';
  if (!meta) throw std::runtime_error("failed writing " + meta_path.string());
  std::cout << "wrote " << csv_path.string() << " (" << r.rows.size()
            << " rows) and " << meta_path.string() << "\n";
}

int cmd_envelope(CliState& st, const CLI::App& cmd) {
  const ogd::ExperimentConfig base = build_config(st, cmd);
  if (!st.grid) {
    write_result(ogd::run_envelope(base), base.run.out_dir, "envelope");
    return 0;
  }
  // Grid mode: run the full (sigma, h) product and label each output file
  // by its cell.
  const std::vector<double> sigmas = {0.1, 1.0, 3.0};
  const std::vector<ogd::Index> hs = base.run.paper_scale
                                         ? std::vector<ogd::Index>{500, 1000, 4000}
                                         : std::vector<ogd::Index>{100, 500, 1000};
  for (const double sigma : sigmas) {
    for (const ogd::Index h : hs) {
      ogd::ExperimentConfig c = base;
      c.problem.sigma = sigma;
      c.problem.h = h;
      const std::string name = "envelope_sigma" + ogd::format_double(sigma) +
                               "_h" + std::to_string(h);
      write_result(ogd::run_envelope(c), c.run.out_dir, name);
    }
  }
  return 0;
}

int cmd_compare(CliState& st, const CLI::App& cmd) {
  const ogd::ExperimentConfig c = build_config(st, cmd);
  write_result(ogd::run_compare(c), c.run.out_dir, "compare");
  return 0;
}

int cmd_width_sweep(CliState& st, const CLI::App& cmd) {
  ogd::ExperimentConfig c = build_config(st, cmd);
  if (!st.raw.contains("problem") || !st.raw["problem"].contains("data")) {
    c.problem.data = ogd::DataScheme::orthogonal_theta;
  }
  const std::vector<double> p_list = {0.275, 0.375, 0.475};
  const std::vector<ogd::Index> h_list = {128, 256, 512, 1024};
  write_result(ogd::run_width_sweep(c, p_list, h_list), c.run.out_dir,
               "width_sweep");
  return 0;
}

int cmd_baseline_match(CliState& st, const CLI::App& cmd) {
  ogd::ExperimentConfig c = build_config(st, cmd);
  if (cmd.count("--iters") == 0 &&
      !(st.raw.contains("run") && st.raw["run"].contains("iters"))) {
    c.run.iters = 30;  // short horizon keeps late-window ratios above fp noise
  }
  const std::vector<ogd::Index> h_list = {64, 256, 1024};
  write_result(ogd::run_baseline_match(c, h_list), c.run.out_dir,
               "baseline_match");
  return 0;
}

int cmd_eta_max(CliState& st, const CLI::App& cmd) {
  const ogd::ExperimentConfig c = build_config(st, cmd);
  const ogd::ResolvedInstance r = ogd::resolve_instance(c.problem, c.sched);
  nlohmann::json out = ogd::meta_entry(r, c.problem.seed);
  out["spec"] = ogd::serialize(c.problem);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int expect(bool ok, const std::string& name, const std::string& detail = "") {
  if (ok) {
    std::cout << "PASS " << name << "\n";
    return 0;
  }
  std::cout << "FAIL " << name << (detail.empty() ? "" : " (" + detail + ")")
            << "\n";
  return 1;
}

int cmd_selftest(CliState& st, const CLI::App& cmd) {
  const ogd::ExperimentConfig base = build_config(st, cmd);
  int failures = 0;

  {
    // Closed-form operator spectrum against the matricized SVD.
    double worst = 0.0;
    for (unsigned long seed = 1; seed <= 20; ++seed) {
      ogd::ProblemSpec spec;
      spec.n = 4;
      spec.m = 3;
      spec.s = 5;
      spec.h = 6;
      spec.seed = seed;
      const ogd::Problem prob = ogd::gen_problem(spec);
      const ogd::OperatorBounds ops =
          ogd::operator_spectral_bounds(prob.W1_0, prob.W2_0);
      const auto sv = ogd::spectral_extremes(
          ogd::matricize_operator(prob.W1_0, prob.W2_0));
      worst = std::max(worst, std::abs(sv.sigma_max * sv.sigma_max -
                                       ops.sigma2_max) /
                                  std::max(1.0, ops.sigma2_max));
    }
    failures += expect(worst <= 1e-9, "operator-spectrum closed form",
                       "max rel err " + ogd::format_double(worst));
  }

  {
    // Gradient against central finite differences.
    double worst = 0.0;
    for (unsigned long seed = 1; seed <= 5; ++seed) {
      ogd::ProblemSpec spec;
      spec.n = 3;
      spec.m = 3;
      spec.s = 4;
      spec.h = 5;
      spec.seed = seed;
      const ogd::Problem prob = ogd::gen_problem(spec);
      const ogd::OverparamEval ev =
          ogd::overparam_value_and_gradient(prob.W1_0, prob.W2_0, *prob.loss);
      const double delta = 1e-6;
      for (ogd::Index i = 0; i < prob.W1_0.rows(); ++i) {
        for (ogd::Index j = 0; j < prob.W1_0.cols(); ++j) {
          ogd::Matrix up = prob.W1_0, dn = prob.W1_0;
          up(i, j) += delta;
          dn(i, j) -= delta;
          const double fd = (prob.loss->value(up * prob.W2_0.transpose()) -
                             prob.loss->value(dn * prob.W2_0.transpose())) /
                            (2.0 * delta);
          worst = std::max(worst, std::abs(fd - ev.G1(i, j)) /
                                      std::max(1.0, std::abs(ev.G1(i, j))));
        }
      }
    }
    failures += expect(worst <= 1e-5, "gradient finite differences",
                       "max rel err " + ogd::format_double(worst));
  }

  {
    // Toy scalar oracle.
    const auto toy = std::make_shared<ogd::SquaredLoss>(
        ogd::make_matrix(1, 1, {1.0}), ogd::make_matrix(1, 1, {1.0}));
    bool ok = true;
    for (const auto& [x1, x2] : std::vector<std::pair<double, double>>{
             {1.0, 1.0}, {2.0, 1.0}, {0.5, 3.0}}) {
      const ogd::LocalConstants lc = ogd::local_constants(
          ogd::make_matrix(1, 1, {x1}), ogd::make_matrix(1, 1, {x2}), *toy,
          0.0);
      ok = ok && lc.mu_t == x1 * x1 + x2 * x2;
    }
    failures += expect(ok, "toy local constants");
  }

  {
    // eta_max postconditions on random instances.
    bool ok = true;
    std::string detail;
    for (unsigned long seed = 1; seed <= 5; ++seed) {
      ogd::ProblemSpec spec;
      spec.n = 4;
      spec.m = 3;
      spec.s = 6;
      spec.h = 8;
      spec.seed = seed;
      try {
        const ogd::ResolvedInstance r =
            ogd::resolve_instance(spec, ogd::SchedulerConfig{});
        const ogd::BoundConstants bc = ogd::bar_constants(
            0, r.cfg, r.summary, *r.prob.loss, r.L0);
        ok = ok && r.cfg.eta0 > 0.0 && bc.mu_bar > 0.0 &&
             bc.rho_bar_0 > 0.0 && bc.rho_bar_0 < 1.0;
      } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
      }
    }
    failures += expect(ok, "eta-max postconditions", detail);
  }

  {
    // Certified trajectory: zero flagged violations end to end.
    ogd::ProblemSpec spec;
    spec.n = 10;
    spec.m = 10;
    spec.s = 10;
    spec.h = 60;
    spec.seed = base.problem.seed + 1;
    std::string detail;
    bool ok = true;
    try {
      const ogd::ResolvedInstance r =
          ogd::resolve_instance(spec, ogd::SchedulerConfig{});
      ogd::TrainOptions opt;
      opt.max_iters = 120;
      const ogd::Trajectory traj = ogd::train(r.prob, r.cfg, opt);
      ok = traj.violation_count == 0 && traj.rows.back().loss < traj.L0;
      if (!ok) detail = std::to_string(traj.violation_count) + " violations";
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    failures += expect(ok, "certified trajectory invariants", detail);
  }

  std::cout << (failures == 0 ? "selftest OK" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Certified gradient descent for overparametrized two-layer linear "
      "models: experiment runners and certificate inspectors"};
  app.require_subcommand(1);
  CliState st;

  const auto add_common = [&st](CLI::App* cmd) {
    cmd->add_option("--config", st.config_path,
                    "JSON config (problem/scheduler/run)");
    cmd->add_option("--seed", st.seed, "base problem seed");
    cmd->add_option("--seeds", st.seeds, "number of seeds");
    cmd->add_option("--out", st.out_dir, "output directory");
    cmd->add_option("--iters", st.iters, "iterations per run");
    cmd->add_option("--thin-telemetry", st.thin,
                    "recompute spectral telemetry every k steps");
    cmd->add_flag("--wallclock", st.wallclock, "measure per-step wallclock");
    cmd->add_flag("--paper-scale", st.paper_scale,
                  "use the large width grid {500, 1000, 4000}");
  };

  CLI::App* envelope =
      app.add_subcommand("envelope", "loss vs certified envelopes");
  add_common(envelope);
  envelope->add_flag("--grid", st.grid, "run the (sigma, h) grid");

  CLI::App* compare =
      app.add_subcommand("compare", "adaptive vs backtracking vs constant");
  add_common(compare);

  CLI::App* width =
      app.add_subcommand("width-sweep", "conditioning of T_0 across widths");
  add_common(width);

  CLI::App* baseline = app.add_subcommand(
      "baseline-match", "overparametrized vs plain GD contraction");
  add_common(baseline);

  CLI::App* etamax = app.add_subcommand(
      "eta-max", "print the eta_max breakdown and initialization summary");
  add_common(etamax);

  CLI::App* selftest =
      app.add_subcommand("selftest", "run the core invariant suites");
  add_common(selftest);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(envelope)) return cmd_envelope(st, *envelope);
    if (app.got_subcommand(compare)) return cmd_compare(st, *compare);
    if (app.got_subcommand(width)) return cmd_width_sweep(st, *width);
    if (app.got_subcommand(baseline)) return cmd_baseline_match(st, *baseline);
    if (app.got_subcommand(etamax)) return cmd_eta_max(st, *etamax);
    if (app.got_subcommand(selftest)) return cmd_selftest(st, *selftest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
