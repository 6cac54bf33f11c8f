#include "ogd/scheduler.hpp"

#include "ogd/problem.hpp"
#include "ogd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace {

using ogd::Index;
using ogd::Matrix;

ogd::SquaredLoss toy_loss() {
  return ogd::SquaredLoss(ogd::make_matrix(1, 1, {1.0}),
                          ogd::make_matrix(1, 1, {1.0}));
}

// Exact local smoothness of the scalar toy problem ell(w) = (w-1)^2/2 at
// w = x1*x2: largest eigenvalue of the 2x2 Hessian of L(x1,x2).
double k_over(double x1, double x2) {
  const double s = x1 * x1 + x2 * x2;
  return 0.5 * (s + std::sqrt(s * s - 4.0 * x1 * x1 * x2 * x2 +
                              (2.0 * x1 * x2 - 1.0) * (2.0 * x1 * x2 - 1.0)));
}

ogd::ProblemSpec small_spec(std::uint64_t seed, double sigma) {
  ogd::ProblemSpec spec;
  spec.n = 4;
  spec.m = 3;
  spec.s = 6;
  spec.h = 8;
  spec.sigma = sigma;
  spec.seed = seed;
  return spec;
}

struct Instance {
  ogd::Problem prob;
  ogd::InitSummary summary;
  double L0;
};

Instance make_instance(std::uint64_t seed, double sigma) {
  Instance inst{ogd::gen_problem(small_spec(seed, sigma)), {}, 0.0};
  inst.summary =
      ogd::compute_init_summary(inst.prob.W1_0, inst.prob.W2_0, *inst.prob.loss);
  inst.L0 = inst.prob.loss->value(inst.prob.W1_0 * inst.prob.W2_0.transpose());
  return inst;
}

TEST(Scheduler, CubicKnownRoots) {
  EXPECT_NEAR(ogd::detail::solve_unit_cubic(1.0, 0.0, 0.0), 1.0, 1e-12);
  // Real root of x^3 + x^2 + x = 1 (reciprocal of the tribonacci constant).
  EXPECT_NEAR(ogd::detail::solve_unit_cubic(1.0, 1.0, 1.0),
              0.5436890126920763, 1e-12);
  EXPECT_NEAR(ogd::detail::solve_unit_cubic(2.0, 0.0, 0.0), 0.5, 1e-13);
}

TEST(Scheduler, ToyLocalConstants) {
  const ogd::SquaredLoss loss = toy_loss();
  struct Case { double x1, x2, mu_t, k_t_floor; };
  const Case cases[] = {
      {1.0, 1.0, 2.0, 2.0},    // at the minimum: L = 0, K_t = sigma2_max(T)
      {2.0, 1.0, 5.0, 6.0},    // L = 1/2: K_t(0) = 5 + sqrt(2*0.5) = 6
      {0.5, 3.0, 9.25, 9.75},  // L = 1/8: K_t(0) = 9.25 + 0.5
  };
  for (const Case& c : cases) {
    const Matrix w1 = ogd::make_matrix(1, 1, {c.x1});
    const Matrix w2 = ogd::make_matrix(1, 1, {c.x2});
    for (const double eta : {1e-9, 0.1, 1.0}) {
      const ogd::LocalConstants lc = ogd::local_constants(w1, w2, loss, eta);
      EXPECT_NEAR(lc.mu_t, c.mu_t, 1e-12) << c.x1 << "," << c.x2;
      EXPECT_GE(lc.K_t, k_over(c.x1, c.x2) - 1e-12);
      EXPECT_GE(lc.K_t + 1e-12, c.k_t_floor);
      EXPECT_GE(lc.K_t, loss.smoothness() * lc.sigma2_max_T - 1e-12);
    }
    // Frozen hand value at (2,1), eta = 0.1: 6 + 15*0.1 + 6*0.01 = 7.56.
    if (c.x1 == 2.0) {
      const ogd::LocalConstants lc = ogd::local_constants(w1, w2, loss, 0.1);
      EXPECT_NEAR(lc.K_t, 7.56, 1e-12);
    }
  }
  // At the minimum K_t does not depend on eta at all.
  const Matrix one = ogd::make_matrix(1, 1, {1.0});
  EXPECT_DOUBLE_EQ(ogd::local_constants(one, one, loss, 1e-3).K_t,
                   ogd::local_constants(one, one, loss, 10.0).K_t);
}

TEST(Scheduler, SelfConsistentStepZeroLossCollapse) {
  ogd::ProblemSpec spec = small_spec(3, 0.0); // noiseless teacher: L0 = 0
  const ogd::Problem prob = ogd::gen_problem(spec);
  const ogd::OperatorBounds ops =
      ogd::operator_spectral_bounds(prob.W1_0, prob.W2_0);
  const double eta =
      ogd::solve_self_consistent_step(prob.W1_0, prob.W2_0, *prob.loss);
  EXPECT_NEAR(eta, 1.0 / (prob.loss->smoothness() * ops.sigma2_max),
              1e-12 / (prob.loss->smoothness() * ops.sigma2_max));
}

TEST(Scheduler, SelfConsistencyResidual) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = make_instance(seed, seed % 3 == 0 ? 0.1 : 1.0);
    const double eta = ogd::solve_self_consistent_step(inst.prob.W1_0,
                                                       inst.prob.W2_0,
                                                       *inst.prob.loss);
    const ogd::LocalConstants lc =
        ogd::local_constants(inst.prob.W1_0, inst.prob.W2_0, *inst.prob.loss, eta);
    EXPECT_NEAR(eta * lc.K_t, 1.0, 1e-10) << "seed " << seed;
  }
}

TEST(Scheduler, DegenerateStepRejected) {
  const Matrix x = Matrix::Identity(2, 2);
  const Matrix y = Matrix::Zero(2, 2);
  ogd::SquaredLoss loss(x, y);
  const Matrix w = Matrix::Zero(2, 3);
  EXPECT_THROW(ogd::solve_self_consistent_step(w, w, loss), std::domain_error);
}

TEST(Scheduler, KtBoundsDirectionalCurvature) {
  // K_t(eta) must dominate the curvature of s -> L(Z - s*grad) on [0, eta],
  // measured by central finite differences.
  ogd::Philox rng = ogd::make_rng(77, ogd::Stream::data_x);
  auto gaussian = [&rng](Index r, Index c, double sd) {
    Matrix out(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) out(i, j) = sd * rng.next_gaussian();
    return out;
  };
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u32() % 3);
    const Index m = 2 + static_cast<Index>(rng.next_u32() % 3);
    const Index h = 4 + static_cast<Index>(rng.next_u32() % 3);
    const Matrix x = gaussian(n + 2, n, 1.0);
    const Matrix y = gaussian(n + 2, m, 1.0);
    ogd::SquaredLoss loss(x, y);
    const Matrix w1 = gaussian(n, h, 0.5);
    const Matrix w2 = gaussian(m, h, 0.5);
    const ogd::OverparamEval ev =
        ogd::overparam_value_and_gradient(w1, w2, loss);
    if (ev.grad_norm_sq() < 1e-12) continue;
    const double eta = ogd::solve_self_consistent_step(w1, w2, loss);
    const ogd::LocalConstants lc = ogd::local_constants(w1, w2, loss, eta);
    const auto phi = [&](double s) {
      const Matrix a = w1 - s * ev.G1;
      const Matrix b = w2 - s * ev.G2;
      return loss.value(a * b.transpose());
    };
    const double delta = 1e-5;
    for (int j = 0; j < 10; ++j) {
      const double s = eta * static_cast<double>(j) / 9.0;
      const double dd =
          (phi(s + delta) - 2.0 * phi(s) + phi(s - delta)) / (delta * delta);
      const double curvature = dd / ev.grad_norm_sq();
      EXPECT_LE(curvature, lc.K_t + 1e-4 * std::max(1.0, lc.K_t))
          << "trial " << trial << " sample " << j;
    }
    ++checked;
  }
  EXPECT_GE(checked, 45);
}

TEST(Scheduler, EtaMaxBalancedScalar) {
  // W1 = W2 = 1 fitting w* = 1: L0 = 0, alpha1 = alpha2 = 2, mu = K = 1.
  // E.2 degenerates (eta0_2 = +inf), eta0_1 solves 2*eta*exp(sqrt(eta)) = 1,
  // and the log cap ln(1.5)^2 is the binding minimum.
  const Matrix one = ogd::make_matrix(1, 1, {1.0});
  ogd::SquaredLoss loss(one, one);
  const ogd::InitSummary summary = ogd::compute_init_summary(one, one, loss);
  const ogd::EtaMaxBreakdown b =
      ogd::compute_eta_max(summary, loss, 0.0, 0.5, 1.01);
  EXPECT_TRUE(std::isinf(b.eta0_2));
  EXPECT_GT(b.eta0_1, 0.29);
  EXPECT_LT(b.eta0_1, 0.292);
  EXPECT_NEAR(b.eta0_1 * 2.0 * std::exp(std::sqrt(b.eta0_1)), 1.0, 1e-9);
  const double expected_cap = std::pow(std::log1p(0.5), 2.0);
  EXPECT_NEAR(b.log_bound, expected_cap, 1e-15);
  EXPECT_NEAR(b.eta_max, expected_cap, 1e-9);
  EXPECT_LT(b.eta_max, b.log_bound); // strictly inside the open feasible set
}

TEST(Scheduler, EtaMaxPostConditions) {
  const double sigmas[] = {0.1, 1.0, 3.0};
  bool saw_finite_eta0_2 = false;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = make_instance(seed, sigmas[seed % 3]);
    const ogd::EtaMaxBreakdown b = ogd::compute_eta_max(
        inst.summary, *inst.prob.loss, inst.L0, 0.5, 1.01);
    ASSERT_GT(b.eta_max, 0.0);

    ogd::SchedulerConfig cfg;
    cfg.eta0 = b.eta_max;
    const ogd::BoundConstants at_max =
        ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);
    EXPECT_LE(b.eta_max * at_max.K_bar_t, 1.0 + 1e-9) << "seed " << seed;
    EXPECT_GT(at_max.mu_bar, 0.0) << "seed " << seed;
    EXPECT_GT(at_max.rho_bar_0, 0.0) << "seed " << seed;
    EXPECT_LT(at_max.rho_bar_0, 1.0) << "seed " << seed;

    // E.1 re-substitution at eta0_1.
    cfg.eta0 = b.eta0_1;
    const ogd::BoundConstants at_one =
        ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);
    EXPECT_NEAR(b.eta0_1 * at_one.K_bar_t, 1.0, 1e-9) << "seed " << seed;

    // E.2 re-substitution when the drift root is finite.
    if (std::isfinite(b.eta0_2)) {
      saw_finite_eta0_2 = true;
      cfg.eta0 = b.eta0_2;
      const ogd::BoundConstants at_two =
          ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);
      const double K = inst.prob.loss->smoothness();
      const double lhs = 4.0 * K * inst.L0 * b.eta0_2 * b.eta0_2;
      const double rhs =
          (1.0 - std::exp(-std::pow(b.eta0_2, 0.5))) *
          ogd::detail::one_minus_delta(at_two.mu_bar, at_two.K_bar_t,
                                       b.eta0_2, 1.01);
      EXPECT_NEAR(lhs, rhs, 1e-9 * std::max({lhs, rhs, 1e-30}))
          << "seed " << seed;
    }

    // Half of eta_max is a valid eta0: Delta in (0,1) whenever L0 > 0.
    if (inst.L0 > 0.0) {
      cfg.eta0 = 0.5 * b.eta_max;
      const ogd::BoundConstants bc =
          ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);
      EXPECT_GT(bc.contraction_delta, 0.0) << "seed " << seed;
      EXPECT_LT(bc.contraction_delta, 1.0) << "seed " << seed;
    }
  }
  EXPECT_TRUE(saw_finite_eta0_2);
}

TEST(Scheduler, BarConstantsLimitCollapse) {
  // eta0 -> 0 with L0 = 0: mu_bar -> mu*alpha1 and K_bar_t -> K*alpha2.
  const Matrix one = ogd::make_matrix(1, 1, {1.0});
  ogd::SquaredLoss loss(one, one);
  const ogd::InitSummary summary = ogd::compute_init_summary(one, one, loss);
  ogd::SchedulerConfig cfg;
  cfg.eta0 = 1e-12;
  const ogd::BoundConstants bc = ogd::bar_constants(1000000, cfg, summary, loss, 0.0);
  EXPECT_NEAR(bc.mu_bar, loss.mu() * summary.alpha1,
              1e-4 * loss.mu() * summary.alpha1);
  EXPECT_NEAR(bc.K_bar_t, loss.smoothness() * summary.alpha2,
              1e-4 * loss.smoothness() * summary.alpha2);
}

TEST(Scheduler, KbarMonotoneAndAsymptote) {
  const Instance inst = make_instance(5, 1.0);
  const ogd::EtaMaxBreakdown b =
      ogd::compute_eta_max(inst.summary, *inst.prob.loss, inst.L0, 0.5, 1.01);
  ogd::SchedulerConfig cfg;
  cfg.eta0 = 0.5 * b.eta_max;
  double prev = std::numeric_limits<double>::infinity();
  for (long t = 0; t <= 500; ++t) {
    const ogd::BoundConstants bc =
        ogd::bar_constants(t, cfg, inst.summary, *inst.prob.loss, inst.L0);
    EXPECT_LE(bc.K_bar_t, prev * (1.0 + 1e-12)) << "t = " << t;
    prev = bc.K_bar_t;
  }
  const double asymptote = inst.prob.loss->smoothness() *
                           std::exp(std::sqrt(cfg.eta0)) * inst.summary.alpha2;
  const ogd::BoundConstants far =
      ogd::bar_constants(1000000, cfg, inst.summary, *inst.prob.loss, inst.L0);
  EXPECT_NEAR(far.K_bar_t, asymptote, 1e-6 * asymptote);
}

TEST(Scheduler, LocalVersusBarOrderingAtStart) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = make_instance(100 + seed, 1.0);
    const ogd::EtaMaxBreakdown b =
        ogd::compute_eta_max(inst.summary, *inst.prob.loss, inst.L0, 0.5, 1.01);
    ogd::SchedulerConfig cfg;
    cfg.eta0 = 0.5 * b.eta_max;
    const ogd::BoundConstants bc =
        ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);
    const ogd::LocalConstants lc = ogd::local_constants(
        inst.prob.W1_0, inst.prob.W2_0, *inst.prob.loss, cfg.eta0);
    EXPECT_LE(bc.mu_bar, lc.mu_t + 1e-9 * std::max(1.0, lc.mu_t));
    EXPECT_LE(lc.K_t, bc.K_bar_t + 1e-9 * std::max(1.0, bc.K_bar_t));
  }
}

TEST(Scheduler, DescentFactorVertexIdentity) {
  ogd::LocalConstants lc;
  lc.mu_t = 3.0;
  lc.K_t = 4.0;
  ogd::BoundConstants bc;
  bc.mu_bar = 1.0;
  bc.K_bar_t = 2.0;
  const auto [rho, rho_bar] = ogd::descent_factors(0.25, lc, bc);
  EXPECT_DOUBLE_EQ(rho, 1.0 - lc.mu_t / lc.K_t);
  EXPECT_DOUBLE_EQ(rho_bar, 1.0 - 2.0 * 0.25 + 2.0 * 0.25 * 0.25);
  lc.mu_t = 0.0;
  EXPECT_DOUBLE_EQ(ogd::descent_factors(0.7, lc, bc).first, 1.0);
  EXPECT_THROW(ogd::descent_factors(0.0, lc, bc), std::invalid_argument);
}

TEST(Scheduler, GrowthCapFormula) {
  ogd::SchedulerConfig cfg;
  cfg.eta0 = 0.01;
  EXPECT_DOUBLE_EQ(ogd::growth_cap(cfg, 0), cfg.eta0);
  const double factor = 1.0 + std::pow(cfg.eta0, cfg.d);
  EXPECT_NEAR(ogd::growth_cap(cfg, 2), cfg.eta0 * factor, 1e-15);
  EXPECT_NEAR(ogd::growth_cap(cfg, 4), cfg.eta0 * factor * factor, 1e-15);
}

TEST(Scheduler, StepSizePolicies) {
  const Instance inst = make_instance(7, 1.0);
  const ogd::EtaMaxBreakdown b =
      ogd::compute_eta_max(inst.summary, *inst.prob.loss, inst.L0, 0.5, 1.01);
  ogd::SchedulerConfig cfg;
  cfg.eta0 = 0.5 * b.eta_max;
  cfg.eta_max = b.eta_max;
  const ogd::BoundConstants bc0 =
      ogd::bar_constants(0, cfg, inst.summary, *inst.prob.loss, inst.L0);

  // At t = 0 the growth factor is 1 and every cap sits above eta0.
  for (const ogd::StepPolicy p :
       {ogd::StepPolicy::constant, ogd::StepPolicy::adaptive_rho,
        ogd::StepPolicy::adaptive_rho_bar}) {
    EXPECT_DOUBLE_EQ(ogd::step_size(p, 0, inst.prob.W1_0, inst.prob.W2_0,
                                    *inst.prob.loss, cfg, bc0),
                     cfg.eta0);
  }

  // Far out, adaptive_rho_bar approaches the asymptotic cap.
  const ogd::BoundConstants bc_far =
      ogd::bar_constants(1000000, cfg, inst.summary, *inst.prob.loss, inst.L0);
  const double far = ogd::step_size(ogd::StepPolicy::adaptive_rho_bar, 1000000,
                                    inst.prob.W1_0, inst.prob.W2_0,
                                    *inst.prob.loss, cfg, bc_far);
  const double cap = 1.0 / (inst.prob.loss->smoothness() *
                            std::exp(std::sqrt(cfg.eta0)) * inst.summary.alpha2);
  EXPECT_NEAR(far, cap, 1e-6 * cap);

  // An eta0 above the self-consistent cap is flagged as infeasible.
  const double eta_hat = ogd::solve_self_consistent_step(
      inst.prob.W1_0, inst.prob.W2_0, *inst.prob.loss);
  ogd::SchedulerConfig bad = cfg;
  bad.eta0 = 2.0 * eta_hat;
  bad.eta_max = 0.0;
  EXPECT_THROW(ogd::step_size(ogd::StepPolicy::adaptive_rho, 0, inst.prob.W1_0,
                              inst.prob.W2_0, *inst.prob.loss, bad, bc0),
               std::runtime_error);

  EXPECT_THROW(ogd::step_size(ogd::StepPolicy::backtracking, 0, inst.prob.W1_0,
                              inst.prob.W2_0, *inst.prob.loss, cfg, bc0),
               std::invalid_argument);
}

TEST(Scheduler, ConfigValidation) {
  ogd::SchedulerConfig cfg;
  cfg.eta0 = 0.1;
  EXPECT_NO_THROW(cfg.validate());
  cfg.c = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.c = 0.5;
  cfg.d = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.d = 1.01;
  cfg.eta0 = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.eta0 = 0.2;
  cfg.eta_max = 0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

} // namespace
