#pragma once

// GD loops: the overparametrized factor update, the plain baseline update,
// backtracking line search, and a train() driver that emits per-step
// telemetry and (for certified policies) evaluates the certificate
// inequalities as non-fatal flags. Row t describes iterate t together with
// the step taken from it; the final row carries eta_t = 0 and unit factors.

#include "ogd/init_constants.hpp"
#include "ogd/loss.hpp"
#include "ogd/matrix.hpp"
#include "ogd/problem.hpp"
#include "ogd/scheduler.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ogd {

struct TrainerState {
  Matrix W1;
  Matrix W2;
  Matrix W;  // cached product W1*W2^T, refreshed on every step
  Matrix D0;
  double L0 = 0.0;
  double envelope = 0.0;      // L0 * prod_{k<t} rho(eta_k, k)
  double envelope_bar = 0.0;  // L0 * prod_{k<t} rho_bar(eta_k, k)
  long t = 0;
};

inline TrainerState make_trainer_state(const Matrix& W1_0, const Matrix& W2_0) {
  require_shared_width(W1_0, W2_0, "make_trainer_state");
  TrainerState st;
  st.W1 = W1_0;
  st.W2 = W2_0;
  st.W = W1_0 * W2_0.transpose();
  st.D0 = imbalance(W1_0, W2_0);
  return st;
}

struct TelemetryRow {
  long t = 0;
  double eta_t = 0.0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double mu_t = 0.0;
  double K_t = 0.0;
  double mu_bar = 0.0;
  double K_bar_t = 0.0;
  double rho = 1.0;
  double rho_bar = 1.0;
  double sigma2_min_T = 0.0;
  double sigma2_max_T = 0.0;
  double sigma_min_W = 0.0;
  double sigma_max_W = 0.0;
  double imbalance_drift = 0.0;
  double envelope = 0.0;
  double envelope_bar = 0.0;
  long long wallclock_ns = -1;  // -1 when not measured
  std::string violations;       // semicolon-joined hook names, empty = clean
};

namespace detail {

inline void apply_overparam_step(TrainerState& st, const Matrix& G1,
                                 const Matrix& G2, double eta) {
  st.W1 -= eta * G1;
  st.W2 -= eta * G2;
  if (!st.W1.allFinite() || !st.W2.allFinite()) {
    throw std::runtime_error("gd_step_overparam: divergence at t = " +
                             std::to_string(st.t));
  }
  st.W = st.W1 * st.W2.transpose();
  if (!st.W.allFinite()) {
    throw std::runtime_error("gd_step_overparam: divergence at t = " +
                             std::to_string(st.t));
  }
  ++st.t;
}

} // namespace detail

inline TrainerState gd_step_overparam(const TrainerState& st,
                                      const LossModel& loss, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("gd_step_overparam: eta must be >= 0");
  const OverparamEval ev = overparam_value_and_gradient(st.W1, st.W2, loss);
  TrainerState next = st;
  detail::apply_overparam_step(next, ev.G1, ev.G2, eta);
  return next;
}

inline Matrix gd_step_baseline(const Matrix& W, const LossModel& loss, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("gd_step_baseline: eta must be >= 0");
  Matrix next = W - eta * loss.gradient(W);
  if (!next.allFinite()) {
    throw std::runtime_error("gd_step_baseline: divergence");
  }
  return next;
}

// Armijo backtracking: shrink eta by tau until
//   L(new) <= L(t) - gamma * eta * ||grad L(t)||_F^2.
inline std::pair<TrainerState, double> backtracking_step(const TrainerState& st,
                                                         const LossModel& loss,
                                                         double eta_bt, double tau,
                                                         double gamma) {
  if (!(eta_bt > 0.0) || !(tau > 0.0 && tau < 1.0) || !(gamma > 0.0)) {
    throw std::invalid_argument(
        "backtracking_step: need eta_bt > 0, 0 < tau < 1, gamma > 0");
  }
  const OverparamEval ev = overparam_value_and_gradient(st.W1, st.W2, loss);
  double eta = eta_bt;
  for (int shrink = 0; shrink < 200; ++shrink) {
    const Matrix w1 = st.W1 - eta * ev.G1;
    const Matrix w2 = st.W2 - eta * ev.G2;
    if (w1.allFinite() && w2.allFinite()) {
      const double trial = loss.value(w1 * w2.transpose());
      if (trial <= ev.loss - gamma * eta * ev.grad_norm_sq()) {
        TrainerState next = st;
        detail::apply_overparam_step(next, ev.G1, ev.G2, eta);
        return {std::move(next), eta};
      }
    }
    eta *= tau;
  }
  throw std::runtime_error(
      "backtracking_step: line search failed after 200 shrinks at t = " +
      std::to_string(st.t));
}

struct TrainOptions {
  long max_iters = 10000;
  // Stop once loss <= stop_loss; default (unset) is 1e-12 * max(1, L0).
  // Pass -infinity to always run max_iters.
  std::optional<double> stop_loss;
  int telemetry_every = 1;  // recompute spectral telemetry every k steps
  bool wallclock = false;
  double eta_bt = 1.0;
  double tau = 0.1;
  double gamma = 0.9;
  // Certificate hooks run on certified policies at telemetry_every == 1.
  bool check_invariants = true;
};

struct Trajectory {
  std::vector<TelemetryRow> rows;
  TrainerState state;  // final iterate
  InitSummary summary;
  BoundConstants bc0;
  SchedulerConfig cfg;
  double L0 = 0.0;
  bool certified = false;
  long violation_count = 0;

  bool clean() const { return violation_count == 0; }
};

namespace detail {

struct HookContext {
  double lower_T = 0.0, upper_T = 0.0;  // invariant corridor for sigma^2(T)
  double beta1 = 0.0, beta2 = 0.0;      // corridor for sigma(W)
  double drift_bound = 0.0;
  double rho_bar_0 = 0.0;
};

struct PrevStep {
  bool valid = false;
  double eta = 0.0, K_t = 0.0, loss = 0.0, grad_norm_sq = 0.0, rho = 0.0;
  Matrix W1, W2, G;  // pre-step factors and ambient gradient
};

inline void append_flag(std::string& out, const char* name) {
  if (!out.empty()) out += ';';
  out += name;
}

} // namespace detail

inline Trajectory train(const Problem& prob, SchedulerConfig cfg,
                        const TrainOptions& opt = {}) {
  const LossModel& loss = *prob.loss;
  cfg.validate();
  if (opt.telemetry_every < 1) {
    throw std::invalid_argument("train: telemetry_every must be >= 1");
  }
  const bool certified = cfg.policy != StepPolicy::backtracking;

  Trajectory traj;
  traj.cfg = cfg;
  traj.certified = certified;
  traj.summary = compute_init_summary(prob.W1_0, prob.W2_0, loss);
  if (certified) assert_alpha1_positive(traj.summary);

  TrainerState st = make_trainer_state(prob.W1_0, prob.W2_0);
  st.L0 = loss.value(st.W);
  st.envelope = st.L0;
  st.envelope_bar = st.L0;
  traj.L0 = st.L0;
  traj.bc0 = bar_constants(0, cfg, traj.summary, loss, st.L0);

  const double mu = loss.mu(), K = loss.smoothness();
  const double stop =
      opt.stop_loss.value_or(1e-12 * std::max(1.0, st.L0));

  detail::HookContext hook;
  hook.lower_T = traj.bc0.mu_bar / mu;
  hook.upper_T = traj.summary.alpha2 * std::exp(std::pow(cfg.eta0, cfg.c));
  hook.beta1 = traj.summary.beta1;
  hook.beta2 = traj.summary.beta2;
  hook.rho_bar_0 = traj.bc0.rho_bar_0;
  {
    const double denom = detail::one_minus_delta(traj.bc0.mu_bar,
                                                 traj.bc0.K_bar_t, cfg.eta0, cfg.d);
    const double numer = 2.0 * K * cfg.eta0 * cfg.eta0 * traj.summary.alpha2 *
                         std::exp(std::pow(cfg.eta0, cfg.c)) * st.L0;
    // The drift bound is vacuous outside the contractive regime (Delta >= 1).
    hook.drift_bound = st.L0 == 0.0 ? 0.0
                       : denom > 0.0
                           ? numer / denom
                           : std::numeric_limits<double>::infinity();
  }
  const bool hooks_on =
      certified && opt.check_invariants && opt.telemetry_every == 1;

  OperatorBounds ops;
  SpectralExtremes sw{0.0, 0.0};
  double drift = 0.0;
  detail::PrevStep prev;
  traj.rows.reserve(static_cast<size_t>(opt.max_iters) + 1);

  for (long t = 0;; ++t) {
    const auto tick = std::chrono::steady_clock::now();
    const OverparamEval ev = overparam_value_and_gradient(st.W1, st.W2, loss);
    const bool refresh = (t % opt.telemetry_every) == 0;
    if (refresh) {
      ops = operator_spectral_bounds(st.W1, st.W2);
      sw = spectral_extremes(st.W);
      drift = (imbalance(st.W1, st.W2) - st.D0).norm();
    }

    TelemetryRow row;
    row.t = t;
    row.loss = ev.loss;
    row.grad_norm_sq = ev.grad_norm_sq();
    row.sigma2_min_T = ops.sigma2_min;
    row.sigma2_max_T = ops.sigma2_max;
    row.sigma_min_W = sw.sigma_min;
    row.sigma_max_W = sw.sigma_max;
    row.imbalance_drift = drift;
    row.envelope = st.envelope;
    row.envelope_bar = st.envelope_bar;
    const BoundConstants bc = bar_constants(t, cfg, traj.summary, loss, st.L0);
    row.mu_bar = bc.mu_bar;
    row.K_bar_t = bc.K_bar_t;

    if (hooks_on) {
      const double state_tol = 1e-9 * (1.0 + ev.loss);
      const double mu_t = mu * ops.sigma2_min;
      if (0.5 * ev.grad_norm_sq() < mu_t * ev.loss - state_tol) {
        detail::append_flag(row.violations, "pl");
      }
      if (ops.sigma2_min < hook.lower_T - 1e-8 * std::max(1.0, std::abs(hook.lower_T))) {
        detail::append_flag(row.violations, "corridor_T_low");
      }
      if (ops.sigma2_max > hook.upper_T + 1e-8 * std::max(1.0, hook.upper_T)) {
        detail::append_flag(row.violations, "corridor_T_high");
      }
      if (sw.sigma_min < hook.beta1 - 1e-8 * std::max(1.0, hook.beta1)) {
        detail::append_flag(row.violations, "corridor_W_low");
      }
      if (sw.sigma_max > hook.beta2 + 1e-8 * std::max(1.0, hook.beta2)) {
        detail::append_flag(row.violations, "corridor_W_high");
      }
      if (drift > hook.drift_bound + 1e-9 * std::max(1.0, hook.drift_bound)) {
        detail::append_flag(row.violations, "drift");
      }
      if (prev.valid) {
        const double guard = 1e-9 * (1.0 + prev.loss);
        const double descent_rhs =
            prev.loss -
            (prev.eta - 0.5 * prev.K_t * prev.eta * prev.eta) * prev.grad_norm_sq;
        if (ev.loss > descent_rhs + guard) {
          detail::append_flag(row.violations, "descent");
        }
        if (ev.loss > prev.rho * prev.loss * (1.0 + 1e-9) +
                          1e-12 * std::max(prev.loss, 1e-30)) {
          detail::append_flag(row.violations, "contraction");
        }
        if (prev.rho > hook.rho_bar_0 + 1e-12) {
          detail::append_flag(row.violations, "rho_order");
        }
        const Matrix predicted =
            prev.W1 * prev.W2.transpose() -
            prev.eta * (prev.G * (prev.W2 * prev.W2.transpose()) +
                        (prev.W1 * prev.W1.transpose()) * prev.G) +
            prev.eta * prev.eta * prev.G * prev.W2 * prev.W1.transpose() * prev.G;
        const double mismatch = (st.W - predicted).norm();
        if (mismatch > 1e-10 * std::max(1.0, st.W.norm())) {
          detail::append_flag(row.violations, "product_identity");
        }
      }
    }

    const bool done = t >= opt.max_iters || ev.loss <= stop;
    if (done) {
      row.mu_t = mu * ops.sigma2_min;
      row.K_t = k_t_at(K, ops.sigma2_max, sw.sigma_max, ev.loss, 0.0);
      if (opt.wallclock) row.wallclock_ns = 0;
      traj.violation_count += row.violations.empty() ? 0 : 1;
      traj.rows.push_back(std::move(row));
      break;
    }

    double eta = 0.0;
    if (cfg.policy == StepPolicy::backtracking) {
      auto [next, used] =
          backtracking_step(st, loss, opt.eta_bt, opt.tau, opt.gamma);
      eta = used;
      const LocalConstants lc =
          make_local_constants(mu, K, ops, sw.sigma_max, ev.loss, eta);
      const auto factors = descent_factors(eta, lc, bc);
      row.eta_t = eta;
      row.mu_t = lc.mu_t;
      row.K_t = lc.K_t;
      row.rho = factors.first;
      row.rho_bar = factors.second;
      if (hooks_on) {
        prev = {true, eta, lc.K_t, ev.loss, ev.grad_norm_sq(), factors.first,
                st.W1, st.W2, loss.gradient(st.W)};
      }
      next.envelope = st.envelope * factors.first;
      next.envelope_bar = st.envelope_bar * factors.second;
      st = std::move(next);
    } else {
      double cap = 0.0;
      switch (cfg.policy) {
        case StepPolicy::constant:
          eta = cfg.eta0;
          break;
        case StepPolicy::adaptive_rho:
          cap = solve_self_consistent_step(K, ops.sigma2_max, sw.sigma_max, ev.loss);
          eta = step_size_from_cap(cfg, t, cap);
          break;
        case StepPolicy::adaptive_rho_bar:
          cap = 1.0 / bc.K_bar_t;
          eta = step_size_from_cap(cfg, t, cap);
          break;
        case StepPolicy::backtracking:
          break;
      }
      const LocalConstants lc =
          make_local_constants(mu, K, ops, sw.sigma_max, ev.loss, eta);
      const auto factors = descent_factors(eta, lc, bc);
      row.eta_t = eta;
      row.mu_t = lc.mu_t;
      row.K_t = lc.K_t;
      row.rho = factors.first;
      row.rho_bar = factors.second;
      if (hooks_on) {
        prev = {true, eta, lc.K_t, ev.loss, ev.grad_norm_sq(), factors.first,
                st.W1, st.W2, loss.gradient(st.W)};
      }
      detail::apply_overparam_step(st, ev.G1, ev.G2, eta);
      st.envelope *= factors.first;
      st.envelope_bar *= factors.second;
    }

    if (opt.wallclock) {
      row.wallclock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                             std::chrono::steady_clock::now() - tick)
                             .count();
    }
    traj.violation_count += row.violations.empty() ? 0 : 1;
    traj.rows.push_back(std::move(row));
  }

  // D0/L0 bookkeeping survives the loop on the returned state.
  st.L0 = traj.L0;
  traj.state = std::move(st);
  return traj;
}

} // namespace ogd
