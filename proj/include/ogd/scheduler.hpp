#pragma once

// Step-size machinery: per-iterate local constants (mu_t, K_t), the global
// bound constants (mu_bar, K_bar_t, Delta, rho_bar), the eta_max root
// finders, and the step-size policies.
//
// Conventions, with mu = loss.mu(), K = loss.smoothness(), L = current loss:
//   mu_t      = mu * sigma_min^2(T_t)
//   K_t(eta)  = K*s2max + sqrt(2KL) + 6K^2*smaxW*L*eta^2 + 3K*s2max*sqrt(2KL)*eta
//   mu_bar    = mu * (alpha1 + 2*alpha2*(1 - exp(eta0^c)))
//   K_bar_t   = sqrt(2K*L0*rho_bar0^t) + 6K^2*beta2*L0*eta0^2*Delta^t
//               + K*exp(eta0^c)*alpha2*(1 + 3*sqrt(2K*L0*Delta^t)*eta0)
//   rho(eta)  = 1 - 2*mu_t*eta + mu_t*K_t*eta^2   (rho_bar analogous)
//   Delta     = (1 + eta0^d) * rho_bar(eta0, 0)
// Delta is only meaningful on instances with L0 > 0; at L0 = 0 every drift
// term carries a factor L0 and the trajectory is stationary anyway.

#include "ogd/init_constants.hpp"
#include "ogd/loss.hpp"
#include "ogd/matrix.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ogd {

enum class StepPolicy { constant, adaptive_rho, adaptive_rho_bar, backtracking };

struct SchedulerConfig {
  double c = 0.5;
  double d = 1.01;
  double eta0 = 0.0;
  double eta_max = 0.0; // 0 means "not yet computed"
  StepPolicy policy = StepPolicy::adaptive_rho;

  void validate() const {
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("SchedulerConfig: need 0 < c < 1");
    if (!(d > 1.0)) throw std::invalid_argument("SchedulerConfig: need d > 1");
    if (!(eta0 > 0.0)) throw std::invalid_argument("SchedulerConfig: need eta0 > 0");
    if (eta_max > 0.0 && eta0 > eta_max) {
      throw std::invalid_argument("SchedulerConfig: eta0 exceeds eta_max");
    }
  }
};

struct LocalConstants {
  double mu_t = 0.0;
  double K_t = 0.0;
  double sigma2_min_T = 0.0;
  double sigma2_max_T = 0.0;
  double sigma_max_W = 0.0;
  double loss_t = 0.0;
  double eta_used = 0.0;
};

struct BoundConstants {
  double mu_bar = 0.0;
  double K_bar_t = 0.0;
  double contraction_delta = 0.0;
  double rho_bar_0 = 0.0;
};

struct EtaMaxBreakdown {
  double eta_max = 0.0;
  double eta0_1 = 0.0;
  double eta0_2 = 0.0; // +inf when the drift equation has no root
  double log_bound = 0.0;
};

inline double k_t_at(double K, double s2max_T, double smax_W, double L, double eta) {
  const double root = std::sqrt(2.0 * K * L);
  return K * s2max_T + root + 6.0 * K * K * smax_W * L * eta * eta +
         3.0 * K * s2max_T * root * eta;
}

inline LocalConstants make_local_constants(double mu, double K,
                                           const OperatorBounds& ops,
                                           double smax_W, double L, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("local_constants: eta must be >= 0");
  LocalConstants lc;
  lc.sigma2_min_T = ops.sigma2_min;
  lc.sigma2_max_T = ops.sigma2_max;
  lc.sigma_max_W = smax_W;
  lc.loss_t = L;
  lc.eta_used = eta;
  lc.mu_t = mu * ops.sigma2_min;
  lc.K_t = k_t_at(K, ops.sigma2_max, smax_W, L, eta);
  return lc;
}

inline LocalConstants local_constants(const Matrix& W1, const Matrix& W2,
                                      const LossModel& loss, double eta_candidate) {
  const OperatorBounds ops = operator_spectral_bounds(W1, W2);
  const Matrix w = W1 * W2.transpose();
  const double smax_w = spectral_extremes(w).sigma_max;
  return make_local_constants(loss.mu(), loss.smoothness(), ops, smax_w,
                              loss.value(w), eta_candidate);
}

// Unique positive root of eta*K_t(eta) = 1, i.e. of
//   C*eta^3 + B*eta^2 + A*eta - 1 = 0
// with A = K*s2max + sqrt(2KL), B = 3K*s2max*sqrt(2KL), C = 6K^2*smaxW*L.
// The polynomial is -1 at 0 and >= 0 at 1/A, and strictly increasing on
// eta >= 0, so bisection on [0, 1/A] is safe.
namespace detail {

// Unique positive root of cc*x^3 + b*x^2 + a*x - 1 = 0 for a > 0, b, cc >= 0:
// the polynomial is -1 at 0, >= 0 at 1/a, and strictly increasing.
inline double solve_unit_cubic(double a, double b, double cc) {
  if (!(a > 0.0) || b < 0.0 || cc < 0.0) {
    throw std::domain_error("solve_unit_cubic: need a > 0 and b, cc >= 0");
  }
  double lo = 0.0, hi = 1.0 / a;
  const double tol = 1e-14 * hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double p = ((cc * mid + b) * mid + a) * mid - 1.0;
    if (p < 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

inline double solve_self_consistent_step(double K, double s2max_T, double smax_W,
                                         double L) {
  const double root = std::sqrt(2.0 * K * L);
  const double a = K * s2max_T + root;
  if (!(a > 0.0)) {
    throw std::domain_error(
        "solve_self_consistent_step: degenerate step (zero weights at zero "
        "loss leave K_t = 0)");
  }
  const double eta = detail::solve_unit_cubic(a, 3.0 * K * s2max_T * root,
                                              6.0 * K * K * smax_W * L);
  const double consistency = eta * k_t_at(K, s2max_T, smax_W, L, eta);
  if (!(consistency > 1.0 - 1e-10 && consistency < 1.0 + 1e-10)) {
    throw std::logic_error("solve_self_consistent_step: residual check failed");
  }
  return eta;
}

inline double solve_self_consistent_step(const Matrix& W1, const Matrix& W2,
                                         const LossModel& loss) {
  const OperatorBounds ops = operator_spectral_bounds(W1, W2);
  const Matrix w = W1 * W2.transpose();
  return solve_self_consistent_step(loss.smoothness(), ops.sigma2_max,
                                    spectral_extremes(w).sigma_max,
                                    loss.value(w));
}

namespace detail {

inline double mu_bar_at(double mu, double alpha1, double alpha2, double eta, double c) {
  return mu * (alpha1 + 2.0 * alpha2 * (1.0 - std::exp(std::pow(eta, c))));
}

inline double k_bar_0_at(double K, double L0, double alpha2, double beta2,
                         double eta, double c) {
  const double root = std::sqrt(2.0 * K * L0);
  return root + 6.0 * K * K * beta2 * L0 * eta * eta +
         K * std::exp(std::pow(eta, c)) * alpha2 * (1.0 + 3.0 * root * eta);
}

inline double rho_bar_at(double mu_bar, double k_bar, double eta) {
  return 1.0 - 2.0 * mu_bar * eta + mu_bar * k_bar * eta * eta;
}

// 1 - Delta(eta) with Delta = (1 + eta^d) * rho_bar(eta). Expanded so the
// value stays accurate when Delta is within roundoff of 1 (the interesting
// regime for the drift equation E-root and the drift-bound denominator):
//   1 - Delta = mu_bar*eta*(2 - k_bar*eta) - eta^d * rho_bar.
inline double one_minus_delta(double mu_bar, double k_bar, double eta, double d) {
  return mu_bar * eta * (2.0 - k_bar * eta) -
         std::pow(eta, d) * rho_bar_at(mu_bar, k_bar, eta);
}

} // namespace detail

inline BoundConstants bar_constants(long t, const SchedulerConfig& cfg,
                                    const InitSummary& summary,
                                    const LossModel& loss, double L0) {
  cfg.validate();
  if (t < 0) throw std::invalid_argument("bar_constants: t must be >= 0");
  const double mu = loss.mu(), K = loss.smoothness();
  const double eta0 = cfg.eta0;
  BoundConstants bc;
  bc.mu_bar = detail::mu_bar_at(mu, summary.alpha1, summary.alpha2, eta0, cfg.c);
  const double k_bar_0 =
      detail::k_bar_0_at(K, L0, summary.alpha2, summary.beta2, eta0, cfg.c);
  bc.rho_bar_0 = detail::rho_bar_at(bc.mu_bar, k_bar_0, eta0);
  bc.contraction_delta = (1.0 + std::pow(eta0, cfg.d)) * bc.rho_bar_0;
  const double rho_pow = std::pow(bc.rho_bar_0, static_cast<double>(t));
  const double delta_pow = std::pow(bc.contraction_delta, static_cast<double>(t));
  const double root0 = std::sqrt(2.0 * K * L0);
  bc.K_bar_t = std::sqrt(2.0 * K * L0 * rho_pow) +
               6.0 * K * K * summary.beta2 * L0 * eta0 * eta0 * delta_pow +
               K * std::exp(std::pow(eta0, cfg.c)) * summary.alpha2 *
                   (1.0 + 3.0 * root0 * std::sqrt(delta_pow) * eta0);
  return bc;
}

// eta_max = min(eta0_1, eta0_2, log_bound) where
//   eta0_1:    unique positive solution of eta * K_bar_0(eta) = 1,
//   eta0_2:    smallest positive root of
//              4*K*L0*eta^2 = (1 - exp(-eta^c)) * (1 - Delta(eta)),
//              or +inf when there is no sign change (always so for L0 = 0),
//   log_bound: (ln(1 + alpha1/(2*alpha2)))^(1/c).
// When log_bound itself is the minimum it is shaved by a relative 1e-12 so
// that mu_bar(eta_max) stays strictly positive (the feasible set is open).
inline EtaMaxBreakdown compute_eta_max(const InitSummary& summary,
                                       const LossModel& loss, double L0,
                                       double c, double d) {
  if (!(c > 0.0 && c < 1.0) || !(d > 1.0)) {
    throw std::invalid_argument("compute_eta_max: need 0 < c < 1 and d > 1");
  }
  if (!(L0 >= 0.0)) throw std::invalid_argument("compute_eta_max: L0 must be >= 0");
  assert_alpha1_positive(summary);
  const double mu = loss.mu(), K = loss.smoothness();
  const double a1 = summary.alpha1, a2 = summary.alpha2, b2 = summary.beta2;

  const auto g = [&](double eta) {
    return eta * detail::k_bar_0_at(K, L0, a2, b2, eta, c);
  };
  double hi = 1.0;
  while (g(hi) < 1.0) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 1.0) lo = mid; else hi = mid;
  }
  EtaMaxBreakdown out;
  out.eta0_1 = 0.5 * (lo + hi);
  out.log_bound = std::pow(std::log1p(a1 / (2.0 * a2)), 1.0 / c);

  out.eta0_2 = std::numeric_limits<double>::infinity();
  const double scan_hi = std::min(out.eta0_1, out.log_bound);
  if (L0 > 0.0 && scan_hi > 1e-12) {
    const auto drift_gap = [&](double eta) {
      const double mu_bar = detail::mu_bar_at(mu, a1, a2, eta, c);
      const double k_bar = detail::k_bar_0_at(K, L0, a2, b2, eta, c);
      return 4.0 * K * L0 * eta * eta -
             (1.0 - std::exp(-std::pow(eta, c))) *
                 detail::one_minus_delta(mu_bar, k_bar, eta, d);
    };
    const int points = 400;
    double prev_eta = 1e-12;
    if (drift_gap(prev_eta) >= 0.0) {
      out.eta0_2 = prev_eta;
    } else {
      const double ratio = std::pow(scan_hi / 1e-12, 1.0 / (points - 1));
      for (int i = 1; i < points; ++i) {
        const double eta = prev_eta * ratio;
        const double val = drift_gap(eta);
        if (val >= 0.0) {
          double blo = prev_eta, bhi = eta;
          for (int it = 0; it < 200 && bhi - blo > 1e-15 * bhi; ++it) {
            const double mid = 0.5 * (blo + bhi);
            if (drift_gap(mid) < 0.0) blo = mid; else bhi = mid;
          }
          out.eta0_2 = 0.5 * (blo + bhi);
          break;
        }
        prev_eta = eta;
      }
    }
  }

  out.eta_max = std::min(out.eta0_1, out.eta0_2);
  if (out.log_bound <= out.eta_max) {
    out.eta_max = out.log_bound * (1.0 - 1e-12);
  }

  const double mu_bar = detail::mu_bar_at(mu, a1, a2, out.eta_max, c);
  const double k_bar = detail::k_bar_0_at(K, L0, a2, b2, out.eta_max, c);
  const double rho_bar = detail::rho_bar_at(mu_bar, k_bar, out.eta_max);
  if (!(mu_bar > 0.0) || !(out.eta_max * k_bar <= 1.0 + 1e-9) ||
      !(rho_bar > 0.0 && rho_bar < 1.0)) {
    throw std::logic_error("compute_eta_max: post-condition check failed");
  }
  return out;
}

inline double growth_cap(const SchedulerConfig& cfg, long t) {
  return cfg.eta0 *
         std::exp(0.5 * static_cast<double>(t) * std::log1p(std::pow(cfg.eta0, cfg.d)));
}

// Core policy rule on a precomputed cap: eta = min(growth_cap, cap), clamped
// into [eta0, ...]; a cap below eta0 means eta0 was not <= eta_max.
inline double step_size_from_cap(const SchedulerConfig& cfg, long t, double cap) {
  const double eta = std::min(growth_cap(cfg, t), cap);
  if (eta < cfg.eta0) {
    throw std::runtime_error(
        "step_size: schedule infeasible, the policy cap fell below eta0 "
        "(eta0 was not <= eta_max)");
  }
  return eta;
}

inline double step_size(StepPolicy policy, long t, const Matrix& W1,
                        const Matrix& W2, const LossModel& loss,
                        const SchedulerConfig& cfg, const BoundConstants& bc) {
  cfg.validate();
  switch (policy) {
    case StepPolicy::constant:
      return cfg.eta0;
    case StepPolicy::adaptive_rho:
      return step_size_from_cap(cfg, t, solve_self_consistent_step(W1, W2, loss));
    case StepPolicy::adaptive_rho_bar:
      return step_size_from_cap(cfg, t, 1.0 / bc.K_bar_t);
    case StepPolicy::backtracking:
      break;
  }
  throw std::invalid_argument("step_size: backtracking picks its step by line search");
}

inline std::pair<double, double> descent_factors(double eta, const LocalConstants& lc,
                                                 const BoundConstants& bc) {
  if (!(eta > 0.0)) throw std::invalid_argument("descent_factors: eta must be > 0");
  const double rho = 1.0 - 2.0 * lc.mu_t * eta + lc.mu_t * lc.K_t * eta * eta;
  const double rho_bar =
      1.0 - 2.0 * bc.mu_bar * eta + bc.mu_bar * bc.K_bar_t * eta * eta;
  return {rho, rho_bar};
}

inline const char* to_string(StepPolicy p) {
  switch (p) {
    case StepPolicy::constant: return "constant";
    case StepPolicy::adaptive_rho: return "adaptive_rho";
    case StepPolicy::adaptive_rho_bar: return "adaptive_rho_bar";
    case StepPolicy::backtracking: return "backtracking";
  }
  return "unknown";
}

} // namespace ogd
