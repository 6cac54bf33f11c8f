#pragma once

// Initialization summary: the imbalance/margin quantities lambda_[+/-],
// delta_[under/+/-], beta1, beta2 and the derived corridor constants
//   alpha1 <= sigma_min^2(T_t)   and   sigma_max^2(T_t) <= alpha2
// that the convergence certificates are built from. alpha1 > 0 is the
// assumption the trainer gates on.

#include "ogd/loss.hpp"
#include "ogd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ogd {

namespace detail {

// Descending spectrum of D0 = W1^T W1 - W2^T W2. For h > n+m the h x h solve
// is replaced by an (n+m) x (n+m) one: D0 = C^T S C with C = [W1; W2] and
// S = diag(I_n, -I_m), whose nonzero spectrum equals that of the symmetric
// matrix M^(1/2) S M^(1/2), M = C C^T; the other h-(n+m) eigenvalues are 0.
inline std::vector<double> imbalance_spectrum(const Matrix& W1, const Matrix& W2,
                                              const Matrix& D0) {
  const Index n = W1.rows(), m = W2.rows(), h = W1.cols();
  if (h <= n + m) return sorted_eigenvalues_symmetric(D0);

  Matrix C(n + m, h);
  C.topRows(n) = W1;
  C.bottomRows(m) = W2;
  const Matrix M = C * C.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix half =
      es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  Matrix S = Matrix::Zero(n + m, n + m);
  S.topLeftCorner(n, n).setIdentity();
  S.bottomRightCorner(m, m) = -Matrix::Identity(m, m);
  std::vector<double> ev = sorted_eigenvalues_symmetric(half * S * half);
  ev.insert(ev.end(), static_cast<size_t>(h - n - m), 0.0);
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

} // namespace detail

struct InitSummary {
  double lambda_minus = 0.0; // max(lambda_max(-D0), 0)
  double lambda_plus = 0.0;  // max(lambda_max(D0), 0)
  double delta_under = 0.0;  // max(lambda_n(D0),0) + max(lambda_m(-D0),0)
  double delta_plus = 0.0;   // lambda_plus - max(lambda_n(D0),0)
  double delta_minus = 0.0;  // lambda_minus - max(lambda_m(-D0),0)
  double beta1 = 0.0;        // margin: lower bound on sigma_min(W(t))
  double beta2 = 0.0;        // upper bound on sigma_max(W(t))
  double alpha1 = 0.0;       // lower bound on sigma_min^2(T_t)
  double alpha2 = 0.0;       // upper bound on sigma_max^2(T_t)
  Matrix D0;                 // h x h imbalance at initialization
  double D0_frobenius = 0.0;
};

inline InitSummary compute_init_summary(const Matrix& W1_0, const Matrix& W2_0,
                                        const LossModel& loss) {
  require_shared_width(W1_0, W2_0, "compute_init_summary");
  const Index n = W1_0.rows(), m = W2_0.rows(), h = W1_0.cols();
  if (n > h || m > h) {
    throw std::out_of_range(
        "compute_init_summary: needs n <= h and m <= h so the n-th/m-th "
        "imbalance eigenvalues exist");
  }

  InitSummary s;
  s.D0 = imbalance(W1_0, W2_0);
  s.D0_frobenius = s.D0.norm();
  const std::vector<double> ev = detail::imbalance_spectrum(W1_0, W2_0, s.D0);

  // eigenvalues of -D0, descending, are the negated reversal of ev
  const double lam_max_d = ev.front();
  const double lam_max_neg = -ev.back();
  const double lam_n_d = ev[static_cast<size_t>(n - 1)];      // n-th largest
  const double lam_m_neg = -ev[static_cast<size_t>(h - m)];   // m-th largest of -D0

  s.lambda_plus = std::max(lam_max_d, 0.0);
  s.lambda_minus = std::max(lam_max_neg, 0.0);
  const double pos_n = std::max(lam_n_d, 0.0);
  const double pos_m = std::max(lam_m_neg, 0.0);
  s.delta_under = pos_n + pos_m;
  s.delta_plus = s.lambda_plus - pos_n;
  s.delta_minus = s.lambda_minus - pos_m;

  const Matrix& wstar = loss.minimizer();
  if (wstar.rows() != n || wstar.cols() != m) {
    throw std::invalid_argument(
        "compute_init_summary: loss minimizer shape does not match W1 W2^T");
  }
  const double dist = (W1_0 * W2_0.transpose() - wstar).norm();
  const double ratio = std::sqrt(loss.smoothness() / loss.mu());
  const SpectralExtremes sw = spectral_extremes(wstar);
  s.beta1 = std::max(0.0, sw.sigma_min - ratio * dist);
  s.beta2 = sw.sigma_max + ratio * dist;

  const double b1sq4 = 4.0 * s.beta1 * s.beta1;
  s.alpha1 = 0.5 * (-s.delta_plus - s.delta_minus +
                    std::sqrt((s.delta_plus + s.delta_under) *
                                  (s.delta_plus + s.delta_under) +
                              b1sq4) +
                    std::sqrt((s.delta_minus + s.delta_under) *
                                  (s.delta_minus + s.delta_under) +
                              b1sq4));
  const double b2sq4 = 4.0 * s.beta2 * s.beta2;
  s.alpha2 =
      0.5 * (s.lambda_plus +
             std::sqrt(s.lambda_plus * s.lambda_plus + b2sq4)) +
      0.5 * (s.lambda_minus +
             std::sqrt(s.lambda_minus * s.lambda_minus + b2sq4));
  return s;
}

inline void assert_alpha1_positive(const InitSummary& s) {
  if (!(s.alpha1 > 0.0)) {
    throw std::domain_error(
        "alpha1 <= 0: the initialization has neither positive imbalance "
        "margin nor positive product margin, so no linear-rate certificate "
        "exists. Remedies: i.i.d. Gaussian entries with width h >= n+m "
        "(alpha1 > 0 almost surely), or N(0, h^(-2p)) entries with "
        "1/4 < p < 1/2 for width-controlled conditioning.");
  }
}

} // namespace ogd
