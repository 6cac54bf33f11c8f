#pragma once

// Synthetic problem instances used by the experiment runners and tests.
// Every draw is tied to a (seed, stream) pair so instances replay exactly
// across runs, platforms, and thread counts.

#include "ogd/loss.hpp"
#include "ogd/matrix.hpp"
#include "ogd/rng.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>

namespace ogd {

enum class InitScheme { std_normal, scaled_normal };
enum class DataScheme { orthogonal_teacher, orthogonal_theta, spectrum_band };

struct ProblemSpec {
  Index n = 10;
  Index m = 10;
  Index s = 10;
  Index h = 100;
  InitScheme init = InitScheme::std_normal;
  double p = 0.375; // scaled_normal: entries ~ N(0, h^(-2p))
  DataScheme data = DataScheme::orthogonal_teacher;
  double sigma = 1.0;    // orthogonal_teacher: Y = X W(0) + sigma^2 * eps
  double noise = 0.1;    // additive noise variance for the other schemes
  double band_lo = 1.8;  // spectrum_band singular value range
  double band_hi = 2.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n <= 0 || m <= 0 || h <= 0 || s < n) {
      throw std::invalid_argument("ProblemSpec: need n,m,h > 0 and s >= n");
    }
    if (init == InitScheme::scaled_normal && !(p >= 0.25 && p <= 0.5)) {
      throw std::invalid_argument("ProblemSpec: scaled_normal needs p in [1/4, 1/2]");
    }
    if (data == DataScheme::spectrum_band) {
      if (s != n) throw std::invalid_argument("ProblemSpec: spectrum_band needs s == n");
      if (!(band_lo > 0.0 && band_hi >= band_lo)) {
        throw std::invalid_argument("ProblemSpec: need 0 < band_lo <= band_hi");
      }
    }
    if (!(sigma >= 0.0) || !(noise >= 0.0)) {
      throw std::invalid_argument("ProblemSpec: noise levels must be >= 0");
    }
  }
};

struct Problem {
  std::shared_ptr<SquaredLoss> loss;
  Matrix W1_0;
  Matrix W2_0;
};

namespace detail {

inline Matrix gaussian_matrix(Philox& rng, Index rows, Index cols, double stddev) {
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = stddev * rng.next_gaussian();
  }
  return out;
}

// Thin Q of a Gaussian draw, with the R diagonal sign fixed so the factor
// is a deterministic function of the draw (Householder sign ambiguity).
inline Matrix orthonormal_columns(Philox& rng, Index rows, Index cols) {
  const Matrix raw = gaussian_matrix(rng, rows, cols, 1.0);
  Eigen::HouseholderQR<Matrix> qr(raw);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix& qrmat = qr.matrixQR();
  for (Index j = 0; j < cols; ++j) {
    if (qrmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

} // namespace detail

inline Problem gen_problem(const ProblemSpec& spec) {
  spec.validate();

  const double init_std = spec.init == InitScheme::std_normal
                              ? 1.0
                              : std::pow(static_cast<double>(spec.h), -spec.p);
  Philox rng_w1 = make_rng(spec.seed, Stream::w1_init);
  Philox rng_w2 = make_rng(spec.seed, Stream::w2_init);
  Matrix W1 = detail::gaussian_matrix(rng_w1, spec.n, spec.h, init_std);
  Matrix W2 = detail::gaussian_matrix(rng_w2, spec.m, spec.h, init_std);

  Philox rng_x = make_rng(spec.seed, Stream::data_x);
  Matrix X;
  if (spec.data == DataScheme::spectrum_band) {
    const Matrix u = detail::orthonormal_columns(rng_x, spec.n, spec.n);
    const Matrix v = detail::orthonormal_columns(rng_x, spec.n, spec.n);
    Eigen::VectorXd sv(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
      sv(i) = spec.band_lo + (spec.band_hi - spec.band_lo) * rng_x.next_double();
    }
    X = u * sv.asDiagonal() * v.transpose();
  } else {
    X = detail::orthonormal_columns(rng_x, spec.s, spec.n);
  }

  Philox rng_noise = make_rng(spec.seed, Stream::noise);
  Matrix Y;
  switch (spec.data) {
    case DataScheme::orthogonal_teacher: {
      Y = X * (W1 * W2.transpose());
      if (spec.sigma > 0.0) {
        Y += spec.sigma * spec.sigma *
             detail::gaussian_matrix(rng_noise, spec.s, spec.m, 1.0);
      }
      break;
    }
    case DataScheme::orthogonal_theta: {
      Philox rng_teacher = make_rng(spec.seed, Stream::teacher);
      const Matrix theta =
          detail::gaussian_matrix(rng_teacher, spec.n, spec.m, std::sqrt(0.1));
      Y = X * theta;
      if (spec.noise > 0.0) {
        Y += detail::gaussian_matrix(rng_noise, spec.s, spec.m,
                                     std::sqrt(spec.noise));
      }
      break;
    }
    case DataScheme::spectrum_band: {
      Y = X * (W1 * W2.transpose());
      if (spec.noise > 0.0) {
        Y += detail::gaussian_matrix(rng_noise, spec.s, spec.m,
                                     std::sqrt(spec.noise));
      }
      break;
    }
  }

  Problem prob;
  prob.loss = std::make_shared<SquaredLoss>(X, Y);
  prob.W1_0 = std::move(W1);
  prob.W2_0 = std::move(W2);
  return prob;
}

} // namespace ogd
