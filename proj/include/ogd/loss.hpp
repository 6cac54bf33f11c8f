#pragma once

// Base loss interface and the squared-loss instance used everywhere. The loss
// must come with certified strong-convexity / smoothness constants and its
// minimizer; downstream certificate math consumes mu, K and W* directly, so
// nothing here estimates constants from samples.

#include "ogd/matrix.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace ogd {

class LossModel {
public:
  virtual ~LossModel() = default;
  virtual double value(const Matrix& W) const = 0;
  virtual Matrix gradient(const Matrix& W) const = 0;
  virtual double mu() const = 0;         // strong-convexity constant
  virtual double smoothness() const = 0; // K >= mu
  virtual const Matrix& minimizer() const = 0;
  virtual double optimal_value() const { return 0.0; }
};

// l(W) = 1/2 ||Y - X W||_F^2, shifted by its optimum so the minimum value is
// exactly 0 even for noisy Y. The shifted value is evaluated in the
// cancellation-free form 1/2 ||X (W - W*)||_F^2, which equals
// 1/2||Y-XW||^2 - 1/2||Y-XW*||^2 by the normal equations.
class SquaredLoss final : public LossModel {
public:
  SquaredLoss(Matrix X, Matrix Y) : X_(std::move(X)), Y_(std::move(Y)) {
    require_finite(X_, "SquaredLoss X");
    require_finite(Y_, "SquaredLoss Y");
    if (X_.rows() != Y_.rows()) {
      throw std::invalid_argument("SquaredLoss: X and Y row counts differ");
    }
    if (X_.rows() < X_.cols() || X_.cols() == 0) {
      throw std::domain_error(
          "SquaredLoss: X must be s x n with s >= n (full column rank)");
    }
    Eigen::JacobiSVD<Matrix> svd(X_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smin > 1e-12 * smax) || smax == 0.0) {
      throw std::domain_error(
          "SquaredLoss: X is rank deficient, strong convexity fails");
    }
    mu_ = smin * smin;
    k_ = smax * smax;
    // W* = pinv(X) Y with singular-value cutoff 1e-12*sigma_max
    Eigen::VectorXd inv = sv;
    for (Eigen::Index i = 0; i < inv.size(); ++i) {
      inv(i) = sv(i) > 1e-12 * smax ? 1.0 / sv(i) : 0.0;
    }
    wstar_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * Y_;
    xtx_ = X_.transpose() * X_;
    xty_ = X_.transpose() * Y_;
  }

  double value(const Matrix& W) const override {
    check_shape(W);
    return 0.5 * (X_ * (W - wstar_)).squaredNorm();
  }

  Matrix gradient(const Matrix& W) const override {
    check_shape(W);
    return xtx_ * W - xty_;
  }

  double mu() const override { return mu_; }
  double smoothness() const override { return k_; }
  const Matrix& minimizer() const override { return wstar_; }

  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  Index n() const { return X_.cols(); }
  Index m() const { return Y_.cols(); }

private:
  void check_shape(const Matrix& W) const {
    if (W.rows() != X_.cols() || W.cols() != Y_.cols()) {
      throw std::invalid_argument("SquaredLoss: W must be n x m");
    }
  }

  Matrix X_, Y_;
  Matrix wstar_, xtx_, xty_;
  double mu_ = 0.0, k_ = 0.0;
};

struct OverparamEval {
  double loss = 0.0;
  Matrix G1; // dL/dW1 = grad_l(W) * W2
  Matrix G2; // dL/dW2 = grad_l(W)^T * W1
  double grad_norm_sq() const { return G1.squaredNorm() + G2.squaredNorm(); }
};

// L(W1,W2) = l(W1 W2^T) and its chain-rule gradient, i.e. the image of
// grad_l under the skewing operator T.
inline OverparamEval overparam_value_and_gradient(const Matrix& W1,
                                                  const Matrix& W2,
                                                  const LossModel& loss) {
  require_shared_width(W1, W2, "overparam_value_and_gradient");
  const Matrix W = W1 * W2.transpose();
  OverparamEval out;
  out.loss = loss.value(W);
  const Matrix G = loss.gradient(W);
  out.G1 = G * W2;
  out.G2 = G.transpose() * W1;
  return out;
}

} // namespace ogd
