#pragma once

// Dense-matrix primitives shared by the rest of the library: spectral
// extremes, the imbalance matrix D = W1^T W1 - W2^T W2, and the skewing
// operator T(G) = [G W2 ; G^T W1] in both its closed-form spectral bounds and
// an explicit (small-size) matricization used as an oracle in tests.

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace ogd {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline void require_finite(const Matrix& A, const char* what) {
  if (!A.allFinite()) {
    throw std::invalid_argument(std::string(what) +
                                ": non-finite entries (NaN/Inf)");
  }
}

// Row-major construction helper; validates count and finiteness.
inline Matrix make_matrix(Index rows, Index cols,
                          std::initializer_list<double> entries) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("make_matrix: dimensions must be positive");
  }
  if (static_cast<Index>(entries.size()) != rows * cols) {
    throw std::invalid_argument("make_matrix: entry count != rows*cols");
  }
  Matrix A(rows, cols);
  Index k = 0;
  for (double v : entries) {
    A(k / cols, k % cols) = v;
    ++k;
  }
  require_finite(A, "make_matrix");
  return A;
}

struct SpectralExtremes {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

// Smallest/largest singular values; sigma_min is the min(rows,cols)-th one
// (rectangular matrices are not zero-padded).
inline SpectralExtremes spectral_extremes(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) {
    throw std::invalid_argument("spectral_extremes: empty matrix");
  }
  require_finite(A, "spectral_extremes");
  const Index r = std::min(A.rows(), A.cols());
  Eigen::VectorXd sv;
  if (r <= 16) {
    sv = Eigen::JacobiSVD<Matrix>(A).singularValues();
  } else {
    sv = Eigen::BDCSVD<Matrix>(A).singularValues();
  }
  return SpectralExtremes{sv(r - 1), sv(0)};
}

// Eigenvalues of a symmetric matrix, descending, so index k (1-based) is the
// k-th largest. Input is symmetrized as (S+S^T)/2 after the tolerance check.
inline std::vector<double> sorted_eigenvalues_symmetric(const Matrix& S) {
  if (S.rows() != S.cols() || S.rows() == 0) {
    throw std::invalid_argument("sorted_eigenvalues_symmetric: not square");
  }
  require_finite(S, "sorted_eigenvalues_symmetric");
  const double asym = (S - S.transpose()).norm();
  if (asym > 1e-9 * S.norm()) {
    throw std::invalid_argument(
        "sorted_eigenvalues_symmetric: asymmetry " + std::to_string(asym) +
        " exceeds 1e-9*||S||_F");
  }
  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sorted_eigenvalues_symmetric: solver failed");
  }
  const Eigen::VectorXd ev = es.eigenvalues(); // ascending in Eigen
  std::vector<double> out(static_cast<size_t>(ev.size()));
  for (Index i = 0; i < ev.size(); ++i) {
    out[static_cast<size_t>(i)] = ev(ev.size() - 1 - i);
  }
  return out;
}

inline void require_shared_width(const Matrix& W1, const Matrix& W2,
                                 const char* what) {
  if (W1.cols() != W2.cols()) {
    throw std::invalid_argument(std::string(what) +
                                ": W1 and W2 must share the width h");
  }
}

// D = W1^T W1 - W2^T W2 (h x h, symmetric by construction; re-symmetrized to
// kill accumulation drift in the h-length dot products).
inline Matrix imbalance(const Matrix& W1, const Matrix& W2) {
  require_shared_width(W1, W2, "imbalance");
  Matrix D = W1.transpose() * W1 - W2.transpose() * W2;
  D = 0.5 * (D + D.transpose()).eval();
  return D;
}

struct OperatorBounds {
  double sigma2_min = 0.0; // sigma_min^2(T)
  double sigma2_max = 0.0; // sigma_max^2(T)
  double sigma_min() const { return std::sqrt(sigma2_min); }
  double sigma_max() const { return std::sqrt(sigma2_max); }
};

// Closed-form spectral bounds of T(G) = [G W2 ; G^T W1]:
//   sigma_max^2(T) = sigma_max^2(W1) + sigma_max^2(W2)
//   sigma_min^2(T) = lambda_min(W1 W1^T) + lambda_min(W2 W2^T)
// The min side uses Gram minimum eigenvalues, which are 0 when h < rows
// (rank-deficient Gram); for the usual overparametrized shapes (h >= n, m)
// they coincide with the squared smallest singular values.
inline OperatorBounds operator_spectral_bounds(const Matrix& W1,
                                               const Matrix& W2) {
  require_shared_width(W1, W2, "operator_spectral_bounds");
  const SpectralExtremes s1 = spectral_extremes(W1);
  const SpectralExtremes s2 = spectral_extremes(W2);
  const double min1 =
      W1.cols() >= W1.rows() ? s1.sigma_min * s1.sigma_min : 0.0;
  const double min2 =
      W2.cols() >= W2.rows() ? s2.sigma_min * s2.sigma_min : 0.0;
  return OperatorBounds{min1 + min2,
                        s1.sigma_max * s1.sigma_max +
                            s2.sigma_max * s2.sigma_max};
}

// Explicit matrix of T with column-major vec on both sides:
//   M * vec(G) = [vec(G W2) ; vec(G^T W1)],  M is (n+m)h x nm.
// Oracle use only; refuses outputs beyond the entry cap.
inline Matrix matricize_operator(const Matrix& W1, const Matrix& W2,
                                 Index entry_cap = 10000) {
  require_shared_width(W1, W2, "matricize_operator");
  const Index n = W1.rows(), m = W2.rows(), h = W1.cols();
  const Index rows = (n + m) * h, cols = n * m;
  if (rows * cols > entry_cap) {
    throw std::length_error("matricize_operator: " +
                            std::to_string(rows * cols) +
                            " entries exceed cap " + std::to_string(entry_cap));
  }
  Matrix M = Matrix::Zero(rows, cols);
  Matrix G = Matrix::Zero(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      G(i, j) = 1.0;
      const Matrix top = G * W2;             // n x h
      const Matrix bottom = G.transpose() * W1; // m x h
      const Index col = j * n + i;           // column-major index of (i,j)
      Index r = 0;
      for (Index cc = 0; cc < h; ++cc) {
        for (Index rr = 0; rr < n; ++rr) M(r++, col) = top(rr, cc);
      }
      for (Index cc = 0; cc < h; ++cc) {
        for (Index rr = 0; rr < m; ++rr) M(r++, col) = bottom(rr, cc);
      }
      G(i, j) = 0.0;
    }
  }
  return M;
}

} // namespace ogd
