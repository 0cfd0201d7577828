#pragma once

#include <Eigen/Dense>

#include "ccd/errors.hpp"

namespace ccd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Solves A X + X A' + C = 0 through the Kronecker-vectorized dense system
// (I (x) A + A (x) I) vec(X) = -vec(C). O(n^6); intended for n up to ~30.
inline MatrixXd solve_lyapunov(const MatrixXd& A, const MatrixXd& C) {
  const int n = static_cast<int>(A.rows());
  MatrixXd K = MatrixXd::Zero(n * n, n * n);
  // vec(A X) = (I (x) A) vec(X): block-diagonal copies of A.
  for (int j = 0; j < n; ++j) K.block(j * n, j * n, n, n) = A;
  // vec(X A') = (A (x) I) vec(X): A_{ij} scaled identities.
  for (int bj = 0; bj < n; ++bj)
    for (int bi = 0; bi < n; ++bi)
      K.block(bi * n, bj * n, n, n).diagonal().array() += A(bi, bj);

  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw LyapunovSingular("Lyapunov Kronecker system is singular (A and -A share eigenvalues)");
  VectorXd c = Eigen::Map<const VectorXd>(C.data(), n * n);
  VectorXd x = lu.solve(-c);
  return Eigen::Map<const MatrixXd>(x.data(), n, n);
}

inline double max_real_eigenvalue(const MatrixXd& A) {
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const MatrixXd& A, double margin = 1e-10) {
  return max_real_eigenvalue(A) <= -margin;
}

}  // namespace ccd
