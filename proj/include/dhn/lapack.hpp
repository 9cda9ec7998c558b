#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dhn::lapack {

/// Diagonal two-sided scaling of a pencil (xGGBAL, job 'S'):
/// A_b = diag(left) * A * diag(right), same for B.
struct Balancing {
  Eigen::VectorXd left;
  Eigen::VectorXd right;
};
Balancing balance(Eigen::MatrixXd& A, Eigen::MatrixXd& B);

/// Real generalized Schur form A = Q S Z', B = Q T Z' (xGGES, unsorted).
/// Generalized eigenvalues are (alphar + i alphai) / beta.
struct GeneralizedSchur {
  Eigen::MatrixXd S, T, Q, Z;
  Eigen::VectorXd alphar, alphai, beta;
};
GeneralizedSchur qz(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Moves the selected eigenvalues to the leading block (xTGSEN). Complex
/// pairs must be selected together. Returns the size of the leading block.
int reorder(GeneralizedSchur& schur, const std::vector<int>& select);

/// Solves  A R - L B = scale * C,  D R - L E = scale * F  (xTGSYL) for
/// quasi-triangular (A, D) and (B, E). R overwrites C, L overwrites F.
/// Returns scale.
double generalized_sylvester(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                             const Eigen::MatrixXd& E, Eigen::MatrixXd& F);

}  // namespace dhn::lapack
