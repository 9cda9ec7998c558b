#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace dhn {

struct BoxQpOptions {
  double tolerance = 1e-9;  // scaled KKT residual
  int max_iterations = 10000;
  int restarts = 8;  // used only when the reduced Hessian is not positive definite
  std::uint64_t seed = 20240611;
};

struct BoxQpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;  // H x + g at x; box multipliers up to sign
  Eigen::VectorXi active;    // -1 at lower bound, +1 at upper bound, 0 free
  double objective = 0.0;
  double kkt_residual = 0.0;
  double min_reduced_eigenvalue = 0.0;  // of H restricted to the free set
  int iterations = 0;
  bool nonconvex = false;  // H not positive definite (full or on the free set)
  int restarts_used = 0;
};

/// min 1/2 x'Hx + g'x  s.t. lower <= x <= upper (entries may be infinite).
/// Each iteration takes a generalized Cauchy step along the diagonally scaled
/// projected gradient, then a Newton step on the free variables followed by
/// an exact search along the projected path. Throws NumericalError when the
/// iteration cap is hit or the problem is unbounded.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const std::optional<Eigen::VectorXd>& start = std::nullopt,
                         const BoxQpOptions& options = {});

/// max_i |x_i - clamp(x_i - grad_i / d_i)| normalized by the problem scale.
double box_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const Eigen::VectorXd& x);

}  // namespace dhn
