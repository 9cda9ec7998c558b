#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the discretization or solver code under test.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using TimeFn = std::function<Eigen::VectorXd(double)>;

struct LinearQuadratic {
  Eigen::MatrixXd A, B, E;
  Eigen::MatrixXd Q, S;  // S is m x n
  TimeFn r, p, d;
};

struct Simulation {
  Eigen::MatrixXd x;  // n x (N + 1)
  double cost = 0.0;
};

/// Classical RK4 with `substeps` (even) steps per interval under a
/// piecewise-constant input; the running cost is accumulated with composite
/// Simpson on the RK4 nodes.
Simulation simulate(const LinearQuadratic& p, const Eigen::VectorXd& x0, const Eigen::MatrixXd& u,
                    double horizon, int substeps = 64);

struct RiccatiSolution {
  Eigen::MatrixXd u;  // m x N
  Eigen::MatrixXd x;  // n x (N + 1)
  double cost = 0.0;
};

/// Unconstrained LQ with constant r, p and d: exact interval data by the
/// Van Loan block exponential, then the backward Riccati recursion on the
/// affine-augmented state (x, 1).
RiccatiSolution riccati(const LinearQuadratic& p, const Eigen::VectorXd& x0, double horizon, int intervals);

/// Coordinate pattern search over the box: start at the box centre, sweep
/// every coordinate over a grid, shrink the grid around the incumbent and
/// repeat until the grid width falls below `resolution`.
Eigen::VectorXd pattern_search(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                               double resolution = 1e-9, int grid = 8);

/// Scaled-and-squared Taylor exponential (independent of Eigen's Pade code).
Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& M);

}  // namespace oracle
