#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhn/ocp.hpp"

namespace dhn {

struct AdjointTrajectory {
  Eigen::MatrixXd lambda;      // n x (N + 1) at the grid points
  Eigen::MatrixXd lambda_mid;  // n x N at the interval midpoints
  Eigen::MatrixXd lambda_mean;  // n x N, interval means (composite Simpson)
  double terminal_residual = 0.0;
  int substeps = 0;              // RK4 steps per interval actually used
  double halving_agreement = 0.0;  // sup-relative change of the last halving
};

/// Integrates lambda' = -(A'lambda + Qx + S'u + r) backward from lambda(T) = 0
/// with RK4 on the exact intra-interval states. The number of steps per
/// interval doubles until two consecutive resolutions agree to `tolerance`.
AdjointTrajectory costate(const TrajectoryPair& pair, const OcpScenario& scenario,
                          double tolerance = 1e-7);

/// s = S x + B'lambda + p at the interval midpoints (m x N).
Eigen::MatrixXd switching_functions(const TrajectoryPair& pair, const AdjointTrajectory& adjoint,
                                    const OcpScenario& scenario);

/// Interval means (1/h) * integral of s over [t_j, t_{j+1}] (m x N). For
/// piecewise-constant controls these carry the sign information of the
/// discrete optimality conditions: the QP gradient equals h times them.
Eigen::MatrixXd mean_switching_functions(const TrajectoryPair& pair,
                                         const AdjointTrajectory& adjoint,
                                         const OcpScenario& scenario);

/// Midpoints t_j + h/2.
std::vector<double> midpoints(const TrajectoryPair& pair);

enum class ArcLabel { lower, upper, singular };
std::string to_string(ArcLabel label);

struct Arc {
  ArcLabel label;
  int first = 0;  // first interval index
  int last = 0;   // last interval index (inclusive)
  double t0 = 0.0;
  double t1 = 0.0;
};

struct ArcPartition {
  std::vector<std::vector<Arc>> arcs;  // per input
  double delta = 0.0;

  /// Label of input i on interval j.
  ArcLabel label(int input, int interval) const;
  /// Intervals where every input is singular simultaneously.
  std::vector<bool> all_singular(int intervals) const;
};

/// 1e-4 * median(|s| over intervals where u sits at a bound), at least 1e-8.
double default_switching_tolerance(const Eigen::MatrixXd& s, const TrajectoryPair& pair,
                                   const InputBox& box);

/// s_i > delta -> lower bound, s_i < -delta -> upper bound, otherwise singular.
/// Interior single-interval islands are merged into the preceding arc.
ArcPartition classify_arcs(const Eigen::MatrixXd& s, const std::vector<double>& grid, double delta);

/// Fraction of bang-labelled intervals on which u sits at the corresponding
/// bound within tol * (u_max - u_min).
double bang_consistency(const ArcPartition& arcs, const TrajectoryPair& pair, const InputBox& box,
                        double tol = 1e-8);

}  // namespace dhn
