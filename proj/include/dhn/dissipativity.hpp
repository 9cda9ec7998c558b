#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dhn/ocp.hpp"
#include "dhn/pencil.hpp"

namespace dhn {

/// Cumulative integrals along an optimal pair, at the grid points t_0..t_N:
///   shifted[j]   = int_0^{t_j} l(t, z*) - l(t, zbar) dt
///   deviation2[j] = int_0^{t_j} ||z* - zbar||^2 dt
/// so that the rotated cost with alpha(s) = c s^2 is shifted - c * deviation2.
struct RotatedCost {
  std::vector<double> t;
  std::vector<double> shifted;
  std::vector<double> deviation2;
  double sup_abs_integrand = 0.0;  // sup of |l(t,z*) - l(t,zbar) - c e^2| at c = c_used
  double c_used = 0.0;

  double integral(double c) const { return shifted.back() - c * deviation2.back(); }
};

/// Composite Simpson with `substeps` (even) per interval on the exact
/// intra-interval state. The cost difference is expanded around zbar to avoid
/// cancellation between large stage-cost values.
RotatedCost rotated_cost(const TrajectoryPair& pair, const OcpScenario& scenario,
                         const TurnpikeTrajectory& turnpike, double c, int substeps = 8);

struct StorageEstimate {
  Eigen::VectorXd x0;
  double x0_scale = 0.0;
  std::vector<double> horizons;
  std::vector<double> values;  // -rotated integral per horizon
  std::vector<double> running_max;  // estimate over the first k horizons (>= 0)
  double estimate = 0.0;
  double stabilization_ratio = 0.0;  // last increment / estimate
  bool bounded = true;               // finite and stabilization ratio below the threshold
  std::vector<RotatedCost> costs;
  std::vector<OcpScenario> scenarios;
  std::vector<TrajectoryPair> pairs;
};

/// max(0, max_T -int l_{zbar,alpha}) over the listed horizons, each solved
/// from `base` with x0 replaced.
StorageEstimate available_storage_estimate(const OcpScenario& base, const Eigen::VectorXd& x0,
                                           const TurnpikeTrajectory& turnpike, double c,
                                           const std::vector<double>& horizons,
                                           double stabilization_threshold = 0.05,
                                           const BoxQpOptions& options = {});

struct SdiResult {
  double max_violation = 0.0;      // max_j of S(t_j, x_j) - S(0, x_0) - int_0^{t_j} l_{zbar,alpha}
  double relative_violation = 0.0;  // normalized by the largest |term| involved
  std::vector<double> storage;     // S(t_j, x_j) without offset
};

/// Candidate storage S(t, x) = -lambdabar(t)'(x - xbar(t)) + offset; the offset
/// cancels from the inequality and only makes S nonnegative.
SdiResult sdi_check(const TrajectoryPair& pair, const TurnpikeTrajectory& turnpike,
                    const RotatedCost& cost, double c);

/// Offset making the candidate storage nonnegative on the sampled states.
double storage_offset(const std::vector<TrajectoryPair>& pairs, const TurnpikeTrajectory& turnpike);

/// Largest c in [0, c_max] with relative sDI violation <= tol on every run
/// (bisection, `iterations` halvings).
double fit_alpha_constant(const std::vector<TrajectoryPair>& pairs,
                          const std::vector<RotatedCost>& costs, const TurnpikeTrajectory& turnpike,
                          double c_max, double tol = 1e-6, int iterations = 60);

}  // namespace dhn
