#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dhn/box_qp.hpp"
#include "dhn/input_box.hpp"
#include "dhn/network.hpp"
#include "dhn/pencil.hpp"
#include "dhn/signal.hpp"

namespace dhn {

struct OcpScenario {
  StateSpaceModel model;
  CostData cost;
  Signal disturbance;  // d, dim w
  InputBox box;
  double horizon = 0.0;  // T in seconds
  Eigen::VectorXd x0;
  int intervals = 0;  // N; 0 selects default_intervals(horizon)

  int grid_size() const;
  double step() const { return horizon / grid_size(); }
};

/// ceil(T / 360 s), at least 2.
int default_intervals(double horizon);

/// Throws ValidationError on inconsistent dimensions or invalid data.
void validate(const OcpScenario& scenario);

/// Exact map over a sub-interval of length sigma with constant input:
///   x(t + sigma) = Phi x(t) + Gamma u + Psi w(t),
/// where w is the exosystem state generating the disturbance.
class IntervalPropagator {
 public:
  IntervalPropagator(const StateSpaceModel& model, const Exosystem& exo, double sigma);

  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& w) const {
    return Phi * x + Gamma * u + Psi * w;
  }

  Eigen::MatrixXd Phi, Gamma, Psi;
};

/// Condensed quadratic program in the stacked inputs (u_0, ..., u_{N-1}):
///   J(u) = 1/2 u'Hu + g'u + constant.
struct CondensedQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double constant = 0.0;
  Eigen::VectorXd lower, upper;

  // ZOH data for state recovery: x_{j+1} = Ad x_j + Bd u_j + c_j
  Eigen::MatrixXd Ad, Bd;
  std::vector<Eigen::VectorXd> c;
  Eigen::VectorXd x0;

  /// States at the grid points t_0..t_N as columns.
  Eigen::MatrixXd states(const Eigen::VectorXd& u) const;
};

CondensedQp discretize(const OcpScenario& scenario);

struct TrajectoryPair {
  std::vector<double> t;  // N + 1 grid points
  Eigen::MatrixXd x;      // n x (N + 1)
  Eigen::MatrixXd u;      // m x N, piecewise constant
  double objective = 0.0;
  BoxQpResult diagnostics;

  int intervals() const { return static_cast<int>(u.cols()); }
  double step() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
};

TrajectoryPair solve(const OcpScenario& scenario, const BoxQpOptions& options = {});

/// Recomputes the integral of the stage cost on the exact intra-interval
/// trajectory with composite Simpson (`substeps` even, per interval).
double objective(const TrajectoryPair& pair, const OcpScenario& scenario, int substeps = 4);

/// Exact states at t_j + sigma for j = 0..N-1 (columns), 0 <= sigma <= h.
Eigen::MatrixXd intra_states(const TrajectoryPair& pair, const OcpScenario& scenario, double sigma);

/// max_j ||x_{j+1} - Ad x_j - Bd u_j - c_j|| / (1 + ||x_{j+1}||).
double dynamics_residual(const TrajectoryPair& pair, const OcpScenario& scenario);

/// Stage cost 1/2 x'Qx + u'Sx + x'r(t) + u'p(t).
double stage_cost(const CostData& cost, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace dhn
