#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhn/ocp.hpp"
#include "dhn/pencil.hpp"

namespace dhn {

/// Deviation samples e(t_k) = ||W (z*(t_k) - zbar(t_k))|| on the interval
/// midpoints, where the piecewise-constant input is unambiguous.
struct DeviationSeries {
  std::vector<double> t;
  std::vector<double> e;
  double t0 = 0.0;  // domain of the run
  double t1 = 0.0;
};

/// `weights` (length n + m) scales the stacked (x, u) components; empty means
/// unweighted.
DeviationSeries deviation(const TrajectoryPair& pair, const OcpScenario& scenario,
                          const TurnpikeTrajectory& turnpike,
                          const Eigen::VectorXd& weights = Eigen::VectorXd());

/// Measure of {t : e(t) > eps}: each sample carries its Voronoi cell within
/// [t0, t1] (endpoint samples of a node grid get half cells).
double theta_measure(const DeviationSeries& e, double eps);

struct TubeInterval {
  bool found = false;
  double entry = 0.0;
  double exit = 0.0;
  int first = 0;  // sample indices (inclusive)
  int last = 0;
  double length() const { return found ? exit - entry : 0.0; }
};

/// Longest contiguous run of samples with e <= eps, as a time interval made of
/// their Voronoi cells.
TubeInterval largest_tube(const DeviationSeries& e, double eps);

struct RunReport {
  std::string label;
  double horizon = 0.0;
  double x0_scale = 0.0;  // 0 when x0 was given explicitly
  double step = 0.0;
  DeviationSeries series;
  std::vector<double> eps_grid;
  std::vector<double> theta;  // mu(Theta_T(eps)) for eps in eps_grid
  TubeInterval tube;
  double sup_deviation_in_tube = 0.0;
  bool exact = false;
};

RunReport make_run_report(std::string label, double x0_scale, const TrajectoryPair& pair,
                          const DeviationSeries& series, const std::vector<double>& eps_grid,
                          double eps_num);

struct ExactnessSummary {
  std::vector<bool> exact;       // per run
  bool horizon_independent = false;
  double max_theta_growth = 0.0;  // worst mu(Theta_{T2}) - mu(Theta_{T1}) over eps and pairs
  double max_entry_shift = 0.0;   // worst entry-time difference for runs sharing x0
  double max_pairwise_gap = 0.0;  // worst ||z*_a - z*_b|| on overlapping tubes
  bool pairwise_coincident = false;  // max_pairwise_gap <= eps_num
  std::vector<double> nu_hat;     // max over runs of mu(Theta_T(eps))
};

/// Requires at least two distinct horizons and two distinct initial states
/// (ValidationError otherwise). `runs` and `pairs` are index-aligned. The
/// horizon-independence flag holds when the measure grows by at most
/// 2h + slack from the shorter to the longer horizon for every eps.
ExactnessSummary exactness_check(const std::vector<RunReport>& runs,
                                 const std::vector<TrajectoryPair>& pairs,
                                 const std::vector<OcpScenario>& scenarios, double eps_num,
                                 double slack = 0.0);

/// Median over the coarse midpoints of ||z_N - z_2N||, with the fine input
/// averaged over the two sub-intervals.
double refinement_discrepancy(const TrajectoryPair& coarse, const OcpScenario& coarse_scenario,
                              const TrajectoryPair& fine);

/// min over a sample grid of the distance of ubar to the input bounds.
double eps_hat(const TurnpikeTrajectory& turnpike, const InputBox& box, double horizon,
               int samples = 1000);

}  // namespace dhn
