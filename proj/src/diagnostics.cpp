#include "dhn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dhn/error.hpp"
#include "dhn/pmp.hpp"

namespace dhn {

namespace {

std::pair<double, double> cell(const DeviationSeries& s, int k) {
  const int K = s.t.size();
  const double lo = k == 0 ? s.t0 : 0.5 * (s.t[k - 1] + s.t[k]);
  const double hi = k == K - 1 ? s.t1 : 0.5 * (s.t[k] + s.t[k + 1]);
  return {lo, hi};
}

Eigen::MatrixXd stacked_midpoint_states(const TrajectoryPair& pair, const OcpScenario& sc) {
  const Eigen::MatrixXd xm = intra_states(pair, sc, 0.5 * pair.step());
  Eigen::MatrixXd z(xm.rows() + pair.u.rows(), pair.intervals());
  z << xm, pair.u;
  return z;
}

}  // namespace

DeviationSeries deviation(const TrajectoryPair& pair, const OcpScenario& sc,
                          const TurnpikeTrajectory& turnpike, const Eigen::VectorXd& weights) {
  const int n = sc.model.n(), m = sc.model.m();
  if (weights.size() != 0 && weights.size() != n + m) {
    throw std::invalid_argument("deviation weights must have length n + m");
  }
  const Eigen::MatrixXd z = stacked_midpoint_states(pair, sc);
  DeviationSeries out;
  out.t = midpoints(pair);
  out.t0 = pair.t.front();
  out.t1 = pair.t.back();
  out.e.resize(out.t.size());
  for (std::size_t k = 0; k < out.t.size(); ++k) {
    Eigen::VectorXd zbar(n + m);
    zbar << turnpike.x(out.t[k]), turnpike.u(out.t[k]);
    Eigen::VectorXd diff = z.col(k) - zbar;
    if (weights.size() != 0) diff = diff.cwiseProduct(weights);
    out.e[k] = diff.norm();
  }
  return out;
}

double theta_measure(const DeviationSeries& s, double eps) {
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
  double mu = 0.0;
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    if (s.e[k] > eps) {
      const auto [lo, hi] = cell(s, k);
      mu += hi - lo;
    }
  }
  return mu;
}

TubeInterval largest_tube(const DeviationSeries& s, double eps) {
  TubeInterval best;
  const int K = s.t.size();
  for (int k = 0; k < K;) {
    if (s.e[k] > eps) {
      ++k;
      continue;
    }
    int l = k;
    while (l + 1 < K && s.e[l + 1] <= eps) ++l;
    const double entry = cell(s, k).first, exit = cell(s, l).second;
    if (!best.found || exit - entry > best.length()) best = {true, entry, exit, k, l};
    k = l + 1;
  }
  return best;
}

RunReport make_run_report(std::string label, double x0_scale, const TrajectoryPair& pair,
                          const DeviationSeries& series, const std::vector<double>& eps_grid,
                          double eps_num) {
  RunReport r;
  r.label = std::move(label);
  r.x0_scale = x0_scale;
  r.horizon = pair.t.back() - pair.t.front();
  r.step = pair.step();
  r.series = series;
  r.eps_grid = eps_grid;
  for (double eps : eps_grid) r.theta.push_back(theta_measure(series, eps));
  r.tube = largest_tube(series, eps_num);
  if (r.tube.found) {
    for (int k = r.tube.first; k <= r.tube.last; ++k) {
      r.sup_deviation_in_tube = std::max(r.sup_deviation_in_tube, series.e[k]);
    }
  }
  r.exact = r.tube.length() >= 0.25 * r.horizon;
  return r;
}

ExactnessSummary exactness_check(const std::vector<RunReport>& runs,
                                 const std::vector<TrajectoryPair>& pairs,
                                 const std::vector<OcpScenario>& scenarios, double eps_num,
                                 double slack) {
  if (runs.size() != pairs.size() || runs.size() != scenarios.size()) {
    throw std::invalid_argument("exactness_check: runs, pairs and scenarios must align");
  }
  std::set<double> horizons;
  std::set<std::vector<double>> starts;
  for (const auto& sc : scenarios) {
    horizons.insert(sc.horizon);
    starts.insert(std::vector<double>(sc.x0.data(), sc.x0.data() + sc.x0.size()));
  }
  if (horizons.size() < 2 || starts.size() < 2) {
    throw ValidationError("/runs", "exactness check needs at least two horizons and two initial states");
  }

  ExactnessSummary out;
  const std::size_t R = runs.size();
  const std::size_t E = runs.front().eps_grid.size();
  out.nu_hat.assign(E, 0.0);
  for (const auto& r : runs) {
    out.exact.push_back(r.exact);
    for (std::size_t k = 0; k < E; ++k) out.nu_hat[k] = std::max(out.nu_hat[k], r.theta[k]);
  }

  std::vector<Eigen::MatrixXd> z(R);
  for (std::size_t a = 0; a < R; ++a) z[a] = stacked_midpoint_states(pairs[a], scenarios[a]);

  out.horizon_independent = true;
  for (std::size_t a = 0; a < R; ++a) {
    for (std::size_t b = 0; b < R; ++b) {
      if (a == b) continue;
      const bool same_x0 = scenarios[a].x0 == scenarios[b].x0;
      if (same_x0 && scenarios[a].horizon < scenarios[b].horizon) {
        const double h = std::max(runs[a].step, runs[b].step);
        for (std::size_t k = 0; k < E; ++k) {
          const double growth = runs[b].theta[k] - runs[a].theta[k];
          out.max_theta_growth = std::max(out.max_theta_growth, growth);
          if (growth > 2.0 * h + slack) out.horizon_independent = false;
        }
        if (runs[a].tube.found && runs[b].tube.found) {
          out.max_entry_shift =
              std::max(out.max_entry_shift, std::abs(runs[a].tube.entry - runs[b].tube.entry));
        }
      }
      // pairwise coincidence on the overlap of the tubes (common midpoint grid)
      if (a < b && runs[a].tube.found && runs[b].tube.found &&
          std::abs(runs[a].step - runs[b].step) <= 1e-9 * runs[a].step) {
        const int lo = std::max(runs[a].tube.first, runs[b].tube.first);
        const int hi = std::min(runs[a].tube.last, runs[b].tube.last);
        for (int k = lo; k <= hi; ++k) {
          out.max_pairwise_gap = std::max(out.max_pairwise_gap, (z[a].col(k) - z[b].col(k)).norm());
        }
      }
    }
  }
  out.pairwise_coincident = out.max_pairwise_gap <= eps_num;
  return out;
}

double refinement_discrepancy(const TrajectoryPair& coarse, const OcpScenario& coarse_scenario,
                              const TrajectoryPair& fine) {
  const int N = coarse.intervals();
  if (fine.intervals() != 2 * N) throw std::invalid_argument("fine run must have 2N intervals");
  const Eigen::MatrixXd zc = stacked_midpoint_states(coarse, coarse_scenario);
  std::vector<double> diff(N);
  for (int j = 0; j < N; ++j) {
    // the coarse midpoint is the fine grid node 2j + 1
    Eigen::VectorXd zf(zc.rows());
    zf << fine.x.col(2 * j + 1), 0.5 * (fine.u.col(2 * j) + fine.u.col(2 * j + 1));
    diff[j] = (zc.col(j) - zf).norm();
  }
  std::sort(diff.begin(), diff.end());
  return N % 2 == 1 ? diff[N / 2] : 0.5 * (diff[N / 2 - 1] + diff[N / 2]);
}

double eps_hat(const TurnpikeTrajectory& turnpike, const InputBox& box, double horizon, int samples) {
  double best = std::numeric_limits<double>::infinity();
  for (double t : uniform_grid(0.0, horizon, samples)) {
    const Eigen::VectorXd u = turnpike.u(t);
    best = std::min(best, std::min((u - box.lower).cwiseAbs().minCoeff(),
                                   (box.upper - u).cwiseAbs().minCoeff()));
  }
  return best;
}

}  // namespace dhn
