#include "dhn/dissipativity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dhn {

RotatedCost rotated_cost(const TrajectoryPair& pair, const OcpScenario& sc,
                         const TurnpikeTrajectory& tp, double c, int substeps) {
  if (substeps < 2 || substeps % 2 != 0) throw std::invalid_argument("Simpson substeps must be even");
  const auto& cost = sc.cost;
  const int N = pair.intervals();
  const double h = pair.step();
  const Exosystem exo(sc.disturbance);
  std::vector<IntervalPropagator> props;
  for (int k = 0; k <= substeps; ++k) props.emplace_back(sc.model, exo, k * h / substeps);

  RotatedCost out;
  out.c_used = c;
  out.t = pair.t;
  out.shifted.assign(N + 1, 0.0);
  out.deviation2.assign(N + 1, 0.0);
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd wj = exo.state(pair.t[j]);
    const Eigen::VectorXd uj = pair.u.col(j);
    double acc = 0.0, acc2 = 0.0;
    for (int k = 0; k <= substeps; ++k) {
      const double t = pair.t[j] + k * h / substeps;
      const double wk = (k == 0 || k == substeps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      const Eigen::VectorXd xb = tp.x(t), ub = tp.u(t);
      const Eigen::VectorXd dx = props[k](pair.x.col(j), uj, wj) - xb;
      const Eigen::VectorXd du = uj - ub;
      const double diff = 0.5 * dx.dot(cost.Q * dx) +
                          dx.dot(cost.Q * xb + cost.r(t) + cost.S.transpose() * ub) +
                          du.dot(cost.S * xb + cost.p(t)) + du.dot(cost.S * dx);
      const double e2 = dx.squaredNorm() + du.squaredNorm();
      acc += wk * diff;
      acc2 += wk * e2;
      out.sup_abs_integrand = std::max(out.sup_abs_integrand, std::abs(diff - c * e2));
    }
    out.shifted[j + 1] = out.shifted[j] + acc * h / (3.0 * substeps);
    out.deviation2[j + 1] = out.deviation2[j] + acc2 * h / (3.0 * substeps);
  }
  return out;
}

StorageEstimate available_storage_estimate(const OcpScenario& base, const Eigen::VectorXd& x0,
                                           const TurnpikeTrajectory& turnpike, double c,
                                           const std::vector<double>& horizons,
                                           double stabilization_threshold,
                                           const BoxQpOptions& options) {
  StorageEstimate est;
  est.x0 = x0;
  double best = 0.0;  // T = 0 contributes zero
  for (double T : horizons) {
    OcpScenario sc = base;
    sc.x0 = x0;
    sc.horizon = T;
    sc.intervals = base.intervals > 0 ? std::max(2, static_cast<int>(std::lround(T / base.step()))) : 0;
    const TrajectoryPair pair = solve(sc, options);
    RotatedCost rc = rotated_cost(pair, sc, turnpike, c);
    const double value = -rc.integral(c);
    est.horizons.push_back(T);
    est.values.push_back(value);
    best = std::max(best, value);
    est.running_max.push_back(best);
    est.costs.push_back(std::move(rc));
    est.scenarios.push_back(sc);
    est.pairs.push_back(pair);
  }
  est.estimate = best;
  if (est.running_max.size() >= 2 && best > 0.0) {
    est.stabilization_ratio = (best - est.running_max[est.running_max.size() - 2]) / best;
  }
  est.bounded = std::isfinite(best) && est.stabilization_ratio < stabilization_threshold;
  return est;
}

SdiResult sdi_check(const TrajectoryPair& pair, const TurnpikeTrajectory& tp, const RotatedCost& cost,
                    double c) {
  SdiResult out;
  const int N = pair.intervals();
  out.storage.resize(N + 1);
  for (int j = 0; j <= N; ++j) {
    const double t = pair.t[j];
    out.storage[j] = -tp.lambda(t).dot(pair.x.col(j) - tp.x(t));
  }
  double scale = 0.0;
  out.max_violation = 0.0;
  for (int j = 0; j <= N; ++j) {
    const double lhs = out.storage[j] - out.storage[0];
    const double rhs = cost.shifted[j] - c * cost.deviation2[j];
    out.max_violation = std::max(out.max_violation, lhs - rhs);
    scale = std::max(scale, std::abs(lhs) + std::abs(cost.shifted[j]) + c * cost.deviation2[j]);
  }
  out.relative_violation = scale > 0.0 ? out.max_violation / scale : 0.0;
  return out;
}

double storage_offset(const std::vector<TrajectoryPair>& pairs, const TurnpikeTrajectory& tp) {
  double lowest = 0.0;
  for (const auto& pair : pairs) {
    for (int j = 0; j < static_cast<int>(pair.t.size()); ++j) {
      const double t = pair.t[j];
      lowest = std::min(lowest, -tp.lambda(t).dot(pair.x.col(j) - tp.x(t)));
    }
  }
  return -lowest;
}

double fit_alpha_constant(const std::vector<TrajectoryPair>& pairs,
                          const std::vector<RotatedCost>& costs, const TurnpikeTrajectory& tp,
                          double c_max, double tol, int iterations) {
  auto ok = [&](double c) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (sdi_check(pairs[i], tp, costs[i], c).relative_violation > tol) return false;
    }
    return true;
  };
  if (!ok(0.0)) return 0.0;
  if (ok(c_max)) return c_max;
  double lo = 0.0, hi = c_max;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace dhn
