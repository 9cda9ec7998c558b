#include <gtest/gtest.h>

#include <cmath>

#include "dhn/dissipativity.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dhn;

namespace {

/// Small LQ instance with S = 0 and wide bounds, so the turnpike is interior.
OcpScenario interior_lq(double T, int N) {
  OcpScenario sc = fixture::small_lq(-10.0, 10.0, T, N);
  sc.cost.S.setZero();
  return sc;
}

TurnpikeTrajectory turnpike_of(const OcpScenario& sc) {
  const OptimalityPencil P = build_pencil(sc.model, sc.cost, sc.disturbance);
  return bounded_particular_solution(weierstrass_decompose(P), P, sc.box);
}

/// Fine reference trajectory: every ZOH interval split into `split` pieces.
struct Fine {
  std::vector<double> t;
  Eigen::MatrixXd x, u;
};

Fine refine(const OcpScenario& sc, const TrajectoryPair& pair, int split) {
  Fine f;
  const int N = pair.intervals();
  f.u.resize(pair.u.rows(), N * split);
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k < split; ++k) f.u.col(j * split + k) = pair.u.col(j);
  }
  f.x = oracle::simulate(fixture::as_oracle(sc), sc.x0, f.u, sc.horizon, 16).x;
  for (int k = 0; k <= N * split; ++k) f.t.push_back(sc.horizon * k / (N * split));
  return f;
}

/// Composite Simpson over node values g_0..g_K (K even).
double simpson(const std::vector<double>& g, double dt) {
  double acc = g.front() + g.back();
  for (std::size_t k = 1; k + 1 < g.size(); ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * g[k];
  return acc * dt / 3.0;
}

}  // namespace

TEST(RotatedCost, MatchesIndependentQuadrature) {
  const OcpScenario sc = interior_lq(3.0, 12);
  const TrajectoryPair pair = solve(sc);
  const TurnpikeTrajectory tp = turnpike_of(sc);
  const RotatedCost rc = rotated_cost(pair, sc, tp, 0.0, 64);
  const Fine f = refine(sc, pair, 64);
  // u jumps at interval ends, so integrate interval by interval
  double ref_shift = 0.0, ref_dev = 0.0;
  const int per = 64;
  for (int j = 0; j < pair.intervals(); ++j) {
    std::vector<double> g, h2;
    for (int k = 0; k <= per; ++k) {
      const int idx = j * per + k;
      const double t = f.t[idx];
      const Eigen::VectorXd u = pair.u.col(j);
      g.push_back(stage_cost(sc.cost, t, f.x.col(idx), u) - stage_cost(sc.cost, t, tp.x(t), tp.u(t)));
      h2.push_back((f.x.col(idx) - tp.x(t)).squaredNorm() + (u - tp.u(t)).squaredNorm());
    }
    ref_shift += simpson(g, f.t[1] - f.t[0]);
    ref_dev += simpson(h2, f.t[1] - f.t[0]);
  }
  EXPECT_NEAR(rc.shifted.back(), ref_shift, 1e-8 * (1 + std::abs(ref_shift)));
  EXPECT_NEAR(rc.deviation2.back(), ref_dev, 1e-8 * (1 + ref_dev));
  EXPECT_NEAR(rc.integral(2.0), ref_shift - 2.0 * ref_dev, 1e-7 * (1 + std::abs(ref_shift)));
}

TEST(RotatedCost, VanishesOnTheTurnpike) {
  OcpScenario sc = interior_lq(2.0, 10);
  const TurnpikeTrajectory tp = turnpike_of(sc);
  sc.x0 = tp.x(0.0);
  TrajectoryPair pair;
  for (int k = 0; k <= 10; ++k) pair.t.push_back(0.2 * k);
  pair.u = tp.u(0.0).replicate(1, 10);
  pair.x = tp.x(0.0).replicate(1, 11);
  const RotatedCost rc = rotated_cost(pair, sc, tp, 3.0);
  EXPECT_LE(std::abs(rc.shifted.back()), 1e-12);
  EXPECT_LE(rc.deviation2.back(), 1e-24);
  const SdiResult sdi = sdi_check(pair, tp, rc, 3.0);
  EXPECT_LE(std::abs(sdi.max_violation), 1e-12);
}

TEST(RotatedCost, SupplyMinusStorageIsTheQuadraticForm) {
  // for S = 0: l(z) - l(zbar) - d/dt[-lambdabar'(x - xbar)] = 1/2 dx'Q dx along any trajectory
  const OcpScenario sc = interior_lq(4.0, 40);
  const TrajectoryPair pair = solve(sc);
  const TurnpikeTrajectory tp = turnpike_of(sc);
  const RotatedCost rc = rotated_cost(pair, sc, tp, 0.0, 16);
  const SdiResult sdi = sdi_check(pair, tp, rc, 0.0);
  const Fine f = refine(sc, pair, 32);
  std::vector<double> quad;
  for (std::size_t k = 0; k < f.t.size(); ++k) {
    const Eigen::VectorXd dx = f.x.col(k) - tp.x(f.t[k]);
    quad.push_back(0.5 * dx.dot(sc.cost.Q * dx));
  }
  const double ref = simpson(quad, f.t[1] - f.t[0]);
  const double got = rc.shifted.back() - (sdi.storage.back() - sdi.storage.front());
  EXPECT_NEAR(got, ref, 1e-8 * (1 + ref));
  // the quadratic form is nonnegative: the inequality holds at c = 0, not for large c
  EXPECT_LE(sdi.relative_violation, 1e-9);
  EXPECT_GT(sdi_check(pair, tp, rotated_cost(pair, sc, tp, 1e3), 1e3).relative_violation, 1e-3);
}

TEST(Storage, FittedConstantIsTheLargestAdmissible) {
  const TurnpikeTrajectory tp = turnpike_of(interior_lq(4.0, 40));
  std::vector<TrajectoryPair> pairs;
  std::vector<RotatedCost> costs;
  for (double scale : {0.5, 2.0}) {
    OcpScenario sc = interior_lq(4.0, 40);
    sc.x0 *= scale;
    pairs.push_back(solve(sc));
    costs.push_back(rotated_cost(pairs.back(), sc, tp, 0.0));
  }
  const double c = fit_alpha_constant(pairs, costs, tp, 10.0);
  ASSERT_GT(c, 0.0);
  ASSERT_LT(c, 10.0);
  auto worst = [&](double cc) {
    double v = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) v = std::max(v, sdi_check(pairs[i], tp, costs[i], cc).relative_violation);
    return v;
  };
  EXPECT_LE(worst(c), 1e-6);
  EXPECT_GT(worst(c * 1.01 + 1e-9), 1e-6);
  EXPECT_EQ(fit_alpha_constant(pairs, costs, tp, c * 0.5), c * 0.5);
}

TEST(Storage, EstimateIsTheRunningMaximum) {
  const OcpScenario base = interior_lq(4.0, 40);
  const TurnpikeTrajectory tp = turnpike_of(base);
  const std::vector<double> horizons{1.0, 2.0, 4.0, 6.0};
  const StorageEstimate est = available_storage_estimate(base, 3.0 * base.x0, tp, 0.1, horizons);
  ASSERT_EQ(est.values.size(), 4u);
  double best = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(est.values[k], -est.costs[k].integral(0.1));
    best = std::max(best, est.values[k]);
    EXPECT_DOUBLE_EQ(est.running_max[k], best);
    EXPECT_EQ(est.pairs[k].intervals(), static_cast<int>(std::lround(horizons[k] / 0.1)));
  }
  EXPECT_DOUBLE_EQ(est.estimate, best);
  EXPECT_GE(est.estimate, 0.0);
  const double ratio = best > 0.0 ? (best - est.running_max[2]) / best : 0.0;
  EXPECT_DOUBLE_EQ(est.stabilization_ratio, ratio);
  EXPECT_EQ(est.bounded, ratio < 0.05);
  EXPECT_FALSE(available_storage_estimate(base, 3.0 * base.x0, tp, 0.1, horizons, 0.0).bounded);
}

TEST(Storage, OffsetMakesTheCandidateNonnegative) {
  const OcpScenario sc = interior_lq(4.0, 40);
  const TurnpikeTrajectory tp = turnpike_of(sc);
  const TrajectoryPair pair = solve(sc);
  const double offset = storage_offset({pair}, tp);
  EXPECT_GE(offset, 0.0);
  double lowest = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= pair.intervals(); ++j) {
    const double t = pair.t[j];
    lowest = std::min(lowest, -tp.lambda(t).dot(pair.x.col(j) - tp.x(t)) + offset);
  }
  EXPECT_GE(lowest, -1e-15);
  EXPECT_EQ(storage_offset({}, tp), 0.0);
}

TEST(RotatedCost, RejectsOddSubsteps) {
  const OcpScenario sc = interior_lq(1.0, 4);
  EXPECT_THROW(rotated_cost(solve(sc), sc, turnpike_of(sc), 0.0, 3), std::invalid_argument);
}
