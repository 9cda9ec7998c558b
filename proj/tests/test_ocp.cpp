#include <gtest/gtest.h>

#include <cmath>

#include "dhn/error.hpp"
#include "dhn/ocp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dhn;

TEST(Transcription, DefaultGridIsSixMinutes) {
  EXPECT_EQ(default_intervals(86400.0), 240);
  EXPECT_EQ(default_intervals(104400.0), 290);
  EXPECT_EQ(default_intervals(10.0), 2);
}

TEST(Transcription, UnconstrainedMatchesRiccati) {
  const OcpScenario sc = fixture::small_lq(-1e6, 1e6, 2.0, 20);
  const TrajectoryPair pair = solve(sc);
  const auto ref = oracle::riccati(fixture::as_oracle(sc), sc.x0, sc.horizon, sc.intervals);

  EXPECT_NEAR(pair.objective, ref.cost, 1e-8 * std::abs(ref.cost));
  EXPECT_LE((pair.u - ref.u).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, ref.u.cwiseAbs().maxCoeff()));
  EXPECT_LE((pair.x - ref.x).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, ref.x.cwiseAbs().maxCoeff()));
}

TEST(Transcription, ConstrainedMatchesBruteForce) {
  const OcpScenario sc = fixture::small_lq(0.0, 0.8, 2.0, 10);
  const TrajectoryPair pair = solve(sc);
  const auto lq = fixture::as_oracle(sc);
  auto cost = [&](const Eigen::VectorXd& u) {
    return oracle::simulate(lq, sc.x0, u.transpose(), sc.horizon).cost;
  };
  const Eigen::VectorXd best = oracle::pattern_search(cost, sc.box.lower.replicate(10, 1),
                                                      sc.box.upper.replicate(10, 1), 1e-7);
  const double brute = cost(best);
  EXPECT_NEAR(pair.objective, brute, 1e-4 * std::abs(brute));
  // the bounds must actually bind for this instance
  EXPECT_TRUE((pair.u.array() <= sc.box.lower(0) + 1e-12).any() || (pair.u.array() >= sc.box.upper(0) - 1e-12).any());
}

TEST(Transcription, ObjectiveAgreesWithForwardSimulation) {
  OcpScenario sc = fixture::small_lq(0.0, 0.8, 3.0, 30);
  sc.disturbance = Signal::constant(Eigen::VectorXd::Constant(1, 0.5)) +
                   Signal::sinusoid(2.0, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Zero(1));
  const TrajectoryPair pair = solve(sc);
  const auto sim = oracle::simulate(fixture::as_oracle(sc), sc.x0, pair.u, sc.horizon, 256);
  EXPECT_LE((sim.x - pair.x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(objective(pair, sc, 16), sim.cost, 1e-8 * std::abs(sim.cost));
  EXPECT_NEAR(pair.objective, sim.cost, 1e-6 * std::abs(sim.cost));
  EXPECT_LE(dynamics_residual(pair, sc), 1e-12);
}

TEST(Transcription, SolutionStaysInTheBox) {
  const OcpScenario sc = fixture::small_lq(0.1, 0.4, 2.0, 40);
  const TrajectoryPair pair = solve(sc);
  EXPECT_GE(pair.u.minCoeff(), 0.1);
  EXPECT_LE(pair.u.maxCoeff(), 0.4);
  EXPECT_LE(pair.diagnostics.kkt_residual, 1e-9);
  EXPECT_FALSE(pair.diagnostics.nonconvex);
}

TEST(Transcription, DeterministicAcrossCalls) {
  const OcpScenario sc = fixture::small_lq(0.0, 0.8, 2.0, 25);
  const TrajectoryPair a = solve(sc), b = solve(sc);
  EXPECT_EQ((a.u - b.u).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(Transcription, RefinementConvergesOnTheContinuousProblem) {
  // Objective decreases (weakly) when the input grid is refined by halving:
  // every coarse ZOH input is also a fine one.
  double previous = std::numeric_limits<double>::infinity();
  for (int N : {5, 10, 20, 40}) {
    const TrajectoryPair pair = solve(fixture::small_lq(0.0, 0.8, 2.0, N));
    EXPECT_LE(pair.objective, previous + 1e-10 * std::abs(previous));
    previous = pair.objective;
  }
}

TEST(Transcription, RejectsInconsistentData) {
  OcpScenario sc = fixture::small_lq(0.0, 1.0, 1.0, 4);
  sc.x0 = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(validate(sc), ValidationError);
  sc = fixture::small_lq(1.0, 0.0, 1.0, 4);
  EXPECT_THROW(validate(sc), ValidationError);
  sc = fixture::small_lq(0.0, 1.0, -1.0, 4);
  EXPECT_THROW(solve(sc), ValidationError);
}

TEST(Transcription, SingleIntervalIsAllowed) {
  const OcpScenario sc = fixture::small_lq(0.0, 0.8, 1.0, 1);
  const TrajectoryPair pair = solve(sc);
  EXPECT_EQ(pair.intervals(), 1);
  EXPECT_EQ(pair.t.size(), 2u);
}
