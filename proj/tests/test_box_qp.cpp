#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dhn/box_qp.hpp"
#include "dhn/error.hpp"

using namespace dhn;

namespace {

double qp_value(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(H * x) + g.dot(x);
}

/// Global minimum by enumerating all 3^n active-set patterns: every local
/// (and so the global) minimizer of a box QP is a KKT point of one pattern.
Eigen::VectorXd enumerate_active_sets(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = g.size();
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  Eigen::VectorXd best;
  double fbest = std::numeric_limits<double>::infinity();
  for (int code = 0; code < patterns; ++code) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<int> free;
    int c = code;
    for (int i = 0; i < n; ++i, c /= 3) {
      if (c % 3 == 0) x(i) = lo(i);
      else if (c % 3 == 1) x(i) = hi(i);
      else free.push_back(i);
    }
    if (!free.empty()) {
      const int k = free.size();
      Eigen::MatrixXd Hff(k, k);
      Eigen::VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        rhs(a) = -g(free[a]);
        for (int i = 0; i < n; ++i) {
          if (std::find(free.begin(), free.end(), i) == free.end()) rhs(a) -= H(free[a], i) * x(i);
        }
        for (int b = 0; b < k; ++b) Hff(a, b) = H(free[a], free[b]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(Hff);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd xf = lu.solve(rhs);
      bool feasible = true;
      for (int a = 0; a < k; ++a) {
        feasible = feasible && xf(a) >= lo(free[a]) - 1e-12 && xf(a) <= hi(free[a]) + 1e-12;
        x(free[a]) = xf(a);
      }
      if (!feasible) continue;
    }
    const double f = qp_value(H, g, x);
    if (f < fbest) {
      fbest = f;
      best = x;
    }
  }
  return best;
}

struct Instance {
  Eigen::MatrixXd H;
  Eigen::VectorXd g, lo, hi;
};

Instance random_instance(int n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Instance in;
  const Eigen::MatrixXd R = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
  in.H = R * R.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
  in.g = Eigen::VectorXd::NullaryExpr(n, [&] { return 3.0 * normal(rng); });
  in.lo = Eigen::VectorXd::Constant(n, -1.0);
  in.hi = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.2 + std::abs(normal(rng)); });
  return in;
}

}  // namespace

TEST(BoxQp, ConvexMatchesActiveSetEnumeration) {
  for (int seed = 0; seed < 30; ++seed) {
    const Instance in = random_instance(2 + seed % 6, seed, 0.1);
    const BoxQpResult res = solve_box_qp(in.H, in.g, in.lo, in.hi);
    const Eigen::VectorXd ref = enumerate_active_sets(in.H, in.g, in.lo, in.hi);
    EXPECT_LE((res.x - ref).cwiseAbs().maxCoeff(), 1e-8) << seed;
    EXPECT_NEAR(res.objective, qp_value(in.H, in.g, ref), 1e-10 * (1 + std::abs(res.objective)));
    EXPECT_FALSE(res.nonconvex);
    EXPECT_LE(res.kkt_residual, 1e-9);
  }
}

TEST(BoxQp, NonconvexReturnsFlaggedLocalMinimum) {
  // multistart is a heuristic: every answer is a flagged KKT point, most are global
  int agree = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const Instance in = random_instance(3 + seed % 4, 100 + seed, -4.0);
    const BoxQpResult res = solve_box_qp(in.H, in.g, in.lo, in.hi);
    const Eigen::VectorXd ref = enumerate_active_sets(in.H, in.g, in.lo, in.hi);
    const double fref = qp_value(in.H, in.g, ref);
    EXPECT_GE(res.objective, fref - 1e-9 * (1 + std::abs(fref)));
    if (res.objective <= fref + 1e-9 * (1 + std::abs(fref))) ++agree;
    EXPECT_TRUE(res.nonconvex);
    EXPECT_LE(res.kkt_residual, 1e-9);
  }
  EXPECT_GE(agree, 15);
}

TEST(BoxQp, FlagsIndefiniteReducedHessian) {
  Eigen::MatrixXd H = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  const BoxQpResult res = solve_box_qp(H, Eigen::Vector2d(0.1, 0.0), Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
  EXPECT_TRUE(res.nonconvex);
  EXPECT_NEAR(std::abs(res.x(1)), 1.0, 1e-15);
  EXPECT_NEAR(res.x(0), -0.1, 1e-12);
}

TEST(BoxQp, UnboundedDirectionThrows) {
  Eigen::MatrixXd H = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_box_qp(H, Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, -inf), Eigen::Vector2d(1, inf)),
               NumericalError);
}

TEST(BoxQp, InfiniteBoundsReduceToLinearSolve) {
  const Instance in = random_instance(5, 7, 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(5, -inf), hi = Eigen::VectorXd::Constant(5, inf);
  const BoxQpResult res = solve_box_qp(in.H, in.g, lo, hi);
  EXPECT_LE((res.x - in.H.ldlt().solve(-in.g)).norm(), 1e-10);
  EXPECT_EQ(res.active.cwiseAbs().sum(), 0);
}

TEST(BoxQp, ActiveSetSignsAndGradientMultipliers) {
  for (int seed = 0; seed < 10; ++seed) {
    const Instance in = random_instance(6, 300 + seed, 0.5);
    const BoxQpResult res = solve_box_qp(in.H, in.g, in.lo, in.hi);
    const Eigen::VectorXd grad = in.H * res.x + in.g;
    EXPECT_LE((grad - res.gradient).norm(), 1e-10 * (1 + grad.norm()));
    for (int i = 0; i < 6; ++i) {
      if (res.active(i) == -1) {
        EXPECT_EQ(res.x(i), in.lo(i));
        EXPECT_GE(grad(i), -1e-9);
      } else if (res.active(i) == 1) {
        EXPECT_EQ(res.x(i), in.hi(i));
        EXPECT_LE(grad(i), 1e-9);
      } else {
        EXPECT_LE(std::abs(grad(i)), 1e-8 * (1 + in.g.norm()));
      }
    }
  }
}

TEST(BoxQp, WarmStartGivesTheSameAnswer) {
  const Instance in = random_instance(8, 55, 0.2);
  const BoxQpResult cold = solve_box_qp(in.H, in.g, in.lo, in.hi);
  const BoxQpResult warm = solve_box_qp(in.H, in.g, in.lo, in.hi, Eigen::VectorXd(in.hi));
  EXPECT_LE((cold.x - warm.x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BoxQp, KktResidualVanishesOnlyAtTheSolution) {
  const Instance in = random_instance(4, 9, 0.5);
  const BoxQpResult res = solve_box_qp(in.H, in.g, in.lo, in.hi);
  EXPECT_LE(box_kkt_residual(in.H, in.g, in.lo, in.hi, res.x), 1e-9);
  EXPECT_GT(box_kkt_residual(in.H, in.g, in.lo, in.hi, 0.5 * (in.lo + in.hi)), 1e-3);
}

TEST(BoxQp, RejectsBadInput) {
  EXPECT_THROW(solve_box_qp(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2),
                            Eigen::VectorXd::Ones(2)),
               std::invalid_argument);
  EXPECT_THROW(solve_box_qp(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2),
                            Eigen::VectorXd::Zero(2)),
               std::invalid_argument);
}
