#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dhn/input_box.hpp"
#include "dhn/network.hpp"
#include "dhn/signal.hpp"

namespace dhn {

/// Economic stage cost 1/2 x'Qx + u'Sx + x'r(t) + u'p(t).
struct CostData {
  Eigen::MatrixXd Q;  // n x n, symmetric
  Eigen::MatrixXd S;  // m x n
  Signal r;           // dim n
  Signal p;           // dim m
};

/// Optimality DAE  D xi' = M xi + f  for xi = (x, lambda, u).
struct OptimalityPencil {
  Eigen::MatrixXd D;
  Eigen::MatrixXd M;
  Signal f;
  int n = 0;
  int m = 0;

  int size() const { return static_cast<int>(D.rows()); }
};

OptimalityPencil build_pencil(const StateSpaceModel& model, const CostData& cost,
                              const Signal& disturbance);

struct RegularityResult {
  bool regular = false;
  std::vector<double> samples;       // s_j
  std::vector<double> determinants;  // det(s_j D - M) of the balanced pencil
  std::vector<double> ratios;        // |det| / prod of row norms
  double max_ratio = 0.0;
  double tolerance = 0.0;
};

/// Evaluates det(sD - M) at size+1 seeded sample points. Regular iff the
/// largest Hadamard ratio |det| / prod_i ||row_i|| exceeds sqrt(eps).
RegularityResult check_regularity(const Eigen::MatrixXd& D, const Eigen::MatrixXd& M,
                                  std::uint64_t seed = 0);
inline RegularityResult check_regularity(const OptimalityPencil& pencil, std::uint64_t seed = 0) {
  return check_regularity(pencil.D, pencil.M, seed);
}

/// P (sD - M) Q = blkdiag(sI - J, sN - I).
struct WeierstrassDecomposition {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd J;  // upper quasi-triangular product, finite spectrum
  Eigen::MatrixXd N;  // strictly upper triangular
  int finite = 0;
  int infinite = 0;
  int index = 0;  // smallest nu with N^nu = 0 (0 when N is empty)
  double sylvester_residual = 0.0;
};

/// Generalized Schur reduction, finite/infinite reordering and block
/// decoupling. A nonzero `ordering_seed` applies a random signed row and
/// column permutation first, giving an independent computation.
/// Throws NumericalError for irregular pencils or failed decoupling.
WeierstrassDecomposition weierstrass_decompose(const Eigen::MatrixXd& D, const Eigen::MatrixXd& M,
                                               std::uint64_t ordering_seed = 0);
inline WeierstrassDecomposition weierstrass_decompose(const OptimalityPencil& pencil,
                                                      std::uint64_t ordering_seed = 0) {
  return weierstrass_decompose(pencil.D, pencil.M, ordering_seed);
}

/// max over 5 seeded s of ||P(sD - M)Q - blkdiag(sI - J, sN - I)|| relative.
double reconstruction_residual(const WeierstrassDecomposition& w, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& M, std::uint64_t seed = 1);

/// Algebraic coordinates -sum_{i<nu} N^i f2^{(i)} as a closed-form signal,
/// where f2 is the trailing block of P f.
Signal algebraic_part(const WeierstrassDecomposition& w, const Signal& f);
Eigen::VectorXd algebraic_part(const WeierstrassDecomposition& w, const Signal& f, double t);

/// Unique solution of xi1' = J xi1 + f1 that is bounded on the whole line,
/// for a trigonometric f1 with base frequency omega0. Throws NumericalError
/// on resonance.
Signal bounded_ode_part(const WeierstrassDecomposition& w, const Signal& f, double omega0);

struct TurnpikeTrajectory {
  Signal xi;  // stacked (x, lambda, u)
  Signal x;
  Signal lambda;
  Signal u;
  double base_omega = 0.0;
  double period = 0.0;  // 0 for a stationary turnpike
  double interiority_margin = 0.0;
  bool interior = true;
};

/// Assembles the bounded singular-arc solution xi = Q (xi1; xi2). The
/// interiority margin is sampled on 1000 points over one period (or over
/// [0, horizon] when given).
TurnpikeTrajectory bounded_particular_solution(const WeierstrassDecomposition& w,
                                               const OptimalityPencil& pencil,
                                               const std::optional<InputBox>& box = std::nullopt,
                                               double base_omega = 0.0, double horizon = 0.0);

/// max_t ||D xi' - M xi - f|| / (||M|| (1 + ||xi||) + ||f||).
double dae_residual(const OptimalityPencil& pencil, const Signal& xi,
                    const std::vector<double>& grid);
/// max_t ||S x + B'lambda + p||_inf / (||S|| ||x|| + ||B|| ||lambda|| + ||p|| + 1).
double switching_residual(const StateSpaceModel& model, const CostData& cost,
                          const TurnpikeTrajectory& tp, const std::vector<double>& grid);

std::vector<double> uniform_grid(double t0, double t1, int points);

}  // namespace dhn
