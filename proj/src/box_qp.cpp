#include "dhn/box_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dhn/error.hpp"

namespace dhn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd diag_scaling(const Eigen::MatrixXd& H) {
  Eigen::VectorXd d = H.diagonal().cwiseAbs();
  const double floor = std::max(d.maxCoeff(), 1e-300) * 1e-12;
  return d.cwiseMax(floor);
}

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Moves x along the projected path P(x + t dir), 0 <= t <= tmax, to the first
// local minimizer of the piecewise quadratic objective. grad is kept equal to
// H x + g up to rounding.
void path_search(const Eigen::MatrixXd& H, Eigen::VectorXd& x, Eigen::VectorXd& grad,
                 Eigen::VectorXd dir, double tmax, const Eigen::VectorXd& lo,
                 const Eigen::VectorXd& hi) {
  const int n = x.size();
  std::vector<std::pair<double, int>> breaks;
  for (int i = 0; i < n; ++i) {
    double t = kInf;
    if (dir(i) > 0.0 && std::isfinite(hi(i))) t = (hi(i) - x(i)) / dir(i);
    if (dir(i) < 0.0 && std::isfinite(lo(i))) t = (lo(i) - x(i)) / dir(i);
    if (t <= 0.0) {
      dir(i) = 0.0;
    } else if (std::isfinite(t)) {
      breaks.emplace_back(t, i);
    }
  }
  std::sort(breaks.begin(), breaks.end());

  Eigen::VectorXd Hp = H * dir;
  double t = 0.0;
  std::size_t k = 0;
  while (true) {
    const double t_next = k < breaks.size() ? std::min(breaks[k].first, tmax) : tmax;
    const double f1 = grad.dot(dir);
    const double f2 = dir.dot(Hp);
    if (f1 >= 0.0) break;
    const double seg = t_next - t;
    if (f2 > 0.0 && -f1 / f2 < seg) {
      const double dt = -f1 / f2;
      x += dt * dir;
      grad += dt * Hp;
      break;
    }
    if (!std::isfinite(seg)) throw NumericalError("box QP is unbounded below along a feasible ray");
    x += seg * dir;
    grad += seg * Hp;
    t = t_next;
    if (t >= tmax) break;
    while (k < breaks.size() && breaks[k].first <= t) {
      const int i = breaks[k].second;
      x(i) = dir(i) > 0.0 ? hi(i) : lo(i);
      if (dir(i) != 0.0) {
        Hp -= H.col(i) * dir(i);
        dir(i) = 0.0;
      }
      ++k;
    }
  }
  x = clamp(x, lo, hi);
}

struct LocalSolve {
  Eigen::VectorXd x;
  int iterations = 0;
  bool indefinite = false;
};

LocalSolve local_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi, Eigen::VectorXd x, const BoxQpOptions& opt) {
  const int n = x.size();
  const Eigen::VectorXd d = diag_scaling(H);
  LocalSolve out;
  for (int it = 0;; ++it) {
    Eigen::VectorXd grad = H * x + g;
    const double res = box_kkt_residual(H, g, lo, hi, x);
    if (res <= opt.tolerance) {
      out.iterations = it;
      break;
    }
    if (it >= opt.max_iterations) {
      std::ostringstream msg;
      msg << "box QP did not converge in " << opt.max_iterations
          << " iterations (scaled KKT residual " << res << ")";
      throw NumericalError(msg.str());
    }

    // generalized Cauchy point
    Eigen::VectorXd dir = -grad.cwiseQuotient(d);
    for (int i = 0; i < n; ++i) {
      if ((x(i) <= lo(i) && dir(i) < 0.0) || (x(i) >= hi(i) && dir(i) > 0.0)) dir(i) = 0.0;
    }
    path_search(H, x, grad, dir, kInf, lo, hi);

    // Newton step on the free variables
    std::vector<int> free;
    for (int i = 0; i < n; ++i) {
      if (x(i) > lo(i) && x(i) < hi(i)) free.push_back(i);
    }
    if (free.empty()) continue;
    const int nf = free.size();
    Eigen::MatrixXd Hff(nf, nf);
    Eigen::VectorXd gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf(a) = grad(free[a]);
      for (int b = 0; b < nf; ++b) Hff(a, b) = H(free[a], free[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Hff);
    if (llt.info() != Eigen::Success) {
      out.indefinite = true;
      continue;
    }
    const Eigen::VectorXd step = llt.solve(-gf);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < nf; ++a) full(free[a]) = step(a);
    path_search(H, x, grad, full, 1.0, lo, hi);
  }
  out.x = x;
  return out;
}

double objective(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(H * x) + g.dot(x);
}

}  // namespace

double box_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  const Eigen::VectorXd d = diag_scaling(H);
  const Eigen::VectorXd grad = H * x + g;
  const Eigen::VectorXd step = x - clamp(x - grad.cwiseQuotient(d), lower, upper);
  double scale = std::max(x.cwiseAbs().maxCoeff(), g.cwiseQuotient(d).cwiseAbs().maxCoeff());
  for (int i = 0; i < x.size(); ++i) {
    if (std::isfinite(upper(i) - lower(i))) scale = std::max(scale, upper(i) - lower(i));
  }
  return step.cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
}

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const std::optional<Eigen::VectorXd>& start, const BoxQpOptions& options) {
  const int n = g.size();
  if (H.rows() != n || H.cols() != n || lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("box QP: inconsistent dimensions");
  }
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("box QP: lower > upper");

  auto default_start = [&]() {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) {
      const bool lf = std::isfinite(lower(i)), uf = std::isfinite(upper(i));
      x(i) = lf && uf ? 0.5 * (lower(i) + upper(i)) : std::clamp(0.0, lower(i), upper(i));
    }
    return x;
  };

  BoxQpResult best;
  LocalSolve first = local_solve(H, g, lower, upper,
                                 clamp(start ? *start : default_start(), lower, upper), options);
  best.x = first.x;
  best.iterations = first.iterations;
  best.nonconvex = first.indefinite;

  auto reduced_min_eig = [&](const Eigen::VectorXd& x) {
    std::vector<int> free;
    for (int i = 0; i < n; ++i) {
      if (x(i) > lower(i) && x(i) < upper(i)) free.push_back(i);
    }
    if (free.empty()) return kInf;
    Eigen::MatrixXd Hff(free.size(), free.size());
    for (std::size_t a = 0; a < free.size(); ++a) {
      for (std::size_t b = 0; b < free.size(); ++b) Hff(a, b) = H(free[a], free[b]);
    }
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Hff, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
  };

  best.min_reduced_eigenvalue = reduced_min_eig(best.x);
  if (best.min_reduced_eigenvalue <= 0.0) best.nonconvex = true;
  // a vertex solution hides indefiniteness from the reduced Hessian
  if (!best.nonconvex && Eigen::LLT<Eigen::MatrixXd>(H).info() != Eigen::Success) best.nonconvex = true;

  if (best.nonconvex) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    double best_obj = objective(H, g, best.x);
    for (int r = 0; r < options.restarts; ++r) {
      Eigen::VectorXd x0(n);
      for (int i = 0; i < n; ++i) {
        x0(i) = std::isfinite(upper(i) - lower(i)) ? lower(i) + unit(rng) * (upper(i) - lower(i))
                                                     : std::clamp(normal(rng), lower(i), upper(i));
      }
      LocalSolve cand = local_solve(H, g, lower, upper, x0, options);
      const double obj = objective(H, g, cand.x);
      best.iterations += cand.iterations;
      if (obj < best_obj) {
        best_obj = obj;
        best.x = cand.x;
      }
    }
    best.restarts_used = options.restarts;
    best.min_reduced_eigenvalue = reduced_min_eig(best.x);
  }

  best.gradient = H * best.x + g;
  best.objective = objective(H, g, best.x);
  best.kkt_residual = box_kkt_residual(H, g, lower, upper, best.x);
  best.active = Eigen::VectorXi::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (best.x(i) <= lower(i)) best.active(i) = -1;
    if (best.x(i) >= upper(i)) best.active(i) = 1;
  }
  return best;
}

}  // namespace dhn
