#include "oracles.hpp"

#include <cmath>
#include <limits>

namespace oracle {

Simulation simulate(const LinearQuadratic& p, const Eigen::VectorXd& x0, const Eigen::MatrixXd& u,
                    double horizon, int substeps) {
  const int n = p.A.rows(), N = u.cols();
  const double h = horizon / N, dt = h / substeps;
  Simulation out;
  out.x.resize(n, N + 1);
  out.x.col(0) = x0;
  Eigen::VectorXd x = x0;
  auto stage = [&](double t, const Eigen::VectorXd& xs, const Eigen::VectorXd& us) {
    return 0.5 * xs.dot(p.Q * xs) + us.dot(p.S * xs) + xs.dot(p.r(t)) + us.dot(p.p(t));
  };
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd uj = u.col(j);
    auto f = [&](double t, const Eigen::VectorXd& xs) -> Eigen::VectorXd {
      Eigen::VectorXd dx = p.A * xs + p.B * uj;
      if (p.E.cols() > 0) dx += p.E * p.d(t);
      return dx;
    };
    double acc = 0.0;
    for (int k = 0; k < substeps; ++k) {
      const double t = j * h + k * dt;
      acc += (k == 0 ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0)) * stage(t, x, uj);
      const Eigen::VectorXd k1 = f(t, x);
      const Eigen::VectorXd k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
      const Eigen::VectorXd k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
      const Eigen::VectorXd k4 = f(t + dt, x + dt * k3);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    acc += stage((j + 1) * h, x, uj);
    out.cost += acc * dt / 3.0;
    out.x.col(j + 1) = x;
  }
  return out;
}

Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& M) {
  const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd S = M / std::pow(2.0, squarings);
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  Eigen::MatrixXd term = result;
  for (int k = 1; k <= 30; ++k) {
    term = term * S / k;
    result += term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

RiccatiSolution riccati(const LinearQuadratic& p, const Eigen::VectorXd& x0, double horizon, int N) {
  const int n = p.A.rows(), m = p.B.cols();
  const double h = horizon / N;
  const Eigen::VectorXd c = p.E.cols() > 0 ? Eigen::VectorXd(p.E * p.d(0.0)) : Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd r = p.r(0.0), pp = p.p(0.0);

  // z = (x, 1, u) with z' = F z on one interval
  const int q = n + 1 + m;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(q, q);
  F.block(0, 0, n, n) = p.A;
  F.block(0, n, n, 1) = c;
  F.block(0, n + 1, n, m) = p.B;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(q, q);
  W.block(0, 0, n, n) = p.Q;
  W.block(0, n, n, 1) = r;
  W.block(n, 0, 1, n) = r.transpose();
  W.block(0, n + 1, n, m) = p.S.transpose();
  W.block(n + 1, 0, m, n) = p.S;
  W.block(n, n + 1, 1, m) = pp.transpose();
  W.block(n + 1, n, m, 1) = pp;

  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(2 * q, 2 * q);
  V.topLeftCorner(q, q) = -F.transpose();
  V.topRightCorner(q, q) = W;
  V.bottomRightCorner(q, q) = F;
  const Eigen::MatrixXd ev = expm_taylor(V * h);
  const Eigen::MatrixXd G22 = ev.bottomRightCorner(q, q);
  Eigen::MatrixXd Mz = G22.transpose() * ev.topRightCorner(q, q);  // int e^{F's} W e^{Fs} ds
  Mz = 0.5 * (Mz + Mz.transpose());

  const int a = n + 1;  // augmented state (x, 1)
  const Eigen::MatrixXd Phi = G22.topLeftCorner(a, a);
  const Eigen::MatrixXd Gam = G22.topRightCorner(a, m);
  const Eigen::MatrixXd Maa = Mz.topLeftCorner(a, a), Mau = Mz.topRightCorner(a, m),
                        Muu = Mz.bottomRightCorner(m, m);

  std::vector<Eigen::MatrixXd> K(N);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(a, a);
  for (int k = N - 1; k >= 0; --k) {
    const Eigen::MatrixXd Huu = Muu + Gam.transpose() * P * Gam;
    const Eigen::MatrixXd Hua = Mau.transpose() + Gam.transpose() * P * Phi;
    K[k] = Huu.ldlt().solve(Hua);
    P = Maa + Phi.transpose() * P * Phi - Hua.transpose() * K[k];
    P = 0.5 * (P + P.transpose());
  }
  RiccatiSolution out;
  out.u.resize(m, N);
  out.x.resize(n, N + 1);
  Eigen::VectorXd z(a);
  z << x0, 1.0;
  out.cost = 0.5 * z.dot(P * z);
  for (int k = 0; k < N; ++k) {
    out.x.col(k) = z.head(n);
    out.u.col(k) = -K[k] * z;
    z = Phi * z + Gam * out.u.col(k);
  }
  out.x.col(N) = z.head(n);
  return out;
}

Eigen::VectorXd pattern_search(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double resolution,
                               int grid) {
  const int dim = lower.size();
  Eigen::VectorXd best = 0.5 * (lower + upper);
  double fbest = f(best);
  Eigen::VectorXd width = upper - lower;
  while (width.maxCoeff() > resolution) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < dim; ++i) {
        const double lo = std::max(lower(i), best(i) - 0.5 * width(i));
        const double hi = std::min(upper(i), best(i) + 0.5 * width(i));
        for (int k = 0; k <= grid; ++k) {
          Eigen::VectorXd trial = best;
          trial(i) = lo + (hi - lo) * k / grid;
          const double ft = f(trial);
          if (ft < fbest - 1e-15 * std::abs(fbest)) {
            fbest = ft;
            best = trial;
            improved = true;
          }
        }
      }
    }
    width *= 0.5;
  }
  return best;
}

}  // namespace oracle
