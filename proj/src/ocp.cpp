#include "dhn/ocp.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "dhn/error.hpp"

namespace dhn {

namespace {

std::vector<double> simpson_weights(int substeps, double h) {
  std::vector<double> w(substeps + 1);
  for (int k = 0; k <= substeps; ++k) {
    w[k] = (k == 0 || k == substeps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    w[k] *= h / (3.0 * substeps);
  }
  return w;
}

}  // namespace

int default_intervals(double horizon) {
  return std::max(2, static_cast<int>(std::ceil(horizon / 360.0 - 1e-9)));
}

int OcpScenario::grid_size() const { return intervals > 0 ? intervals : default_intervals(horizon); }

void validate(const OcpScenario& sc) {
  const int n = sc.model.n(), m = sc.model.m(), w = sc.model.w();
  if (sc.cost.Q.rows() != n || sc.cost.Q.cols() != n) throw ValidationError("/cost/Q", "Q must be n x n");
  if ((sc.cost.Q - sc.cost.Q.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, sc.cost.Q.cwiseAbs().maxCoeff())) {
    throw ValidationError("/cost/Q", "Q must be symmetric");
  }
  if (sc.cost.S.rows() != m || sc.cost.S.cols() != n) throw ValidationError("/cost/S", "S must be m x n");
  if (sc.cost.r.dim() != n) throw ValidationError("/cost/r", "r must have dimension n");
  if (sc.cost.p.dim() != m) throw ValidationError("/cost/p", "p must have dimension m");
  if (sc.disturbance.dim() != w) throw ValidationError("/disturbance", "d must have dimension w");
  if (sc.box.lower.size() != m || sc.box.upper.size() != m) {
    throw ValidationError("/bounds", "input bounds must have dimension m");
  }
  for (int i = 0; i < m; ++i) {
    if (!(sc.box.lower(i) <= sc.box.upper(i))) {
      throw ValidationError("/bounds/u_min/" + std::to_string(i), "u_min must not exceed u_max");
    }
  }
  if (!(sc.horizon > 0.0) || !std::isfinite(sc.horizon)) throw ValidationError("/runs", "horizon must be positive");
  if (sc.x0.size() != n) throw ValidationError("/runs", "x0 must have dimension n");
  if (sc.intervals < 0) throw ValidationError("/numerics/N", "N must be positive");
}

IntervalPropagator::IntervalPropagator(const StateSpaceModel& model, const Exosystem& exo, double sigma) {
  const int n = model.n(), m = model.m(), q = exo.order();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m + q, n + m + q);
  aug.block(0, 0, n, n) = model.A;
  aug.block(0, n, n, m) = model.B;
  if (q > 0) {
    aug.block(0, n + m, n, q) = model.E * exo.output();
    aug.block(n + m, n + m, q, q) = exo.generator();
  }
  const Eigen::MatrixXd ex = (aug * sigma).exp();
  Phi = ex.block(0, 0, n, n);
  Gamma = ex.block(0, n, n, m);
  Psi = ex.block(0, n + m, n, q);
}

Eigen::MatrixXd CondensedQp::states(const Eigen::VectorXd& u) const {
  const int n = Ad.rows(), m = Bd.cols(), N = static_cast<int>(c.size());
  Eigen::MatrixXd x(n, N + 1);
  x.col(0) = x0;
  for (int j = 0; j < N; ++j) x.col(j + 1) = Ad * x.col(j) + Bd * u.segment(j * m, m) + c[j];
  return x;
}

CondensedQp discretize(const OcpScenario& sc) {
  validate(sc);
  const auto& model = sc.model;
  const auto& cost = sc.cost;
  const int n = model.n(), m = model.m(), N = sc.grid_size();
  const double h = sc.step();
  const Exosystem exo(sc.disturbance);

  const IntervalPropagator step(model, exo, h);

  // The stage cost is a quadratic form 1/2 z'Wz in z = (x, u, v), where v is
  // the state of a joint generator of (d, r, p). Over one interval z' = F z,
  // so the interval cost is 1/2 z_j' (int_0^h e^{F's} W e^{Fs} ds) z_j, which
  // the Van Loan block exponential gives exactly.
  const Exosystem gen(Signal::stack({sc.disturbance, cost.r, cost.p}));
  const int w = model.w(), q = gen.order(), dim = n + m + q;
  const Eigen::MatrixXd& C = gen.output();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(dim, dim);
  F.block(0, 0, n, n) = model.A;
  F.block(0, n, n, m) = model.B;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dim, dim);
  W.block(0, 0, n, n) = cost.Q;
  W.block(0, n, n, m) = cost.S.transpose();
  W.block(n, 0, m, n) = cost.S;
  if (q > 0) {
    if (w > 0) F.block(0, n + m, n, q) = model.E * C.topRows(w);
    F.block(n + m, n + m, q, q) = gen.generator();
    W.block(0, n + m, n, q) = C.middleRows(w, n);
    W.block(n + m, 0, q, n) = C.middleRows(w, n).transpose();
    W.block(n, n + m, m, q) = C.bottomRows(m);
    W.block(n + m, n, q, m) = C.bottomRows(m).transpose();
  }
  const double w_scale = std::max(1.0, W.cwiseAbs().maxCoeff());  // the integral is linear in W
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(2 * dim, 2 * dim);
  V.topLeftCorner(dim, dim) = -F.transpose();
  V.topRightCorner(dim, dim) = W / w_scale;
  V.bottomRightCorner(dim, dim) = F;
  const Eigen::MatrixXd ev = (V * h).exp();
  Eigen::MatrixXd Mz = w_scale * ev.bottomRightCorner(dim, dim).transpose() * ev.topRightCorner(dim, dim);
  Mz = 0.5 * (Mz + Mz.transpose());

  const Eigen::MatrixXd Wxx = Mz.topLeftCorner(n, n);
  const Eigen::MatrixXd Wxu = Mz.block(0, n, n, m);
  const Eigen::MatrixXd Wuu = Mz.block(n, n, m, m);
  const Eigen::MatrixXd Wxv = Mz.block(0, n + m, n, q);
  const Eigen::MatrixXd Wuv = Mz.block(n, n + m, m, q);
  const Eigen::MatrixXd Wvv = Mz.bottomRightCorner(q, q);

  CondensedQp qp;
  qp.Ad = step.Phi;
  qp.Bd = step.Gamma;
  qp.x0 = sc.x0;
  qp.c.resize(N);

  std::vector<Eigen::VectorXd> qx(N), qu(N), free(N + 1);
  double constant = 0.0;
  free[0] = sc.x0;
  for (int j = 0; j < N; ++j) {
    const double tj = j * h;
    const Eigen::VectorXd vj = gen.state(tj);
    qx[j] = Wxv * vj;
    qu[j] = Wuv * vj;
    constant += 0.5 * vj.dot(Wvv * vj);
    qp.c[j] = step.Psi * exo.state(tj);
    free[j + 1] = qp.Ad * free[j] + qp.c[j];
  }

  // gradient by backward accumulation of the state sensitivities
  qp.g.resize(N * m);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  for (int a = N - 1; a >= 0; --a) {
    if (a < N - 1) mu = Wxx * free[a + 1] + qx[a + 1] + qp.Ad.transpose() * mu;
    qp.g.segment(a * m, m) = Wxu.transpose() * free[a] + qu[a] + qp.Bd.transpose() * mu;
  }
  for (int j = 0; j < N; ++j) constant += 0.5 * free[j].dot(Wxx * free[j]) + free[j].dot(qx[j]);
  qp.constant = constant;

  qp.H.resize(N * m, N * m);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd AdT = qp.Ad.transpose();
  const Eigen::MatrixXd BdT = qp.Bd.transpose();
  for (int b = N - 1; b >= 0; --b) {
    qp.H.block(b * m, b * m, m, m) = BdT * R * qp.Bd + Wuu;
    Eigen::MatrixXd G = AdT * R * qp.Bd + Wxu;
    for (int a = b - 1; a >= 0; --a) {
      const Eigen::MatrixXd blk = BdT * G;
      qp.H.block(a * m, b * m, m, m) = blk;
      qp.H.block(b * m, a * m, m, m) = blk.transpose();
      if (a > 0) G = AdT * G;
    }
    R = Wxx + AdT * R * qp.Ad;
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  qp.lower = sc.box.lower.replicate(N, 1);
  qp.upper = sc.box.upper.replicate(N, 1);
  return qp;
}

TrajectoryPair solve(const OcpScenario& sc, const BoxQpOptions& options) {
  const CondensedQp qp = discretize(sc);
  const int m = sc.model.m(), N = sc.grid_size();
  const double h = sc.step();

  TrajectoryPair pair;
  pair.diagnostics = solve_box_qp(qp.H, qp.g, qp.lower, qp.upper, std::nullopt, options);
  const Eigen::VectorXd& u = pair.diagnostics.x;
  pair.u = Eigen::Map<const Eigen::MatrixXd>(u.data(), m, N);
  pair.x = qp.states(u);
  pair.objective = pair.diagnostics.objective + qp.constant;
  pair.t.resize(N + 1);
  for (int j = 0; j <= N; ++j) pair.t[j] = j * h;
  return pair;
}

double stage_cost(const CostData& cost, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  return 0.5 * x.dot(cost.Q * x) + u.dot(cost.S * x) + x.dot(cost.r(t)) + u.dot(cost.p(t));
}

double objective(const TrajectoryPair& pair, const OcpScenario& sc, int substeps) {
  if (substeps < 2 || substeps % 2 != 0) throw std::invalid_argument("Simpson substeps must be even");
  const int N = pair.intervals();
  const double h = pair.step();
  const Exosystem exo(sc.disturbance);
  const auto weight = simpson_weights(substeps, h);
  std::vector<IntervalPropagator> props;
  for (int k = 0; k <= substeps; ++k) props.emplace_back(sc.model, exo, k * h / substeps);

  double total = 0.0;
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd wj = exo.state(pair.t[j]);
    const Eigen::VectorXd uj = pair.u.col(j);
    for (int k = 0; k <= substeps; ++k) {
      const Eigen::VectorXd xk = props[k](pair.x.col(j), uj, wj);
      total += weight[k] * stage_cost(sc.cost, pair.t[j] + k * h / substeps, xk, uj);
    }
  }
  return total;
}

Eigen::MatrixXd intra_states(const TrajectoryPair& pair, const OcpScenario& sc, double sigma) {
  const Exosystem exo(sc.disturbance);
  const IntervalPropagator prop(sc.model, exo, sigma);
  const int N = pair.intervals();
  Eigen::MatrixXd out(sc.model.n(), N);
  for (int j = 0; j < N; ++j) out.col(j) = prop(pair.x.col(j), pair.u.col(j), exo.state(pair.t[j]));
  return out;
}

double dynamics_residual(const TrajectoryPair& pair, const OcpScenario& sc) {
  const Eigen::MatrixXd next = intra_states(pair, sc, pair.step());
  double worst = 0.0;
  for (int j = 0; j < pair.intervals(); ++j) {
    const Eigen::VectorXd xn = pair.x.col(j + 1);
    worst = std::max(worst, (xn - next.col(j)).norm() / (1.0 + xn.norm()));
  }
  return worst;
}

}  // namespace dhn
