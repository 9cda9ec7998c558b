#include "dhn/pmp.hpp"

#include <algorithm>
#include <cmath>

namespace dhn {

namespace {

// One backward sweep with K RK4 steps per interval. Fills lambda at grid
// points and, for even K, at midpoints.
void backward_sweep(const TrajectoryPair& pair, const OcpScenario& sc, int K, Eigen::MatrixXd& lambda,
                    Eigen::MatrixXd& lambda_mid, Eigen::MatrixXd& lambda_mean) {
  const auto& model = sc.model;
  const auto& cost = sc.cost;
  const int n = model.n(), N = pair.intervals();
  const double h = pair.step();
  const double dt = h / K;
  const Exosystem exo(sc.disturbance);
  const IntervalPropagator half(model, exo, 0.5 * dt);
  const Eigen::MatrixXd At = model.A.transpose();

  lambda.resize(n, N + 1);
  lambda_mid.resize(n, N);
  lambda_mean.resize(n, N);
  lambda.col(N).setZero();
  std::vector<Eigen::VectorXd> xs(2 * K + 1);
  for (int j = N - 1; j >= 0; --j) {
    const double tj = pair.t[j];
    const Eigen::VectorXd uj = pair.u.col(j);
    const Eigen::VectorXd su = cost.S.transpose() * uj;
    xs[0] = pair.x.col(j);
    for (int i = 1; i <= 2 * K; ++i) xs[i] = half(xs[i - 1], uj, exo.state(tj + (i - 1) * 0.5 * dt));

    auto rhs = [&](int node, const Eigen::VectorXd& l) -> Eigen::VectorXd {
      const double t = tj + node * 0.5 * dt;
      return -(At * l + cost.Q * xs[node] + su + cost.r(t));
    };
    Eigen::VectorXd l = lambda.col(j + 1);
    Eigen::VectorXd acc = l;  // Simpson weights 1, 4, 2, ..., 4, 1 over the K steps
    for (int k = K - 1; k >= 0; --k) {
      // step from node 2k+2 back to node 2k
      const Eigen::VectorXd k1 = rhs(2 * k + 2, l);
      const Eigen::VectorXd k2 = rhs(2 * k + 1, l - 0.5 * dt * k1);
      const Eigen::VectorXd k3 = rhs(2 * k + 1, l - 0.5 * dt * k2);
      const Eigen::VectorXd k4 = rhs(2 * k, l - dt * k3);
      l -= dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (K % 2 == 0 && k == K / 2) lambda_mid.col(j) = l;
      acc += (k == 0 ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0)) * l;
    }
    lambda.col(j) = l;
    lambda_mean.col(j) = acc / (3.0 * K);
  }
}

}  // namespace

AdjointTrajectory costate(const TrajectoryPair& pair, const OcpScenario& sc, double tolerance) {
  AdjointTrajectory adj;
  Eigen::MatrixXd prev, prev_mid, prev_mean, cur, cur_mid, cur_mean;
  backward_sweep(pair, sc, 2, prev, prev_mid, prev_mean);
  int K = 2;
  double agreement = 0.0;
  for (; K <= 1024;) {
    backward_sweep(pair, sc, 2 * K, cur, cur_mid, cur_mean);
    K *= 2;
    const double scale = std::max(cur.cwiseAbs().maxCoeff(), 1e-300);
    agreement = (cur - prev).cwiseAbs().maxCoeff() / scale;
    prev = cur;
    prev_mid = cur_mid;
    prev_mean = cur_mean;
    if (agreement <= tolerance) break;
  }
  adj.lambda = prev;
  adj.lambda_mid = prev_mid;
  adj.lambda_mean = prev_mean;
  adj.substeps = K;
  adj.halving_agreement = agreement;
  adj.terminal_residual = adj.lambda.col(adj.lambda.cols() - 1).norm();
  return adj;
}

std::vector<double> midpoints(const TrajectoryPair& pair) {
  std::vector<double> mid(pair.intervals());
  for (int j = 0; j < pair.intervals(); ++j) mid[j] = 0.5 * (pair.t[j] + pair.t[j + 1]);
  return mid;
}

Eigen::MatrixXd switching_functions(const TrajectoryPair& pair, const AdjointTrajectory& adjoint,
                                    const OcpScenario& sc) {
  const Eigen::MatrixXd xm = intra_states(pair, sc, 0.5 * pair.step());
  const auto mid = midpoints(pair);
  Eigen::MatrixXd s(sc.model.m(), pair.intervals());
  for (int j = 0; j < pair.intervals(); ++j) {
    s.col(j) = sc.cost.S * xm.col(j) + sc.model.B.transpose() * adjoint.lambda_mid.col(j) +
               sc.cost.p(mid[j]);
  }
  return s;
}

Eigen::MatrixXd mean_switching_functions(const TrajectoryPair& pair,
                                         const AdjointTrajectory& adjoint, const OcpScenario& sc) {
  const int K = std::max(adjoint.substeps, 2);
  const int N = pair.intervals();
  const double h = pair.step();
  const Exosystem exo(sc.disturbance);
  const IntervalPropagator sub(sc.model, exo, h / K);
  Eigen::MatrixXd s(sc.model.m(), N);
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd uj = pair.u.col(j);
    Eigen::VectorXd x = pair.x.col(j);
    Eigen::VectorXd x_acc = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd p_acc = Eigen::VectorXd::Zero(uj.size());
    for (int k = 0; k <= K; ++k) {
      const double t = pair.t[j] + k * h / K;
      const double wk = (k == 0 || k == K) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      x_acc += wk * x;
      p_acc += wk * sc.cost.p(t);
      if (k < K) x = sub(x, uj, exo.state(t));
    }
    s.col(j) = (sc.cost.S * x_acc + p_acc) / (3.0 * K) +
               sc.model.B.transpose() * adjoint.lambda_mean.col(j);
  }
  return s;
}

std::string to_string(ArcLabel label) {
  switch (label) {
    case ArcLabel::lower: return "lower";
    case ArcLabel::upper: return "upper";
    case ArcLabel::singular: return "singular";
  }
  return "unknown";
}

ArcLabel ArcPartition::label(int input, int interval) const {
  for (const auto& a : arcs.at(input)) {
    if (interval >= a.first && interval <= a.last) return a.label;
  }
  return ArcLabel::singular;
}

std::vector<bool> ArcPartition::all_singular(int intervals) const {
  std::vector<bool> out(intervals, true);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    for (const auto& a : arcs[i]) {
      if (a.label == ArcLabel::singular) continue;
      for (int j = a.first; j <= a.last; ++j) out[j] = false;
    }
  }
  return out;
}

double default_switching_tolerance(const Eigen::MatrixXd& s, const TrajectoryPair& pair,
                                   const InputBox& box) {
  std::vector<double> bang;
  for (int j = 0; j < s.cols(); ++j) {
    for (int i = 0; i < s.rows(); ++i) {
      const double range = box.upper(i) - box.lower(i);
      const double u = pair.u(i, j);
      if (std::abs(u - box.lower(i)) <= 1e-8 * range || std::abs(u - box.upper(i)) <= 1e-8 * range) {
        bang.push_back(std::abs(s(i, j)));
      }
    }
  }
  if (bang.empty()) return 1e-8;
  std::sort(bang.begin(), bang.end());
  const std::size_t k = bang.size() / 2;
  const double median = bang.size() % 2 == 1 ? bang[k] : 0.5 * (bang[k - 1] + bang[k]);
  return std::max(1e-4 * median, 1e-8);
}

ArcPartition classify_arcs(const Eigen::MatrixXd& s, const std::vector<double>& grid, double delta) {
  const int m = s.rows(), N = s.cols();
  ArcPartition part;
  part.delta = delta;
  part.arcs.resize(m);
  for (int i = 0; i < m; ++i) {
    std::vector<ArcLabel> lab(N);
    for (int j = 0; j < N; ++j) {
      lab[j] = s(i, j) > delta ? ArcLabel::lower : (s(i, j) < -delta ? ArcLabel::upper : ArcLabel::singular);
    }
    // interior islands of one interval take the label of their left neighbour
    for (int j = 1; j + 1 < N; ++j) {
      if (lab[j] != lab[j - 1] && lab[j] != lab[j + 1]) lab[j] = lab[j - 1];
    }
    for (int j = 0; j < N;) {
      int k = j;
      while (k + 1 < N && lab[k + 1] == lab[j]) ++k;
      part.arcs[i].push_back({lab[j], j, k, grid[j], grid[k + 1]});
      j = k + 1;
    }
  }
  return part;
}

double bang_consistency(const ArcPartition& arcs, const TrajectoryPair& pair, const InputBox& box,
                        double tol) {
  int total = 0, good = 0;
  for (std::size_t i = 0; i < arcs.arcs.size(); ++i) {
    const double range = box.upper(i) - box.lower(i);
    for (const auto& a : arcs.arcs[i]) {
      if (a.label == ArcLabel::singular) continue;
      const double bound = a.label == ArcLabel::lower ? box.lower(i) : box.upper(i);
      for (int j = a.first; j <= a.last; ++j) {
        ++total;
        if (std::abs(pair.u(i, j) - bound) <= tol * range) ++good;
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(good) / total;
}

}  // namespace dhn
