#include "dhn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "dhn/error.hpp"

namespace dhn {

namespace {

std::map<std::string, int> index_vertices(const NetworkGraph& graph) {
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(graph.vertices.size()); ++i) {
    index[graph.vertices[i].id] = i;
  }
  return index;
}

std::string vpath(int i) { return "/graph/vertices/" + std::to_string(i); }
std::string epath(int i) { return "/graph/edges/" + std::to_string(i); }

}  // namespace

void validate(const NetworkGraph& graph) {
  const int n = static_cast<int>(graph.vertices.size());
  if (n == 0) throw ValidationError("/graph/vertices", "graph has no vertices");

  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) {
    const auto& v = graph.vertices[i];
    if (!index.emplace(v.id, i).second) {
      throw ValidationError(vpath(i) + "/id", "duplicate vertex id '" + v.id + "'");
    }
    if (!(v.mass > 0.0) || !std::isfinite(v.mass)) {
      throw ValidationError(vpath(i) + "/mass", "mass must be positive");
    }
    if (!(v.loss > 0.0) || !std::isfinite(v.loss)) {
      throw ValidationError(vpath(i) + "/loss", "loss coefficient must be positive");
    }
  }

  // union-find for (weak) connectivity
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };

  std::vector<double> inflow(n, 0.0), outflow(n, 0.0);
  for (int k = 0; k < static_cast<int>(graph.edges.size()); ++k) {
    const auto& e = graph.edges[k];
    auto t = index.find(e.tail);
    if (t == index.end()) throw ValidationError(epath(k) + "/tail", "unknown vertex '" + e.tail + "'");
    auto h = index.find(e.head);
    if (h == index.end()) throw ValidationError(epath(k) + "/head", "unknown vertex '" + e.head + "'");
    if (t->second == h->second) throw ValidationError(epath(k), "self-loop at vertex '" + e.tail + "'");
    if (!(e.flow > 0.0) || !std::isfinite(e.flow)) {
      throw ValidationError(epath(k) + "/flow", "mass flow must be positive");
    }
    outflow[t->second] += e.flow;
    inflow[h->second] += e.flow;
    parent[find(t->second)] = find(h->second);
  }

  for (int i = 1; i < n; ++i) {
    if (find(i) != find(0)) {
      throw ValidationError("/graph/edges", "graph is not connected: vertex '" +
                                                graph.vertices[i].id + "' unreachable from '" +
                                                graph.vertices[0].id + "'");
    }
  }
  for (int i = 0; i < n; ++i) {
    const double scale = std::max({inflow[i], outflow[i], 1e-300});
    if (std::abs(inflow[i] - outflow[i]) > 1e-10 * scale) {
      throw ValidationError(vpath(i), "mass conservation violated at vertex '" +
                                          graph.vertices[i].id + "': inflow " +
                                          std::to_string(inflow[i]) + " != outflow " +
                                          std::to_string(outflow[i]));
    }
  }
}

Eigen::MatrixXd flow_laplacian(const NetworkGraph& graph) {
  validate(graph);
  const auto index = index_vertices(graph);
  const int n = static_cast<int>(graph.vertices.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges) {
    const int u = index.at(e.tail);
    const int v = index.at(e.head);
    L(u, u) += e.flow;
    L(v, u) -= e.flow;
  }
  return L;
}

StateSpaceModel assemble_model(const NetworkGraph& graph) {
  const Eigen::MatrixXd L = flow_laplacian(graph);
  const int n = L.rows();

  StateSpaceModel model;
  Eigen::VectorXd mass(n), loss(n);
  for (int i = 0; i < n; ++i) {
    const auto& v = graph.vertices[i];
    mass(i) = v.mass;
    loss(i) = v.loss;
    model.vertex_ids.push_back(v.id);
    if (v.role == VertexRole::producer) model.producers.push_back(i);
    if (v.role == VertexRole::consumer) model.consumers.push_back(i);
  }
  Eigen::MatrixXd rhs = -L;
  rhs.diagonal() -= loss;
  model.A = mass.cwiseInverse().asDiagonal() * rhs;

  model.B = Eigen::MatrixXd::Zero(n, model.producers.size());
  for (int j = 0; j < model.m(); ++j) model.B(model.producers[j], j) = 1.0;
  model.E = Eigen::MatrixXd::Zero(n, model.consumers.size());
  for (int j = 0; j < model.w(); ++j) model.E(model.consumers[j], j) = 1.0;
  return model;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  // A = U T U^*, so A' = U T^* U^* and X = U^* P U solves T^* X + X T = -U^* Q U.
  const int n = A.rows();
  Eigen::ComplexSchur<Eigen::MatrixXd> schur(A);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition of A failed");
  const Eigen::MatrixXcd& T = schur.matrixT();
  const Eigen::MatrixXcd& U = schur.matrixU();
  const Eigen::MatrixXcd C = -(U.adjoint() * Q.cast<std::complex<double>>() * U);
  const Eigen::MatrixXcd Th = T.adjoint();

  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = C.col(j);
    for (int k = 0; k < j; ++k) rhs -= X.col(k) * T(k, j);
    Eigen::MatrixXcd lhs = Th;
    lhs.diagonal().array() += T(j, j);
    X.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  Eigen::MatrixXd P = (U * X * U.adjoint()).real();
  return 0.5 * (P + P.transpose());
}

HurwitzCertificate hurwitz_certificate(const StateSpaceModel& model) {
  const Eigen::MatrixXd& A = model.A;
  const int n = A.rows();
  HurwitzCertificate cert;

  cert.gershgorin_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double off = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    cert.gershgorin_margin = std::min(cert.gershgorin_margin, std::abs(A(i, i)) - off);
  }

  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  cert.spectral_abscissa = es.eigenvalues().real().maxCoeff();
  if (!(cert.spectral_abscissa < 0.0)) {
    throw NumericalError("A is not Hurwitz (spectral abscissa " +
                         std::to_string(cert.spectral_abscissa) + ")");
  }

  const Eigen::MatrixXd P = solve_lyapunov(A, Eigen::MatrixXd::Identity(n, n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ps(P);
  const double lo = ps.eigenvalues().minCoeff();
  const double hi = ps.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw NumericalError("Lyapunov solution is not positive definite");
  cert.transient_constant = std::sqrt(hi / lo);
  cert.decay_rate = -1.0 / (2.0 * hi);
  return cert;
}

double state_bound(const StateSpaceModel& model, const HurwitzCertificate& cert, double x0_norm,
                   double u_hat, double d_hat, double T) {
  const double k = cert.transient_constant;
  const double w = std::abs(cert.decay_rate);
  const double b_norm = model.m() > 0 ? model.B.operatorNorm() : 0.0;
  const double e_norm = model.w() > 0 ? model.E.operatorNorm() : 0.0;
  return k * std::exp(-w * T) * x0_norm + (k / w) * (b_norm * u_hat + e_norm * d_hat);
}

NetworkGraph random_network(int n, std::uint64_t seed, bool unit_mass) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> flow(0.2, 2.0);
  std::uniform_real_distribution<double> loss(0.01, 0.5);
  std::uniform_real_distribution<double> mass(0.5, 3.0);

  NetworkGraph g;
  for (int i = 0; i < n; ++i) {
    g.vertices.push_back({"v" + std::to_string(i + 1), unit_mass ? 1.0 : mass(rng), loss(rng),
                          VertexRole::plain});
  }
  if (n == 1) {
    g.vertices[0].role = VertexRole::producer;
    return g;
  }

  std::map<std::pair<int, int>, double> acc;
  auto add_cycle = [&](const std::vector<int>& cyc) {
    const double q = flow(rng);
    for (std::size_t i = 0; i < cyc.size(); ++i) acc[{cyc[i], cyc[(i + 1) % cyc.size()]}] += q;
  };

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  add_cycle(perm);
  std::uniform_int_distribution<int> extra_count(0, n);
  const int extra = extra_count(rng);
  for (int c = 0; c < extra; ++c) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_int_distribution<int> len(2, n);
    add_cycle(std::vector<int>(perm.begin(), perm.begin() + len(rng)));
  }
  for (const auto& [key, q] : acc) {
    g.edges.push_back({g.vertices[key.first].id, g.vertices[key.second].id, q});
  }

  // roles: at least one producer, disjoint consumers
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_int_distribution<int> prod(1, std::max(1, n / 3));
  std::uniform_int_distribution<int> cons(0, std::max(0, n / 3));
  const int np = prod(rng);
  const int nc = std::min(cons(rng), n - np);
  for (int i = 0; i < np; ++i) g.vertices[perm[i]].role = VertexRole::producer;
  for (int i = np; i < np + nc; ++i) g.vertices[perm[i]].role = VertexRole::consumer;
  return g;
}

}  // namespace dhn
