#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dhn {

enum class VertexRole { plain, producer, consumer };

struct Vertex {
  std::string id;
  double mass = 1.0;  // kg
  double loss = 0.0;  // W/K
  VertexRole role = VertexRole::plain;
};

struct Edge {
  std::string tail;
  std::string head;
  double flow = 0.0;  // kg/s
};

struct NetworkGraph {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
};

/// Throws ValidationError (pointer like "/graph/vertices/3") on any violated
/// invariant: duplicate ids, nonpositive parameters, self-loops, unknown edge
/// endpoints, disconnected graph, unbalanced mass flow.
void validate(const NetworkGraph& graph);

/// (L)_vv = sum of flows leaving v, (L)_vu = -q for every edge u -> v.
Eigen::MatrixXd flow_laplacian(const NetworkGraph& graph);

struct StateSpaceModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd E;
  std::vector<std::string> vertex_ids;  // state ordering
  std::vector<int> producers;           // state index of each input column
  std::vector<int> consumers;           // state index of each disturbance column

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int w() const { return static_cast<int>(E.cols()); }
};

StateSpaceModel assemble_model(const NetworkGraph& graph);

struct HurwitzCertificate {
  double spectral_abscissa = 0.0;   // max Re(eig(A))
  double gershgorin_margin = 0.0;   // min_i |a_ii| - sum_{j!=i} |a_ij|
  double transient_constant = 1.0;  // k = sqrt(cond(P)), A'P + PA = -I
  // Decay rate certified by P: ||exp(At)|| <= k exp(decay_rate t).
  // Always >= spectral_abscissa.
  double decay_rate = 0.0;
};

/// Throws NumericalError if A is not Hurwitz.
HurwitzCertificate hurwitz_certificate(const StateSpaceModel& model);

/// Solution of A'P + PA = -Q for Hurwitz A (complex Schur, Bartels-Stewart).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

/// Upper bound on ||x(T)|| for ||x0|| <= x0_norm, ||u|| <= u_hat, ||d|| <= d_hat.
double state_bound(const StateSpaceModel& model, const HurwitzCertificate& cert, double x0_norm,
                   double u_hat, double d_hat, double T);

/// Random strongly connected circulation network with n vertices (sum of
/// random directed cycles, so mass is conserved by construction).
NetworkGraph random_network(int n, std::uint64_t seed, bool unit_mass = true);

}  // namespace dhn
