#pragma once

#include <string>

#include <Eigen/Dense>

#include "dhn/network.hpp"
#include "dhn/ocp.hpp"
#include "oracles.hpp"

namespace fixture {

inline std::string scenario_path(const std::string& name) {
  return std::string(DHN_SCENARIO_DIR) + "/" + name + ".json";
}

/// Two vertices in a loop with unit flows, losses 1 and 2:
/// A = [[-2, 1], [1, -3]], producer at vertex 1, consumer at vertex 2.
inline dhn::NetworkGraph two_cycle() {
  dhn::NetworkGraph g;
  g.vertices = {{"1", 1.0, 1.0, dhn::VertexRole::producer}, {"2", 1.0, 2.0, dhn::VertexRole::consumer}};
  g.edges = {{"1", "2", 1.0}, {"2", "1", 1.0}};
  return g;
}

/// n = 2, m = 1 LQ instance on the two-cycle network with constant data.
inline dhn::OcpScenario small_lq(double lower, double upper, double horizon, int intervals) {
  dhn::OcpScenario sc;
  sc.model = dhn::assemble_model(two_cycle());
  sc.cost.Q = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  sc.cost.S = Eigen::RowVector2d(0.3, 0.0);
  sc.cost.r = dhn::Signal::constant(Eigen::Vector2d(-1.0, -0.5));
  sc.cost.p = dhn::Signal::constant(Eigen::VectorXd::Constant(1, 0.2));
  sc.disturbance = dhn::Signal::constant(Eigen::VectorXd::Constant(1, 0.5));
  sc.box = {Eigen::VectorXd::Constant(1, lower), Eigen::VectorXd::Constant(1, upper)};
  sc.horizon = horizon;
  sc.x0 = Eigen::Vector2d(1.0, -0.5);
  sc.intervals = intervals;
  return sc;
}

inline oracle::LinearQuadratic as_oracle(const dhn::OcpScenario& sc) {
  oracle::LinearQuadratic p;
  p.A = sc.model.A;
  p.B = sc.model.B;
  p.E = sc.model.E;
  p.Q = sc.cost.Q;
  p.S = sc.cost.S;
  const dhn::Signal r = sc.cost.r, pp = sc.cost.p, d = sc.disturbance;
  p.r = [r](double t) { return r(t); };
  p.p = [pp](double t) { return pp(t); };
  p.d = [d](double t) { return d(t); };
  return p;
}

}  // namespace fixture
