#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace dhn {

/// Componentwise input bounds lower <= u <= upper.
struct InputBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd project(const Eigen::VectorXd& u) const { return u.cwiseMax(lower).cwiseMin(upper); }
  /// Smallest distance of u to the boundary (negative when outside).
  double margin(const Eigen::VectorXd& u) const {
    if (dim() == 0) return 0.0;
    return std::min((u - lower).minCoeff(), (upper - u).minCoeff());
  }
};

}  // namespace dhn
