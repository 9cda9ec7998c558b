#include "dhn/lapack.hpp"

#include <string>

#include <lapacke.h>

#include "dhn/error.hpp"

namespace dhn::lapack {

namespace {

void check(lapack_int info, const char* routine) {
  if (info != 0) {
    throw NumericalError(std::string(routine) + " failed with info = " + std::to_string(info));
  }
}

}  // namespace

Balancing balance(Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
  const lapack_int n = A.rows();
  Balancing bal{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n)};
  if (n == 0) return bal;
  lapack_int ilo = 0, ihi = 0;
  check(LAPACKE_dggbal(LAPACK_COL_MAJOR, 'S', n, A.data(), n, B.data(), n, &ilo, &ihi,
                       bal.left.data(), bal.right.data()),
        "dggbal");
  return bal;
}

GeneralizedSchur qz(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const lapack_int n = A.rows();
  GeneralizedSchur g{A, B, Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n),
                     Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  if (n == 0) return g;
  lapack_int sdim = 0;
  check(LAPACKE_dgges(LAPACK_COL_MAJOR, 'V', 'V', 'N', nullptr, n, g.S.data(), n, g.T.data(), n,
                      &sdim, g.alphar.data(), g.alphai.data(), g.beta.data(), g.Q.data(), n,
                      g.Z.data(), n),
        "dgges");
  return g;
}

int reorder(GeneralizedSchur& g, const std::vector<int>& select) {
  const lapack_int n = g.S.rows();
  if (n == 0) return 0;
  std::vector<lapack_logical> sel(select.begin(), select.end());
  lapack_int m = 0;
  double pl = 0.0, pr = 0.0, dif[2] = {0.0, 0.0};
  // explicit workspace: the high-level wrapper passes no iwork for ijob = 0,
  // but the routine still writes iwork(1)
  std::vector<double> work(4 * n + 16);
  std::vector<lapack_int> iwork(1);
  check(LAPACKE_dtgsen_work(LAPACK_COL_MAJOR, 0, 1, 1, sel.data(), n, g.S.data(), n, g.T.data(),
                            n, g.alphar.data(), g.alphai.data(), g.beta.data(), g.Q.data(), n,
                            g.Z.data(), n, &m, &pl, &pr, dif, work.data(),
                            static_cast<lapack_int>(work.size()), iwork.data(), 1),
        "dtgsen");
  return m;
}

double generalized_sylvester(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                             const Eigen::MatrixXd& E, Eigen::MatrixXd& F) {
  const lapack_int m = A.rows();
  const lapack_int n = B.rows();
  if (m == 0 || n == 0) return 1.0;
  double scale = 1.0, dif = 0.0;
  check(LAPACKE_dtgsyl(LAPACK_COL_MAJOR, 'N', 0, m, n, A.data(), m, B.data(), n, C.data(), m,
                       D.data(), m, E.data(), n, F.data(), m, &scale, &dif),
        "dtgsyl");
  return scale;
}

}  // namespace dhn::lapack
