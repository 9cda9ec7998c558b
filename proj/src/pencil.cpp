#include "dhn/pencil.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dhn/error.hpp"
#include "dhn/lapack.hpp"

namespace dhn {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Signed permutation: (Pi)_{i, perm[i]} = sign[i].
Eigen::MatrixXd signed_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution flip(0.5);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) P(i, perm[i]) = flip(rng) ? -1.0 : 1.0;
  return P;
}

int nilpotency_index(const Eigen::MatrixXd& N) {
  const int k = N.rows();
  if (k == 0) return 0;
  const double scale = std::max(1.0, N.cwiseAbs().maxCoeff());
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(k, k);
  double bound = 1.0;
  for (int nu = 1; nu <= k; ++nu) {
    power = power * N;
    bound *= scale;
    if (power.cwiseAbs().maxCoeff() <= 1e-10 * bound) return nu;
  }
  return k;
}

}  // namespace

OptimalityPencil build_pencil(const StateSpaceModel& model, const CostData& cost,
                              const Signal& disturbance) {
  const int n = model.n();
  const int m = model.m();
  if (cost.Q.rows() != n || cost.Q.cols() != n) {
    throw ValidationError("/cost/Q", "Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if ((cost.Q - cost.Q.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, cost.Q.cwiseAbs().maxCoeff())) {
    throw ValidationError("/cost/Q", "Q must be symmetric");
  }
  if (cost.S.rows() != m || cost.S.cols() != n) {
    throw ValidationError("/cost/S", "S must be " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (cost.r.dim() != n) throw ValidationError("/cost/r", "r must have dimension " + std::to_string(n));
  if (cost.p.dim() != m) throw ValidationError("/cost/p", "p must have dimension " + std::to_string(m));
  if (disturbance.dim() != model.w()) {
    throw ValidationError("/disturbance", "d must have dimension " + std::to_string(model.w()));
  }

  OptimalityPencil pencil;
  pencil.n = n;
  pencil.m = m;
  const int size = 2 * n + m;
  pencil.D = Eigen::MatrixXd::Zero(size, size);
  pencil.D.topLeftCorner(2 * n, 2 * n).setIdentity();

  Eigen::MatrixXd& M = pencil.M;
  M = Eigen::MatrixXd::Zero(size, size);
  M.block(0, 0, n, n) = model.A;
  M.block(0, 2 * n, n, m) = model.B;
  M.block(n, 0, n, n) = -cost.Q;
  M.block(n, n, n, n) = -model.A.transpose();
  M.block(n, 2 * n, n, m) = -cost.S.transpose();
  M.block(2 * n, 0, m, n) = cost.S;
  M.block(2 * n, n, m, n) = model.B.transpose();

  pencil.f = Signal::stack({disturbance.mapped(model.E), cost.r.scaled(-1.0), cost.p});
  return pencil;
}

RegularityResult check_regularity(const Eigen::MatrixXd& D, const Eigen::MatrixXd& M,
                                  std::uint64_t seed) {
  const int size = D.rows();
  Eigen::MatrixXd Mb = M, Db = D;
  lapack::balance(Mb, Db);

  RegularityResult res;
  res.tolerance = std::sqrt(kEps);
  const double dn = Db.norm();
  const double rho = dn > 0.0 ? std::max(Mb.norm() / dn, 1e-300) : 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int j = 0; j <= size; ++j) {
    const double s = rho * dist(rng);
    const Eigen::MatrixXd A = s * Db - Mb;
    const double det = size == 0 ? 1.0 : A.partialPivLu().determinant();
    double hadamard = 1.0;
    for (int i = 0; i < size; ++i) hadamard *= A.row(i).norm();
    const double ratio = hadamard > 0.0 ? std::abs(det) / hadamard : 0.0;
    res.samples.push_back(s);
    res.determinants.push_back(det);
    res.ratios.push_back(ratio);
    res.max_ratio = std::max(res.max_ratio, ratio);
  }
  res.regular = res.max_ratio > res.tolerance;
  return res;
}

WeierstrassDecomposition weierstrass_decompose(const Eigen::MatrixXd& D, const Eigen::MatrixXd& M,
                                               std::uint64_t ordering_seed) {
  const int size = D.rows();
  const RegularityResult reg = check_regularity(D, M);
  if (!reg.regular) {
    std::ostringstream msg;
    msg << "pencil sD - M is not regular: det(sD - M) vanishes identically (largest sampled "
           "ratio "
        << reg.max_ratio << " <= " << reg.tolerance
        << "); the regularity assumption on the optimality system fails";
    throw NumericalError(msg.str());
  }

  Eigen::MatrixXd Pl = Eigen::MatrixXd::Identity(size, size);
  Eigen::MatrixXd Pr = Eigen::MatrixXd::Identity(size, size);
  if (ordering_seed != 0) {
    std::mt19937_64 rng(ordering_seed);
    Pl = signed_permutation(size, rng);
    Pr = signed_permutation(size, rng);
  }
  Eigen::MatrixXd Mb = Pl * M * Pr;
  Eigen::MatrixXd Db = Pl * D * Pr;
  const lapack::Balancing bal = lapack::balance(Mb, Db);

  lapack::GeneralizedSchur g = lapack::qz(Mb, Db);
  const double beta_scale = std::max(g.beta.cwiseAbs().maxCoeff(), Db.norm());
  std::vector<int> select(size, 0);
  for (int i = 0; i < size; ++i) select[i] = std::abs(g.beta(i)) > 1e-8 * beta_scale ? 1 : 0;
  // complex pairs share beta up to rounding; select them jointly
  for (int i = 0; i + 1 < size; ++i) {
    if (g.alphai(i) != 0.0 && g.alphai(i + 1) == -g.alphai(i)) {
      const int s = select[i] || select[i + 1];
      select[i] = select[i + 1] = s;
      ++i;
    }
  }
  const int nf = lapack::reorder(g, select);
  const int ni = size - nf;

  const Eigen::MatrixXd S11 = g.S.topLeftCorner(nf, nf);
  const Eigen::MatrixXd S12 = g.S.topRightCorner(nf, ni);
  Eigen::MatrixXd S22 = g.S.bottomRightCorner(ni, ni);
  const Eigen::MatrixXd T11 = g.T.topLeftCorner(nf, nf);
  const Eigen::MatrixXd T12 = g.T.topRightCorner(nf, ni);
  Eigen::MatrixXd T22 = g.T.bottomRightCorner(ni, ni);
  // infinite eigenvalues: the diagonal of T22 is zero up to rounding
  T22.diagonal().setZero();
  T22.triangularView<Eigen::StrictlyLower>().setZero();
  S22.triangularView<Eigen::StrictlyLower>().setZero();

  Eigen::MatrixXd X = -S12;  // becomes R
  Eigen::MatrixXd L = -T12;  // becomes L, with Y = -L
  double scale = 1.0;
  if (nf > 0 && ni > 0) scale = lapack::generalized_sylvester(S11, S22, X, T11, T22, L);
  X /= scale;
  const Eigen::MatrixXd Y = -L / scale;

  WeierstrassDecomposition w;
  w.finite = nf;
  w.infinite = ni;
  if (nf > 0 && ni > 0) {
    const double r1 = (S11 * X + Y * S22 + S12).norm();
    const double r2 = (T11 * X + Y * T22 + T12).norm();
    const double denom = (g.S.norm() + g.T.norm()) * (1.0 + X.norm() + Y.norm());
    w.sylvester_residual = (r1 + r2) / denom;
    if (w.sylvester_residual > 1e-6) {
      std::ostringstream msg;
      msg << "block decoupling is ill-conditioned: Sylvester residual " << w.sylvester_residual
          << ", ||X|| = " << X.norm() << ", ||Y|| = " << Y.norm();
      throw NumericalError(msg.str());
    }
  }

  const auto T11u = T11.triangularView<Eigen::Upper>();
  const auto S22u = S22.triangularView<Eigen::Upper>();
  w.J = T11u.solve(S11);
  w.N = S22u.solve(T22);
  w.N.triangularView<Eigen::Lower>().setZero();
  w.index = nilpotency_index(w.N);

  Eigen::MatrixXd left = Eigen::MatrixXd::Identity(size, size);
  left.topRightCorner(nf, ni) = Y;
  Eigen::MatrixXd right = Eigen::MatrixXd::Identity(size, size);
  right.topRightCorner(nf, ni) = X;

  Eigen::MatrixXd blk_inv = Eigen::MatrixXd::Zero(size, size);
  blk_inv.topLeftCorner(nf, nf) = T11u.solve(Eigen::MatrixXd::Identity(nf, nf));
  blk_inv.bottomRightCorner(ni, ni) = S22u.solve(Eigen::MatrixXd::Identity(ni, ni));

  w.P = blk_inv * left * g.Q.transpose() * bal.left.asDiagonal() * Pl;
  w.Q = Pr * bal.right.asDiagonal() * g.Z * right;
  return w;
}

double reconstruction_residual(const WeierstrassDecomposition& w, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& M, std::uint64_t seed) {
  const int size = D.rows();
  const int nf = w.finite, ni = w.infinite;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double rho = std::max(1.0, w.J.size() > 0 ? w.J.norm() : 0.0);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double s = rho * dist(rng);
    Eigen::MatrixXd canon = Eigen::MatrixXd::Zero(size, size);
    canon.topLeftCorner(nf, nf) = s * Eigen::MatrixXd::Identity(nf, nf) - w.J;
    canon.bottomRightCorner(ni, ni) = s * w.N - Eigen::MatrixXd::Identity(ni, ni);
    const Eigen::MatrixXd got = w.P * (s * D - M) * w.Q;
    const double denom = std::max(canon.norm(), w.P.norm() * (s * D - M).norm() * w.Q.norm() * kEps);
    worst = std::max(worst, (got - canon).norm() / denom);
  }
  return worst;
}

Signal algebraic_part(const WeierstrassDecomposition& w, const Signal& f) {
  const int nf = w.finite, ni = w.infinite;
  const Signal f2 = f.mapped(w.P).segment(nf, ni);
  Signal out(ni);
  Eigen::MatrixXd Ni = Eigen::MatrixXd::Identity(ni, ni);
  for (int i = 0; i < std::max(w.index, 1); ++i) {
    out = out + derivative(f2, i).mapped(-Ni);
    Ni = Ni * w.N;
  }
  return out.simplified();
}

Eigen::VectorXd algebraic_part(const WeierstrassDecomposition& w, const Signal& f, double t) {
  return algebraic_part(w, f)(t);
}

Signal bounded_ode_part(const WeierstrassDecomposition& w, const Signal& f, double omega0) {
  const int nf = w.finite;
  const Signal f1 = f.mapped(w.P).segment(0, nf).simplified();
  Signal out(nf);
  if (nf == 0 || f1.empty()) return out;
  if (!(omega0 > 0.0)) omega0 = 1.0;  // only the constant harmonic is present

  const std::complex<double> I(0.0, 1.0);
  const Eigen::MatrixXcd Jc = w.J.cast<std::complex<double>>();
  const double j_norm = w.J.norm();
  for (const auto& comp : fourier_components(f1, omega0)) {
    if (comp.harmonic < 0) continue;
    const double freq = comp.harmonic * omega0;
    Eigen::MatrixXcd A = (I * freq) * Eigen::MatrixXcd::Identity(nf, nf) - Jc;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    const double smin = svd.singularValues().minCoeff();
    const double scale = std::max(j_norm, freq);
    if (!(smin > 0.0) || scale / smin > 1e10) {
      std::ostringstream msg;
      msg << "resonance: harmonic " << comp.harmonic << " (frequency " << freq
          << " rad/s) is within " << smin << " of the finite spectrum";
      throw NumericalError(msg.str());
    }
    const Eigen::VectorXcd c = A.partialPivLu().solve(comp.amplitude);
    if (comp.harmonic == 0) {
      out.add(ConstantTerm{c.real()});
    } else {
      // c e^{iwt} + conj = 2 Re(c) cos(wt) - 2 Im(c) sin(wt)
      out.add(SinusoidTerm{freq, -2.0 * c.imag(), 2.0 * c.real()});
    }
  }
  return out;
}

TurnpikeTrajectory bounded_particular_solution(const WeierstrassDecomposition& w,
                                               const OptimalityPencil& pencil,
                                               const std::optional<InputBox>& box,
                                               double base_omega, double horizon) {
  const int n = pencil.n, m = pencil.m;
  if (!pencil.f.is_trigonometric()) {
    throw NumericalError(
        "the bounded turnpike requires trigonometric forcing (constants and sinusoids only)");
  }
  if (base_omega <= 0.0) base_omega = lowest_frequency(pencil.f);

  const Signal xi1 = bounded_ode_part(w, pencil.f, base_omega);
  const Signal xi2 = algebraic_part(w, pencil.f);
  TurnpikeTrajectory tp;
  tp.xi = Signal::stack({xi1, xi2}).mapped(w.Q).simplified();
  tp.x = tp.xi.segment(0, n);
  tp.lambda = tp.xi.segment(n, n);
  tp.u = tp.xi.segment(2 * n, m);
  tp.base_omega = base_omega;
  tp.period = base_omega > 0.0 ? 2.0 * M_PI / base_omega : 0.0;

  if (box) {
    const double span = horizon > 0.0 ? horizon : (tp.period > 0.0 ? tp.period : 1.0);
    tp.interiority_margin = std::numeric_limits<double>::infinity();
    for (double t : uniform_grid(0.0, span, 1000)) {
      tp.interiority_margin = std::min(tp.interiority_margin, box->margin(tp.u(t)));
    }
    tp.interior = tp.interiority_margin > 0.0;
  }
  return tp;
}

double dae_residual(const OptimalityPencil& pencil, const Signal& xi,
                    const std::vector<double>& grid) {
  const Signal dxi = derivative(xi, 1);
  const double m_norm = pencil.M.norm();
  double worst = 0.0;
  for (double t : grid) {
    const Eigen::VectorXd x = xi(t);
    const Eigen::VectorXd f = pencil.f(t);
    const Eigen::VectorXd r = pencil.D * dxi(t) - pencil.M * x - f;
    worst = std::max(worst, r.norm() / (m_norm * (1.0 + x.norm()) + f.norm()));
  }
  return worst;
}

double switching_residual(const StateSpaceModel& model, const CostData& cost,
                          const TurnpikeTrajectory& tp, const std::vector<double>& grid) {
  const double s_norm = cost.S.norm();
  const double b_norm = model.B.norm();
  double worst = 0.0;
  for (double t : grid) {
    const Eigen::VectorXd x = tp.x(t), l = tp.lambda(t), p = cost.p(t);
    const Eigen::VectorXd s = cost.S * x + model.B.transpose() * l + p;
    const double scale = s_norm * x.norm() + b_norm * l.norm() + p.norm() + 1.0;
    worst = std::max(worst, (s.size() ? s.cwiseAbs().maxCoeff() : 0.0) / scale);
  }
  return worst;
}

std::vector<double> uniform_grid(double t0, double t1, int points) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = points == 1 ? t0 : t0 + (t1 - t0) * i / (points - 1);
  }
  return grid;
}

}  // namespace dhn
