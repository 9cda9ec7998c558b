#pragma once

#include <complex>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dhn {

/// c
struct ConstantTerm {
  Eigen::VectorXd value;
};

/// a * t^power, power >= 1
struct MonomialTerm {
  int power = 1;
  Eigen::VectorXd coeff;
};

/// a * sin(omega t) + b * cos(omega t), omega > 0
struct SinusoidTerm {
  double omega = 0.0;
  Eigen::VectorXd sin_coeff;
  Eigen::VectorXd cos_coeff;
};

/// a * exp(rate t)
struct ExponentialTerm {
  double rate = 0.0;
  Eigen::VectorXd coeff;
};

using SignalTerm = std::variant<ConstantTerm, MonomialTerm, SinusoidTerm, ExponentialTerm>;

/// Vector-valued closed-form time function: a finite sum of constant,
/// monomial, sinusoidal and exponential terms. Every derivative is again a
/// Signal of the same dimension.
class Signal {
 public:
  explicit Signal(int dim = 0) : dim_(dim) {}

  static Signal constant(const Eigen::VectorXd& value);
  /// Per-component amplitude and phase: a_i sin(omega t + phi_i).
  static Signal sinusoid(double omega, const Eigen::VectorXd& amplitude,
                         const Eigen::VectorXd& phase);

  /// Appends a term. Throws std::invalid_argument on dimension mismatch.
  Signal& add(SignalTerm term);

  int dim() const { return dim_; }
  const std::vector<SignalTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  Eigen::VectorXd operator()(double t) const;

  /// True iff the signal stays bounded on [0, inf).
  bool is_bounded() const;
  /// True iff every term is a constant or a sinusoid.
  bool is_trigonometric() const;

  /// L * s, for a (rows x dim) matrix L.
  Signal mapped(const Eigen::MatrixXd& L) const;
  /// Components [start, start + count).
  Signal segment(int start, int count) const;
  Signal scaled(double factor) const;
  /// Merges like terms and drops terms whose coefficients are exactly zero.
  Signal simplified() const;

  Signal operator+(const Signal& other) const;
  Signal operator-(const Signal& other) const;

  /// Vertical concatenation.
  static Signal stack(const std::vector<Signal>& parts);

 private:
  int dim_;
  std::vector<SignalTerm> terms_;
};

Eigen::VectorXd eval(const Signal& signal, double t);

/// Exact symbolic derivative of the given order (order 0 returns a copy).
Signal derivative(const Signal& signal, int order);

struct FourierComponent {
  int harmonic = 0;
  Eigen::VectorXcd amplitude;  // coefficient of exp(i * harmonic * omega0 * t)
};

/// Complex-exponential decomposition of a trigonometric polynomial whose
/// frequencies are integer multiples of `base_omega`. Harmonics are returned in
/// ascending order, both signs present. Throws std::invalid_argument listing
/// the offending terms if a term is not a constant/sinusoid or a frequency is
/// not commensurate (relative tolerance 1e-9).
std::vector<FourierComponent> fourier_components(const Signal& signal, double base_omega);

/// Lowest sinusoid frequency present, or 0 for a signal without sinusoids.
double lowest_frequency(const Signal& signal);

/// Linear time-invariant generator of a signal: w' = generator * w,
/// s(t) = output * w(t), with w(t) available in closed form. Used for exact
/// convolution of the forcing with matrix exponentials.
class Exosystem {
 public:
  explicit Exosystem(const Signal& signal);

  int order() const { return static_cast<int>(generator_.rows()); }
  const Eigen::MatrixXd& generator() const { return generator_; }
  const Eigen::MatrixXd& output() const { return output_; }
  Eigen::VectorXd state(double t) const;

 private:
  enum class Kind { power, sine_pair, exponential };
  struct Block {
    Kind kind;
    int offset;
    int power_count;  // for Kind::power: number of states t^0..t^{k}
    double param;     // omega or rate
  };

  Eigen::MatrixXd generator_;
  Eigen::MatrixXd output_;
  std::vector<Block> blocks_;
};

}  // namespace dhn
