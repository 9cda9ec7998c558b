#include "dhn/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dhn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int term_dim(const SignalTerm& term) {
  return std::visit(
      Overloaded{[](const ConstantTerm& c) { return static_cast<int>(c.value.size()); },
                 [](const MonomialTerm& c) { return static_cast<int>(c.coeff.size()); },
                 [](const SinusoidTerm& c) { return static_cast<int>(c.sin_coeff.size()); },
                 [](const ExponentialTerm& c) { return static_cast<int>(c.coeff.size()); }},
      term);
}

bool same_frequency(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

Signal Signal::constant(const Eigen::VectorXd& value) {
  Signal s(static_cast<int>(value.size()));
  s.add(ConstantTerm{value});
  return s;
}

Signal Signal::sinusoid(double omega, const Eigen::VectorXd& amplitude,
                        const Eigen::VectorXd& phase) {
  if (amplitude.size() != phase.size()) {
    throw std::invalid_argument("sinusoid: amplitude and phase sizes differ");
  }
  // a sin(wt + phi) = a cos(phi) sin(wt) + a sin(phi) cos(wt)
  Signal s(static_cast<int>(amplitude.size()));
  s.add(SinusoidTerm{omega, amplitude.array() * phase.array().cos(),
                     amplitude.array() * phase.array().sin()});
  return s;
}

Signal& Signal::add(SignalTerm term) {
  if (term_dim(term) != dim_) {
    throw std::invalid_argument("signal term dimension " + std::to_string(term_dim(term)) +
                                " does not match signal dimension " + std::to_string(dim_));
  }
  if (const auto* s = std::get_if<SinusoidTerm>(&term)) {
    if (s->cos_coeff.size() != s->sin_coeff.size()) {
      throw std::invalid_argument("sinusoid term with mismatched coefficient sizes");
    }
    if (!(s->omega > 0.0)) throw std::invalid_argument("sinusoid frequency must be positive");
  }
  if (const auto* m = std::get_if<MonomialTerm>(&term); m && m->power < 1) {
    throw std::invalid_argument("monomial power must be at least 1");
  }
  terms_.push_back(std::move(term));
  return *this;
}

Eigen::VectorXd Signal::operator()(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  for (const auto& term : terms_) {
    std::visit(Overloaded{[&](const ConstantTerm& c) { out += c.value; },
                          [&](const MonomialTerm& c) { out += c.coeff * std::pow(t, c.power); },
                          [&](const SinusoidTerm& c) {
                            out += c.sin_coeff * std::sin(c.omega * t) +
                                   c.cos_coeff * std::cos(c.omega * t);
                          },
                          [&](const ExponentialTerm& c) { out += c.coeff * std::exp(c.rate * t); }},
               term);
  }
  return out;
}

bool Signal::is_bounded() const {
  for (const auto& term : simplified().terms_) {
    if (std::holds_alternative<MonomialTerm>(term)) return false;
    if (const auto* e = std::get_if<ExponentialTerm>(&term); e && e->rate > 0.0) return false;
  }
  return true;
}

bool Signal::is_trigonometric() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const SignalTerm& t) {
    return std::holds_alternative<ConstantTerm>(t) || std::holds_alternative<SinusoidTerm>(t);
  });
}

Signal Signal::mapped(const Eigen::MatrixXd& L) const {
  if (L.cols() != dim_) throw std::invalid_argument("signal map: column count mismatch");
  Signal out(static_cast<int>(L.rows()));
  for (const auto& term : terms_) {
    std::visit(Overloaded{[&](const ConstantTerm& c) { out.add(ConstantTerm{L * c.value}); },
                          [&](const MonomialTerm& c) { out.add(MonomialTerm{c.power, L * c.coeff}); },
                          [&](const SinusoidTerm& c) {
                            out.add(SinusoidTerm{c.omega, L * c.sin_coeff, L * c.cos_coeff});
                          },
                          [&](const ExponentialTerm& c) {
                            out.add(ExponentialTerm{c.rate, L * c.coeff});
                          }},
               term);
  }
  return out;
}

Signal Signal::segment(int start, int count) const {
  if (start < 0 || count < 0 || start + count > dim_) {
    throw std::invalid_argument("signal segment out of range");
  }
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(count, dim_);
  sel.middleCols(start, count).setIdentity();
  return mapped(sel);
}

Signal Signal::scaled(double factor) const {
  return mapped(factor * Eigen::MatrixXd::Identity(dim_, dim_));
}

Signal Signal::simplified() const {
  Eigen::VectorXd constant = Eigen::VectorXd::Zero(dim_);
  std::map<int, Eigen::VectorXd> monomials;
  std::vector<SinusoidTerm> sinusoids;
  std::vector<ExponentialTerm> exponentials;
  for (const auto& term : terms_) {
    std::visit(Overloaded{[&](const ConstantTerm& c) { constant += c.value; },
                          [&](const MonomialTerm& c) {
                            auto [it, fresh] = monomials.try_emplace(c.power, c.coeff);
                            if (!fresh) it->second += c.coeff;
                          },
                          [&](const SinusoidTerm& c) {
                            for (auto& s : sinusoids) {
                              if (same_frequency(s.omega, c.omega)) {
                                s.sin_coeff += c.sin_coeff;
                                s.cos_coeff += c.cos_coeff;
                                return;
                              }
                            }
                            sinusoids.push_back(c);
                          },
                          [&](const ExponentialTerm& c) {
                            for (auto& e : exponentials) {
                              if (e.rate == c.rate) {
                                e.coeff += c.coeff;
                                return;
                              }
                            }
                            exponentials.push_back(c);
                          }},
               term);
  }
  std::sort(sinusoids.begin(), sinusoids.end(),
            [](const SinusoidTerm& a, const SinusoidTerm& b) { return a.omega < b.omega; });
  std::sort(exponentials.begin(), exponentials.end(),
            [](const ExponentialTerm& a, const ExponentialTerm& b) { return a.rate < b.rate; });

  Signal out(dim_);
  if (!constant.isZero(0.0)) out.add(ConstantTerm{constant});
  for (auto& [power, coeff] : monomials) {
    if (!coeff.isZero(0.0)) out.add(MonomialTerm{power, coeff});
  }
  for (auto& s : sinusoids) {
    if (!s.sin_coeff.isZero(0.0) || !s.cos_coeff.isZero(0.0)) out.add(s);
  }
  for (auto& e : exponentials) {
    if (!e.coeff.isZero(0.0)) out.add(e);
  }
  return out;
}

Signal Signal::operator+(const Signal& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("signal sum: dimension mismatch");
  Signal out = *this;
  for (const auto& t : other.terms_) out.terms_.push_back(t);
  return out;
}

Signal Signal::operator-(const Signal& other) const { return *this + other.scaled(-1.0); }

Signal Signal::stack(const std::vector<Signal>& parts) {
  int total = 0;
  for (const auto& p : parts) total += p.dim();
  Signal out(total);
  int offset = 0;
  for (const auto& p : parts) {
    Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(total, p.dim());
    embed.middleRows(offset, p.dim()).setIdentity();
    Signal lifted = p.mapped(embed);
    for (const auto& t : lifted.terms()) out.add(t);
    offset += p.dim();
  }
  return out;
}

Eigen::VectorXd eval(const Signal& signal, double t) { return signal(t); }

Signal derivative(const Signal& signal, int order) {
  if (order < 0) throw std::invalid_argument("derivative order must be nonnegative");
  Signal current = signal;
  for (int k = 0; k < order; ++k) {
    Signal next(signal.dim());
    for (const auto& term : current.terms()) {
      std::visit(Overloaded{[](const ConstantTerm&) {},
                            [&](const MonomialTerm& c) {
                              if (c.power == 1) {
                                next.add(ConstantTerm{c.coeff});
                              } else {
                                next.add(MonomialTerm{c.power - 1, c.power * c.coeff});
                              }
                            },
                            [&](const SinusoidTerm& c) {
                              next.add(SinusoidTerm{c.omega, -c.omega * c.cos_coeff,
                                                    c.omega * c.sin_coeff});
                            },
                            [&](const ExponentialTerm& c) {
                              if (c.rate != 0.0) next.add(ExponentialTerm{c.rate, c.rate * c.coeff});
                            }},
                 term);
    }
    current = std::move(next);
  }
  return current;
}

std::vector<FourierComponent> fourier_components(const Signal& signal, double base_omega) {
  if (!(base_omega > 0.0)) throw std::invalid_argument("base frequency must be positive");
  const int dim = signal.dim();
  std::map<int, Eigen::VectorXcd> acc;
  auto slot = [&](int k) -> Eigen::VectorXcd& {
    auto [it, fresh] = acc.try_emplace(k, Eigen::VectorXcd::Zero(dim));
    return it->second;
  };
  std::ostringstream offending;
  int index = 0;
  for (const auto& term : signal.terms()) {
    std::visit(Overloaded{[&](const ConstantTerm& c) { slot(0) += c.value.cast<std::complex<double>>(); },
                          [&](const MonomialTerm& c) {
                            offending << " #" << index << " (t^" << c.power << " term)";
                          },
                          [&](const SinusoidTerm& c) {
                            const double ratio = c.omega / base_omega;
                            const long k = std::lround(ratio);
                            if (k < 1 || std::abs(c.omega - k * base_omega) > 1e-9 * c.omega) {
                              offending << " #" << index << " (omega=" << c.omega
                                        << " is not a multiple of " << base_omega << ")";
                              return;
                            }
                            const std::complex<double> i(0.0, 1.0);
                            // a sin + b cos = (b - i a)/2 e^{iwt} + (b + i a)/2 e^{-iwt}
                            Eigen::VectorXcd plus = 0.5 * (c.cos_coeff.cast<std::complex<double>>() -
                                                           i * c.sin_coeff.cast<std::complex<double>>());
                            slot(static_cast<int>(k)) += plus;
                            slot(-static_cast<int>(k)) += plus.conjugate();
                          },
                          [&](const ExponentialTerm& c) {
                            offending << " #" << index << " (exp(" << c.rate << " t) term)";
                          }},
               term);
    ++index;
  }
  if (!offending.str().empty()) {
    throw std::invalid_argument("signal is not a commensurate trigonometric polynomial; terms:" +
                                offending.str());
  }
  std::vector<FourierComponent> out;
  for (auto& [k, amp] : acc) out.push_back({k, amp});
  return out;
}

double lowest_frequency(const Signal& signal) {
  double lowest = 0.0;
  for (const auto& term : signal.terms()) {
    if (const auto* s = std::get_if<SinusoidTerm>(&term)) {
      if (s->sin_coeff.isZero(0.0) && s->cos_coeff.isZero(0.0)) continue;
      if (lowest == 0.0 || s->omega < lowest) lowest = s->omega;
    }
  }
  return lowest;
}

Exosystem::Exosystem(const Signal& signal) {
  const Signal s = signal.simplified();
  int max_power = -1;
  for (const auto& term : s.terms()) {
    if (std::holds_alternative<ConstantTerm>(term)) max_power = std::max(max_power, 0);
    if (const auto* m = std::get_if<MonomialTerm>(&term)) max_power = std::max(max_power, m->power);
  }
  int order = max_power + 1;
  for (const auto& term : s.terms()) {
    if (std::holds_alternative<SinusoidTerm>(term)) order += 2;
    if (std::holds_alternative<ExponentialTerm>(term)) order += 1;
  }
  generator_ = Eigen::MatrixXd::Zero(order, order);
  output_ = Eigen::MatrixXd::Zero(s.dim(), order);

  int offset = 0;
  if (max_power >= 0) {
    blocks_.push_back({Kind::power, 0, max_power + 1, 0.0});
    for (int i = 1; i <= max_power; ++i) generator_(i, i - 1) = i;
    offset = max_power + 1;
  }
  for (const auto& term : s.terms()) {
    std::visit(Overloaded{[&](const ConstantTerm& c) { output_.col(0) += c.value; },
                          [&](const MonomialTerm& c) { output_.col(c.power) += c.coeff; },
                          [&](const SinusoidTerm& c) {
                            blocks_.push_back({Kind::sine_pair, offset, 0, c.omega});
                            generator_(offset, offset + 1) = c.omega;
                            generator_(offset + 1, offset) = -c.omega;
                            output_.col(offset) = c.sin_coeff;
                            output_.col(offset + 1) = c.cos_coeff;
                            offset += 2;
                          },
                          [&](const ExponentialTerm& c) {
                            blocks_.push_back({Kind::exponential, offset, 0, c.rate});
                            generator_(offset, offset) = c.rate;
                            output_.col(offset) = c.coeff;
                            offset += 1;
                          }},
               term);
  }
}

Eigen::VectorXd Exosystem::state(double t) const {
  Eigen::VectorXd w(order());
  for (const auto& b : blocks_) {
    switch (b.kind) {
      case Kind::power: {
        double v = 1.0;
        for (int i = 0; i < b.power_count; ++i) {
          w(b.offset + i) = v;
          v *= t;
        }
        break;
      }
      case Kind::sine_pair:
        w(b.offset) = std::sin(b.param * t);
        w(b.offset + 1) = std::cos(b.param * t);
        break;
      case Kind::exponential:
        w(b.offset) = std::exp(b.param * t);
        break;
    }
  }
  return w;
}

}  // namespace dhn
