#include "bigraph/autodiff.hpp"

#include <cassert>
#include <sstream>

namespace bigraph {

namespace {

thread_local Tape* current_tape = nullptr;

std::string domain_message(const std::string& primitive, double argument) {
  std::ostringstream os;
  os << "domain error in " << primitive << " at argument " << argument;
  return os.str();
}

Tape& require_tape() {
  assert(current_tape != nullptr && "operation on a non-constant Var without an active tape");
  return *current_tape;
}

}  // namespace

DomainError::DomainError(std::string primitive, double argument)
    : std::domain_error(domain_message(primitive, argument)),
      primitive_(std::move(primitive)),
      argument_(argument) {}

std::int32_t Tape::leaf() { return push(-1, 0.0); }

std::int32_t Tape::push(std::int32_t lhs, double d_lhs, std::int32_t rhs, double d_rhs) {
  nodes_.push_back(Node{lhs, rhs, d_lhs, d_rhs});
  return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::vector<double> Tape::adjoints(std::int32_t output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output < 0) return adj;
  adj[static_cast<std::size_t>(output)] = 1.0;
  for (std::int32_t i = output; i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.lhs >= 0) adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
    if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
  }
  return adj;
}

Tape* active_tape() noexcept { return current_tape; }

TapeScope::TapeScope(Tape& tape) noexcept : previous_(current_tape) { current_tape = &tape; }

TapeScope::~TapeScope() { current_tape = previous_; }

Var Var::unary(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  return Var(value, require_tape().push(a.index_, da));
}

Var Var::binary(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  if (a.is_constant()) return Var(value, require_tape().push(b.index_, db));
  if (b.is_constant()) return Var(value, require_tape().push(a.index_, da));
  return Var(value, require_tape().push(a.index_, da, b.index_, db));
}

Var& Var::operator+=(const Var& rhs) { return *this = *this + rhs; }
Var& Var::operator-=(const Var& rhs) { return *this = *this - rhs; }
Var& Var::operator*=(const Var& rhs) { return *this = *this * rhs; }
Var& Var::operator/=(const Var& rhs) { return *this = *this / rhs; }

Var operator+(const Var& a, const Var& b) { return Var::binary(a.value() + b.value(), a, 1.0, b, 1.0); }

Var operator-(const Var& a, const Var& b) { return Var::binary(a.value() - b.value(), a, 1.0, b, -1.0); }

Var operator*(const Var& a, const Var& b) {
  return Var::binary(a.value() * b.value(), a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return Var::binary(q, a, 1.0 / b.value(), b, -q / b.value());
}

Var operator-(const Var& a) { return Var::unary(-a.value(), a, -1.0); }

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return Var::unary(e, a, e);
}

Var log(const Var& a) {
  if (!(a.value() > 0.0)) throw DomainError("log", a.value());
  return Var::unary(std::log(a.value()), a, 1.0 / a.value());
}

Var sqrt(const Var& a) {
  if (a.value() < 0.0) throw DomainError("sqrt", a.value());
  const double r = std::sqrt(a.value());
  // The subgradient at 0 is taken as 0 to keep gradients finite.
  return Var::unary(r, a, r > 0.0 ? 0.5 / r : 0.0);
}

Var pow(const Var& a, double exponent) {
  if (a.value() < 0.0 && std::floor(exponent) != exponent) throw DomainError("pow", a.value());
  const double p = std::pow(a.value(), exponent);
  const double d = a.value() == 0.0 ? (exponent == 1.0 ? 1.0 : 0.0)
                                    : exponent * std::pow(a.value(), exponent - 1.0);
  return Var::unary(p, a, d);
}

Var pow(const Var& a, const Var& exponent) {
  if (exponent.is_constant()) return pow(a, exponent.value());
  if (!(a.value() > 0.0)) throw DomainError("pow", a.value());
  const double p = std::pow(a.value(), exponent.value());
  return Var::binary(p, a, exponent.value() * std::pow(a.value(), exponent.value() - 1.0), exponent,
                     p * std::log(a.value()));
}

Var abs(const Var& a) { return a.value() >= 0.0 ? a : -a; }

Var max(const Var& a, const Var& b) { return a.value() >= b.value() ? a : b; }

Var min(const Var& a, const Var& b) { return a.value() <= b.value() ? a : b; }

Var clamp(const Var& a, double lo, double hi) {
  if (a.value() < lo) return Var(lo);
  if (a.value() > hi) return Var(hi);
  return a;
}

Var sin(const Var& a) { return Var::unary(std::sin(a.value()), a, std::cos(a.value())); }

Var cos(const Var& a) { return Var::unary(std::cos(a.value()), a, -std::sin(a.value())); }

Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.derivative};
}

Dual log(const Dual& a) {
  if (!(a.value > 0.0)) throw DomainError("log", a.value);
  return {std::log(a.value), a.derivative / a.value};
}

Dual sqrt(const Dual& a) {
  if (a.value < 0.0) throw DomainError("sqrt", a.value);
  const double r = std::sqrt(a.value);
  return {r, r > 0.0 ? 0.5 * a.derivative / r : 0.0};
}

Dual pow(const Dual& a, double exponent) {
  if (a.value < 0.0 && std::floor(exponent) != exponent) throw DomainError("pow", a.value);
  const double d = a.value == 0.0 ? (exponent == 1.0 ? 1.0 : 0.0)
                                  : exponent * std::pow(a.value, exponent - 1.0);
  return {std::pow(a.value, exponent), d * a.derivative};
}

Dual abs(const Dual& a) { return a.value >= 0.0 ? a : -a; }
Dual max(const Dual& a, const Dual& b) { return a.value >= b.value ? a : b; }
Dual min(const Dual& a, const Dual& b) { return a.value <= b.value ? a : b; }

Dual clamp(const Dual& a, double lo, double hi) {
  if (a.value < lo) return Dual(lo);
  if (a.value > hi) return Dual(hi);
  return a;
}

Dual sin(const Dual& a) { return {std::sin(a.value), std::cos(a.value) * a.derivative}; }
Dual cos(const Dual& a) { return {std::cos(a.value), -std::sin(a.value) * a.derivative}; }

GradientResult grad(const ScalarFunction& f, std::span<const double> at) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> inputs;
  inputs.reserve(at.size());
  for (double x : at) inputs.push_back(Var::leaf(tape, x));
  const Var out = f(inputs);

  GradientResult result;
  result.value = out.value();
  result.gradient.assign(at.size(), 0.0);
  if (out.is_constant()) return result;
  const std::vector<double> adj = tape.adjoints(out.index());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    result.gradient[i] = adj[static_cast<std::size_t>(inputs[i].index())];
  }
  return result;
}

double evaluate(const ScalarFunction& f, std::span<const double> at) {
  std::vector<Var> inputs(at.begin(), at.end());
  return f(inputs).value();
}

}  // namespace bigraph
