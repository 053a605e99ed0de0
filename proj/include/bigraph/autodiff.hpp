#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bigraph {

/// Raised when a differentiable primitive is evaluated outside its domain.
class DomainError : public std::domain_error {
 public:
  DomainError(std::string primitive, double argument);

  const std::string& primitive() const noexcept { return primitive_; }
  double argument() const noexcept { return argument_; }

 private:
  std::string primitive_;
  double argument_;
};

/// Linear record of a reverse-mode computation. Every node has at most two
/// parents; the partials are stored at record time so the backward sweep is
/// a single reverse loop. A tape is owned by one thread.
class Tape {
 public:
  struct Node {
    std::int32_t lhs;
    std::int32_t rhs;
    double d_lhs;
    double d_rhs;
  };

  std::int32_t leaf();
  std::int32_t push(std::int32_t lhs, double d_lhs, std::int32_t rhs = -1, double d_rhs = 0.0);

  /// Adjoint of every node with respect to `output`.
  std::vector<double> adjoints(std::int32_t output) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  std::vector<Node> nodes_;
};

/// Tape currently receiving operations on this thread, or nullptr.
Tape* active_tape() noexcept;

/// Makes `tape` the active tape of the calling thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Reverse-mode differentiable scalar. A Var with index -1 is a constant and
/// never touches the tape.
class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  static Var leaf(Tape& tape, double value) { return Var(value, tape.leaf()); }

  double value() const noexcept { return value_; }
  std::int32_t index() const noexcept { return index_; }
  bool is_constant() const noexcept { return index_ < 0; }

  Var& operator+=(const Var& rhs);
  Var& operator-=(const Var& rhs);
  Var& operator*=(const Var& rhs);
  Var& operator/=(const Var& rhs);

  // Builds a node from parent partials; used by the primitive overloads.
  static Var unary(double value, const Var& a, double da);
  static Var binary(double value, const Var& a, double da, const Var& b, double db);

 private:
  Var(double value, std::int32_t index) : value_(value), index_(index) {}

  double value_ = 0.0;
  std::int32_t index_ = -1;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var pow(const Var& a, double exponent);
Var pow(const Var& a, const Var& exponent);
Var abs(const Var& a);
Var max(const Var& a, const Var& b);
Var min(const Var& a, const Var& b);
Var clamp(const Var& a, double lo, double hi);
Var sin(const Var& a);
Var cos(const Var& a);

/// Forward-mode dual number carrying a single directional derivative.
struct Dual {
  double value = 0.0;
  double derivative = 0.0;

  Dual() = default;
  Dual(double v, double d = 0.0) : value(v), derivative(d) {}  // NOLINT(google-explicit-constructor)

  Dual& operator+=(const Dual& rhs) { return *this = Dual(value + rhs.value, derivative + rhs.derivative); }
  Dual& operator-=(const Dual& rhs) { return *this = Dual(value - rhs.value, derivative - rhs.derivative); }
  Dual& operator*=(const Dual& rhs) {
    return *this = Dual(value * rhs.value, derivative * rhs.value + value * rhs.derivative);
  }
  Dual& operator/=(const Dual& rhs) {
    return *this = Dual(value / rhs.value,
                        (derivative * rhs.value - value * rhs.derivative) / (rhs.value * rhs.value));
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return Dual(-a.value, -a.derivative); }
inline bool operator<(const Dual& a, const Dual& b) { return a.value < b.value; }
inline bool operator>(const Dual& a, const Dual& b) { return a.value > b.value; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.value <= b.value; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.value >= b.value; }

Dual exp(const Dual& a);
Dual log(const Dual& a);
Dual sqrt(const Dual& a);
Dual pow(const Dual& a, double exponent);
Dual abs(const Dual& a);
Dual max(const Dual& a, const Dual& b);
Dual min(const Dual& a, const Dual& b);
Dual clamp(const Dual& a, double lo, double hi);
Dual sin(const Dual& a);
Dual cos(const Dual& a);

/// Primal value of any supported scalar.
inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }
inline double value_of(const Dual& x) { return x.value; }

/// Piecewise primitives shared with plain doubles so templated code can call
/// them unqualified. Ties resolve to the first argument.
inline double exp(double a) { return std::exp(a); }
inline double log(double a) { return std::log(a); }
inline double sqrt(double a) { return std::sqrt(a); }
inline double pow(double a, double exponent) { return std::pow(a, exponent); }
inline double abs(double a) { return std::fabs(a); }
inline double max(double a, double b) { return a >= b ? a : b; }
inline double min(double a, double b) { return a <= b ? a : b; }
inline double clamp(double a, double lo, double hi) { return a < lo ? lo : (a > hi ? hi : a); }
inline double sin(double a) { return std::sin(a); }
inline double cos(double a) { return std::cos(a); }

using ScalarFunction = std::function<Var(std::span<const Var>)>;

struct GradientResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Value and gradient of `f` at `at` by one forward pass and one reverse sweep.
GradientResult grad(const ScalarFunction& f, std::span<const double> at);

/// Value of `f` at `at` with differentiation disabled.
double evaluate(const ScalarFunction& f, std::span<const double> at);

}  // namespace bigraph
