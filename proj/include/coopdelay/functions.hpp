#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "coopdelay/expr.hpp"

namespace coopdelay {

inline constexpr double kDefaultInverseTol = 1e-12;
inline constexpr std::size_t kDefaultMonotonicityGrid = 10001;
/// Largest bracket the extended inverse will search before answering +inf.
inline constexpr double kBracketCeiling = 1125899906842624.0;  // 2^50

/// Strict increase (and positivity) verified on a uniform grid of [0, x_max].
struct MonotonicityCertificate {
  double x_max = 0.0;
  std::size_t n_grid = 0;
  /// Start of a trailing plateau where f saturated at double resolution.
  std::optional<double> saturation_from;
};

struct MonotonicityViolation {
  enum class Kind { NotIncreasing, NotPositive };
  Kind kind = Kind::NotIncreasing;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;

  std::string describe() const;
};

using MonotonicityCheck = std::variant<MonotonicityCertificate, MonotonicityViolation>;

/// A strictly increasing map R+ -> R+ (f1, f2, and the separator g).
///
/// Backed either by a parsed expression or, for derived functions such as g,
/// by a callable. Copies share the underlying expression.
class ProductionFunction {
 public:
  explicit ProductionFunction(Expression body);
  ProductionFunction(std::string description, std::function<double(double)> fn);

  double operator()(double x) const { return body_ ? body_->eval(x) : fn_(x); }

  const std::string& description() const noexcept { return description_; }
  const std::optional<Expression>& expression() const noexcept { return body_; }

  const std::optional<MonotonicityCertificate>& certificate() const noexcept { return certificate_; }
  ProductionFunction with_certificate(MonotonicityCertificate c) const;

  /// Upper end of the verified interval, or 1 when uncertified.
  double working_hi() const noexcept { return certificate_ ? certificate_->x_max : 1.0; }

 private:
  std::optional<Expression> body_;
  std::function<double(double)> fn_;
  std::string description_;
  std::optional<MonotonicityCertificate> certificate_;
};

/// Positive modulation G(x) of the logistic-type system. Defaults to 1.
class Modulation {
 public:
  Modulation() : body_(Expression::constant(1.0)) {}
  explicit Modulation(Expression body) : body_(std::move(body)) {}

  double operator()(double x) const { return body_.eval(x); }
  const Expression& expression() const noexcept { return body_; }
  bool is_identity() const noexcept { return body_.is_constant() && body_.eval(0.0) == 1.0; }

 private:
  Expression body_;
};

/// Sample f on n_grid uniform points of [0, x_max]; first adjacent pair that
/// breaks strict increase or positivity, else a certificate.
MonotonicityCheck verify_a1(const ProductionFunction& f, double x_max,
                            std::size_t n_grid = kDefaultMonotonicityGrid);

/// G(x) > 0 for x > 0 and G(0) >= 0 on the grid; returns the first failing point.
std::optional<double> verify_a7(const Modulation& g, double x_max, std::size_t n_grid = 1001);

/// x in [0, bracket_hi] with f(x) = y, by bisection.
/// y <= f(0) gives 0; y above f(bracket_hi) throws RangeError.
double inverse(const ProductionFunction& f, double y, double bracket_hi, double tol = kDefaultInverseTol);

/// inverse() with the bracket doubled up to 2^50; +inf when y is above
/// everything f reaches there (bounded f).
double inverse_extended(const ProductionFunction& f, double y, double bracket_hi,
                        double tol = kDefaultInverseTol);

/// g(x) = alpha f1^-1(x) + (1 - alpha) f2(x).
ProductionFunction make_separator(const ProductionFunction& f1, const ProductionFunction& f2, double alpha);

}  // namespace coopdelay
