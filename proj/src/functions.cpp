#include "coopdelay/functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Overflow at large arguments is read as "above any finite target".
double eval_or_inf(const ProductionFunction& f, double x) {
  try {
    return f(x);
  } catch (const DomainError& e) {
    if (e.kind() == DomainKind::NonFinite) return kInf;
    throw;
  }
}

}  // namespace

std::string MonotonicityViolation::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == Kind::NotPositive) {
    os << "not positive: f(" << x_hi << ") = " << f_hi;
  } else {
    os << "not strictly increasing between x = " << x_lo << " (f = " << f_lo << ") and x = " << x_hi
       << " (f = " << f_hi << ")";
  }
  return os.str();
}

ProductionFunction::ProductionFunction(Expression body)
    : body_(std::move(body)), description_(body_->source()) {}

ProductionFunction::ProductionFunction(std::string description, std::function<double(double)> fn)
    : fn_(std::move(fn)), description_(std::move(description)) {}

ProductionFunction ProductionFunction::with_certificate(MonotonicityCertificate c) const {
  ProductionFunction copy = *this;
  copy.certificate_ = c;
  return copy;
}

MonotonicityCheck verify_a1(const ProductionFunction& f, double x_max, std::size_t n_grid) {
  if (!(x_max > 0.0) || n_grid < 2) {
    throw std::invalid_argument("verify_a1 needs x_max > 0 and n_grid >= 2");
  }
  const double step = x_max / static_cast<double>(n_grid - 1);
  double prev_x = 0.0;
  double prev_f = f(0.0);
  if (prev_f < 0.0) {
    return MonotonicityViolation{MonotonicityViolation::Kind::NotPositive, 0.0, 0.0, prev_f, prev_f};
  }
  double prev_increment = kInf;
  MonotonicityCertificate cert{x_max, n_grid, std::nullopt};

  for (std::size_t i = 1; i < n_grid; ++i) {
    const double x = i + 1 == n_grid ? x_max : step * static_cast<double>(i);
    const double fx = f(x);
    if (!(fx > 0.0)) {
      return MonotonicityViolation{MonotonicityViolation::Kind::NotPositive, prev_x, x, prev_f, fx};
    }
    if (fx < prev_f) {
      return MonotonicityViolation{MonotonicityViolation::Kind::NotIncreasing, prev_x, x, prev_f, fx};
    }
    if (fx == prev_f) {
      // Flat pairs are accepted only as double-precision saturation of a
      // function whose increments were already at rounding level.
      if (!(prev_increment <= 1e-9 * std::fabs(prev_f))) {
        return MonotonicityViolation{MonotonicityViolation::Kind::NotIncreasing, prev_x, x, prev_f, fx};
      }
      if (!cert.saturation_from) cert.saturation_from = prev_x;
    } else {
      prev_increment = fx - prev_f;
    }
    prev_x = x;
    prev_f = fx;
  }
  return cert;
}

std::optional<double> verify_a7(const Modulation& g, double x_max, std::size_t n_grid) {
  if (g(0.0) < 0.0) return 0.0;
  for (std::size_t i = 1; i < n_grid; ++i) {
    const double x = x_max * static_cast<double>(i) / static_cast<double>(n_grid - 1);
    if (!(g(x) > 0.0)) return x;
  }
  return std::nullopt;
}

double inverse(const ProductionFunction& f, double y, double bracket_hi, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("inverse tolerance must be positive");
  const double f0 = f(0.0);
  if (y <= f0) return 0.0;
  const double fhi = eval_or_inf(f, bracket_hi);
  if (y > fhi) {
    std::ostringstream os;
    os.precision(17);
    os << "inverse: " << y << " exceeds f(" << bracket_hi << ") = " << fhi;
    throw RangeError(os.str());
  }
  if (y == fhi) return bracket_hi;

  // Invariant: f(lo) < y <= f(hi).
  double lo = 0.0;
  double hi = bracket_hi;
  double flo = f0;
  double fh = fhi;
  for (int iter = 0; iter < 2200; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi || hi - lo <= tol * 1e-4 * hi) break;
    const double fm = eval_or_inf(f, mid);
    if (fm == y) return mid;
    if (fm < y) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fh = fm;
    }
  }
  return (y - flo) <= (fh - y) ? lo : hi;
}

double inverse_extended(const ProductionFunction& f, double y, double bracket_hi, double tol) {
  if (y <= f(0.0)) return 0.0;
  double hi = bracket_hi > 0.0 ? bracket_hi : 1.0;
  while (eval_or_inf(f, hi) < y) {
    if (hi >= kBracketCeiling) return kInf;
    hi = std::min(2.0 * hi, kBracketCeiling);
  }
  return inverse(f, y, hi, tol);
}

ProductionFunction make_separator(const ProductionFunction& f1, const ProductionFunction& f2, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("separator weight must lie in (0, 1)");
  std::ostringstream os;
  os.precision(17);
  os << alpha << "*inv(" << f1.description() << ") + " << (1.0 - alpha) << "*(" << f2.description() << ")";
  const double hint = f1.working_hi();
  return ProductionFunction(os.str(), [f1, f2, alpha, hint](double x) {
    const double inv = inverse_extended(f1, x, hint);
    if (std::isinf(inv)) return kInf;
    return alpha * inv + (1.0 - alpha) * f2(x);
  });
}

}  // namespace coopdelay
