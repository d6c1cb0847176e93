#pragma once

#include <cstddef>

#include "coopdelay/expr.hpp"
#include "coopdelay/functions.hpp"
#include "coopdelay/kernels.hpp"

namespace coopdelay {

/// Initial history on (-inf, 0], an expression in t.
class InitialFunction {
 public:
  explicit InitialFunction(Expression body) : body_(std::move(body)) {}
  static InitialFunction constant(double v) { return InitialFunction(Expression::constant(v, "t")); }

  double operator()(double t) const { return body_.eval(t); }
  double value_at_zero() const { return body_.eval(0.0); }
  const Expression& expression() const noexcept { return body_; }

 private:
  Expression body_;
};

/// One instance of the cooperative system
///   x' = r1(t) G1(x) [ int f1(y(s)) d_s R1(t,s) - x ]
///   y' = r2(t) G2(y) [ int f2(x(s)) d_s R2(t,s) - y ]
/// with G_i = 1 giving the unmodulated form.
struct SystemSpec {
  ProductionFunction f1;
  ProductionFunction f2;
  Modulation g1;
  Modulation g2;
  Expression r1;  // variable t
  Expression r2;
  DelayKernel k1;
  DelayKernel k2;
  InitialFunction phi;
  InitialFunction psi;
};

struct Derivative {
  double dx = 0.0;
  double dy = 0.0;
};

/// Right-hand side at (t, x, y). `x_hist` feeds f2, `y_hist` feeds f1.
Derivative rhs(const SystemSpec& s, double t, double x, double y, const ScalarHistory& x_hist,
               const ScalarHistory& y_hist, int n_quad = kDefaultQuadPanels, QuadratureStats* stats = nullptr);

struct RateIntegral {
  bool divergent = false;  // heuristic: tail mass over [H/2, H] above threshold
  double integral = 0.0;   // int_0^H r
  double tail = 0.0;       // int_{H/2}^H r
};

struct A5Report {
  RateIntegral r1;
  RateIntegral r2;
  bool both_divergent() const { return r1.divergent && r2.divergent; }
};

RateIntegral integrate_rate(const Expression& r, double horizon, std::size_t n_grid = 20001,
                            double tail_threshold = 0.1);

/// Diagnostic for int_0^inf r_i = inf; not a proof.
A5Report check_a5(const SystemSpec& s, double horizon, std::size_t n_grid = 20001, double tail_threshold = 0.1);

/// Runs every structural check and returns the spec with monotonicity
/// certificates attached to f1, f2. Throws ValidationError naming the part.
SystemSpec validate_system(const SystemSpec& s, double horizon, double x_max);

/// Smallest h_i(t) over [0, horizon] (sampled), never above 0.
double history_floor(const SystemSpec& s, double horizon);

/// Largest t - h_i(t) over [0, horizon] (sampled).
double max_delay_span(const SystemSpec& s, double horizon);

/// Smallest positive-span lag over [0, horizon]; 0 when some kernel has none.
double min_delay_span(const SystemSpec& s, double horizon);

/// First sampled time after which both supports stay in [0, inf).
double first_nonnegative_support_time(const SystemSpec& s, double horizon);

struct InitialBounds {
  double inf_phi = 0.0;
  double sup_phi = 0.0;
  double inf_psi = 0.0;
  double sup_psi = 0.0;
};

/// Extremes of phi, psi on [history_floor, 0] (sampled).
InitialBounds initial_bounds(const SystemSpec& s, double horizon, std::size_t n_grid = 2001);

}  // namespace coopdelay
