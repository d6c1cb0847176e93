#include "coopdelay/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

constexpr std::size_t kTimeGrid = 2001;

std::vector<double> time_grid(double horizon, std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = i + 1 == n ? horizon : horizon * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_rate(const Expression& r, const char* key, const std::vector<double>& grid) {
  for (const double t : grid) {
    double v = 0.0;
    try {
      v = r.eval(t);
    } catch (const DomainError& e) {
      throw ValidationError(key, std::string("cannot evaluate at t = ") + num(t) + ": " + e.what());
    }
    if (v < 0.0) throw ValidationError(key, "negative rate " + num(v) + " at t = " + num(t));
  }
}

void check_initial(const InitialFunction& f, const char* key, double floor) {
  const double at0 = f.value_at_zero();
  if (!(at0 > 0.0)) throw ValidationError(key, "value at t = 0 must be positive, got " + num(at0));
  const double width = std::max(-floor, 1.0);
  for (std::size_t i = 0; i <= 2000; ++i) {
    const double t = -width * static_cast<double>(i) / 2000.0;
    double v = 0.0;
    try {
      v = f(t);
    } catch (const DomainError& e) {
      throw ValidationError(key, std::string("cannot evaluate at t = ") + num(t) + ": " + e.what());
    }
    if (!std::isfinite(v)) throw ValidationError(key, "unbounded at t = " + num(t));
    if (v < 0.0) throw ValidationError(key, "negative value " + num(v) + " at t = " + num(t));
  }
}

}  // namespace

Derivative rhs(const SystemSpec& s, double t, double x, double y, const ScalarHistory& x_hist,
               const ScalarHistory& y_hist, int n_quad, QuadratureStats* stats) {
  const double in1 = stieltjes_integrate(s.k1, s.f1, y_hist, t, n_quad, stats);
  const double in2 = stieltjes_integrate(s.k2, s.f2, x_hist, t, n_quad, stats);
  return {s.r1.eval(t) * s.g1(x) * (in1 - x), s.r2.eval(t) * s.g2(y) * (in2 - y)};
}

RateIntegral integrate_rate(const Expression& r, double horizon, std::size_t n_grid, double tail_threshold) {
  if (!(horizon > 0.0)) throw std::invalid_argument("rate integral needs a positive horizon");
  // Composite Simpson on each half, so the tail is its own integral.
  std::size_t panels = std::max<std::size_t>(n_grid, 5) / 2;
  panels += panels % 2;
  auto simpson = [&](double a, double b) {
    const double h = (b - a) / static_cast<double>(panels);
    double sum = r.eval(a) + r.eval(b);
    for (std::size_t j = 1; j < panels; ++j) sum += (j % 2 == 1 ? 4.0 : 2.0) * r.eval(a + h * static_cast<double>(j));
    return sum * h / 3.0;
  };
  const double head = simpson(0.0, 0.5 * horizon);
  const double tail = simpson(0.5 * horizon, horizon);
  return {tail > tail_threshold, head + tail, tail};
}

A5Report check_a5(const SystemSpec& s, double horizon, std::size_t n_grid, double tail_threshold) {
  return {integrate_rate(s.r1, horizon, n_grid, tail_threshold), integrate_rate(s.r2, horizon, n_grid, tail_threshold)};
}

double history_floor(const SystemSpec& s, double horizon) {
  double lo = 0.0;
  for (const double t : time_grid(horizon, kTimeGrid)) {
    lo = std::min({lo, support_floor(s.k1, t), support_floor(s.k2, t)});
  }
  return lo;
}

double max_delay_span(const SystemSpec& s, double horizon) {
  double hi = 0.0;
  for (const double t : time_grid(horizon, kTimeGrid)) {
    hi = std::max({hi, support_span(s.k1, t), support_span(s.k2, t)});
  }
  if (s.k1.max_lag) hi = std::max(hi, *s.k1.max_lag);
  if (s.k2.max_lag) hi = std::max(hi, *s.k2.max_lag);
  return hi;
}

double min_delay_span(const SystemSpec& s, double horizon) {
  double lo = std::numeric_limits<double>::infinity();
  for (const double t : time_grid(horizon, kTimeGrid)) {
    lo = std::min({lo, support_span(s.k1, t), support_span(s.k2, t)});
  }
  return std::max(lo, 0.0);
}

double first_nonnegative_support_time(const SystemSpec& s, double horizon) {
  const auto grid = time_grid(horizon, kTimeGrid);
  double last_bad = 0.0;
  bool any_bad = false;
  for (const double t : grid) {
    if (support_floor(s.k1, t) < 0.0 || support_floor(s.k2, t) < 0.0) {
      last_bad = t;
      any_bad = true;
    }
  }
  if (!any_bad) return 0.0;
  // The next grid point is the first one known to be clear.
  const double step = horizon / static_cast<double>(kTimeGrid - 1);
  return std::min(last_bad + step, horizon);
}

InitialBounds initial_bounds(const SystemSpec& s, double horizon, std::size_t n_grid) {
  const double width = -history_floor(s, horizon);
  InitialBounds b{s.phi.value_at_zero(), s.phi.value_at_zero(), s.psi.value_at_zero(), s.psi.value_at_zero()};
  if (width <= 0.0) return b;
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double t = -width * static_cast<double>(i) / static_cast<double>(n_grid - 1);
    const double p = s.phi(t);
    const double q = s.psi(t);
    b.inf_phi = std::min(b.inf_phi, p);
    b.sup_phi = std::max(b.sup_phi, p);
    b.inf_psi = std::min(b.inf_psi, q);
    b.sup_psi = std::max(b.sup_psi, q);
  }
  return b;
}

SystemSpec validate_system(const SystemSpec& s, double horizon, double x_max) {
  if (!(horizon > 0.0)) throw ValidationError("horizon", "must be positive");
  if (!(x_max > 0.0)) throw ValidationError("x_max", "must be positive");

  auto certify = [x_max](const ProductionFunction& f, const char* key) {
    MonotonicityCheck check = [&] {
      try {
        return verify_a1(f, x_max);
      } catch (const DomainError& e) {
        throw ValidationError(key, std::string("cannot evaluate: ") + e.what());
      }
    }();
    if (const auto* v = std::get_if<MonotonicityViolation>(&check)) throw ValidationError(key, v->describe());
    return f.with_certificate(std::get<MonotonicityCertificate>(check));
  };
  SystemSpec out = s;
  out.f1 = certify(s.f1, "f1");
  out.f2 = certify(s.f2, "f2");

  for (const auto& [g, key] : {std::pair{&s.g1, "g1"}, std::pair{&s.g2, "g2"}}) {
    std::optional<double> bad;
    try {
      bad = verify_a7(*g, x_max);
    } catch (const DomainError& e) {
      throw ValidationError(key, std::string("cannot evaluate: ") + e.what());
    }
    if (bad) throw ValidationError(key, "must be positive for x > 0; fails at x = " + num(*bad));
  }

  const auto grid = time_grid(horizon, kTimeGrid);
  check_rate(s.r1, "r1", grid);
  check_rate(s.r2, "r2", grid);

  for (const auto& [k, key] : {std::pair{&s.k1, "k1"}, std::pair{&s.k2, "k2"}}) {
    KernelCheck check = [&] {
      try {
        return validate_kernel(*k, grid);
      } catch (const DomainError& e) {
        throw ValidationError(key, std::string("cannot evaluate: ") + e.what());
      }
    }();
    if (const auto* v = std::get_if<KernelViolation>(&check)) throw ValidationError(key, v->describe());
  }

  const double floor = history_floor(s, horizon);
  check_initial(s.phi, "phi", floor);
  check_initial(s.psi, "psi", floor);
  return out;
}

}  // namespace coopdelay
