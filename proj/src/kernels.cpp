#include "coopdelay/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int even_panels(int n) {
  n = std::max(n, 2);
  return n % 2 == 0 ? n : n + 1;
}

double simpson_coefficient(int j, int n) {
  if (j == 0 || j == n) return 1.0;
  return j % 2 == 1 ? 4.0 : 2.0;
}

// Simpson over [floor, t] of density(j) * f(u(s_j)); density(j) receives the
// node index and returns the density value at node j.
template <class Density>
double simpson(const ProductionFunction& f, const ScalarHistory& u, double floor, double t, int n_quad,
               Density density, QuadratureStats* stats) {
  const int n = even_panels(n_quad);
  const double w = t - floor;
  const double hstep = w / n;
  double sum = 0.0;
  double mass = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double s = j == n ? t : floor + hstep * j;
    const double weight = simpson_coefficient(j, n) * hstep / 3.0 * density(j, s);
    sum += weight * f(u.at(s));
    mass += weight;
  }
  if (stats != nullptr) stats->max_mass_residual = std::max(stats->max_mass_residual, std::fabs(mass - 1.0));
  return sum;
}

double simpson_mass(double floor, double t, int n_quad, const Expression& age_density) {
  const int n = even_panels(n_quad);
  const double w = t - floor;
  if (!(w > 0.0)) return 0.0;
  const double hstep = w / n;
  double mass = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double s = j == n ? t : floor + hstep * j;
    mass += simpson_coefficient(j, n) * hstep / 3.0 * age_density.eval(t - s);
  }
  return mass;
}

}  // namespace

DelayKernel DelayKernel::point(Expression lag, std::optional<double> max_lag) {
  return DelayKernel{PointMass{std::move(lag)}, max_lag, false};
}

DelayKernel DelayKernel::uniform(Expression lag, std::optional<double> max_lag) {
  return DelayKernel{UniformDensity{std::move(lag)}, max_lag, false};
}

DelayKernel DelayKernel::triangular(Expression lag, std::optional<double> max_lag) {
  return DelayKernel{TriangularDensity{std::move(lag)}, max_lag, false};
}

std::string DelayKernel::family() const {
  return std::visit(overloaded{[](const PointMass&) { return std::string("point"); },
                               [](const UniformDensity&) { return std::string("uniform"); },
                               [](const TriangularDensity&) { return std::string("triangular"); },
                               [](const GeneralMixture&) { return std::string("mixture"); }},
                    shape);
}

bool DelayKernel::has_density() const {
  if (const auto* m = std::get_if<GeneralMixture>(&shape)) return m->density.has_value();
  return !std::holds_alternative<PointMass>(shape);
}

double support_floor(const DelayKernel& k, double t) {
  return std::visit(overloaded{[t](const PointMass& p) { return p.lag.eval(t); },
                               [t](const UniformDensity& d) { return d.lag.eval(t); },
                               [t](const TriangularDensity& d) { return d.lag.eval(t); },
                               [t](const GeneralMixture& m) {
                                 double lo = t;
                                 for (const auto& a : m.atoms) lo = std::min(lo, a.lag.eval(t));
                                 if (m.density) lo = std::min(lo, m.density->lag.eval(t));
                                 return lo;
                               }},
                    k.shape);
}

double stieltjes_integrate(const DelayKernel& k, const ProductionFunction& f, const ScalarHistory& u, double t,
                           int n_quad, QuadratureStats* stats) {
  return std::visit(
      overloaded{
          [&](const PointMass& p) { return f(u.at(p.lag.eval(t))); },
          [&](const UniformDensity& d) {
            const double floor = d.lag.eval(t);
            const double w = t - floor;
            if (!(w > 0.0)) return f(u.at(t));
            return simpson(f, u, floor, t, n_quad, [w](int, double) { return 1.0 / w; }, stats);
          },
          [&](const TriangularDensity& d) {
            const double floor = d.lag.eval(t);
            const double w = t - floor;
            if (!(w > 0.0)) return f(u.at(t));
            const double scale = 2.0 / (w * w);
            return simpson(f, u, floor, t, n_quad, [scale, floor](int, double s) { return scale * (s - floor); },
                           stats);
          },
          [&](const GeneralMixture& m) {
            double sum = 0.0;
            for (const auto& a : m.atoms) sum += a.weight * f(u.at(a.lag.eval(t)));
            if (m.density) {
              const double floor = m.density->lag.eval(t);
              if (t - floor > 0.0) {
                const Expression& rho = m.density->density;
                sum += simpson(f, u, floor, t, n_quad, [&rho, t](int, double s) { return rho.eval(t - s); },
                               nullptr);
              }
            }
            return sum;
          }},
      k.shape);
}

double kernel_mass(const DelayKernel& k, double t, int n_quad) {
  if (const auto* m = std::get_if<GeneralMixture>(&k.shape)) {
    double mass = 0.0;
    for (const auto& a : m->atoms) mass += a.weight;
    if (m->density) mass += simpson_mass(m->density->lag.eval(t), t, n_quad, m->density->density);
    return mass;
  }
  return 1.0;
}

std::string KernelViolation::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Normalization:
      os << "normalization: total mass " << value << " at t = " << t << " (expected 1)";
      break;
    case Kind::AdvancedArgument:
      os << "advanced argument: h(t) = " << value << " > t = " << t;
      break;
    case Kind::NegativeMass:
      os << "negative mass " << value << " at t = " << t;
      break;
    case Kind::LagGrowth:
      os << "lag span " << value << " at t = " << t
         << " exceeds the attested bound (set max_lag, or unbounded = true)";
      break;
  }
  return os.str();
}

KernelCheck validate_kernel(const DelayKernel& k, std::span<const double> t_grid) {
  if (t_grid.empty()) throw std::invalid_argument("validate_kernel needs a non-empty grid");
  KernelCertificate cert{t_grid.size(), 0.0};

  std::vector<const Expression*> lags;
  std::visit(overloaded{[&](const PointMass& p) { lags.push_back(&p.lag); },
                        [&](const UniformDensity& d) { lags.push_back(&d.lag); },
                        [&](const TriangularDensity& d) { lags.push_back(&d.lag); },
                        [&](const GeneralMixture& m) {
                          for (const auto& a : m.atoms) lags.push_back(&a.lag);
                          if (m.density) lags.push_back(&m.density->lag);
                        }},
             k.shape);

  if (const auto* m = std::get_if<GeneralMixture>(&k.shape)) {
    for (const auto& a : m->atoms) {
      if (a.weight < 0.0) return KernelViolation{KernelViolation::Kind::NegativeMass, t_grid.front(), a.weight};
    }
  }

  double span_min = std::numeric_limits<double>::infinity();
  double span_max = -std::numeric_limits<double>::infinity();
  double span_max_t = t_grid.front();
  for (const double t : t_grid) {
    for (const Expression* lag : lags) {
      const double h = lag->eval(t);
      if (h > t) return KernelViolation{KernelViolation::Kind::AdvancedArgument, t, h};
      const double span = t - h;
      span_min = std::min(span_min, span);
      if (span > span_max) {
        span_max = span;
        span_max_t = t;
      }
      if (k.max_lag && span > *k.max_lag * (1.0 + 1e-12) + 1e-12) {
        return KernelViolation{KernelViolation::Kind::LagGrowth, t, span};
      }
    }
    if (const auto* m = std::get_if<GeneralMixture>(&k.shape); m != nullptr && m->density) {
      const double floor = m->density->lag.eval(t);
      for (int j = 0; j <= 16; ++j) {
        const double s = floor + (t - floor) * j / 16.0;
        const double rho = m->density->density.eval(t - s);
        if (rho < 0.0) return KernelViolation{KernelViolation::Kind::NegativeMass, t, rho};
      }
    }
    const double mass = kernel_mass(k, t);
    const double err = std::fabs(mass - 1.0);
    cert.max_mass_error = std::max(cert.max_mass_error, err);
    if (err > kNormalizationTol) return KernelViolation{KernelViolation::Kind::Normalization, t, mass};
  }

  // Without an attestation only a constant lag span counts as bounded.
  if (!k.max_lag && !k.unbounded && span_max - span_min > 1e-12 * std::max(1.0, span_max)) {
    return KernelViolation{KernelViolation::Kind::LagGrowth, span_max_t, span_max};
  }
  return cert;
}

}  // namespace coopdelay
