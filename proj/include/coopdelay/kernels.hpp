#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "coopdelay/expr.hpp"
#include "coopdelay/functions.hpp"

namespace coopdelay {

inline constexpr int kDefaultQuadPanels = 64;
inline constexpr double kNormalizationTol = 1e-8;

/// Read-only view of one trajectory component u(s) for s <= t.
class ScalarHistory {
 public:
  virtual ~ScalarHistory() = default;
  /// Throws HistoryUnderflow when s precedes the retained history.
  virtual double at(double s) const = 0;
};

/// Unit step of R(t, .) at s = h(t).
struct PointMass {
  Expression lag;  // h(t)
};

/// Density 1/(t - h(t)) on [h(t), t].
struct UniformDensity {
  Expression lag;
};

/// Density (2/w^2)(s - h(t)) on [h(t), t], w = t - h(t).
struct TriangularDensity {
  Expression lag;
};

struct Atom {
  Expression lag;
  double weight = 0.0;
};

/// Density written in the age a = t - s, supported on s in [lag(t), t].
struct AgeDensity {
  Expression density;  // variable "a"
  Expression lag;
};

struct GeneralMixture {
  std::vector<Atom> atoms;
  std::optional<AgeDensity> density;
};

using KernelShape = std::variant<PointMass, UniformDensity, TriangularDensity, GeneralMixture>;

/// Delay distribution R(t, .) with its growth attestation for h(t) -> infinity:
/// either a bound on t - h(t) or an explicit statement that the delay is unbounded.
struct DelayKernel {
  KernelShape shape;
  std::optional<double> max_lag;
  bool unbounded = false;

  static DelayKernel point(Expression lag, std::optional<double> max_lag = std::nullopt);
  static DelayKernel uniform(Expression lag, std::optional<double> max_lag = std::nullopt);
  static DelayKernel triangular(Expression lag, std::optional<double> max_lag = std::nullopt);

  std::string family() const;
  bool has_density() const;
};

/// h(t), the left end of the support at time t.
double support_floor(const DelayKernel& k, double t);

/// Width t - h(t) of the support.
inline double support_span(const DelayKernel& k, double t) { return t - support_floor(k, t); }

struct QuadratureStats {
  /// max |sum of quadrature weights x density - 1| seen on density parts.
  double max_mass_residual = 0.0;
};

/// sum_j w_j f(u(lag_j(t))) + int density(t,s) f(u(s)) ds, the density part by
/// composite Simpson with n_quad panels (rounded up to even).
double stieltjes_integrate(const DelayKernel& k, const ProductionFunction& f, const ScalarHistory& u, double t,
                           int n_quad = kDefaultQuadPanels, QuadratureStats* stats = nullptr);

struct KernelCertificate {
  std::size_t points = 0;
  double max_mass_error = 0.0;
};

struct KernelViolation {
  enum class Kind { Normalization, AdvancedArgument, NegativeMass, LagGrowth };
  Kind kind;
  double t = 0.0;
  double value = 0.0;  // offending mass, h(t), weight, or span
  std::string describe() const;
};

using KernelCheck = std::variant<KernelCertificate, KernelViolation>;

/// Normalization to 1e-8 and h(t) <= t at every grid point, non-negative
/// masses, and t - h(t) <= max_lag when a bound is attested.
KernelCheck validate_kernel(const DelayKernel& k, std::span<const double> t_grid);

/// Total mass R(t, t+) (atom weights plus the density integral).
double kernel_mass(const DelayKernel& k, double t, int n_quad = 1024);

}  // namespace coopdelay
