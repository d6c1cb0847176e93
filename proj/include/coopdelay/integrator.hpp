#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <ostream>
#include <utility>

#include "coopdelay/dynamics.hpp"

namespace coopdelay {

inline constexpr double kBlowUpThreshold = 1e12;
inline constexpr double kConvergenceRelTol = 1e-9;
inline constexpr double kDefaultExtinction = 1e-10;
inline constexpr double kCrossingTol = 1e-9;

/// State and derivative at a step node t_k = k * dt.
struct Node {
  double x = 0.0;
  double y = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// Dense output: initial functions on (-inf, 0] and a cubic Hermite segment
/// between each pair of consecutive nodes.
class Trajectory {
 public:
  Trajectory(InitialFunction phi, InitialFunction psi, double dt);

  double dt() const noexcept { return dt_; }
  double time_of(std::size_t k) const noexcept { return static_cast<double>(k) * dt_; }
  /// Total nodes ever appended, including pruned ones.
  std::size_t node_count() const noexcept { return base_ + nodes_.size(); }
  std::size_t first_retained() const noexcept { return base_; }
  double t_front() const noexcept { return nodes_.empty() ? 0.0 : time_of(node_count() - 1); }
  const Node& node(std::size_t k) const;
  const Node& back() const { return nodes_.back(); }

  const InitialFunction& phi() const noexcept { return phi_; }
  const InitialFunction& psi() const noexcept { return psi_; }

  void append(const Node& n) { nodes_.push_back(n); }
  /// Drop nodes strictly older than the one covering t.
  void prune_before(double t);

  /// Component 0 is x, 1 is y.
  double component(double t, int c) const;
  std::pair<double, double> at(double t) const { return {component(t, 0), component(t, 1)}; }

 private:
  InitialFunction phi_;
  InitialFunction psi_;
  double dt_;
  std::size_t base_ = 0;
  std::deque<Node> nodes_;
};

/// (x(t), y(t)); throws std::out_of_range past t_front.
std::pair<double, double> eval_trajectory(const Trajectory& traj, double t);

enum class RunStatus { ReachedHorizon, ConvergedTo, BlowUpAt, ExtinctBy };

const char* to_string(RunStatus s);

struct RunOutcome {
  RunStatus status = RunStatus::ReachedHorizon;
  double time = 0.0;  // event time, or the horizon
  double x = 0.0;
  double y = 0.0;
  std::size_t steps = 0;
  double max_quadrature_residual = 0.0;
};

struct IntegratorOptions {
  int n_quad = kDefaultQuadPanels;
  double blowup_threshold = kBlowUpThreshold;
  double convergence_rel_tol = kConvergenceRelTol;
  double convergence_window_spans = 10.0;
  bool detect_convergence = true;
  /// Stop once max(|x|, |y|) drops below this; 0 disables.
  double extinction_threshold = kDefaultExtinction;
  /// Keep only the history the kernels can still reach (bounded lags only).
  bool prune_history = false;
};

struct IntegrationResult {
  Trajectory trajectory;
  RunOutcome outcome;
};

/// 1e-3 x the smallest delay span, clamped to [1e-4, 1e-2].
double default_dt(const SystemSpec& s, double horizon);

/// Fixed-step classical RK4 from t = 0 to horizon.
IntegrationResult integrate(const SystemSpec& s, double horizon, double dt, const IntegratorOptions& opts = {});

enum class Side { Above, Below };

/// First node time where x or y is past (K, f2K) on the wrong side by more
/// than 1e-9.
std::optional<double> detect_nonoscillation_violation(const Trajectory& traj, double K, double f2K, Side side);

/// CSV "t,x,y" of every stride-th node plus the last one, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 10);

}  // namespace coopdelay
