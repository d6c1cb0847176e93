#include "coopdelay/integrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

double hermite(double y0, double y1, double m0, double m1, double h, double th) {
  const double th2 = th * th;
  const double th3 = th2 * th;
  return (2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * h * m0 + (-2 * th3 + 3 * th2) * y1 +
         (th3 - th2) * h * m1;
}

// History seen by a stage: completed segments up to t_n, then a straight
// line from the step's start state, and the stage value itself from t_stage on.
class StageView final : public ScalarHistory {
 public:
  StageView(const Trajectory& traj, int c) : traj_(traj), c_(c) {}

  void set(double t_n, double v_n, double slope, double t_stage, double v_stage) {
    t_n_ = t_n;
    v_n_ = v_n;
    slope_ = slope;
    t_stage_ = t_stage;
    v_stage_ = v_stage;
  }

  double at(double s) const override {
    if (s >= t_stage_) return v_stage_;
    if (s > t_n_) return v_n_ + (s - t_n_) * slope_;
    return traj_.component(s, c_);
  }

 private:
  const Trajectory& traj_;
  int c_;
  double t_n_ = 0.0;
  double v_n_ = 0.0;
  double slope_ = 0.0;
  double t_stage_ = 0.0;
  double v_stage_ = 0.0;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Trajectory::Trajectory(InitialFunction phi, InitialFunction psi, double dt)
    : phi_(std::move(phi)), psi_(std::move(psi)), dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory step must be positive");
}

const Node& Trajectory::node(std::size_t k) const {
  if (k < base_ || k >= node_count()) throw std::out_of_range("node index outside retained history");
  return nodes_[k - base_];
}

void Trajectory::prune_before(double t) {
  if (t <= 0.0 || nodes_.size() < 3) return;
  const auto k = static_cast<std::size_t>(std::floor(t / dt_));
  while (base_ < k && nodes_.size() > 2) {
    nodes_.pop_front();
    ++base_;
  }
}

double Trajectory::component(double t, int c) const {
  if (t <= 0.0) return c == 0 ? phi_(t) : psi_(t);
  const double front = t_front();
  if (t > front) throw std::out_of_range("trajectory evaluated at t = " + num(t) + " past t_front = " + num(front));
  auto k = static_cast<std::size_t>(std::floor(t / dt_));
  if (k + 1 >= node_count()) k = node_count() - 2;
  if (k < base_) {
    throw HistoryUnderflow("history at t = " + num(t) + " was discarded (retained from t = " + num(time_of(base_)) +
                           ")");
  }
  const Node& a = nodes_[k - base_];
  const Node& b = nodes_[k + 1 - base_];
  const double t0 = time_of(k);
  if (t == t0) return c == 0 ? a.x : a.y;
  if (t == time_of(k + 1)) return c == 0 ? b.x : b.y;
  const double th = (t - t0) / dt_;
  return c == 0 ? hermite(a.x, b.x, a.dx, b.dx, dt_, th) : hermite(a.y, b.y, a.dy, b.dy, dt_, th);
}

std::pair<double, double> eval_trajectory(const Trajectory& traj, double t) { return traj.at(t); }

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ReachedHorizon:
      return "ReachedHorizon";
    case RunStatus::ConvergedTo:
      return "ConvergedTo";
    case RunStatus::BlowUpAt:
      return "BlowUpAt";
    case RunStatus::ExtinctBy:
      return "ExtinctBy";
  }
  return "?";
}

double default_dt(const SystemSpec& s, double horizon) {
  return std::clamp(1e-3 * min_delay_span(s, horizon), 1e-4, 1e-2);
}

IntegrationResult integrate(const SystemSpec& s, double horizon, double dt, const IntegratorOptions& opts) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");

  Trajectory traj(s.phi, s.psi, dt);
  StageView xv(traj, 0);
  StageView yv(traj, 1);
  QuadratureStats stats;

  const double span = max_delay_span(s, horizon);
  const double window = opts.convergence_window_spans * std::max(span, 1.0);
  const bool can_prune = opts.prune_history && !s.k1.unbounded && !s.k2.unbounded;
  const double keep = span + 10.0 * dt;

  auto steps_total = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  steps_total = std::max<std::size_t>(steps_total, 1);

  auto f = [&](double t, double x, double y) {
    const Derivative d = rhs(s, t, x, y, xv, yv, opts.n_quad, &stats);
    if (!std::isfinite(d.dx) || !std::isfinite(d.dy)) throw DomainError(DomainKind::NonFinite, "non-finite slope");
    return d;
  };

  Node n0{s.phi.value_at_zero(), s.psi.value_at_zero(), 0.0, 0.0};
  xv.set(0.0, n0.x, 0.0, 0.0, n0.x);
  yv.set(0.0, n0.y, 0.0, 0.0, n0.y);
  const Derivative d0 = f(0.0, n0.x, n0.y);
  n0.dx = d0.dx;
  n0.dy = d0.dy;
  traj.append(n0);

  RunOutcome out;
  double anchor_x = n0.x;
  double anchor_y = n0.y;
  double anchor_t = 0.0;

  for (std::size_t k = 0; k < steps_total; ++k) {
    const Node cur = traj.back();
    const double t = traj.time_of(k);
    const double t_next = traj.time_of(k + 1);
    const double half = t + 0.5 * dt;
    Node next;
    bool bad = false;
    try {
      const double k1x = cur.dx;
      const double k1y = cur.dy;
      double sx = cur.x + 0.5 * dt * k1x;
      double sy = cur.y + 0.5 * dt * k1y;
      xv.set(t, cur.x, k1x, half, sx);
      yv.set(t, cur.y, k1y, half, sy);
      const Derivative k2 = f(half, sx, sy);
      sx = cur.x + 0.5 * dt * k2.dx;
      sy = cur.y + 0.5 * dt * k2.dy;
      xv.set(t, cur.x, k1x, half, sx);
      yv.set(t, cur.y, k1y, half, sy);
      const Derivative k3 = f(half, sx, sy);
      sx = cur.x + dt * k3.dx;
      sy = cur.y + dt * k3.dy;
      xv.set(t, cur.x, k1x, t_next, sx);
      yv.set(t, cur.y, k1y, t_next, sy);
      const Derivative k4 = f(t_next, sx, sy);
      next.x = cur.x + dt / 6.0 * (k1x + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
      next.y = cur.y + dt / 6.0 * (k1y + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
      if (!std::isfinite(next.x) || !std::isfinite(next.y)) {
        bad = true;
      } else if (std::max(std::fabs(next.x), std::fabs(next.y)) <= opts.blowup_threshold) {
        // Slope at the new node, with the step interior read off the chord.
        xv.set(t, cur.x, (next.x - cur.x) / dt, t_next, next.x);
        yv.set(t, cur.y, (next.y - cur.y) / dt, t_next, next.y);
        const Derivative dn = f(t_next, next.x, next.y);
        next.dx = dn.dx;
        next.dy = dn.dy;
      }
    } catch (const DomainError& e) {
      if (e.kind() != DomainKind::NonFinite) {
        throw NumericalError("step from t = " + num(t) + " left the domain (" + e.what() + "); try a smaller dt");
      }
      bad = true;
    }

    const double cur_norm = std::max(std::fabs(cur.x), std::fabs(cur.y));
    if (bad) {
      if (cur_norm >= opts.blowup_threshold * 1e-6) {
        out.status = RunStatus::BlowUpAt;
        out.time = t;
        out.x = cur.x;
        out.y = cur.y;
        out.steps = k;
        break;
      }
      throw NumericalError("stage diverged at t = " + num(t) + "; step size too large");
    }
    if (std::max(std::fabs(next.x), std::fabs(next.y)) > opts.blowup_threshold) {
      out.status = RunStatus::BlowUpAt;
      out.time = t;
      out.x = cur.x;
      out.y = cur.y;
      out.steps = k;
      break;
    }

    traj.append(next);
    out.steps = k + 1;
    out.time = t_next;
    out.x = next.x;
    out.y = next.y;

    const double norm = std::max(std::fabs(next.x), std::fabs(next.y));
    if (opts.extinction_threshold > 0.0 && norm < opts.extinction_threshold) {
      out.status = RunStatus::ExtinctBy;
      break;
    }
    if (opts.detect_convergence) {
      const double dev = std::max(std::fabs(next.x - anchor_x), std::fabs(next.y - anchor_y));
      if (dev > opts.convergence_rel_tol * norm) {
        anchor_x = next.x;
        anchor_y = next.y;
        anchor_t = t_next;
      } else if (t_next - anchor_t >= window) {
        out.status = RunStatus::ConvergedTo;
        break;
      }
    }
    if (can_prune && (k & 1023) == 0) traj.prune_before(t_next - keep);
  }

  out.max_quadrature_residual = stats.max_mass_residual;
  return {std::move(traj), out};
}

std::optional<double> detect_nonoscillation_violation(const Trajectory& traj, double K, double f2K, Side side) {
  for (std::size_t k = traj.first_retained(); k < traj.node_count(); ++k) {
    const Node& n = traj.node(k);
    const bool crossed = side == Side::Above ? (n.x < K - kCrossingTol || n.y < f2K - kCrossingTol)
                                             : (n.x > K + kCrossingTol || n.y > f2K + kCrossingTol);
    if (crossed) return traj.time_of(k);
  }
  return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride) {
  stride = std::max<std::size_t>(stride, 1);
  char buf[32];
  auto put = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    os.write(buf, r.ptr - buf);
  };
  os << "t,x,y\n";
  const std::size_t last = traj.node_count() - 1;
  for (std::size_t k = traj.first_retained(); k <= last; ++k) {
    if (k % stride != 0 && k != last) continue;
    const Node& n = traj.node(k);
    put(traj.time_of(k));
    os << ',';
    put(n.x);
    os << ',';
    put(n.y);
    os << '\n';
  }
}

}  // namespace coopdelay
