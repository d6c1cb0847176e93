#include "coopdelay/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMargin = 1e-12;

double eval_or_inf(const ProductionFunction& f, double x) {
  if (std::isinf(x)) return kInf;
  try {
    return f(x);
  } catch (const DomainError& e) {
    if (e.kind() == DomainKind::NonFinite) return kInf;
    throw;
  }
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct DeltaValue {
  double d = 0.0;
  double scale = 1.0;
};

// D(x) = f2(x) - f1^-1(x); the scale is what "zero within tolerance" is
// measured against.
class Delta {
 public:
  Delta(const ProductionFunction& f1, const ProductionFunction& f2, double hint, double tol)
      : f1_(f1), f2_(f2), hint_(hint), tol_(tol) {}

  DeltaValue operator()(double x) const {
    const double inv = inverse_extended(f1_, x, hint_);
    const double fv = eval_or_inf(f2_, x);
    if (std::isinf(inv) && std::isinf(fv)) return {std::numeric_limits<double>::quiet_NaN(), kInf};
    return {fv - inv, std::max({1.0, std::fabs(fv), std::fabs(inv)})};
  }

  // Significant sign: 0 when |D| is within tolerance (or undecidable).
  int sign(const DeltaValue& v) const {
    if (std::isnan(v.d)) return 0;
    if (std::isinf(v.d)) return v.d > 0 ? 1 : -1;
    if (std::fabs(v.d) <= tol_ * v.scale) return 0;
    return v.d > 0 ? 1 : -1;
  }

  bool near_zero(const DeltaValue& v) const { return std::isfinite(v.d) && std::fabs(v.d) <= tol_ * v.scale; }

 private:
  const ProductionFunction& f1_;
  const ProductionFunction& f2_;
  double hint_;
  double tol_;
};

// Root of D between lo (sign s_lo) and hi by bisection on the raw sign.
double bisect_crossing(const Delta& delta, double lo, double hi, int s_lo) {
  for (int i = 0; i < 2200; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double d = delta(mid).d;
    if (d == 0.0) return mid;
    if (std::isnan(d)) break;
    if ((d > 0) == (s_lo > 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::fabs(delta(lo).d) <= std::fabs(delta(hi).d) ? lo : hi;
}

// Minimizes s * D over [a, b] by golden section.
double golden_min(const Delta& delta, double a, double b, int s) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  auto phi = [&](double x) {
    const double d = delta(x).d;
    return std::isnan(d) ? kInf : s * d;
  };
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = phi(c);
  double fd = phi(d);
  for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::fabs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = phi(d);
    }
  }
  return fc < fd ? c : d;
}

struct ScanResult {
  std::vector<double> crossings;
  std::vector<double> touches;
  std::vector<double> bad;  // crossings that fail the |D(K)| check
  int first_sign = 0;
  int last_sign = 0;
  bool resolved_any = false;
  bool zero_gaps = false;
};

ScanResult run_scan(const Delta& delta, ScanRecord& rec, double lo, double x_max, std::size_t n) {
  n = std::max<std::size_t>(n, 3);
  rec.grid.resize(n);
  rec.signs.resize(n);
  rec.x_max = x_max;
  std::vector<DeltaValue> vals(n);
  const double ratio = std::log(x_max / lo);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i + 1 == n ? x_max : lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(n - 1));
    rec.grid[i] = x;
    vals[i] = delta(x);
    rec.signs[i] = delta.sign(vals[i]);
  }

  ScanResult out;
  std::vector<std::size_t> nz;
  for (std::size_t i = 0; i < n; ++i) {
    if (rec.signs[i] != 0) nz.push_back(i);
  }
  if (nz.empty()) return out;
  out.resolved_any = true;
  out.first_sign = rec.signs[nz.front()];
  out.last_sign = rec.signs[nz.back()];

  for (std::size_t j = 0; j + 1 < nz.size(); ++j) {
    const std::size_t i0 = nz[j];
    const std::size_t i1 = nz[j + 1];
    const int s = rec.signs[i0];
    if (rec.signs[i1] != s) {
      const double root = bisect_crossing(delta, rec.grid[i0], rec.grid[i1], s);
      (delta.near_zero(delta(root)) ? out.crossings : out.bad).push_back(root);
      continue;
    }
    if (i1 > i0 + 1) {
      // Unresolved points between two of the same sign: possible touch.
      out.zero_gaps = true;
      const double x = golden_min(delta, rec.grid[i0], rec.grid[i1], s);
      const DeltaValue v = delta(x);
      if (delta.sign(v) == -s) {
        out.crossings.push_back(x);
        out.crossings.push_back(x);
      } else {
        out.touches.push_back(x);
      }
    }
  }

  // Interior local minima of |D| inside same-sign stretches.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const int s = rec.signs[i];
    if (s == 0 || rec.signs[i - 1] != s || rec.signs[i + 1] != s) continue;
    const double a = std::fabs(vals[i].d);
    if (std::isinf(a)) continue;
    if (!(a <= std::fabs(vals[i - 1].d) && a <= std::fabs(vals[i + 1].d))) continue;
    const double x = golden_min(delta, rec.grid[i - 1], rec.grid[i + 1], s);
    const DeltaValue v = delta(x);
    if (delta.sign(v) == -s) {
      out.crossings.push_back(x);
      out.crossings.push_back(x);
    } else if (delta.near_zero(v)) {
      out.touches.push_back(x);
    }
  }
  return out;
}

}  // namespace

const char* to_string(FateKind f) {
  switch (f) {
    case FateKind::ToEquilibrium:
      return "ToEquilibrium";
    case FateKind::ToZero:
      return "ToZero";
    case FateKind::ToInfinity:
      return "ToInfinity";
    case FateKind::Bistable:
      return "Bistable";
    case FateKind::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

const char* to_string(ContractionVerdict v) {
  switch (v) {
    case ContractionVerdict::ToZero:
      return "to-zero";
    case ContractionVerdict::ToInfinity:
      return "to-infinity";
    case ContractionVerdict::Stalled:
      return "stalled";
  }
  return "?";
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::Skipped:
      return "skipped";
  }
  return "?";
}

const char* to_string(Certification c) {
  switch (c) {
    case Certification::Pass:
      return "pass";
    case Certification::Mismatch:
      return "mismatch";
    case Certification::MismatchExplained:
      return "mismatch-explained";
    case Certification::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

RelationClass scan_relation(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                            const ScanOptions& opts) {
  if (!(x_max > opts.tol)) throw std::invalid_argument("scan window must extend past the tolerance");
  const Delta delta(f1, f2, std::max(f1.working_hi(), x_max), opts.tol);

  RelationClass rc{Unresolved{{}, "no scan"}, {}, {}};
  ScanResult res = run_scan(delta, rc.scan, opts.tol, x_max, opts.n_points);

  // Probe beyond the window; a different sign out there means the scan
  // missed structure, so widen and rescan.
  for (int round = 0; round < 3 && res.resolved_any; ++round) {
    double wider = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double x = rc.scan.x_max * std::ldexp(1.0, k);
      const int s = delta.sign(delta(x));
      if (s != 0 && s != res.last_sign) {
        wider = x;
        break;
      }
    }
    if (wider == 0.0) break;
    rc.caveats.emplace_back(kCaveatWindow);
    res = run_scan(delta, rc.scan, opts.tol, wider, opts.n_points);
  }

  if (!res.resolved_any) {
    rc.kind = Unresolved{{}, "f2 and the inverse of f1 agree within tolerance on the whole window"};
    return rc;
  }
  if (!res.bad.empty()) {
    rc.kind = Unresolved{res.bad, "sign change without a zero (discontinuous difference)"};
    return rc;
  }
  const std::size_t nc = res.crossings.size();
  const std::size_t nt = res.touches.size();
  if (nc == 0 && nt == 0) {
    if (res.first_sign > 0) {
      rc.kind = AboveEverywhere{};
    } else {
      rc.kind = BelowEverywhere{};
    }
    return rc;
  }
  if (nc == 0 && nt == 1) {
    rc.kind = Tangent{res.touches.front(), res.first_sign};
    rc.caveats.emplace_back(kCaveatGrid);
    return rc;
  }
  if (nc == 1 && nt == 0) {
    if (res.first_sign > 0) {
      rc.kind = SingleCrossing{res.crossings.front()};
      if (res.zero_gaps) rc.caveats.emplace_back(kCaveatGrid);
    } else {
      rc.kind = Unresolved{res.crossings, "single crossing with the difference increasing through zero"};
    }
    return rc;
  }
  std::vector<double> w = res.crossings;
  w.insert(w.end(), res.touches.begin(), res.touches.end());
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  rc.kind = Unresolved{w, "more than one zero of f2 - f1^-1"};
  return rc;
}

std::optional<double> find_equilibrium(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                                       double tol) {
  const RelationClass rc = scan_relation(f1, f2, x_max, ScanOptions{tol, kDefaultScanPoints});
  if (const auto* s = std::get_if<SingleCrossing>(&rc.kind)) return s->K;
  if (const auto* t = std::get_if<Tangent>(&rc.kind)) return t->K;
  if (const auto* u = std::get_if<Unresolved>(&rc.kind)) throw NumericalError("unresolved relation: " + u->reason);
  return std::nullopt;
}

PredictedFate fate_of(const Relation& r, const ProductionFunction& f2) {
  PredictedFate p;
  if (const auto* s = std::get_if<SingleCrossing>(&r)) {
    p.kind = FateKind::ToEquilibrium;
    p.K = s->K;
    p.f2K = f2(s->K);
  } else if (std::holds_alternative<BelowEverywhere>(r)) {
    p.kind = FateKind::ToZero;
  } else if (std::holds_alternative<AboveEverywhere>(r)) {
    p.kind = FateKind::ToInfinity;
  } else if (const auto* t = std::get_if<Tangent>(&r)) {
    p.kind = FateKind::Bistable;
    p.K = t->K;
    p.f2K = f2(t->K);
    if (t->off_sign < 0) {
      p.above = FateKind::ToEquilibrium;
      p.below = FateKind::ToZero;
    } else {
      p.above = FateKind::ToInfinity;
      p.below = FateKind::ToEquilibrium;
    }
  }
  return p;
}

Classification classify(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                        const ScanOptions& opts) {
  Classification c{scan_relation(f1, f2, x_max, opts), {}, {}, std::nullopt};
  c.fate = fate_of(c.relation.kind, f2);
  c.caveats = c.relation.caveats;
  return c;
}

double adjust_alpha(const ProductionFunction& f2, double alpha, double b) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("separator weight must lie in (0, 1)");
  const double f0 = f2(0.0);
  double w = 1.0 - alpha;
  for (int i = 0; i < 1000 && w * f0 > b; ++i) w *= 0.5;
  const double a = 1.0 - w;
  if (!(a < 1.0) || w * f0 > b) throw NumericalError("no separator weight puts g(0) below " + num(b));
  return a;
}

BoundStart align_start(const ProductionFunction& f1, const ProductionFunction& f2, double alpha, double a, double b,
                       double A, double B) {
  const ProductionFunction g = make_separator(f1, f2, alpha);
  const double hint = std::max({1.0, A, B, f1.working_hi()});
  BoundStart s{};
  s.a0 = std::min(a, inverse_extended(g, b, hint));
  s.b0 = g(s.a0);

  // Upper corner above the range of f1 (bounded f1): contract it first.
  for (int i = 0; i < 64 && std::isinf(g(A)); ++i) {
    const double nA = eval_or_inf(f1, B);
    const double nB = eval_or_inf(f2, A);
    A = nA;
    B = nB;
  }
  const double ginv = inverse_extended(g, B, hint);
  s.A0 = std::max(A, ginv);
  s.B0 = g(s.A0);
  if (!std::isfinite(s.B0)) throw NumericalError("upper start cannot be placed on the separator");
  return s;
}

BoundSequences monotone_iteration(const ProductionFunction& f1, const ProductionFunction& f2, double K,
                                  double alpha, const BoundStart& start, std::size_t n_max, double tol) {
  if (!(start.a0 <= K && K <= start.A0)) {
    throw std::invalid_argument("monotone iteration needs a0 <= K <= A0");
  }
  const ProductionFunction g = make_separator(f1, f2, alpha);
  const double hint = std::max({1.0, 2.0 * start.A0, f1.working_hi()});
  const double eps = 1e-12 * std::max(1.0, K);
  auto ginv = [&](double y) { return inverse_extended(g, y, hint); };

  BoundSequences seq;
  seq.alpha = alpha;
  double a = start.a0;
  double b = start.b0;
  double A = start.A0;
  double B = start.B0;
  seq.lower.emplace_back(a, b);
  seq.upper.emplace_back(A, B);
  seq.terminal_gap = A - a;

  for (std::size_t n = 1; n <= n_max && seq.terminal_gap > tol; ++n) {
    const double a1 = std::min(ginv(f2(a)), f1(b));
    const double A1 = std::max(ginv(f2(A)), f1(B));
    if (a1 < a - eps || a1 > K + eps || A1 < K - eps || A1 > A + eps) {
      seq.monotone = false;
      throw NumericalError("bound sequences lost monotonicity at step " + std::to_string(n) + ": a = " + num(a) +
                           " -> " + num(a1) + ", A = " + num(A) + " -> " + num(A1) + ", K = " + num(K));
    }
    const bool stuck = a1 == a && A1 == A;
    a = a1;
    A = A1;
    b = g(a);
    B = g(A);
    seq.lower.emplace_back(a, b);
    seq.upper.emplace_back(A, B);
    seq.terminal_gap = A - a;
    if (stuck) break;
  }
  return seq;
}

ContractionResult contraction_iteration(const ProductionFunction& f1, const ProductionFunction& f2, double A0,
                                        double B0, std::size_t n_max, double cap, double tol) {
  ContractionResult r;
  BoundSequences& s = r.sequences;
  s.upper.emplace_back(A0, B0);
  double A = A0;
  double B = B0;
  int dir_a = 0;
  int dir_b = 0;
  auto track = [&s](int& dir, double prev, double next) {
    const int d = next > prev ? 1 : (next < prev ? -1 : 0);
    if (d == 0) return;
    if (dir == 0) dir = d;
    if (d != dir) s.monotone = false;
  };
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double nA = eval_or_inf(f1, B);
    const double nB = eval_or_inf(f2, A);
    track(dir_a, A, nA);
    track(dir_b, B, nB);
    A = nA;
    B = nB;
    s.upper.emplace_back(A, B);
    if (std::max(A, B) < tol) {
      r.verdict = ContractionVerdict::ToZero;
      break;
    }
    if (std::min(A, B) > cap) {
      r.verdict = ContractionVerdict::ToInfinity;
      break;
    }
  }
  s.terminal_gap = std::max(A, B);
  return r;
}

PermanenceBox permanence_bounds(const ProductionFunction& f1, const ProductionFunction& f2, double K, double mu1,
                                double mu2, double sup1, double sup2, double slack, double alpha) {
  if (!(K > 0.0) || !(mu1 > 0.0) || !(mu2 > 0.0)) {
    throw std::invalid_argument("permanence bounds need K > 0 and positive lower bounds");
  }
  if (!(slack > 0.0 && slack < 1.0)) throw std::invalid_argument("slack must lie in (0, 1)");
  const double hint = std::max({1.0, K, sup1, sup2, f1.working_hi()});
  auto ball = [&](double m1, double m2) { return f1(m2) - m1 >= kMargin && f2(m1) - m2 >= kMargin; };

  PermanenceBox box;
  // Inverse terms below the range of f would be 0 and are dropped.
  const double f2inv_mu2 = mu2 > f2(0.0) ? inverse_extended(f2, mu2, hint) : kInf;
  const double f1inv_mu1 = mu1 > f1(0.0) ? inverse_extended(f1, mu1, hint) : kInf;
  box.m1 = (1.0 - slack) * std::min({mu1, f2inv_mu2, K});
  box.m2 = (1.0 - slack) * std::min({mu2, f1inv_mu1, K});
  if (!ball(box.m1, box.m2)) {
    const double a = adjust_alpha(f2, alpha, 0.5 * box.m2);
    const ProductionFunction g = make_separator(f1, f2, a);
    const double cap = box.m2;
    double m1 = box.m1;
    bool ok = false;
    for (int i = 0; i <= 64; ++i) {
      const double m2 = g(m1);
      if (m2 > 0.0 && m2 <= cap && ball(m1, m2)) {
        box.m1 = m1;
        box.m2 = m2;
        box.inward_steps = i;
        ok = true;
        break;
      }
      m1 *= 0.5;
    }
    if (!ok) throw NumericalError("lower permanence corner: no point between the curves within 64 inward steps");
  }

  box.nu1 = std::max(K, sup1) * (1.0 + slack);
  box.nu2 = std::max(f2(K), sup2) * (1.0 + slack);
  const double f2inv_nu2 = inverse_extended(f2, box.nu2, hint);
  const double f1inv_nu1 = inverse_extended(f1, box.nu1, hint);
  auto between = [slack](double lo, double hi) {
    return std::isinf(hi) ? lo + slack * std::max(1.0, lo) : 0.5 * (lo + hi);
  };
  if (f2inv_nu2 <= box.nu1) {
    box.upper_case = 'A';
    box.M1 = box.nu1;
    box.M2 = between(eval_or_inf(f2, box.nu1), f1inv_nu1);
  } else if (f1inv_nu1 <= box.nu2) {
    box.upper_case = 'B';
    box.M2 = box.nu2;
    box.M1 = std::max(box.nu1, between(f1(box.nu2), f2inv_nu2));
  } else {
    box.upper_case = 'C';
    box.M1 = box.nu1;
    box.M2 = box.nu2;
  }

  const double f1inv_M1 = inverse_extended(f1, box.M1, hint);
  const double f2M1 = eval_or_inf(f2, box.M1);
  if (!(box.M2 - f2M1 >= kMargin && f1inv_M1 - box.M2 >= kMargin)) {
    throw NumericalError("upper permanence corner (" + num(box.M1) + ", " + num(box.M2) +
                         ") is not strictly between the curves");
  }
  if (!ball(box.m1, box.m2)) throw NumericalError("lower permanence corner is not strictly between the curves");
  return box;
}

CertificationReport certify_run(const Trajectory& traj, const RunOutcome& outcome, const Classification& cls,
                                const std::optional<PermanenceBox>& box, const CertifyOptions& opts) {
  CertificationReport rep;
  const PredictedFate& fate = cls.fate;

  CheckResult box_check{"permanence-box", CheckStatus::Skipped, ""};
  if (box && fate.kind == FateKind::ToEquilibrium) {
    box_check.status = CheckStatus::Pass;
    const double tol = opts.box_tol;
    for (std::size_t k = traj.first_retained(); k < traj.node_count(); ++k) {
      const Node& n = traj.node(k);
      if (n.x < box->m1 - tol || n.x > box->M1 + tol || n.y < box->m2 - tol || n.y > box->M2 + tol) {
        box_check.status = CheckStatus::Fail;
        box_check.detail = "left the box at t = " + num(traj.time_of(k)) + ": (" + num(n.x) + ", " + num(n.y) + ")";
        break;
      }
    }
  }

  FateKind expected = fate.kind;
  if (fate.kind == FateKind::Bistable) {
    if (opts.at_equilibrium) {
      expected = FateKind::ToEquilibrium;
    } else if (opts.initial_side) {
      expected = *opts.initial_side == Side::Above ? fate.above : fate.below;
    } else {
      expected = FateKind::Inconclusive;
    }
  }

  CheckResult fate_check{"fate", CheckStatus::Skipped, ""};
  const double norm = std::max(std::fabs(outcome.x), std::fabs(outcome.y));
  const bool blew_up = outcome.status == RunStatus::BlowUpAt;
  const std::string terminal = "terminal (" + num(outcome.x) + ", " + num(outcome.y) + ") at t = " + num(outcome.time);
  switch (expected) {
    case FateKind::ToEquilibrium: {
      double tol = opts.fate_tol;
      if (cls.certificates) tol = std::max(tol, cls.certificates->terminal_gap);
      const bool ok = !blew_up && std::fabs(outcome.x - fate.K) <= tol && std::fabs(outcome.y - fate.f2K) <= tol;
      fate_check.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
      fate_check.detail = terminal + " vs (" + num(fate.K) + ", " + num(fate.f2K) + ")";
      break;
    }
    case FateKind::ToZero:
      fate_check.status = !blew_up && norm <= opts.fate_tol ? CheckStatus::Pass : CheckStatus::Fail;
      fate_check.detail = terminal;
      break;
    case FateKind::ToInfinity:
      fate_check.status = blew_up || norm > opts.divergence_level ? CheckStatus::Pass : CheckStatus::Fail;
      fate_check.detail = terminal;
      break;
    default:
      fate_check.detail = fate.kind == FateKind::Bistable ? "initial data on both sides of the threshold"
                                                          : "no prediction";
      break;
  }

  CheckResult side_check{"nonoscillation", CheckStatus::Skipped, ""};
  if (std::holds_alternative<SingleCrossing>(cls.relation.kind) && opts.initial_side) {
    const auto hit = detect_nonoscillation_violation(traj, fate.K, fate.f2K, *opts.initial_side);
    side_check.status = hit ? CheckStatus::Fail : CheckStatus::Pass;
    if (hit) side_check.detail = "crossed the equilibrium level at t = " + num(*hit);
  }

  rep.checks = {box_check, fate_check, side_check};
  const bool failed = std::any_of(rep.checks.begin(), rep.checks.end(),
                                  [](const CheckResult& c) { return c.status == CheckStatus::Fail; });
  if (expected == FateKind::Inconclusive) {
    rep.status = Certification::Inconclusive;
  } else if (!failed) {
    rep.status = Certification::Pass;
  } else {
    rep.status = cls.caveats.empty() ? Certification::Mismatch : Certification::MismatchExplained;
  }
  return rep;
}

}  // namespace coopdelay
