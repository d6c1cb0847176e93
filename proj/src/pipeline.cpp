#include "coopdelay/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <variant>

#include <json.hpp>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double max_on(const Modulation& g, double hi) {
  double m = 0.0;
  for (int i = 0; i <= 2000; ++i) m = std::max(m, g(hi * i / 2000.0));
  return m;
}

// Lower bound of a component on [0, t1]: u' >= -r G(u) u >= -r Gmax u.
double a_priori_floor(double u0, const Expression& r, const Modulation& g, double t1, double u_hi) {
  if (t1 <= 0.0) return u0;
  return u0 * std::exp(-max_on(g, u_hi) * integrate_rate(r, t1).integral);
}

PermanenceBox build_box(const RunConfig& cfg, const InitialBounds& b, double K) {
  const SystemSpec& s = cfg.system;
  const Numerics& n = cfg.numerics;
  const double t1 = first_nonnegative_support_time(s, n.horizon);
  const double x0 = s.phi.value_at_zero();
  const double y0 = s.psi.value_at_zero();
  // The upper corner does not depend on mu; a first pass bounds G on the box.
  const PermanenceBox first = permanence_bounds(s.f1, s.f2, K, x0, y0, b.sup_phi, b.sup_psi, n.slack, n.alpha);
  const double mu1 = a_priori_floor(x0, s.r1, s.g1, t1, first.M1);
  const double mu2 = a_priori_floor(y0, s.r2, s.g2, t1, first.M2);
  return permanence_bounds(s.f1, s.f2, K, mu1, mu2, b.sup_phi, b.sup_psi, n.slack, n.alpha);
}

json pairs(const std::vector<std::pair<double, double>>& v) {
  json out = json::array();
  for (const auto& [a, b] : v) out.push_back(json::array({a, b}));
  return out;
}

json relation_json(const Relation& r) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SingleCrossing>) {
          return {{"kind", "single-crossing"}, {"K", v.K}};
        } else if constexpr (std::is_same_v<T, BelowEverywhere>) {
          return {{"kind", "below-everywhere"}};
        } else if constexpr (std::is_same_v<T, AboveEverywhere>) {
          return {{"kind", "above-everywhere"}};
        } else if constexpr (std::is_same_v<T, Tangent>) {
          return {{"kind", "tangent"}, {"K", v.K}, {"off_sign", v.off_sign}};
        } else {
          return {{"kind", "unresolved"}, {"reason", v.reason}, {"witnesses", v.witnesses}};
        }
      },
      r);
}

json fate_json(const PredictedFate& f) {
  json j = {{"kind", to_string(f.kind)}};
  if (f.kind == FateKind::ToEquilibrium || f.kind == FateKind::Bistable) {
    j["K"] = f.K;
    j["f2K"] = f.f2K;
  }
  if (f.kind == FateKind::Bistable) {
    j["above"] = to_string(f.above);
    j["below"] = to_string(f.below);
  }
  return j;
}

json sequences_json(const BoundSequences& s) {
  return {{"alpha", s.alpha},   {"iterations", s.lower.empty() ? s.upper.size() - 1 : s.lower.size() - 1},
          {"terminal_gap", s.terminal_gap}, {"monotone", s.monotone},
          {"lower", pairs(s.lower)}, {"upper", pairs(s.upper)}};
}

json system_json(const ConfigDocument& doc) {
  json j = json::object();
  for (const auto& sec : doc.sections()) {
    if (sec.name != "system") continue;
    for (const auto& e : sec.entries) j[e.key] = e.value;
  }
  return j;
}

json rate_json(const RateIntegral& r) {
  return {{"integral", r.integral}, {"tail", r.tail}, {"divergent", r.divergent}};
}

json build_report(const RunConfig& cfg, const RunResult& res, double dt, const json& timing) {
  json j;
  j["schema"] = 1;
  j["name"] = cfg.name;
  j["system"] = system_json(cfg.source);
  const Numerics& n = cfg.numerics;
  j["numerics"] = {{"dt", dt},           {"horizon", n.horizon},         {"quad_panels", n.quad_panels},
                   {"alpha", n.alpha},   {"slack", n.slack},             {"x_max", cfg.x_max},
                   {"scan_points", n.scan_points}, {"scan_tol", n.scan_tol}, {"fate_tol", n.fate_tol}};
  j["conventions"] = json::array({"f1^-1(x) = 0 below the range of f1", "f1^-1(x) = +inf above the range of f1"});

  if (res.analysis) {
    const AnalysisResult& a = *res.analysis;
    const Classification& c = a.classification;
    j["classification"] = {{"relation", relation_json(c.relation.kind)},
                           {"scan", {{"points", c.relation.scan.grid.size()}, {"x_max", c.relation.scan.x_max}}},
                           {"fate", fate_json(c.fate)}};
    if (c.fate.kind == FateKind::ToEquilibrium || c.fate.kind == FateKind::Bistable) {
      j["K"] = c.fate.K;
    } else {
      j["K"] = nullptr;
    }
    j["fate"] = to_string(c.fate.kind);
    j["caveats"] = c.caveats;
    j["a5"] = {{"r1", rate_json(a.a5.r1)}, {"r2", rate_json(a.a5.r2)}};
    json side = nullptr;
    if (a.at_equilibrium) {
      side = "equilibrium";
    } else if (a.initial_side) {
      side = *a.initial_side == Side::Above ? "above" : "below";
    }
    j["initial_side"] = side;

    json certs = json::object();
    if (a.box) {
      const PermanenceBox& b = *a.box;
      certs["permanence_box"] = {{"m1", b.m1},   {"m2", b.m2},     {"M1", b.M1},
                                 {"M2", b.M2},   {"nu1", b.nu1},   {"nu2", b.nu2},
                                 {"upper_case", std::string(1, b.upper_case)}, {"inward_steps", b.inward_steps}};
    }
    if (c.certificates) certs["bound_sequences"] = sequences_json(*c.certificates);
    if (a.contraction) {
      certs["contraction"] = {{"verdict", to_string(a.contraction->verdict)},
                              {"sequences", sequences_json(a.contraction->sequences)}};
    }
    j["certificates"] = certs;
  }

  if (res.integration) {
    const RunOutcome& o = res.integration->outcome;
    j["outcome"] = {{"status", to_string(o.status)}, {"time", o.time}, {"x", o.x}, {"y", o.y},
                    {"steps", o.steps}, {"max_quadrature_residual", o.max_quadrature_residual}};
  }
  if (res.certification) {
    json checks = json::array();
    for (const auto& ch : res.certification->checks) {
      checks.push_back({{"name", ch.name}, {"status", to_string(ch.status)}, {"detail", ch.detail}});
    }
    j["certification"] = {{"status", to_string(res.certification->status)}, {"checks", checks}};
  }
  if (res.error) j["error"] = {{"stage", res.error->stage}, {"message", res.error->message}};
  j["exit_code"] = res.exit_code;
  j["timing"] = timing;
  return j;
}

}  // namespace

AnalysisResult analyze(const RunConfig& cfg) {
  const SystemSpec& s = cfg.system;
  const Numerics& n = cfg.numerics;
  const ScanOptions scan{n.scan_tol, n.scan_points};

  AnalysisResult a{classify(s.f1, s.f2, cfg.x_max, scan), check_a5(s, n.horizon), initial_bounds(s, n.horizon),
                   std::nullopt, std::nullopt, std::nullopt, false};
  Classification& c = a.classification;
  const InitialBounds& b = a.initial;
  // Rescan when the equilibrium sits near the top of the window.
  if (c.fate.kind == FateKind::ToEquilibrium || c.fate.kind == FateKind::Bistable) {
    const double wanted = 10.0 * std::max({b.sup_phi, b.sup_psi, c.fate.K, 1.0});
    if (wanted > c.relation.scan.x_max) c = classify(s.f1, s.f2, wanted, scan);
  }
  if (!a.a5.both_divergent()) c.caveats.emplace_back(kCaveatA5);

  const PredictedFate& f = c.fate;
  if (f.kind == FateKind::ToEquilibrium || f.kind == FateKind::Bistable) {
    const double tol = 1e-12 * std::max(1.0, f.K);
    const double tol2 = 1e-12 * std::max(1.0, f.f2K);
    if (b.inf_phi >= f.K - tol && b.sup_phi <= f.K + tol && b.inf_psi >= f.f2K - tol2 && b.sup_psi <= f.f2K + tol2) {
      a.at_equilibrium = true;
    } else if (b.inf_phi >= f.K && b.inf_psi >= f.f2K) {
      a.initial_side = Side::Above;
    } else if (b.sup_phi <= f.K && b.sup_psi <= f.f2K) {
      a.initial_side = Side::Below;
    }
  }

  if (std::holds_alternative<SingleCrossing>(c.relation.kind)) {
    a.box = build_box(cfg, b, f.K);
    const double alpha = adjust_alpha(s.f2, n.alpha, a.box->m2);
    const BoundStart start = align_start(s.f1, s.f2, alpha, a.box->m1, a.box->m2, a.box->M1, a.box->M2);
    c.certificates = monotone_iteration(s.f1, s.f2, f.K, alpha, start);
  } else if (f.kind == FateKind::ToZero) {
    a.contraction = contraction_iteration(s.f1, s.f2, b.sup_phi, b.sup_psi);
  } else if (f.kind == FateKind::ToInfinity) {
    a.contraction = contraction_iteration(s.f1, s.f2, s.phi.value_at_zero(), s.psi.value_at_zero());
  }
  return a;
}

RunResult run_pipeline(const RunConfig& cfg, bool integrate_too) {
  const auto t_start = Clock::now();
  RunResult res;
  const Numerics& n = cfg.numerics;
  const double dt = n.dt.value_or(default_dt(cfg.system, n.horizon));
  json timing = json::object();

  std::string stage = "classify";
  try {
    auto t0 = Clock::now();
    res.analysis = analyze(cfg);
    timing["classify_ms"] = ms_since(t0);

    if (integrate_too) {
      stage = "integrate";
      t0 = Clock::now();
      IntegratorOptions o;
      o.n_quad = n.quad_panels;
      o.blowup_threshold = n.blowup;
      o.convergence_rel_tol = n.convergence_tol;
      o.detect_convergence = n.detect_convergence;
      o.extinction_threshold = n.extinction;
      o.prune_history = n.prune_history;
      res.integration = integrate(cfg.system, n.horizon, dt, o);
      timing["integrate_ms"] = ms_since(t0);

      stage = "certify";
      CertifyOptions co;
      co.fate_tol = n.fate_tol;
      co.box_tol = n.box_tol;
      co.initial_side = res.analysis->initial_side;
      co.at_equilibrium = res.analysis->at_equilibrium;
      res.certification = certify_run(res.integration->trajectory, res.integration->outcome,
                                      res.analysis->classification, res.analysis->box, co);
      if (res.certification->status == Certification::Mismatch) res.exit_code = kExitMismatch;
    }
  } catch (const NumericalError& e) {
    res.error = StageError{stage, e.what()};
    res.exit_code = kExitNumerical;
  } catch (const DomainError& e) {
    res.error = StageError{stage, e.what()};
    res.exit_code = kExitNumerical;
  }
  timing["total_ms"] = ms_since(t_start);
  res.report = build_report(cfg, res, dt, timing).dump(2) + "\n";
  return res;
}

OutputPaths output_paths(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  auto resolve = [&](const std::string& configured, const char* ext) {
    const std::filesystem::path p = configured.empty() ? std::filesystem::path(cfg.name + ext) : std::filesystem::path(configured);
    return p.is_absolute() ? p : out_dir / p;
  };
  return {resolve(cfg.outputs.trajectory, ".csv"), resolve(cfg.outputs.report, ".json")};
}

OutputPaths write_outputs(const RunConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir) {
  const OutputPaths paths = output_paths(cfg, out_dir);
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
  };
  {
    std::ofstream os = open(paths.report);
    os << result.report;
  }
  if (result.integration) {
    std::ofstream os = open(paths.trajectory);
    write_trajectory_csv(os, result.integration->trajectory, cfg.outputs.stride);
  }
  return paths;
}

std::string strip_timing(const std::string& report) {
  json j = json::parse(report);
  j.erase("timing");
  return j.dump(2);
}

}  // namespace coopdelay
