#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "coopdelay/functions.hpp"
#include "coopdelay/integrator.hpp"

namespace coopdelay {

inline constexpr double kDefaultAnalysisTol = 1e-9;
inline constexpr std::size_t kDefaultScanPoints = 4097;
inline constexpr double kDefaultSlack = 1e-3;
inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultFateTol = 1e-3;

// Caveat tags carried by classifications and reports.
inline constexpr const char* kCaveatA5 = "a5-heuristic-failed";
inline constexpr const char* kCaveatGrid = "grid-resolution";
inline constexpr const char* kCaveatWindow = "scan-window";

/// Sign pattern of D(x) = f2(x) - f1^-1(x) on a log-spaced grid. Sign 0
/// means |D| was within tolerance of zero at that point.
struct ScanRecord {
  std::vector<double> grid;
  std::vector<int> signs;
  double x_max = 0.0;
};

struct SingleCrossing {
  double K;
};
struct BelowEverywhere {};
struct AboveEverywhere {};
/// D touches zero at K and keeps the sign `off_sign` elsewhere.
struct Tangent {
  double K;
  int off_sign;
};
struct Unresolved {
  std::vector<double> witnesses;
  std::string reason;
};

using Relation = std::variant<SingleCrossing, BelowEverywhere, AboveEverywhere, Tangent, Unresolved>;

struct RelationClass {
  Relation kind;
  ScanRecord scan;
  std::vector<std::string> caveats;
};

enum class FateKind { ToEquilibrium, ToZero, ToInfinity, Bistable, Inconclusive };

const char* to_string(FateKind f);

struct PredictedFate {
  FateKind kind = FateKind::Inconclusive;
  double K = 0.0;    // equilibrium or bistable threshold
  double f2K = 0.0;
  FateKind above = FateKind::Inconclusive;  // Bistable only
  FateKind below = FateKind::Inconclusive;
};

/// Bound sequences of the squeezing arguments: lower/upper corners per step.
struct BoundSequences {
  std::vector<std::pair<double, double>> lower;
  std::vector<std::pair<double, double>> upper;
  double alpha = 0.0;
  double terminal_gap = 0.0;
  bool monotone = true;
};

struct Classification {
  RelationClass relation;
  PredictedFate fate;
  std::vector<std::string> caveats;
  std::optional<BoundSequences> certificates;
};

struct ScanOptions {
  double tol = kDefaultAnalysisTol;
  std::size_t n_points = kDefaultScanPoints;
};

/// Sign scan of D on [tol, x_max] with crossing and tangency refinement.
RelationClass scan_relation(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                            const ScanOptions& opts = {});

/// K for a single crossing or a tangency, none for constant sign.
/// Throws NumericalError when the relation is unresolved.
std::optional<double> find_equilibrium(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                                       double tol = kDefaultAnalysisTol);

PredictedFate fate_of(const Relation& r, const ProductionFunction& f2);

Classification classify(const ProductionFunction& f1, const ProductionFunction& f2, double x_max,
                        const ScanOptions& opts = {});

struct PermanenceBox {
  double m1 = 0.0;
  double m2 = 0.0;
  double M1 = 0.0;
  double M2 = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  char upper_case = 'C';  // which construction produced (M1, M2)
  int inward_steps = 0;   // halvings needed for the lower corner
};

/// Box [m1, M1] x [m2, M2] around the equilibrium from positive lower
/// bounds (mu1, mu2) and upper bounds (sup1, sup2) of the early solution.
/// Throws NumericalError when the strict inequalities cannot be met.
PermanenceBox permanence_bounds(const ProductionFunction& f1, const ProductionFunction& f2, double K, double mu1,
                                double mu2, double sup1, double sup2, double slack = kDefaultSlack,
                                double alpha = kDefaultAlpha);

struct BoundStart {
  double a0, b0, A0, B0;
};

/// Largest separator weight alpha' <= alpha (by halving 1 - alpha) with
/// (1 - alpha') f2(0) <= b.
double adjust_alpha(const ProductionFunction& f2, double alpha, double b);

/// Moves a lower corner onto g (a0 = min{a, g^-1(b)}) and an upper corner
/// onto g (A0 = max{A, g^-1(B)}), contracting the upper one first when it
/// sits above the range of f1.
BoundStart align_start(const ProductionFunction& f1, const ProductionFunction& f2, double alpha, double a, double b,
                       double A, double B);

/// Squeezing recursions with b_n = g(a_n), B_n = g(A_n); stops once
/// |A_n - a_n| <= tol. Throws NumericalError on a monotonicity failure.
BoundSequences monotone_iteration(const ProductionFunction& f1, const ProductionFunction& f2, double K,
                                  double alpha, const BoundStart& start, std::size_t n_max = 500,
                                  double tol = 1e-8);

enum class ContractionVerdict { ToZero, ToInfinity, Stalled };

const char* to_string(ContractionVerdict v);

struct ContractionResult {
  BoundSequences sequences;  // upper holds (A_n, B_n)
  ContractionVerdict verdict = ContractionVerdict::Stalled;
};

/// A_n = f1(B_{n-1}), B_n = f2(A_{n-1}).
ContractionResult contraction_iteration(const ProductionFunction& f1, const ProductionFunction& f2, double A0,
                                        double B0, std::size_t n_max = 1000, double cap = 1e12,
                                        double tol = 1e-12);

enum class CheckStatus { Pass, Fail, Skipped };
enum class Certification { Pass, Mismatch, MismatchExplained, Inconclusive };

const char* to_string(CheckStatus s);
const char* to_string(Certification c);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Skipped;
  std::string detail;
};

struct CertifyOptions {
  double fate_tol = kDefaultFateTol;
  double box_tol = 1e-9;
  double divergence_level = 1e6;
  /// Side of (K, f2(K)) the initial data lies on; none for mixed data.
  std::optional<Side> initial_side;
  /// True when the initial data sits exactly at the equilibrium.
  bool at_equilibrium = false;
};

struct CertificationReport {
  std::vector<CheckResult> checks;
  Certification status = Certification::Inconclusive;
};

CertificationReport certify_run(const Trajectory& traj, const RunOutcome& outcome, const Classification& cls,
                                const std::optional<PermanenceBox>& box, const CertifyOptions& opts = {});

}  // namespace coopdelay
