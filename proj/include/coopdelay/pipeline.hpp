#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coopdelay/analysis.hpp"
#include "coopdelay/config.hpp"
#include "coopdelay/integrator.hpp"

namespace coopdelay {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitMismatch = 4 };

struct AnalysisResult {
  Classification classification;  // caveats include the (a5) heuristic
  A5Report a5;
  InitialBounds initial;
  std::optional<PermanenceBox> box;
  std::optional<ContractionResult> contraction;
  std::optional<Side> initial_side;
  bool at_equilibrium = false;
};

struct StageError {
  std::string stage;
  std::string message;
};

struct RunResult {
  std::optional<AnalysisResult> analysis;
  std::optional<IntegrationResult> integration;
  std::optional<CertificationReport> certification;
  std::optional<StageError> error;
  int exit_code = kExitOk;
  std::string report;  // JSON, timing last
};

/// Classification plus the certificates that apply to it. Throws
/// NumericalError when a certificate cannot be constructed.
AnalysisResult analyze(const RunConfig& cfg);

/// classify -> certificates -> (integrate -> certify) and the JSON report.
/// Numerical failures end up in `error` with exit code 3.
RunResult run_pipeline(const RunConfig& cfg, bool integrate = true);

struct OutputPaths {
  std::filesystem::path trajectory;
  std::filesystem::path report;
};

/// Resolves the configured output names against `out_dir`.
OutputPaths output_paths(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Writes the report and, when present, the trajectory CSV.
OutputPaths write_outputs(const RunConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir);

/// The report with its "timing" member removed (for reproducibility checks).
std::string strip_timing(const std::string& report);

}  // namespace coopdelay
