#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coopdelay/dynamics.hpp"

namespace coopdelay {

/// Raw sectioned key-value text:
///
///   [system]
///   f1 = "1+x/2"
///   k1 = "uniform"
///   k1.lag = "t-1"
///
/// '#' starts a comment outside quotes. Values are quoted strings or bare tokens.
class ConfigDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    bool quoted = false;
    int line = 0;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  /// Throws ValidationError keyed "line N" on malformed text.
  static ConfigDocument parse(std::string_view text);

  const std::vector<Section>& sections() const noexcept { return sections_; }
  const Entry* find(std::string_view section, std::string_view key) const;
  /// Replaces an existing value or appends one (creating the section).
  void set(const std::string& section, const std::string& key, const std::string& value, bool quoted);
  std::string to_text() const;

 private:
  Section& section(const std::string& name);
  std::vector<Section> sections_;
};

struct Numerics {
  std::optional<double> dt;  // default_dt() when absent
  double horizon = 50.0;
  int quad_panels = kDefaultQuadPanels;
  double alpha = 0.5;
  double slack = 1e-3;
  std::optional<double> x_max;  // 10 max(sup initial data, 1) when absent
  std::size_t scan_points = 4097;
  double scan_tol = 1e-9;
  double fate_tol = 1e-3;
  double box_tol = 1e-9;
  double extinction = 1e-10;
  double blowup = 1e12;
  double convergence_tol = 1e-9;
  bool detect_convergence = true;
  bool prune_history = false;
};

struct Outputs {
  std::string trajectory;  // empty: <name>.csv
  std::string report;      // empty: <name>.json
  std::size_t stride = 10;
};

struct RunConfig {
  std::string name;
  ConfigDocument source;
  SystemSpec system;  // validated, with monotonicity certificates
  Numerics numerics;
  Outputs outputs;
  double x_max = 0.0;  // validation range actually used
};

/// Builds and validates a config. Every ValidationError carries the
/// offending key as "section.key".
RunConfig build_config(const ConfigDocument& doc, std::string name);

/// Reads, parses and validates a file; the name is the file stem.
RunConfig load_config(const std::filesystem::path& path);

ConfigDocument read_document(const std::filesystem::path& path);

}  // namespace coopdelay
