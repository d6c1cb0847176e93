#include "coopdelay/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string line_key(int line) { return "line " + std::to_string(line); }

// Keys accepted per section; kernel sub-keys are matched by prefix.
const std::vector<std::string> kSystemKeys = {"f1", "f2", "g1", "g2", "r1", "r2", "k1", "k2", "phi", "psi"};
const std::vector<std::string> kKernelSubkeys = {"lag", "max_lag", "unbounded", "atoms", "density", "density_lag"};
const std::vector<std::string> kNumericsKeys = {
    "dt",       "horizon", "quad_panels", "alpha",  "slack",           "x_max",         "scan_points", "scan_tol",
    "fate_tol", "box_tol", "extinction",  "blowup", "convergence_tol", "detect_convergence", "prune_history"};
const std::vector<std::string> kOutputsKeys = {"trajectory", "report", "stride"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool known_key(const std::string& section, const std::string& key) {
  if (section == "system") {
    if (contains(kSystemKeys, key)) return true;
    const auto dot = key.find('.');
    return dot != std::string::npos && (key.substr(0, dot) == "k1" || key.substr(0, dot) == "k2") &&
           contains(kKernelSubkeys, key.substr(dot + 1));
  }
  if (section == "numerics") return contains(kNumericsKeys, key);
  if (section == "outputs") return contains(kOutputsKeys, key);
  return false;
}

class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  const ConfigDocument::Entry* raw(const char* section, const std::string& key) const {
    return doc_.find(section, key);
  }

  std::optional<std::string> text(const char* section, const std::string& key) const {
    const auto* e = raw(section, key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<double> number(const char* section, const std::string& key) const {
    const auto* e = raw(section, key);
    if (!e) return std::nullopt;
    double v = 0.0;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last || !std::isfinite(v)) {
      throw ValidationError(full(section, key), "expected a number, got '" + e->value + "'");
    }
    return v;
  }

  std::optional<double> positive(const char* section, const std::string& key) const {
    const auto v = number(section, key);
    if (v && !(*v > 0.0)) throw ValidationError(full(section, key), "must be positive");
    return v;
  }

  std::optional<std::size_t> count(const char* section, const std::string& key) const {
    const auto v = positive(section, key);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || *v > 1e9) throw ValidationError(full(section, key), "must be a positive integer");
    return static_cast<std::size_t>(*v);
  }

  std::optional<bool> flag(const char* section, const std::string& key) const {
    const auto* e = raw(section, key);
    if (!e) return std::nullopt;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    throw ValidationError(full(section, key), "expected true or false, got '" + e->value + "'");
  }

  Expression expr(const char* section, const std::string& key, const char* var, const char* fallback) const {
    const auto src = text(section, key);
    if (!src && !fallback) throw ValidationError(full(section, key), "missing");
    return parse_keyed(full(section, key), src ? *src : fallback, var);
  }

  static Expression parse_keyed(const std::string& key, const std::string& src, const char* var) {
    try {
      return parse(src, var);
    } catch (const ParseError& e) {
      throw ValidationError(key, "parse error at column " + std::to_string(e.position()) + ": " + e.what());
    }
  }

  static std::string full(const char* section, const std::string& key) { return std::string(section) + "." + key; }

 private:
  const ConfigDocument& doc_;
};

double span_at(const Expression& lag, double t) { return t - lag.eval(t); }

// The largest lag t - h(t) when it is constant on the grid, else none.
std::optional<double> constant_span(const DelayKernel& k, double horizon) {
  std::vector<const Expression*> lags;
  std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, GeneralMixture>) {
          for (const auto& a : shape.atoms) lags.push_back(&a.lag);
          if (shape.density) lags.push_back(&shape.density->lag);
        } else {
          lags.push_back(&shape.lag);
        }
      },
      k.shape);
  double hi = 0.0;
  for (const Expression* lag : lags) {
    const double s0 = span_at(*lag, 0.0);
    for (int i = 1; i <= 200; ++i) {
      const double s = span_at(*lag, horizon * i / 200.0);
      if (std::fabs(s - s0) > 1e-12 * std::max(1.0, std::fabs(s0))) return std::nullopt;
    }
    hi = std::max(hi, s0);
  }
  return hi;
}

// "w @ lag; w @ lag"
std::vector<Atom> parse_atoms(const std::string& key, const std::string& text) {
  std::vector<Atom> atoms;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (trim(item).empty()) continue;
    const auto at = item.find('@');
    if (at == std::string::npos) throw ValidationError(key, "atom '" + trim(item) + "' must read 'weight @ lag'");
    const std::string w = trim(item.substr(0, at));
    double weight = 0.0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
    if (ec != std::errc() || p != w.data() + w.size()) throw ValidationError(key, "bad atom weight '" + w + "'");
    atoms.push_back(Atom{Reader::parse_keyed(key, trim(item.substr(at + 1)), "t"), weight});
  }
  if (atoms.empty()) throw ValidationError(key, "no atoms");
  return atoms;
}

DelayKernel read_kernel(const Reader& r, const std::string& k, double horizon) {
  const std::string family = r.text("system", k).value_or("none");
  const std::string lag_key = k + ".lag";
  auto lag = [&] { return r.expr("system", lag_key, "t", nullptr); };

  DelayKernel kernel = DelayKernel::point(parse("t", "t"));
  if (family == "none") {
    if (r.raw("system", lag_key)) throw ValidationError("system." + lag_key, "not used by kernel 'none'");
  } else if (family == "point") {
    kernel = DelayKernel::point(lag());
  } else if (family == "uniform") {
    kernel = DelayKernel::uniform(lag());
  } else if (family == "triangular") {
    kernel = DelayKernel::triangular(lag());
  } else if (family == "mixture") {
    GeneralMixture m;
    if (const auto atoms = r.text("system", k + ".atoms")) m.atoms = parse_atoms("system." + k + ".atoms", *atoms);
    if (r.raw("system", k + ".density")) {
      m.density = AgeDensity{r.expr("system", k + ".density", "a", nullptr),
                             r.expr("system", k + ".density_lag", "t", nullptr)};
    }
    if (m.atoms.empty() && !m.density) throw ValidationError("system." + k, "mixture needs atoms or a density");
    kernel = DelayKernel{std::move(m), std::nullopt, false};
  } else {
    throw ValidationError("system." + k, "unknown kernel '" + family + "' (none, point, uniform, triangular, mixture)");
  }

  kernel.max_lag = r.positive("system", k + ".max_lag");
  if (family == "none") kernel.max_lag = 0.0;
  kernel.unbounded = r.flag("system", k + ".unbounded").value_or(false);
  if (!kernel.max_lag && !kernel.unbounded) {
    try {
      kernel.max_lag = constant_span(kernel, horizon);
    } catch (const DomainError& e) {
      throw ValidationError("system." + k, std::string("cannot evaluate the lag: ") + e.what());
    }
  }
  return kernel;
}

Numerics read_numerics(const Reader& r) {
  Numerics n;
  n.dt = r.positive("numerics", "dt");
  n.horizon = r.positive("numerics", "horizon").value_or(n.horizon);
  if (const auto q = r.count("numerics", "quad_panels")) n.quad_panels = static_cast<int>(*q);
  n.alpha = r.positive("numerics", "alpha").value_or(n.alpha);
  if (!(n.alpha < 1.0)) throw ValidationError("numerics.alpha", "must lie in (0, 1)");
  n.slack = r.positive("numerics", "slack").value_or(n.slack);
  if (!(n.slack < 1.0)) throw ValidationError("numerics.slack", "must lie in (0, 1)");
  n.x_max = r.positive("numerics", "x_max");
  n.scan_points = r.count("numerics", "scan_points").value_or(n.scan_points);
  n.scan_tol = r.positive("numerics", "scan_tol").value_or(n.scan_tol);
  n.fate_tol = r.positive("numerics", "fate_tol").value_or(n.fate_tol);
  n.box_tol = r.positive("numerics", "box_tol").value_or(n.box_tol);
  n.extinction = r.number("numerics", "extinction").value_or(n.extinction);
  if (n.extinction < 0.0) throw ValidationError("numerics.extinction", "must be non-negative (0 disables)");
  n.blowup = r.positive("numerics", "blowup").value_or(n.blowup);
  n.convergence_tol = r.positive("numerics", "convergence_tol").value_or(n.convergence_tol);
  n.detect_convergence = r.flag("numerics", "detect_convergence").value_or(n.detect_convergence);
  n.prune_history = r.flag("numerics", "prune_history").value_or(n.prune_history);
  return n;
}

std::string prefixed(const std::string& key) {
  if (key == "horizon" || key == "x_max") return "numerics." + key;
  return "system." + key;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text) {
  ConfigDocument doc;
  std::string current;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    // Strip a comment that starts outside quotes.
    std::string line;
    bool in_quote = false;
    for (const char c : raw) {
      if (c == '"') in_quote = !in_quote;
      if (c == '#' && !in_quote) break;
      line += c;
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(line_key(line_no), "unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current != "system" && current != "numerics" && current != "outputs") {
        throw ValidationError(line_key(line_no), "unknown section [" + current + "]");
      }
      doc.section(current);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(line_key(line_no), "expected 'key = value'");
    if (current.empty()) throw ValidationError(line_key(line_no), "key outside of a section");
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.line = line_no;
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"' || value.find('"', 1) != value.size() - 1) {
        throw ValidationError(current + "." + e.key, "unbalanced quotes");
      }
      value = value.substr(1, value.size() - 2);
      e.quoted = true;
    }
    e.value = value;
    if (e.key.empty()) throw ValidationError(line_key(line_no), "empty key");
    if (!known_key(current, e.key)) throw ValidationError(current + "." + e.key, "unknown key");
    if (doc.find(current, e.key)) throw ValidationError(current + "." + e.key, "duplicate key");
    if (e.value.empty()) throw ValidationError(current + "." + e.key, "empty value");
    doc.section(current).entries.push_back(std::move(e));
  }
  return doc;
}

const ConfigDocument::Entry* ConfigDocument::find(std::string_view section, std::string_view key) const {
  for (const auto& s : sections_) {
    if (s.name != section) continue;
    for (const auto& e : s.entries) {
      if (e.key == key) return &e;
    }
  }
  return nullptr;
}

ConfigDocument::Section& ConfigDocument::section(const std::string& name) {
  for (auto& s : sections_) {
    if (s.name == name) return s;
  }
  sections_.push_back(Section{name, {}});
  return sections_.back();
}

void ConfigDocument::set(const std::string& section_name, const std::string& key, const std::string& value,
                         bool quoted) {
  Section& s = section(section_name);
  for (auto& e : s.entries) {
    if (e.key == key) {
      e.value = value;
      e.quoted = quoted;
      return;
    }
  }
  s.entries.push_back(Entry{key, value, quoted, 0});
}

std::string ConfigDocument::to_text() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : sections_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << s.name << "]\n";
    for (const auto& e : s.entries) {
      os << e.key << " = ";
      if (e.quoted) {
        os << '"' << e.value << '"';
      } else {
        os << e.value;
      }
      os << '\n';
    }
  }
  return os.str();
}

RunConfig build_config(const ConfigDocument& doc, std::string name) {
  const Reader r(doc);
  Numerics numerics = read_numerics(r);

  Outputs outputs;
  outputs.trajectory = r.text("outputs", "trajectory").value_or("");
  outputs.report = r.text("outputs", "report").value_or("");
  outputs.stride = r.count("outputs", "stride").value_or(outputs.stride);

  SystemSpec spec{ProductionFunction(r.expr("system", "f1", "x", nullptr)),
                  ProductionFunction(r.expr("system", "f2", "x", nullptr)),
                  Modulation(r.expr("system", "g1", "x", "1")),
                  Modulation(r.expr("system", "g2", "x", "1")),
                  r.expr("system", "r1", "t", "1"),
                  r.expr("system", "r2", "t", "1"),
                  read_kernel(r, "k1", numerics.horizon),
                  read_kernel(r, "k2", numerics.horizon),
                  InitialFunction(r.expr("system", "phi", "t", nullptr)),
                  InitialFunction(r.expr("system", "psi", "t", nullptr))};

  double x_max = 0.0;
  if (numerics.x_max) {
    x_max = *numerics.x_max;
  } else {
    InitialBounds b;
    try {
      b = initial_bounds(spec, numerics.horizon);
    } catch (const DomainError& e) {
      throw ValidationError("system.phi", std::string("initial data cannot be evaluated: ") + e.what());
    }
    const double sup = std::max({b.sup_phi, b.sup_psi, 1.0});
    if (!std::isfinite(sup)) throw ValidationError("system.phi", "initial data is unbounded");
    x_max = 10.0 * sup;
  }

  SystemSpec validated = [&] {
    try {
      return validate_system(spec, numerics.horizon, x_max);
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      throw ValidationError(prefixed(e.key()), what.substr(e.key().size() + 2));
    }
  }();
  return RunConfig{std::move(name), doc, std::move(validated), numerics, outputs, x_max};
}

ConfigDocument read_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ConfigDocument::parse(ss.str());
}

RunConfig load_config(const std::filesystem::path& path) {
  return build_config(read_document(path), path.stem().string());
}

}  // namespace coopdelay
