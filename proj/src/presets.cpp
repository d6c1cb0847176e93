#include "coopdelay/presets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Args {
 public:
  Args(const Preset& p, const PresetParams& given) : preset_(p) {
    for (const auto& [k, v] : given) {
      const bool known = std::any_of(p.params.begin(), p.params.end(), [&](const PresetParam& q) { return q.name == k; });
      if (!known) throw ValidationError("param." + k, "not a parameter of preset '" + p.name + "'");
    }
    given_ = given;
  }

  std::string text(const std::string& k) const {
    if (const auto it = given_.find(k); it != given_.end()) return it->second;
    for (const auto& q : preset_.params) {
      if (q.name == k) return q.default_value;
    }
    throw std::logic_error("preset slot " + k + " missing");
  }

  double number(const std::string& k) const {
    const std::string s = text(k);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      throw ValidationError("param." + k, "expected a number, got '" + s + "'");
    }
    return v;
  }

  double positive(const std::string& k) const {
    const double v = number(k);
    if (!(v > 0.0)) throw ValidationError("param." + k, "must be positive");
    return v;
  }

  double non_negative(const std::string& k) const {
    const double v = number(k);
    if (v < 0.0) throw ValidationError("param." + k, "must be non-negative");
    return v;
  }

 private:
  const Preset& preset_;
  PresetParams given_;
};

void add_kernels(ConfigDocument& doc, const Args& a) {
  const std::string family = a.text("kernel");
  if (family != "none" && family != "point" && family != "uniform" && family != "triangular") {
    throw ValidationError("param.kernel", "expected none, point, uniform or triangular");
  }
  for (const char* i : {"1", "2"}) {
    const std::string k = std::string("k") + i;
    const double h = a.non_negative(std::string("h") + i);
    if (family == "none" || h == 0.0) {
      doc.set("system", k, "none", true);
      continue;
    }
    doc.set("system", k, family, true);
    doc.set("system", k + ".lag", "t-" + num(h), true);
  }
}

void add_common(ConfigDocument& doc, const Args& a) {
  doc.set("system", "phi", num(a.positive("phi")), true);
  doc.set("system", "psi", num(a.positive("psi")), true);
  doc.set("numerics", "horizon", num(a.positive("horizon")), false);
}

const std::vector<PresetParam> kShared = {
    {"kernel", "point", "delay family: none, point, uniform, triangular"},
    {"h1", "1", "delay window of the x equation (0 for none)"},
    {"h2", "1", "delay window of the y equation (0 for none)"},
    {"phi", "1", "constant initial function for x"},
    {"psi", "1", "constant initial function for y"},
    {"horizon", "50", "integration horizon"},
};

std::vector<PresetParam> with_shared(std::vector<PresetParam> own) {
  own.insert(own.end(), kShared.begin(), kShared.end());
  return own;
}

struct Entry {
  Preset preset;
  std::function<void(ConfigDocument&, const Args&)> fill;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"tanh",
        "x' = c1 int tanh(y) dR1 - mu1 x, y' = c2 int tanh(x) dR2 - mu2 y",
        with_shared({{"c1", "2", "gain of the x equation"},
                     {"c2", "2", "gain of the y equation"},
                     {"mu1", "1", "decay rate of x"},
                     {"mu2", "1", "decay rate of y"}})},
       [](ConfigDocument& doc, const Args& a) {
         const double c1 = a.positive("c1"), c2 = a.positive("c2");
         const double mu1 = a.positive("mu1"), mu2 = a.positive("mu2");
         doc.set("system", "f1", num(c1) + "/" + num(mu1) + "*tanh(x)", true);
         doc.set("system", "f2", num(c2) + "/" + num(mu2) + "*tanh(x)", true);
         doc.set("system", "r1", num(mu1), true);
         doc.set("system", "r2", num(mu2), true);
       }},
      {{"lotka-volterra",
        "x' = x [A1 - a1 x + b1 int y dR1], y' = y [A2 - a2 y + b2 int x dR2]",
        with_shared({{"A1", "1", "intrinsic growth of x (>= 0)"},
                     {"A2", "1", "intrinsic growth of y (>= 0)"},
                     {"a1", "2", "self-limitation of x"},
                     {"a2", "2", "self-limitation of y"},
                     {"b1", "1", "benefit of y to x"},
                     {"b2", "1", "benefit of x to y"}})},
       [](ConfigDocument& doc, const Args& a) {
         const double A1 = a.non_negative("A1"), A2 = a.non_negative("A2");
         const double a1 = a.positive("a1"), a2 = a.positive("a2");
         const double b1 = a.positive("b1"), b2 = a.positive("b2");
         // r x [A - a x + b u] = (a r) x [(A + b u)/a - x]
         doc.set("system", "f1", "(" + num(A1) + "+" + num(b1) + "*x)/" + num(a1), true);
         doc.set("system", "f2", "(" + num(A2) + "+" + num(b2) + "*x)/" + num(a2), true);
         doc.set("system", "g1", "x", true);
         doc.set("system", "g2", "x", true);
         doc.set("system", "r1", num(a1), true);
         doc.set("system", "r2", num(a2), true);
       }},
      {{"gopalsamy",
        "x' = x [int (K1 + alpha1 y)/(1 + y) dR1 - x], y' = y [int (K2 + alpha2 x)/(1 + x) dR2 - y]",
        with_shared({{"K1", "1", "baseline of the x production (< alpha1)"},
                     {"K2", "1", "baseline of the y production (< alpha2)"},
                     {"alpha1", "2", "saturation level of the x production"},
                     {"alpha2", "2", "saturation level of the y production"}})},
       [](ConfigDocument& doc, const Args& a) {
         const double K1 = a.positive("K1"), K2 = a.positive("K2");
         const double al1 = a.positive("alpha1"), al2 = a.positive("alpha2");
         if (!(al1 > K1)) throw ValidationError("param.alpha1", "requires alpha1 > K1");
         if (!(al2 > K2)) throw ValidationError("param.alpha2", "requires alpha2 > K2");
         doc.set("system", "f1", "(" + num(K1) + "+" + num(al1) + "*x)/(1+x)", true);
         doc.set("system", "f2", "(" + num(K2) + "+" + num(al2) + "*x)/(1+x)", true);
         doc.set("system", "g1", "x", true);
         doc.set("system", "g2", "x", true);
       }},
  };
  return table;
}

}  // namespace

const std::vector<Preset>& preset_catalog() {
  static const std::vector<Preset> catalog = [] {
    std::vector<Preset> out;
    for (const auto& e : entries()) out.push_back(e.preset);
    return out;
  }();
  return catalog;
}

ConfigDocument preset_document(const std::string& name, const PresetParams& params) {
  for (const auto& e : entries()) {
    if (e.preset.name != name) continue;
    const Args args(e.preset, params);
    ConfigDocument doc;
    e.fill(doc, args);
    add_kernels(doc, args);
    add_common(doc, args);
    return doc;
  }
  throw ValidationError("preset", "unknown preset '" + name + "'");
}

SystemSpec instantiate_preset(const std::string& name, const PresetParams& params) {
  return build_config(preset_document(name, params), name).system;
}

}  // namespace coopdelay
