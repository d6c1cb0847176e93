#include <doctest.h>

#include <cmath>
#include <string>

#include "coopdelay/analysis.hpp"
#include "coopdelay/errors.hpp"
#include "coopdelay/presets.hpp"

using namespace coopdelay;

namespace {

PredictedFate fate_of_preset(const std::string& name, const PresetParams& p) {
  const SystemSpec s = instantiate_preset(name, p);
  return classify(s.f1, s.f2, 100.0).fate;
}

std::string failing_key(const std::string& name, const PresetParams& p) {
  try {
    instantiate_preset(name, p);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("catalog") {
  const auto& cat = preset_catalog();
  REQUIRE(cat.size() == 3);
  CHECK(cat[0].name == "tanh");
  CHECK(cat[1].name == "lotka-volterra");
  CHECK(cat[2].name == "gopalsamy");
  for (const auto& p : cat) CHECK_NOTHROW(instantiate_preset(p.name));
}

TEST_CASE("tanh preset in the normalized form") {
  const SystemSpec s = instantiate_preset("tanh", {{"c1", "3"}, {"mu1", "2"}});
  CHECK(s.f1(0.7) == doctest::Approx(1.5 * std::tanh(0.7)).epsilon(1e-15));
  CHECK(s.r1.eval(4.0) == 2.0);
  CHECK(s.f2(0.7) == doctest::Approx(2.0 * std::tanh(0.7)).epsilon(1e-15));

  double x = 1.0;
  for (int i = 0; i < 200; ++i) x = 2.0 * std::tanh(2.0 * std::tanh(x));
  const PredictedFate f = fate_of_preset("tanh", {});
  REQUIRE(f.kind == FateKind::ToEquilibrium);
  CHECK(f.K == doctest::Approx(x).epsilon(1e-10));
  CHECK(f.f2K == doctest::Approx(2.0 * std::tanh(x)).epsilon(1e-10));

  CHECK(fate_of_preset("tanh", {{"c1", "1"}, {"c2", "1"}}).kind == FateKind::ToZero);
  CHECK(fate_of_preset("tanh", {{"c1", "0.5"}, {"c2", "1.5"}}).kind == FateKind::ToZero);
  CHECK(fate_of_preset("tanh", {{"c1", "0.5"}, {"c2", "2.5"}}).kind == FateKind::ToEquilibrium);
}

TEST_CASE("Lotka-Volterra preset") {
  // (1, 1) solves x = (1 + y)/2, y = (1 + x)/2.
  const PredictedFate eq = fate_of_preset("lotka-volterra", {});
  REQUIRE(eq.kind == FateKind::ToEquilibrium);
  CHECK(eq.K == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(eq.f2K == doctest::Approx(1.0).epsilon(1e-10));

  const PresetParams strong{{"a1", "1"}, {"a2", "1"}, {"b1", "2"}, {"b2", "2"}};
  CHECK(fate_of_preset("lotka-volterra", strong).kind == FateKind::ToInfinity);

  // Closed form (a2 A1 + b1 A2)/(a1 a2 - b1 b2) for A = (1, 2), a = (3, 2), b = (1, 1).
  const PresetParams p{{"A1", "1"}, {"A2", "2"}, {"a1", "3"}, {"a2", "2"}, {"b1", "1"}, {"b2", "1"}};
  const PredictedFate f = fate_of_preset("lotka-volterra", p);
  REQUIRE(f.kind == FateKind::ToEquilibrium);
  CHECK(f.K == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(f.f2K == doctest::Approx(1.4).epsilon(1e-10));

  const SystemSpec s = instantiate_preset("lotka-volterra", p);
  CHECK(s.g1(0.3) == 0.3);
  CHECK(s.r1.eval(0.0) == 3.0);
  CHECK(s.f1(2.0) == doctest::Approx(1.0));
}

TEST_CASE("Gopalsamy preset") {
  // Symmetric K = 1, alpha = 2: x = (1 + 2x)/(1 + x), the golden ratio.
  const PredictedFate f = fate_of_preset("gopalsamy", {});
  REQUIRE(f.kind == FateKind::ToEquilibrium);
  CHECK(f.K == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-10));

  // Asymmetric: oracle by iterating x <- f1(f2(x)).
  const PresetParams p{{"K1", "0.5"}, {"alpha1", "3"}, {"K2", "2"}, {"alpha2", "2.5"}};
  auto f1 = [](double u) { return (0.5 + 3.0 * u) / (1.0 + u); };
  auto f2 = [](double u) { return (2.0 + 2.5 * u) / (1.0 + u); };
  double x = 1.0;
  for (int i = 0; i < 500; ++i) x = f1(f2(x));
  const PredictedFate g = fate_of_preset("gopalsamy", p);
  REQUIRE(g.kind == FateKind::ToEquilibrium);
  CHECK(g.K == doctest::Approx(x).epsilon(1e-10));
}

TEST_CASE("parameter ranges") {
  CHECK(failing_key("gopalsamy", {{"alpha1", "0.5"}}) == "param.alpha1");
  CHECK(failing_key("gopalsamy", {{"K2", "3"}}) == "param.alpha2");
  CHECK(failing_key("tanh", {{"mu2", "0"}}) == "param.mu2");
  CHECK(failing_key("tanh", {{"c1", "two"}}) == "param.c1");
  CHECK(failing_key("tanh", {{"gain", "2"}}) == "param.gain");
  CHECK(failing_key("lotka-volterra", {{"A1", "-1"}}) == "param.A1");
  CHECK(failing_key("lotka-volterra", {{"A1", "0"}}).empty());
  CHECK(failing_key("tanh", {{"kernel", "gamma"}}) == "param.kernel");
  CHECK(failing_key("logistic", {}) == "preset");
}

TEST_CASE("emitted configs pass the ordinary loader") {
  for (const auto& p : preset_catalog()) {
    for (const char* k : {"none", "point", "uniform", "triangular"}) {
      const ConfigDocument doc = preset_document(p.name, {{"kernel", k}, {"h2", "0.5"}});
      const ConfigDocument again = ConfigDocument::parse(doc.to_text());
      const RunConfig c = build_config(again, p.name);
      CHECK(c.system.f1(1.0) == instantiate_preset(p.name, {{"kernel", k}, {"h2", "0.5"}}).f1(1.0));
      if (std::string(k) != "none") CHECK(*c.system.k2.max_lag == doctest::Approx(0.5));
    }
  }
}
