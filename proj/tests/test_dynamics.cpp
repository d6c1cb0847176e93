#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "coopdelay/errors.hpp"
#include "systems.hpp"

using namespace coopdelay;
using namespace testsys;

namespace {

class FnHistory final : public ScalarHistory {
 public:
  explicit FnHistory(std::function<double(double)> u) : u_(std::move(u)) {}
  double at(double s) const override { return u_(s); }

 private:
  std::function<double(double)> u_;
};

std::string key_of(const SystemSpec& s) {
  try {
    validate_system(s, 10.0, 10.0);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("right-hand side at equilibria and simple states") {
  const FnHistory two([](double) { return 2.0; });
  const auto win = affine_window("2", "2");
  for (const double t : {0.0, 0.7, 3.0}) {
    const Derivative d = rhs(win, t, 2.0, 2.0, two, two);
    CHECK(std::fabs(d.dx) < 1e-14);
    CHECK(std::fabs(d.dy) < 1e-14);
  }

  const FnHistory one([](double) { return 1.0; });
  const Derivative d2 = rhs(halving_pair(), 0.0, 1.0, 1.0, one, one);
  CHECK(d2.dx == -0.5);
  CHECK(d2.dy == -0.5);

  const FnHistory four([](double) { return 4.0; });
  const Derivative d5 = rhs(root_logistic(point(1.0), point(1.0), "4", "4"), 2.0, 4.0, 4.0, four, four);
  CHECK(d5.dx == 0.0);
  CHECK(d5.dy == 0.0);
}

TEST_CASE("rate divergence heuristic") {
  const auto r1 = integrate_rate(t_expr("2+sin(t)"), 100.0);
  CHECK(r1.divergent);
  CHECK(r1.integral == doctest::Approx(200.0 + 1.0 - std::cos(100.0)).epsilon(1e-6));
  const auto r2 = integrate_rate(t_expr("2/(exp(2*t)+0.5)"), 100.0);
  CHECK(!r2.divergent);
  // Closed form: int_0^inf 2/(e^{2t}+1/2) dt = 2 ln(3/2).
  CHECK(r2.integral == doctest::Approx(2.0 * std::log(1.5)).epsilon(1e-6));
  const auto r3 = integrate_rate(t_expr("0"), 100.0);
  CHECK(!r3.divergent);
  CHECK(r3.integral == 0.0);
  const auto rep = check_a5(affine_window("1", "1"), 100.0);
  CHECK(rep.both_divergent());
}

TEST_CASE("scaling the rates scales the slopes exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.1, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double c = std::ldexp(1.0, static_cast<int>(pos(rng)));  // powers of two keep products exact
    char r[64];
    std::snprintf(r, sizeof r, "%.17g*(2+sin(t))", c);
    const auto base = make_system("sqrt(x)+2", "x^2+x", "2+sin(t)", "2+sin(t)", uniform(1.0), point(0.5), "1", "1",
                                  "x", "1+x");
    const auto scaled = make_system("sqrt(x)+2", "x^2+x", r, r, uniform(1.0), point(0.5), "1", "1", "x", "1+x");
    const double ph = pos(rng);
    const FnHistory u([ph](double s) { return 1.0 + 0.5 * std::sin(s + ph); });
    const double t = pos(rng);
    const double x = pos(rng);
    const double y = pos(rng);
    const Derivative a = rhs(base, t, x, y, u, u);
    const Derivative b = rhs(scaled, t, x, y, u, u);
    CHECK(b.dx == c * a.dx);
    CHECK(b.dy == c * a.dy);
  }
}

TEST_CASE("sign structure: below the feedback level the state grows") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(0.1, 3.0);
  const auto s = make_system("1+x/2", "sqrt(x)+2", "1+t", "2", uniform(1.0), triangular(2.0), "1", "1", "x", "1");
  for (int i = 0; i < 100; ++i) {
    const double level = pos(rng);
    const FnHistory u([level](double) { return level; });
    const double x = 0.5 * (1.0 + level / 2.0);
    const double y = 0.5 * (std::sqrt(level) + 2.0);
    const Derivative d = rhs(s, pos(rng), x, y, u, u);
    CHECK(d.dx > 0.0);
    CHECK(d.dy > 0.0);
  }
}

TEST_CASE("validation names the offending component") {
  CHECK(key_of(affine_window("1", "1")) == "");
  CHECK(key_of(make_system("abs(x-1)", "x", "1", "1", point(1), point(1), "1", "1")) == "f1");
  CHECK(key_of(make_system("x", "x-1", "1", "1", point(1), point(1), "1", "1")) == "f2");
  CHECK(key_of(make_system("x", "x", "sin(t)", "1", point(1), point(1), "1", "1")) == "r1");
  CHECK(key_of(make_system("x", "x", "1", "1", DelayKernel::point(t_expr("t+1")), point(1), "1", "1")) == "k1");
  CHECK(key_of(make_system("x", "x", "1", "1", point(1), point(1), "t", "1")) == "phi");
  CHECK(key_of(make_system("x", "x", "1", "1", point(1), point(1), "1", "-1-t")) == "psi");
  CHECK(key_of(make_system("x", "x", "1", "1", point(1), point(1), "1", "1", "x-1")) == "g1");

  const auto ok = validate_system(affine_window("1", "1"), 10.0, 10.0);
  REQUIRE(ok.f1.certificate().has_value());
  CHECK(ok.f1.certificate()->x_max == 10.0);
}

TEST_CASE("support geometry helpers") {
  const auto s = make_system("x", "x", "1", "1", point(2.0), uniform(0.5), "1", "1");
  CHECK(history_floor(s, 10.0) == -2.0);
  CHECK(max_delay_span(s, 10.0) == 2.0);
  CHECK(min_delay_span(s, 10.0) == 0.5);
  const double t1 = first_nonnegative_support_time(s, 10.0);
  CHECK(t1 >= 2.0);
  CHECK(t1 < 2.01);
  CHECK(first_nonnegative_support_time(halving_pair(), 10.0) == 0.0);

  const auto ib = initial_bounds(make_system("x", "x", "1", "1", point(1.0), point(1.0), "2+t", "3"), 10.0);
  CHECK(ib.inf_phi == doctest::Approx(1.0));
  CHECK(ib.sup_phi == 2.0);
  CHECK(ib.sup_psi == 3.0);
}
