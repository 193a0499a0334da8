#include "lemons/matching.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace lemons;

namespace {

/// First integral of the reference instance's matching ODE; constant along every solution.
double first_integral(double x, double a) {
  const double u = a - 0.5, v = x - 0.5;
  return (u - 2.0 * v) * (u + v) * (u + v);
}

}  // namespace

TEST_CASE("matching slope by hand") {
  const auto inst = canonical_instance();
  // b(0.6) = 0.7, b' = 2
  CHECK(ode_rhs(inst, 0.6, 0.4) == doctest::Approx(-1.0));
  CHECK(ode_rhs(inst, 0.75, 0.25) == doctest::Approx(-1.0));
  CHECK(ode_rhs(inst, 0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(ode_rhs(inst, 0.6, 0.6), SingularityError);
}

TEST_CASE("lower curve on the reference instance is a = 1 - x") {
  const auto inst = canonical_instance();
  const MatchingCurve g = solve_g2(inst, 0.5, 1.0);
  CHECK(g.means().lo == doctest::Approx(0.5));
  CHECK(g.means().hi == doctest::Approx(0.75));
  CHECK(g.a(0.5) == doctest::Approx(0.5));
  CHECK(g.types().lo == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(g.residual() <= 1e-7);

  double err = 0, drift = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = 0.5 + 0.25 * i / 1000.0;
    err = std::max(err, std::abs(g.a(x) - (1.0 - x)));
    drift = std::max(drift, std::abs(first_integral(x, g.a(x))));
  }
  CHECK(err <= 1e-7);
  CHECK(drift <= 1e-8);

  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.node_a()[i] < g.node_a()[i - 1]);
  CHECK(g.x_of(0.3) == doctest::Approx(0.7).epsilon(1e-9));

  // near the crossing the slope is the analytic seed 1 − b'(θ*) = −1
  CHECK(std::abs(g.slope(0.5 + 1e-5) + 1.0) <= 1e-4);
}

TEST_CASE("pooled means balance along the curve") {
  const auto inst = canonical_instance();
  const MatchingCurve g = solve_g2(inst, 0.5, 1.0);
  for (std::size_t i = 1; i + 1 < g.size(); i += 17) {
    const double x = g.node_x()[i], a = g.node_a()[i];
    const double b = inst.inverse_cost(x);
    const double u = inst.density(a) * std::abs(g.node_slope()[i]);
    const double v = inst.density(b) * inst.inverse_cost_slope(x);
    CHECK(std::abs((u * a + v * b) / (u + v) - x) <= 1e-7);
  }
}

TEST_CASE("upper curve from the bottom type") {
  const auto inst = canonical_instance();
  const MatchingCurve g1 = solve_g1(inst, 0.0, 0.5, 1.0);
  const double bar = 0.5 - std::pow(2.0, -4.0 / 3.0);
  CHECK(g1.a(0.5) == doctest::Approx(bar).epsilon(1e-6));
  CHECK(g1.a(0.75) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g1.a(0.5) < solve_g2(inst, 0.5, 1.0).a(0.75));
  for (std::size_t i = 0; i < g1.size(); i += 13)
    CHECK(std::abs(first_integral(g1.node_x()[i], g1.node_a()[i]) + 1.0 / 16) <= 1e-8);

  const MatchingCurve gb = solve_g1(inst, 1.0 / 6, 0.5, 1.0);
  CHECK(gb.a(0.5) > bar);
  CHECK(gb.a(0.5) < 0.5);
  for (std::size_t i = 1; i < gb.size(); ++i) CHECK(gb.node_a()[i] < gb.node_a()[i - 1]);
}

TEST_CASE("tighter tolerances move the endpoints by at most 1e-8") {
  const auto inst = canonical_instance();
  CurveOptions tight;
  tight.rel_tol = 5e-11;
  tight.abs_tol = 5e-13;
  CHECK(std::abs(solve_g2(inst, 0.5, 1.0).types().lo - solve_g2(inst, 0.5, 1.0, tight).types().lo) <= 1e-8);
  CHECK(std::abs(solve_g1(inst, 0.0, 0.5, 1.0).a(0.5) - solve_g1(inst, 0.0, 0.5, 1.0, tight).a(0.5)) <= 1e-8);
}

TEST_CASE("escape when full trade is feasible") {
  // mean type 0.633 exceeds c(1) = 0.6, so every type could trade in one pool
  MarketInstance inst(ScalarFn(PiecewisePoly::single(Poly({0.2, 1.6})), FnKind::Density),
                      ScalarFn(PiecewisePoly::single(Poly({0.4, 0.2})), FnKind::Cost));
  CHECK_THROWS_AS(solve_g2(inst, 0.5, 1.0), EscapeError);
  CHECK_THROWS_AS(solve_g1(inst, 0.6, 0.5, 1.0), DomainError);
}

TEST_CASE("curve export") {
  const auto inst = canonical_instance();
  std::ostringstream os;
  write_curve_csv(os, inst, solve_g2(inst, 0.5, 1.0), "g2");
  const std::string text = os.str();
  CHECK(text.rfind("g2,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') > 100);
}
