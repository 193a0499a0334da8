#include "lemons/market.hpp"

#include <doctest.h>

#include <random>

using namespace lemons;

namespace {

MarketInstance cost_instance(Poly c, bool bottom = false) {
  return MarketInstance(uniform_density(), ScalarFn(PiecewisePoly::single(std::move(c)), FnKind::Cost, bottom), bottom);
}

/// Brute force over every candidate price θ-mean of a cost-prefix; independent of the library scan.
std::vector<double> fixed_points(const std::vector<double>& types, const std::vector<double>& w,
                                 const std::vector<double>& costs) {
  std::vector<double> out;
  for (std::size_t k = 0; k < types.size(); ++k) {
    const double p_cut = costs[k];
    double mass = 0, mom = 0;
    for (std::size_t i = 0; i < types.size(); ++i)
      if (costs[i] <= p_cut) {
        mass += w[i];
        mom += w[i] * types[i];
      }
    const double p = mom / mass;
    // p is a fixed point iff exactly the types with c ≤ p are the ones averaged
    bool same = true;
    for (std::size_t i = 0; i < types.size(); ++i) same = same && ((costs[i] <= p) == (costs[i] <= p_cut));
    if (same && p >= p_cut) out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("auxiliary cost is the smaller of value and cost") {
  const auto inst = canonical_instance();
  CHECK(auxiliary_cost(inst, 0.2) == doctest::Approx(0.2));
  CHECK(auxiliary_cost(inst, 0.8) == doctest::Approx(0.65));
  CHECK_THROWS_AS(auxiliary_cost(inst, 1.5), DomainError);

  AtomMarket two{Eigen::Vector2d(0, 1), Eigen::Vector2d(0.75, 0.25), Eigen::Vector2d(0.125, 0.5)};
  CHECK(two.auxiliary_cost(1) == 0.5);
  const auto prof = find_crossings(inst);
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0, a = auxiliary_cost(inst, t);
    CHECK(a <= t);
    CHECK(a <= inst.cost(t));
    CHECK(a == (t < 0.5 ? t : inst.cost(t)));
  }
}

TEST_CASE("crossings and regimes") {
  const auto canon = find_crossings(canonical_instance());
  REQUIRE(canon.crossings.size() == 1);
  CHECK(canon.crossings[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(canon.regime == Regime::GainsAtTop);
  CHECK(canon.theta_star() == doctest::Approx(0.5));

  const auto bottom = find_crossings(cost_instance(Poly({0.0, 0.5, 1.0}), true));
  REQUIRE(bottom.crossings.size() == 1);
  CHECK(bottom.crossings[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(bottom.regime == Regime::GainsAtBottom);

  // three sign changes of c − θ at 0.2, 0.5, 0.55
  const Poly cubic = Poly({0.0, 1.0}) - Poly({-0.2, 1.0}) * Poly({-0.5, 1.0}) * Poly({-0.55, 1.0});
  const auto inst = cost_instance(cubic);
  const auto multi = find_crossings(inst);
  CHECK(multi.regime == Regime::MultiCrossing);
  REQUIRE(multi.blocks.size() == 4);
  for (const auto& b : multi.blocks)
    for (double t = b.range.lo + 1e-4; t < b.range.hi; t += 1e-4) CHECK((inst.cost(t) < t) == b.efficient);
  for (double r : multi.crossings) {
    CHECK(std::abs(inst.cost(r) - r) <= 1e-10);
    CHECK((inst.cost(r - 1e-6) - (r - 1e-6)) * (inst.cost(r + 1e-6) - (r + 1e-6)) < 0);
  }

  // c − θ = (θ − 1/2)²/2 touches the diagonal without crossing
  CHECK_THROWS_AS(find_crossings(cost_instance(Poly({0.125, 0.5, 0.5}))), DegenerateTangencyError);
}

TEST_CASE("primitive validation") {
  CHECK_THROWS_AS(ScalarFn(PiecewisePoly::single(Poly({2.0})), FnKind::Density), ValidationError);
  CHECK_THROWS_AS(ScalarFn(PiecewisePoly::single(Poly({0.5, -0.4})), FnKind::Cost), ValidationError);
  CHECK_THROWS_AS(ScalarFn(PiecewisePoly::single(Poly({0.0, 0.5})), FnKind::Cost), ValidationError);
  CHECK_NOTHROW(ScalarFn(PiecewisePoly::single(Poly({0.0, 0.5})), FnKind::Cost, true));
  // kink at the knot
  const PiecewisePoly kinked({0.0, 0.5, 1.0}, {Poly({0.2, 0.4}), Poly({0.1, 0.6})});
  CHECK_THROWS_AS(ScalarFn(kinked, FnKind::Cost), ValidationError);
  // knots must span [0, 1]
  CHECK_THROWS_AS(ScalarFn(PiecewisePoly::single(Poly({0.2, 0.4}), 0.0, 0.9), FnKind::Cost), ValidationError);
}

TEST_CASE("instance integrals are exact") {
  // f = 1/2 + θ, c = θ + θ²: ∫θ f over [0,1] = 7/12, ∫c f = 1
  MarketInstance inst(ScalarFn(PiecewisePoly::single(Poly({0.5, 1.0})), FnKind::Density),
                      ScalarFn(PiecewisePoly::single(Poly({0.0, 1.0, 1.0})), FnKind::Cost, true), true);
  CHECK(inst.mass(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(inst.moment(0.0, 1.0) == doctest::Approx(7.0 / 12));
  CHECK(inst.cost_moment(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(inst.inverse_cost(0.75) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(inst.inverse_cost_slope(0.75) == doctest::Approx(0.5));
}

TEST_CASE("equilibrium price of the two-type posteriors") {
  const std::vector<double> costs{0.125, 0.5};
  const auto s1 = equilibrium_price(Posterior({0.0, 1.0}, {7.0 / 8, 1.0 / 8}), costs);
  CHECK_FALSE(s1.trade);
  CHECK(s1.price == 0.0);
  const auto s2 = equilibrium_price(Posterior({0.0, 1.0}, {0.5, 0.5}), costs);
  CHECK(s2.trade);
  CHECK(s2.price == doctest::Approx(0.5));

  const auto inst = canonical_instance();
  const auto single = equilibrium_price(inst, Posterior({0.8}, {1.0}));
  CHECK(single.trade);
  CHECK(single.price == doctest::Approx(0.8));
  CHECK_FALSE(equilibrium_price(inst, Posterior({0.3}, {1.0})).trade);
}

TEST_CASE("equilibrium price is the largest fixed point") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(u(rng) * 5);
    std::vector<double> types(k), w(k), costs(k);
    double total = 0;
    for (int i = 0; i < k; ++i) {
      types[i] = u(rng);
      costs[i] = 0.1 + 0.8 * u(rng);
      w[i] = 0.05 + u(rng);
      total += w[i];
    }
    for (double& x : w) x /= total;
    const auto res = equilibrium_price(Posterior(types, w), costs);
    const auto fps = fixed_points(types, w, costs);
    if (fps.empty()) {
      CHECK_FALSE(res.trade);
      continue;
    }
    REQUIRE(res.trade);
    CHECK(res.price == doctest::Approx(*std::max_element(fps.begin(), fps.end())).epsilon(1e-10));
    CHECK(res.fixed_points.size() == fps.size());
  }
}

TEST_CASE("posteriors induced by a conditional signal") {
  AtomMarket two{Eigen::Vector2d(0, 1), Eigen::Vector2d(0.75, 0.25), Eigen::Vector2d(0.125, 0.5)};
  Eigen::Matrix2d cond;
  cond << 7.0 / 9, 2.0 / 9, 1.0 / 3, 2.0 / 3;
  const auto out = induced_posteriors(two, cond);
  REQUIRE(out.size() == 2);
  CHECK(out[0].probability == doctest::Approx(2.0 / 3));
  CHECK(out[1].probability == doctest::Approx(1.0 / 3));
  CHECK(out[0].posterior->mean() == doctest::Approx(0.125));
  CHECK(out[1].posterior->mean() == doctest::Approx(0.5));
}

TEST_CASE("assumption report") {
  const auto inst = canonical_instance();
  const auto ok = check_assumptions(inst, 0.25);
  CHECK(ok.a1);
  CHECK(ok.a2);
  CHECK(ok.a3);
  CHECK_FALSE(check_assumptions(inst, 1e-10).a2);
  CHECK_FALSE(check_assumptions(inst, std::nullopt).a2);
  CHECK(cost_cutoff(inst, 0.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(cost_cutoff(inst, 1.0) == doctest::Approx(0.0));
  CHECK(cost_cutoff(inst, 0.5) == doctest::Approx(1.0 / 6).epsilon(1e-10));
}
