#include "lemons/lp.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace lemons;

namespace {

AtomMarket two_types() {
  AtomMarket m;
  m.types = Eigen::Vector2d(0.0, 1.0);
  m.masses = Eigen::Vector2d(0.75, 0.25);
  m.costs = Eigen::Vector2d(0.125, 0.5);
  return m;
}

bool has(const Eigen::VectorXd& v, double x) { return (v.array() - x).abs().minCoeff() <= 1e-14; }

}  // namespace

TEST_CASE("two-type program") {
  const auto atoms = two_types();
  const auto lp = build_lp(atoms, unit_volume());
  for (double x : {0.0, 0.125, 0.5, 1.0}) CHECK(has(lp.x_grid, x));
  // the high type's auxiliary cost is 1/2: it may not be pooled below that
  for (const auto& v : lp.vars)
    if (!v.reveal() && lp.types(v.i) == 1.0) CHECK(lp.x_grid(v.j) >= 0.5);

  const auto sol = solve_lp(lp);
  // best: pool 1/4 of the low type with all of the high type at mean 1/2
  CHECK(sol.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.dual_value == doctest::Approx(0.5).epsilon(1e-12));
  const auto ds = lp_signal(lp, sol);
  CHECK(check_feasibility(ds).ok(1e-12));
  double at_half = 0;
  for (const auto& c : ds.cells)
    if (std::abs(ds.x_grid(c.col) - 0.5) <= 1e-14) at_half += c.mass;
  CHECK(at_half == doctest::Approx(0.5));
  CHECK(solve_lp(lp, Pricing::Bland).value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("continuum program approaches the reference optimum from below") {
  const auto inst = canonical_instance();
  double prev = 0;
  for (int n : {10, 20, 40}) {
    const auto lp = build_lp(inst, unit_volume(), n);
    const auto sol = solve_lp(lp);
    CHECK(sol.value <= 0.75 + 1e-9);
    CHECK(sol.value >= prev - 1e-9);
    CHECK(0.75 - sol.value <= 5.0 / n);
    CHECK(sol.dual_value == doctest::Approx(sol.value).epsilon(1e-9));
    CHECK(check_feasibility(lp_signal(lp, sol)).ok(1e-9));
    prev = sol.value;
  }
  const auto sol = solve_lp(build_lp(inst, unit_volume(), 100));
  CHECK(sol.value == doctest::Approx(0.75).epsilon(0.02));
  CHECK_THROWS_AS(build_lp(inst, unit_volume(), 1), DomainError);
}

TEST_CASE("pricing rules agree") {
  const auto lp = build_lp(canonical_instance(), unit_volume(), 20);
  CHECK(solve_lp(lp, Pricing::Bland).value == doctest::Approx(solve_lp(lp, Pricing::Dantzig).value).epsilon(1e-10));
}

TEST_CASE("gains at the bottom: revealing is optimal") {
  const MarketInstance inst(uniform_density(),
                            ScalarFn(PiecewisePoly::single(Poly({0.0, 0.5, 1.0})), FnKind::Cost, true), true);
  // trade exactly where 0.5θ + θ² ≤ θ
  const auto sol = solve_lp(build_lp(inst, unit_volume(), 40));
  CHECK(sol.value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("assortative swaps") {
  const auto inst = canonical_instance();
  const auto lp = build_lp(inst, unit_volume(), 100);
  const auto ds = lp_signal(lp, solve_lp(lp));
  CHECK(nam_swap_check(ds, 0.5).improving.empty());

  // four types, two inefficient; each inefficient type pooled with the efficient type above it
  AtomMarket m;
  m.types = Eigen::Vector4d(0.1, 0.3, 0.7, 0.9);
  m.masses = Eigen::Vector4d::Constant(0.25);
  m.costs = Eigen::Vector4d(0.2, 0.35, 0.6, 0.8);
  Eigen::VectorXd means(6);
  means << 0.1, 0.3, 0.6, 0.7, 0.8, 0.9;
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(4, 6);
  joint(0, 0) = 0.2;
  joint(0, 2) = 0.05;
  joint(2, 2) = 0.25;
  joint(1, 1) = 0.2;
  joint(1, 4) = 0.05;
  joint(3, 4) = 0.25;
  const auto pam = atom_signal(m, means, joint);
  REQUIRE(check_feasibility(pam).ok(1e-14));
  CHECK(evaluate_objective(pam, unit_volume()).value == doctest::Approx(0.6));

  const auto rep = nam_swap_check(pam, 0.5);
  CHECK(rep.patterns == 1);
  REQUIRE(rep.improving.size() == 1);
  const auto& s = rep.improving[0];
  // (0.8 − 0.1)/(0.8 − 0.3) and (0.6 − 0.1) − (0.6 − 0.3)·ratio
  CHECK(s.ratio == doctest::Approx(1.4));
  CHECK(s.freed == doctest::Approx(0.08));
  CHECK(m.types(s.donor) == 0.3);

  const auto swapped = apply_swap(pam, s, 0.01);
  CHECK(check_feasibility(swapped).ok(1e-14));
  CHECK(evaluate_objective(swapped, unit_volume()).value == doctest::Approx(0.6 + 0.01 * 0.08 / 0.3).epsilon(1e-12));
  CHECK_THROWS_AS(apply_swap(pam, s, 1.0), DomainError);
}

TEST_CASE("convergence entries") {
  CHECK_FALSE(compare(0.75, 0.74, 100).flagged);
  CHECK(compare(0.75, 0.6, 100).flagged);
  CHECK(compare(0.75, 0.74, 100).gap == doctest::Approx(-0.01));
}

TEST_CASE("text exports") {
  const auto lp = build_lp(two_types(), unit_volume());
  std::ostringstream os;
  write_lp(os, lp, "two_type");
  const auto text = os.str();
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("bp_0") != std::string::npos);
  CHECK(text.find("p_0_r") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);

  std::ostringstream csv;
  write_lp_solution_csv(csv, lp, solve_lp(lp));
  CHECK(csv.str().rfind("# schema=1\ni,j,theta_i,x_j,mass\n", 0) == 0);
}
