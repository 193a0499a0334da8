#include "lemons/lp.hpp"
#include "lemons/verification.hpp"

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

PiecewisePoly quartic_weight() {
  const Poly omt({1.0, -1.0});
  return PiecewisePoly::single(omt * omt * omt * omt);
}

}  // namespace

TEST_CASE("two-type signal with a pooled middle realization") {
  const auto atoms = two_types();
  Eigen::MatrixXd joint(2, 3);
  joint << 7.0 / 12, 1.0 / 6, 0.0, 0.0, 1.0 / 6, 1.0 / 12;
  const auto ds = atom_signal(atoms, Eigen::Vector3d(0.0, 0.5, 1.0), joint);
  const auto rep = check_feasibility(ds);
  CHECK(rep.bp_residual <= 1e-15);
  CHECK(rep.m_residual <= 1e-15);
  CHECK(rep.pm_residual == 0.0);
  CHECK(rep.total_mass == doctest::Approx(1.0));
  // trade at 1/2 (both types, 1/3) and at 1 (1/12)
  CHECK(evaluate_objective(ds, unit_volume()).value == doctest::Approx(5.0 / 12).epsilon(1e-14));

  Eigen::MatrixXd pooled(2, 1);
  pooled << 0.75, 0.25;
  const auto bad = check_feasibility(atom_signal(atoms, Eigen::VectorXd::Constant(1, 0.25), pooled));
  CHECK(bad.m_residual <= 1e-15);
  CHECK(bad.pm_residual == doctest::Approx(0.25));
  CHECK_FALSE(bad.ok());

  Eigen::MatrixXd wrong(2, 2);
  wrong << 0.75, 0.0, 0.0, 0.25;
  CHECK(check_feasibility(atom_signal(atoms, Eigen::Vector2d(0.0, 0.9), wrong)).m_residual == doctest::Approx(0.025));
  CHECK_THROWS_AS(atom_signal(atoms, Eigen::Vector3d(0.0, 0.5, 1.0), pooled), ValidationError);
}

TEST_CASE("discretized reveal-pool plan is exactly feasible") {
  const auto inst = canonical_instance();
  const auto plan = build_nam(inst);
  const auto ds = discretize(plan, inst, 2000);
  const auto rep = check_feasibility(ds);
  CHECK(rep.bp_residual <= 1e-12);
  CHECK(rep.m_residual <= 1e-8);
  CHECK(rep.pm_residual <= 1e-8);
  CHECK(rep.total_mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(evaluate_objective(ds, unit_volume()).value == doctest::Approx(0.75).epsilon(1e-9));

  // price/surplus in mean form and in type form agree on a feasible signal
  const auto ps = evaluate_objective(ds, PriceSurplusObjective{0.5});
  CHECK(ps.consistent);
  CHECK(std::abs(ps.difference) <= 1e-8);
  CHECK(ps.value == doctest::Approx(0.2578125).epsilon(1e-8));
}

TEST_CASE("dual certificate for the reveal-pool plan") {
  const auto inst = canonical_instance();
  const auto alpha = unit_volume().alpha;
  const auto plan = build_nam(inst);
  const auto cert = build_dual_volume(inst, alpha, plan);
  // C = −α(θ̲)/(c(1) − θ̲) with θ̲ = 1/4, c(1) = 3/4
  CHECK(cert.C() == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK_FALSE(cert.blowup());
  CHECK(cert.ode_residual() <= 1e-7);
  for (double x : {0.55, 0.6, 0.7, 0.74}) {
    CHECK(cert.q(x) < 0);
    CHECK(cert.m(x) == doctest::Approx(cert.q(x) * (1 - x)));
  }
  // on g₂: a(x) = 1 − x, so q′(x)(2x − 1) = −q(x) gives q ∝ (2x − 1)^{-1/2}
  for (double x : {0.6, 0.7}) {
    const double ref = cert.q(0.75) * std::sqrt(0.5 / (2 * x - 1));
    CHECK(cert.q(x) == doctest::Approx(ref).epsilon(1e-6));
  }

  const double primal = evaluate_objective(discretize(plan, inst, 2000), unit_volume()).value;
  CHECK(std::abs(duality_gap(primal, cert)) <= 1e-6);
  const auto zp = verify_zp(cert);
  CHECK(zp.min_slack >= -1e-7);
  CHECK(zp.strip_certified);
  CHECK(zp.ok());
  const auto slack = check_support_optimality(discretize(plan, inst, 400), cert);
  CHECK(slack.support_cells > 0);
  CHECK(slack.max_slack <= 1e-6);

  std::ostringstream os;
  write_dual_csv(os, cert);
  CHECK(os.str().rfind("series,point,value,m\n", 0) == 0);
}

TEST_CASE("dual certificate for the pool-reveal-pool plan") {
  const auto inst = canonical_instance();
  const auto alpha = quartic_weight();
  const auto plan = build_pool_reveal_pool(inst, alpha);
  const auto cert = build_dual_volume(inst, alpha, plan);
  CHECK(cert.C() < 0);
  CHECK(cert.C_alt() == doctest::Approx(cert.C()).epsilon(1e-6));
  const double primal = evaluate_objective(discretize(plan, inst, 2000), VolumeObjective{alpha}).value;
  CHECK(std::abs(duality_gap(primal, cert)) <= 1e-6);
  CHECK(verify_zp(cert).ok());
  CHECK_THROWS_AS(build_dual_volume(inst, alpha, build_full_reveal(inst)), DomainError);
}

TEST_CASE("discrete optimum never exceeds the dual value") {
  const auto inst = canonical_instance();
  const auto cert = build_dual_volume(inst, unit_volume().alpha, build_nam(inst));
  for (int n : {10, 40}) {
    const auto lp = build_lp(inst, unit_volume(), n);
    const auto sol = solve_lp(lp);
    CHECK(sol.value <= cert.dual_value() + 1e-6);
  }
}
