#pragma once

#include "lemons/errors.hpp"
#include "lemons/polynomial.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace lemons {

enum class FnKind { Density, Cost, Weight };

const char* to_string(FnKind kind);

/// Validated piecewise polynomial on [0,1] tagged with its role.
///
/// Density and cost pieces are limited to degree 3; weights may use any degree so that
/// shapes like (1-θ)^4 are exact.
class ScalarFn {
 public:
  ScalarFn() = default;
  ScalarFn(PiecewisePoly fn, FnKind kind, bool allow_zero_at_origin = false);

  double operator()(double t) const { return fn_(t); }
  double slope(double t) const { return slope_(t); }
  const PiecewisePoly& poly() const { return fn_; }
  FnKind kind() const { return kind_; }

 private:
  PiecewisePoly fn_, slope_;
  FnKind kind_ = FnKind::Weight;
};

enum class Regime { GainsAtTop, GainsAtBottom, MultiCrossing, AllInefficient, AllEfficient };

const char* to_string(Regime r);

/// Interval [lo, hi] of types; openness of endpoints is irrelevant at the precision we work with.
struct Interval {
  double lo = 0, hi = 0;
  double length() const { return hi - lo; }
  bool contains(double t, double tol = 0) const { return t >= lo - tol && t <= hi + tol; }
};

struct Block {
  Interval range;
  bool efficient = false;
};

struct CrossingProfile {
  std::vector<double> crossings;
  std::vector<Block> blocks;
  Regime regime = Regime::AllInefficient;

  /// Single crossing of a gains-at-top instance.
  double theta_star() const;
};

/// Market primitives: type density f and seller cost c on Θ = [0,1].
class MarketInstance {
 public:
  MarketInstance(ScalarFn density, ScalarFn cost, bool declared_gains_at_bottom = false);

  const ScalarFn& density_fn() const { return f_; }
  const ScalarFn& cost_fn() const { return c_; }
  bool declared_gains_at_bottom() const { return gains_at_bottom_; }

  double density(double t) const { return f_(t); }
  double cdf(double t) const { return F_(t); }
  double cost(double t) const { return c_(t); }
  double cost_slope(double t) const { return c_.slope(t); }

  /// c⁻¹(x) for x in [c(0), c(1)], accurate to 1e-12.
  double inverse_cost(double x) const;
  /// d/dx c⁻¹(x).
  double inverse_cost_slope(double x) const { return 1.0 / c_.slope(inverse_cost(x)); }

  /// ∫ f, ∫ θ f and ∫ c f over [a, b] (exact).
  double mass(double a, double b) const { return F_(b) - F_(a); }
  double moment(double a, double b) const { return Mf_(b) - Mf_(a); }
  double cost_moment(double a, double b) const { return Cf_(b) - Cf_(a); }
  /// ∫ g f over [a, b] (exact).
  double weighted(const PiecewisePoly& g, double a, double b) const;

 private:
  ScalarFn f_, c_;
  bool gains_at_bottom_ = false;
  PiecewisePoly F_, Mf_, Cf_;
};

/// Finite-support posterior over types.
class Posterior {
 public:
  Posterior(std::vector<double> types, std::vector<double> weights);

  const std::vector<double>& types() const { return types_; }
  const std::vector<double>& weights() const { return weights_; }
  double mean() const;

 private:
  std::vector<double> types_, weights_;
};

struct EquilibriumResult {
  bool trade = false;
  double price = 0;                 ///< 0 on breakdown
  std::vector<double> fixed_points;  ///< every fixed point, ascending
};

/// Discrete market with finitely many types (atoms).
struct AtomMarket {
  Eigen::VectorXd types, masses, costs;

  void validate() const;
  Eigen::Index size() const { return types.size(); }
  double auxiliary_cost(Eigen::Index i) const { return std::min(types(i), costs(i)); }
};

struct SignalOutcome {
  double probability = 0;
  std::optional<Posterior> posterior;
};

struct AssumptionReport {
  Regime regime = Regime::AllInefficient;
  bool a1 = false;  ///< gains at the top
  bool a2 = false;  ///< full trade infeasible (θ̲ > 0)
  bool a3 = false;  ///< single cutoff for every sampled β
  std::vector<std::string> notes;
  bool all() const { return a1 && a2 && a3; }
};

double auxiliary_cost(const MarketInstance& inst, double t);

CrossingProfile find_crossings(const MarketInstance& inst);

EquilibriumResult equilibrium_price(const MarketInstance& inst, const Posterior& post);
/// Same fixed-point search with explicit per-type costs.
EquilibriumResult equilibrium_price(const Posterior& post, const std::vector<double>& costs);

/// Posteriors induced by a conditional signal matrix (rows: types, columns: realizations).
std::vector<SignalOutcome> induced_posteriors(const AtomMarket& market, const Eigen::MatrixXd& conditional);

/// Root of (1−β)c(θ) − θ in [0,1].
double cost_cutoff(const MarketInstance& inst, double beta);

AssumptionReport check_assumptions(const MarketInstance& inst, std::optional<double> theta_low);

/// Uniform density on [0,1].
ScalarFn uniform_density();
/// The reference instance: uniform types, c(θ) = 0.25 + 0.5θ.
MarketInstance canonical_instance();

}  // namespace lemons
