#pragma once

#include "lemons/market.hpp"

#include <boost/math/interpolators/cubic_hermite.hpp>

#include <iosfwd>
#include <optional>
#include <vector>

namespace lemons {

/// Right-hand side of the matching ODE
///   a'(x) = b'(x) f(b(x)) / f(a) · (b(x) − x) / (a − x),   b = c⁻¹,
/// defined as 0 where a = x sits on a crossing.
double ode_rhs(const MarketInstance& inst, double x, double a);

/// Linear start used at a crossing: a ≈ θ* + L (x − θ*) with L = 1 − b'(θ*).
struct CurveSeed {
  double crossing = 0;
  double slope = 0;
};

/// Strictly decreasing matching a(x) between posterior means x and inefficient types a.
///
/// Stored at the accepted integrator nodes with cubic Hermite interpolation using the exact ODE
/// slopes. Alongside a(x) the curve carries J(x) = ∫ ds / (s − a(s)), the log-kernel needed by
/// the dual multiplier on the mean constraint. When the curve starts at a crossing, the stretch
/// between the crossing and the first node is the analytic linear seed.
class MatchingCurve {
 public:
  MatchingCurve(std::vector<double> x, std::vector<double> a, std::vector<double> slope, std::vector<double> j,
                std::optional<CurveSeed> seed, double residual);

  double a(double x) const;
  double slope(double x) const;
  double log_kernel(double x) const;
  /// J′(x), equal to 1/(x − a(x)) at the nodes.
  double log_kernel_slope(double x) const;
  /// Inverse map: the mean x matched to type θ.
  double x_of(double type) const;

  /// Means covered, including the seed stretch.
  Interval means() const;
  /// Types covered.
  Interval types() const { return {a(means().hi), a(means().lo)}; }
  const std::optional<CurveSeed>& seed() const { return seed_; }
  double residual() const { return residual_; }

  const std::vector<double>& node_x() const { return x_; }
  const std::vector<double>& node_a() const { return a_; }
  const std::vector<double>& node_slope() const { return s_; }
  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, a_, s_, j_;
  std::optional<CurveSeed> seed_;
  double residual_ = 0;
  boost::math::interpolators::cubic_hermite<std::vector<double>> a_interp_, j_interp_;
};

struct CurveOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double seed_offset = 1e-6;
  int min_steps = 2000;  ///< caps the step size at range / min_steps
};

/// Integration request for a block-local curve from (x_start, a_start) toward x_end.
struct CurveProblem {
  double x_start = 0, a_start = 0, x_end = 0;
  bool seeded = false;           ///< (x_start, a_start) is a crossing on the diagonal
  double floor = -1e300;         ///< lower bound on a
  bool stop_at_floor = false;    ///< stop (instead of escaping) when a reaches the floor
  double ceiling = 1e300;        ///< upper bound on a; exceeding it is an escape
};

struct CurveSolution {
  MatchingCurve curve;
  bool hit_floor = false;
  double x_hit = 0;  ///< mean where the floor was reached
};

CurveSolution integrate_curve(const MarketInstance& inst, const CurveProblem& problem, const CurveOptions& opt = {});

/// Lower curve from the crossing up to c(top_eff). types().lo is θ̲.
MatchingCurve solve_g2(const MarketInstance& inst, double crossing, double top_eff, const CurveOptions& opt = {});

/// Upper curve integrated backward from (c(top_eff), θ_start) down to the crossing. a(crossing) is θ̄.
MatchingCurve solve_g1(const MarketInstance& inst, double theta_start, double crossing, double top_eff,
                       const CurveOptions& opt = {});

/// Columns x, a(x), G(x,a(x)), residual at the midpoint following each node.
void write_curve_csv(std::ostream& os, const MarketInstance& inst, const MatchingCurve& curve,
                     const std::string& label);

}  // namespace lemons
