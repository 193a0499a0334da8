#pragma once

#include "lemons/signal.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lemons {

/// One nonzero of a discrete joint distribution over (type cell, posterior-mean column).
struct SignalCell {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double lo = 0, hi = 0;  ///< type sub-interval carried by the entry (lo == hi for atoms)
  double mass = 0;
  double moment = 0;       ///< ∫ θ dπ over the entry
  double cost_moment = 0;  ///< ∫ c(θ) dπ over the entry
  double type = 0;         ///< conditional mean type of the entry
  double assigned = 0;     ///< continuum mean assigned to `type` (the column mean for atoms)
  double aux_cost = 0;     ///< ĉ(type)
  bool trades = false;
};

/// Joint distribution on a type grid × mean grid, stored as a list of nonzeros.
struct DiscreteSignal {
  Eigen::VectorXd theta_grid;  ///< cell boundaries (n+1) for continuum grids; atom types otherwise
  Eigen::VectorXd cell_mass;   ///< prior mass per type cell
  Eigen::VectorXd x_grid;      ///< column means, ascending
  std::vector<SignalCell> cells;
  double halfcell = 0;
  double theta_star = 0;
  std::optional<MarketInstance> market;  ///< present for discretized continuum plans

  Eigen::Index rows() const { return cell_mass.size(); }
  Eigen::Index cols() const { return x_grid.size(); }
  Eigen::SparseMatrix<double> mass() const;
};

struct FeasibilityReport {
  double bp_residual = 0;
  double m_residual = 0;   ///< max over columns
  double m_total = 0;      ///< sum over columns
  double pm_residual = 0;  ///< largest mass sitting below its auxiliary cost
  double total_mass = 0;
  bool ok(double tol = 1e-6) const { return bp_residual <= tol && m_residual <= tol && pm_residual <= tol; }
};

struct ObjectiveValue {
  double value = 0;
  double theta_form = 0;  ///< price/surplus only: the martingale-rewritten form
  double difference = 0;
  bool consistent = true;
};

/// Exact discretization of a plan on n uniform type cells.
DiscreteSignal discretize(const SignalPlan& plan, const MarketInstance& inst, int n);

/// Discrete signal on atoms from a joint mass matrix (rows: atoms, columns: means).
DiscreteSignal atom_signal(const AtomMarket& atoms, const Eigen::VectorXd& means, const Eigen::MatrixXd& joint);

FeasibilityReport check_feasibility(const DiscreteSignal& ds);

ObjectiveValue evaluate_objective(const DiscreteSignal& ds, const Objective& objective);

/// Mean-constraint branch of a dual certificate: q solves q'(x)(x − a(x)) + q = 0 on `means`.
struct DualBranch {
  std::shared_ptr<const MatchingCurve> curve;
  Interval means;
  double anchor = 0;
  double anchor_value = 0;
};

/// Sampled dual multipliers (w, q, m) and the constant C.
class DualCertificate {
 public:
  DualCertificate(MarketInstance inst, PiecewisePoly alpha, SignalPlan plan, std::vector<DualBranch> branches,
                  double C);

  double q(double x) const;
  double m(double x) const { return q(x) * (1.0 - x); }
  double w(double t) const;
  /// Right-hand side of the dual constraint at (θ, x).
  double constraint(double t, double x) const;

  double C() const { return C_; }
  double theta_star() const { return theta_star_; }
  double c1() const { return c1_; }
  double dual_value() const { return dual_value_; }
  /// Second expression for C in the two-branch case (equals C up to curve accuracy).
  double C_alt() const { return C_alt_; }
  double max_abs_q() const { return max_abs_q_; }
  bool blowup() const { return max_abs_q_ > 1e12; }
  /// |q′(x)(x − a(x)) + q(x)| on the sampling grid, at least 1e-3 above θ*.
  double ode_residual() const { return ode_residual_; }
  const MarketInstance& market() const { return inst_; }
  const PiecewisePoly& alpha() const { return alpha_; }
  const SignalPlan& plan() const { return plan_; }

  Eigen::VectorXd x_samples, q_samples, m_samples, theta_samples, w_samples;

 private:
  friend DualCertificate build_dual_volume(const MarketInstance&, const PiecewisePoly&, const SignalPlan&);
  const DualBranch* branch_at(double x) const;
  double trade_value(double t, double x) const;

  MarketInstance inst_;
  PiecewisePoly alpha_;
  SignalPlan plan_;
  std::vector<DualBranch> branches_;
  double C_ = 0, C_alt_ = 0, theta_star_ = 0, c1_ = 0, dual_value_ = 0, max_abs_q_ = 0, ode_residual_ = 0;
};

/// Certificate for a reveal–pool ("nam") or pool–reveal–pool plan under the weight α.
DualCertificate build_dual_volume(const MarketInstance& inst, const PiecewisePoly& alpha, const SignalPlan& plan);

struct ZpReport {
  double min_slack = 0;
  double argmin_theta = 0, argmin_x = 0;
  bool strip_certified = false;
  long evaluated = 0;
  bool ok(double tol = 1e-7) const { return min_slack >= -tol && strip_certified; }
};

ZpReport verify_zp(const DualCertificate& cert, double delta = 1e-3);

/// Dual value minus primal value.
double duality_gap(double primal, const DualCertificate& cert);

struct SlackReport {
  double max_slack = 0;
  double argmax_theta = 0;
  long support_cells = 0;
};

SlackReport check_support_optimality(const DiscreteSignal& ds, const DualCertificate& cert);

void write_dual_csv(std::ostream& os, const DualCertificate& cert);

}  // namespace lemons
