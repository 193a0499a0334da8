#pragma once

#include "lemons/verification.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lemons {

/// Discretized designer problem: masses π(i, j) ≥ 0 on type rows × mean grid with row sums equal to
/// the prior (BP), zero mean deviation per column (M), and pairs below the auxiliary cost removed (PM).
///
/// Each row also has a reveal variable (j = -1) that sends every type in the row to its own value.
/// On a continuum instance a row is a whole type cell moved as a block, so every feasible point is a
/// genuine signal: the LP value never exceeds the continuum optimum, and it is nondecreasing along
/// n → 2n because both the cells and the mean grid (cell boundaries and their cost images) nest.
struct LpProblem {
  struct Variable {
    Eigen::Index i = 0, j = -1;
    double objective = 0;  ///< per unit of row mass
    bool reveal() const { return j < 0; }
  };

  Eigen::VectorXd types;     ///< mean type per row
  Eigen::VectorXd row_mass;  ///< prior mass per row
  Eigen::VectorXd costs;     ///< mean cost per row
  Eigen::VectorXd x_grid;    ///< candidate pooled means, ascending
  std::vector<Variable> vars;

  Eigen::Index rows() const { return types.size(); }
  Eigen::Index cols() const { return x_grid.size(); }
};

/// n uniform type cells.
LpProblem build_lp(const MarketInstance& inst, const Objective& objective, int n);
LpProblem build_lp(const AtomMarket& atoms, const Objective& objective);

/// Bland: smallest improving index. Dantzig: largest reduced cost, dropping to Bland's rule during
/// runs of degenerate pivots so the method still terminates.
enum class Pricing { Bland, Dantzig };

struct LpSolution {
  double value = 0;
  Eigen::VectorXd primal;  ///< one entry per LpProblem::Variable
  Eigen::VectorXd dual;    ///< BP rows then the retained M rows
  double dual_value = 0;
  long iterations = 0;
};

LpSolution solve_lp(const LpProblem& lp, Pricing pricing = Pricing::Dantzig);

/// Solution as a discrete signal on the LP's atoms.
DiscreteSignal lp_signal(const LpProblem& lp, const LpSolution& sol);

struct Swap {
  Eigen::Index col_low = 0, col_high = 0;  ///< columns a < b
  Eigen::Index row_low = 0, row_high = 0;  ///< inefficient rows θ₁ < θ₂
  Eigen::Index donor = 0;                  ///< revealed inefficient row absorbing the freed resource
  double ratio = 0;                        ///< (x_b − θ₁)/(x_b − θ₂)
  double freed = 0;                        ///< freed resource per unit swapped
  double gain = 0;                         ///< objective gain per unit swapped (unit weight)
};

struct SwapReport {
  long patterns = 0;  ///< positive-assortative patterns inspected
  std::vector<Swap> improving;
};

/// Scans trading columns for positive-assortative pairs of inefficient types and checks whether
/// swapping them frees resources that a revealed inefficient type could use.
SwapReport nam_swap_check(const DiscreteSignal& ds, double theta_star, double eps = 1e-9);

/// Applies `swap` with step `step` and moves the freed resource onto the donor.
DiscreteSignal apply_swap(const DiscreteSignal& ds, const Swap& swap, double step);

struct ConvergenceEntry {
  int n = 0;
  double plan_value = 0;
  double lp_value = 0;
  double gap = 0;  ///< lp − plan
  bool flagged = false;
};

ConvergenceEntry compare(double plan_value, double lp_value, int n);

/// LP text format (objective, equality rows, bounds).
void write_lp(std::ostream& os, const LpProblem& lp, const std::string& name);
void write_lp_solution_csv(std::ostream& os, const LpProblem& lp, const LpSolution& sol);

}  // namespace lemons
