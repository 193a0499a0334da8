#include "lemons/lp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace lemons {

namespace {

constexpr double kTrade = 1e-12;

/// Mean-constraint coefficient; reveals and grid points equal to the row's mean carry none.
double m_coef(const LpProblem& lp, const LpProblem::Variable& v) {
  if (v.reveal()) return 0.0;
  const double c = lp.x_grid(v.j) - lp.types(v.i);
  return std::abs(c) <= 1e-13 ? 0.0 : c;
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > 1e-14) out.push_back(x);
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

LpProblem build_lp(const MarketInstance& inst, const Objective& objective, int n) {
  if (n < 2 || n > 500) throw DomainError("LP cell count must lie in [2, 500]");
  const auto* ps = std::get_if<PriceSurplusObjective>(&objective);
  const PiecewisePoly f = inst.density_fn().poly();
  const PiecewisePoly W = (effective_weight(inst, objective) * f).antiderivative();
  const PiecewisePoly M0 = f.antiderivative();
  const PiecewisePoly C1 = (inst.cost_fn().poly() * f).antiderivative();
  const std::vector<double> crossings = find_crossings(inst).crossings;
  const double c0 = inst.cost(0.0), c1 = inst.cost(1.0);

  LpProblem lp;
  lp.types.resize(n);
  lp.row_mass.resize(n);
  lp.costs.resize(n);
  std::vector<double> grid;
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    grid.push_back(t);
    grid.push_back(inst.cost(t));
  }
  lp.x_grid = to_vector(unique_sorted(std::move(grid)));

  for (int i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
    const double mass = inst.mass(lo, hi);
    if (!(mass > 0)) throw DomainError("LP cell without prior mass");
    lp.row_mass(i) = mass;
    lp.types(i) = inst.moment(lo, hi) / mass;
    lp.costs(i) = inst.cost_moment(lo, hi) / mass;

    // reveal: the efficient part of the cell trades at its own value
    std::vector<double> cuts{lo, hi};
    for (double t : crossings)
      if (t > lo && t < hi) cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    double reveal = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
      if (inst.cost(mid) <= mid) reveal += W(cuts[k + 1]) - W(cuts[k]);
    }
    lp.vars.push_back({i, -1, reveal / mass});

    // pooled: the whole cell at x needs ĉ ≤ x on the cell; types with c(θ) ≤ x trade
    const double aux_top = std::min(hi, inst.cost(hi));
    for (Eigen::Index j = 0; j < lp.cols(); ++j) {
      const double x = lp.x_grid(j);
      if (aux_top > x + 1e-14) continue;
      if (std::abs(x - lp.types(i)) <= 1e-13) continue;  // same as revealing the cell's mean: kept out
      const double top = x < c0 ? lo : x >= c1 ? hi : std::clamp(inst.inverse_cost(x), lo, hi);
      double value = 0;
      if (top > lo) {
        if (ps)
          value = x * (M0(top) - M0(lo)) - (1.0 - ps->beta) * (C1(top) - C1(lo));
        else
          value = W(top) - W(lo);
      }
      lp.vars.push_back({i, j, value / mass});
    }
  }
  return lp;
}

LpProblem build_lp(const AtomMarket& atoms, const Objective& objective) {
  atoms.validate();
  const auto* ps = std::get_if<PriceSurplusObjective>(&objective);
  const auto* vol = std::get_if<VolumeObjective>(&objective);
  auto value = [&](Eigen::Index i, double x) {
    if (atoms.costs(i) > x + kTrade) return 0.0;
    return ps ? x - (1.0 - ps->beta) * atoms.costs(i) : vol->alpha(atoms.types(i));
  };

  LpProblem lp;
  lp.types = atoms.types;
  lp.row_mass = atoms.masses;
  lp.costs = atoms.costs;
  std::vector<double> grid;
  for (Eigen::Index i = 0; i < atoms.size(); ++i) {
    grid.push_back(atoms.types(i));
    grid.push_back(atoms.costs(i));
  }
  lp.x_grid = to_vector(unique_sorted(std::move(grid)));
  for (Eigen::Index i = 0; i < atoms.size(); ++i) {
    lp.vars.push_back({i, -1, value(i, atoms.types(i))});
    for (Eigen::Index j = 0; j < lp.cols(); ++j) {
      const double x = lp.x_grid(j);
      if (atoms.auxiliary_cost(i) > x + 1e-14 || std::abs(x - atoms.types(i)) <= 1e-13) continue;
      lp.vars.push_back({i, j, value(i, x)});
    }
  }
  return lp;
}

LpSolution solve_lp(const LpProblem& lp, Pricing pricing) {
  const Eigen::Index n = lp.rows(), N = static_cast<Eigen::Index>(lp.vars.size());

  // M rows only for columns that carry a nonzero coefficient
  std::vector<Eigen::Index> mrow(static_cast<std::size_t>(lp.cols()), -1);
  Eigen::Index m = n;
  std::vector<double> coef(static_cast<std::size_t>(N));
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& v = lp.vars[static_cast<std::size_t>(k)];
    coef[static_cast<std::size_t>(k)] = m_coef(lp, v);
    if (coef[static_cast<std::size_t>(k)] != 0 && mrow[static_cast<std::size_t>(v.j)] < 0)
      mrow[static_cast<std::size_t>(v.j)] = m++;
  }
  auto row_of = [&](Eigen::Index k) -> Eigen::Index {
    const Eigen::Index j = lp.vars[static_cast<std::size_t>(k)].j;
    return j < 0 ? -1 : mrow[static_cast<std::size_t>(j)];
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  b.head(n) = lp.row_mass;

  // basis: one zero-coefficient variable per BP row, artificials (index N + r) on M rows
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m), -1);
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& v = lp.vars[static_cast<std::size_t>(k)];
    if (coef[static_cast<std::size_t>(k)] == 0 && basis[static_cast<std::size_t>(v.i)] < 0)
      basis[static_cast<std::size_t>(v.i)] = k;
  }
  for (Eigen::Index r = 0; r < n; ++r)
    if (basis[static_cast<std::size_t>(r)] < 0) throw LpError("no revealing variable for a type row");
  for (Eigen::Index r = n; r < m; ++r) basis[static_cast<std::size_t>(r)] = N + r;
  std::vector<char> is_basic(static_cast<std::size_t>(N), 0);
  for (Eigen::Index r = 0; r < n; ++r) is_basic[static_cast<std::size_t>(basis[static_cast<std::size_t>(r)])] = 1;

  auto cost_of = [&](Eigen::Index k) { return k < N ? lp.vars[static_cast<std::size_t>(k)].objective : 0.0; };
  auto column = [&](Eigen::Index k, Eigen::VectorXd& a) {
    a.setZero();
    if (k >= N) {
      a(k - N) = 1.0;
      return;
    }
    a(lp.vars[static_cast<std::size_t>(k)].i) = 1.0;
    if (const Eigen::Index r = row_of(k); r >= 0) a(r) = coef[static_cast<std::size_t>(k)];
  };

  Eigen::MatrixXd Binv = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd xB = b, cB(m), y(m), u(m), a(m);
  auto reinvert = [&] {
    Eigen::MatrixXd B(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
      column(basis[static_cast<std::size_t>(r)], a);
      B.col(r) = a;
    }
    Binv = B.partialPivLu().inverse();
    xB = Binv * b;
  };

  const double dtol = 1e-11, ptol = 1e-9;
  LpSolution sol;
  long degenerate = 0;
  for (;; ++sol.iterations) {
    if (sol.iterations > 20'000'000) throw LpError("simplex iteration limit reached");
    if (sol.iterations > 0 && sol.iterations % 200 == 0) reinvert();
    for (Eigen::Index r = 0; r < m; ++r) cB(r) = cost_of(basis[static_cast<std::size_t>(r)]);
    y.noalias() = Binv.transpose() * cB;

    const bool bland = pricing == Pricing::Bland || degenerate >= 50;
    Eigen::Index enter = -1;
    double best = dtol;
    for (Eigen::Index k = 0; k < N; ++k) {
      if (is_basic[static_cast<std::size_t>(k)]) continue;
      const auto& v = lp.vars[static_cast<std::size_t>(k)];
      double d = v.objective - y(v.i);
      if (const Eigen::Index r = row_of(k); r >= 0) d -= coef[static_cast<std::size_t>(k)] * y(r);
      if (d > best) {
        enter = k;
        if (bland) break;
        best = d;
      }
    }
    if (enter < 0) break;

    // u = B⁻¹ a_enter from the two nonzeros
    const auto& ve = lp.vars[static_cast<std::size_t>(enter)];
    u = Binv.col(ve.i);
    if (const Eigen::Index r = row_of(enter); r >= 0) u += coef[static_cast<std::size_t>(enter)] * Binv.col(r);

    // minimum ratio; ties go to artificials first, then to the smallest variable index
    Eigen::Index leave = -1;
    double ratio = 0;
    auto better = [&](double t, Eigen::Index var) {
      if (leave < 0) return true;
      const Eigen::Index cur = basis[static_cast<std::size_t>(leave)];
      if (t < ratio - 1e-14) return true;
      if (t > ratio + 1e-14) return false;
      if ((var >= N) != (cur >= N)) return var >= N;
      return var < cur;
    };
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index var = basis[static_cast<std::size_t>(r)];
      double t;
      if (var >= N) {
        if (std::abs(u(r)) <= ptol) continue;
        t = 0;
      } else {
        if (u(r) <= ptol) continue;
        t = std::max(0.0, xB(r)) / u(r);
      }
      if (better(t, var)) {
        leave = r;
        ratio = t;
      }
    }
    if (leave < 0) throw LpError("LP unbounded");

    degenerate = ratio > 0 ? 0 : degenerate + 1;
    xB -= ratio * u;
    xB(leave) = ratio;
    const Eigen::RowVectorXd pivot_row = Binv.row(leave) / u(leave);
    Binv.noalias() -= u * pivot_row;
    Binv.row(leave) = pivot_row;
    const Eigen::Index out = basis[static_cast<std::size_t>(leave)];
    if (out < N) is_basic[static_cast<std::size_t>(out)] = 0;
    is_basic[static_cast<std::size_t>(enter)] = 1;
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  reinvert();
  for (Eigen::Index r = 0; r < m; ++r) cB(r) = cost_of(basis[static_cast<std::size_t>(r)]);
  y.noalias() = Binv.transpose() * cB;
  sol.primal = Eigen::VectorXd::Zero(N);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index var = basis[static_cast<std::size_t>(r)];
    if (var < N) sol.primal(var) = std::max(0.0, xB(r));
  }
  for (Eigen::Index k = 0; k < N; ++k) sol.value += lp.vars[static_cast<std::size_t>(k)].objective * sol.primal(k);
  sol.dual = y;
  sol.dual_value = y.head(n).dot(lp.row_mass);
  return sol;
}

DiscreteSignal lp_signal(const LpProblem& lp, const LpSolution& sol) {
  // reveals get a column at the row's mean
  std::vector<double> xs(lp.x_grid.data(), lp.x_grid.data() + lp.x_grid.size());
  for (std::size_t k = 0; k < lp.vars.size(); ++k)
    if (lp.vars[k].reveal() && sol.primal(static_cast<Eigen::Index>(k)) > 1e-15) xs.push_back(lp.types(lp.vars[k].i));
  xs = unique_sorted(std::move(xs));
  auto col_of = [&](double x) {
    auto it = std::lower_bound(xs.begin(), xs.end(), x - 1e-14);
    return static_cast<Eigen::Index>(it - xs.begin());
  };

  DiscreteSignal ds;
  ds.theta_grid = lp.types;
  ds.cell_mass = lp.row_mass;
  ds.x_grid = to_vector(xs);
  for (std::size_t k = 0; k < lp.vars.size(); ++k) {
    const double mass = sol.primal(static_cast<Eigen::Index>(k));
    if (mass <= 1e-15) continue;
    const auto& v = lp.vars[k];
    SignalCell c;
    c.row = v.i;
    c.lo = c.hi = c.type = lp.types(v.i);
    c.assigned = v.reveal() ? c.type : lp.x_grid(v.j);
    c.col = col_of(c.assigned);
    c.mass = mass;
    c.moment = c.type * mass;
    c.cost_moment = lp.costs(v.i) * mass;
    c.aux_cost = std::min(c.type, lp.costs(v.i));
    c.trades = lp.costs(v.i) <= c.assigned + kTrade;
    ds.cells.push_back(c);
  }
  std::sort(ds.cells.begin(), ds.cells.end(),
            [](const SignalCell& a, const SignalCell& b) { return a.col != b.col ? a.col < b.col : a.row < b.row; });
  return ds;
}

namespace {

struct RowInfo {
  double type = 0, cost = 0, aux = 0;
  double revealed = 0;  ///< non-trading mass sitting at its own mean
  Eigen::Index reveal_col = -1;
};

std::vector<RowInfo> row_info(const DiscreteSignal& ds) {
  std::vector<RowInfo> rows(static_cast<std::size_t>(ds.rows()));
  std::vector<double> m(rows.size(), 0), mom(rows.size(), 0), cm(rows.size(), 0);
  for (const auto& c : ds.cells) {
    auto i = static_cast<std::size_t>(c.row);
    m[i] += c.mass;
    mom[i] += c.moment;
    cm[i] += c.cost_moment;
    rows[i].aux = c.aux_cost;
    if (!c.trades && std::abs(ds.x_grid(c.col) - c.type) < 1e-12 && c.mass > rows[i].revealed) {
      rows[i].revealed = c.mass;
      rows[i].reveal_col = c.col;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (m[i] > 0) {
      rows[i].type = mom[i] / m[i];
      rows[i].cost = cm[i] / m[i];
    }
  return rows;
}

}  // namespace

SwapReport nam_swap_check(const DiscreteSignal& ds, double theta_star, double eps) {
  SwapReport rep;
  const auto rows = row_info(ds);

  // inefficient trading entries per column at or above θ*
  std::map<Eigen::Index, std::vector<Eigen::Index>> pooled;
  for (const auto& c : ds.cells)
    if (c.trades && c.mass > eps && c.type < theta_star && ds.x_grid(c.col) >= theta_star)
      pooled[c.col].push_back(c.row);

  std::vector<Eigen::Index> donors;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].revealed > eps && rows[i].type < theta_star) donors.push_back(static_cast<Eigen::Index>(i));
  std::sort(donors.begin(), donors.end(), [&](Eigen::Index a, Eigen::Index b) {
    return rows[static_cast<std::size_t>(a)].type < rows[static_cast<std::size_t>(b)].type;
  });

  for (auto ia = pooled.begin(); ia != pooled.end(); ++ia)
    for (auto ib = std::next(ia); ib != pooled.end(); ++ib) {
      const double xa = ds.x_grid(ia->first), xb = ds.x_grid(ib->first);
      for (Eigen::Index k1 : ia->second)
        for (Eigen::Index k2 : ib->second) {
          const double t1 = rows[static_cast<std::size_t>(k1)].type, t2 = rows[static_cast<std::size_t>(k2)].type;
          if (!(t1 < t2)) continue;
          ++rep.patterns;
          const double r = (xb - t1) / (xb - t2);
          const double freed = (xa - t1) - (xa - t2) * r;
          if (freed <= 1e-12) continue;
          // the donor closest below x_a converts the most freed resource into trade
          Eigen::Index donor = -1;
          for (Eigen::Index d : donors)
            if (rows[static_cast<std::size_t>(d)].type < xa) donor = d;
          if (donor < 0) continue;
          Swap s;
          s.col_low = ia->first;
          s.col_high = ib->first;
          s.row_low = k1;
          s.row_high = k2;
          s.donor = donor;
          s.ratio = r;
          s.freed = freed;
          s.gain = freed / (xa - rows[static_cast<std::size_t>(donor)].type);
          rep.improving.push_back(s);
        }
    }
  return rep;
}

DiscreteSignal apply_swap(const DiscreteSignal& ds, const Swap& s, double step) {
  const auto rows = row_info(ds);
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(ds.rows(), ds.cols());
  for (const auto& c : ds.cells) joint(c.row, c.col) += c.mass;
  const auto& donor = rows[static_cast<std::size_t>(s.donor)];
  const double delta = step * s.freed / (ds.x_grid(s.col_low) - donor.type);
  joint(s.row_low, s.col_low) -= step;
  joint(s.row_low, s.col_high) += step;
  joint(s.row_high, s.col_high) -= s.ratio * step;
  joint(s.row_high, s.col_low) += s.ratio * step;
  joint(s.donor, donor.reveal_col) -= delta;
  joint(s.donor, s.col_low) += delta;
  if ((joint.array() < -1e-15).any()) throw DomainError("swap step exceeds available mass");

  DiscreteSignal out = ds;
  out.cells.clear();
  for (Eigen::Index j = 0; j < joint.cols(); ++j)
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
      if (joint(i, j) <= 1e-15) continue;
      const auto& info = rows[static_cast<std::size_t>(i)];
      SignalCell c;
      c.row = i;
      c.col = j;
      c.lo = c.hi = c.type = info.type;
      c.mass = joint(i, j);
      c.moment = c.type * c.mass;
      c.cost_moment = info.cost * c.mass;
      c.assigned = ds.x_grid(j);
      c.aux_cost = info.aux;
      c.trades = info.cost <= c.assigned + kTrade;
      out.cells.push_back(c);
    }
  return out;
}

ConvergenceEntry compare(double plan_value, double lp_value, int n) {
  ConvergenceEntry e;
  e.n = n;
  e.plan_value = plan_value;
  e.lp_value = lp_value;
  e.gap = lp_value - plan_value;
  e.flagged = std::abs(e.gap) > 5.0 / n;
  return e;
}

void write_lp(std::ostream& os, const LpProblem& lp, const std::string& name) {
  os << std::setprecision(17);
  auto var = [&](const LpProblem::Variable& v) {
    return "p_" + std::to_string(v.i) + "_" + (v.reveal() ? std::string("r") : std::to_string(v.j));
  };
  os << "\\ " << name << "\nMaximize\n obj:";
  int on_line = 0;
  auto term = [&](double c, const std::string& v) {
    os << (c < 0 ? " - " : " + ") << std::abs(c) << ' ' << v;
    if (++on_line % 6 == 0) os << "\n ";
  };
  bool any = false;
  for (const auto& v : lp.vars)
    if (v.objective != 0) {
      term(v.objective, var(v));
      any = true;
    }
  if (!any) os << " 0 " << var(lp.vars.front());
  os << "\nSubject To\n";
  std::vector<std::vector<const LpProblem::Variable*>> by_row(static_cast<std::size_t>(lp.rows())),
      by_col(static_cast<std::size_t>(lp.cols()));
  for (const auto& v : lp.vars) {
    by_row[static_cast<std::size_t>(v.i)].push_back(&v);
    if (!v.reveal()) by_col[static_cast<std::size_t>(v.j)].push_back(&v);
  }
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    os << " bp_" << i << ':';
    on_line = 0;
    for (const auto* v : by_row[static_cast<std::size_t>(i)]) term(1.0, var(*v));
    os << " = " << lp.row_mass(i) << '\n';
  }
  for (Eigen::Index j = 0; j < lp.cols(); ++j) {
    std::vector<std::pair<double, const LpProblem::Variable*>> terms;
    for (const auto* v : by_col[static_cast<std::size_t>(j)])
      if (const double c = m_coef(lp, *v); c != 0) terms.emplace_back(c, v);
    if (terms.empty()) continue;
    os << " m_" << j << ':';
    on_line = 0;
    for (const auto& [c, v] : terms) term(c, var(*v));
    os << " = 0\n";
  }
  os << "End\n";
}

void write_lp_solution_csv(std::ostream& os, const LpProblem& lp, const LpSolution& sol) {
  os << "# schema=1\ni,j,theta_i,x_j,mass\n" << std::setprecision(17);
  for (std::size_t k = 0; k < lp.vars.size(); ++k) {
    const double mass = sol.primal(static_cast<Eigen::Index>(k));
    if (mass <= 0) continue;
    const auto& v = lp.vars[k];
    os << v.i << ',' << v.j << ',' << lp.types(v.i) << ',' << (v.reveal() ? lp.types(v.i) : lp.x_grid(v.j)) << ','
       << mass << '\n';
  }
}

}  // namespace lemons
