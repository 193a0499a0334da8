#include "lemons/verification.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace lemons {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

struct Builder {
  DiscreteSignal ds;
  std::vector<double> col_x;
  int n = 0;

  Eigen::Index row_of(double lo, double hi) const {
    auto r = static_cast<Eigen::Index>(std::floor(0.5 * (lo + hi) * n));
    return std::clamp<Eigen::Index>(r, 0, n - 1);
  }

  Eigen::Index new_column(double x) {
    col_x.push_back(x);
    return static_cast<Eigen::Index>(col_x.size() - 1);
  }

  /// Entry for types [lo, hi] with the usual exact moments.
  SignalCell piece(const MarketInstance& inst, double lo, double hi, Eigen::Index col) const {
    SignalCell c;
    c.row = row_of(lo, hi);
    c.col = col;
    c.lo = lo;
    c.hi = hi;
    c.mass = inst.mass(lo, hi);
    c.moment = inst.moment(lo, hi);
    c.cost_moment = inst.cost_moment(lo, hi);
    c.type = c.mass > 0 ? c.moment / c.mass : 0.5 * (lo + hi);
    c.aux_cost = std::min(c.type, inst.cost(c.type));
    return c;
  }
};

void add_reveal(Builder& b, const MarketInstance& inst, const Segment& s, const std::vector<double>& crossings) {
  std::vector<double> cuts{s.types.lo, s.types.hi};
  for (int k = 1; k < b.n; ++k) {
    double t = static_cast<double>(k) / b.n;
    if (t > s.types.lo && t < s.types.hi) cuts.push_back(t);
  }
  for (double t : crossings)
    if (t > s.types.lo && t < s.types.hi) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 1e-15) continue;
    SignalCell c = b.piece(inst, cuts[i], cuts[i + 1], 0);
    if (c.mass <= 0) continue;
    c.col = b.new_column(c.type);
    c.assigned = c.type;
    c.trades = inst.cost(c.type) <= c.type;
    b.ds.cells.push_back(c);
  }
}

void add_pair(Builder& b, const MarketInstance& inst, const Segment& cm, const std::vector<const Segment*>& pools) {
  std::vector<double> xb{cm.means.lo, cm.means.hi};
  for (int k = 1; k < b.n; ++k) {
    double t = static_cast<double>(k) / b.n;
    if (t > cm.types.lo && t < cm.types.hi) xb.push_back(inst.cost(t));
  }
  for (const Segment* p : pools) {
    xb.push_back(p->means.lo);
    xb.push_back(p->means.hi);
    for (int k = 1; k < b.n; ++k) {
      double t = static_cast<double>(k) / b.n;
      if (t > p->types.lo && t < p->types.hi) xb.push_back(p->curve->x_of(t));
    }
  }
  for (double x = cm.means.lo + b.ds.halfcell; x < cm.means.hi; x += b.ds.halfcell) xb.push_back(x);
  std::sort(xb.begin(), xb.end());
  std::vector<double> breaks;
  for (double x : xb) {
    x = std::clamp(x, cm.means.lo, cm.means.hi);
    if (breaks.empty() || x - breaks.back() > 1e-14) breaks.push_back(x);
  }
  breaks.back() = cm.means.hi;

  std::vector<double> eff(breaks.size());
  for (std::size_t i = 0; i < breaks.size(); ++i) eff[i] = inst.inverse_cost(breaks[i]);
  eff.front() = cm.types.lo;
  eff.back() = cm.types.hi;

  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double x0 = breaks[i], x1 = breaks[i + 1], xm = 0.5 * (x0 + x1);
    const Segment* p = nullptr;
    for (const Segment* cand : pools)
      if (xm >= cand->means.lo && xm <= cand->means.hi) p = cand;
    if (!p) throw ValidationError("cost-matched means not covered by any pool");
    const MatchingCurve& g = *p->curve;
    const double a0 = std::clamp(g.a(x0), p->types.lo, p->types.hi);
    const double a1 = std::clamp(g.a(x1), p->types.lo, p->types.hi);

    SignalCell e = b.piece(inst, eff[i], eff[i + 1], 0);
    SignalCell q = b.piece(inst, a1, a0, 0);
    const double x_ineff = gauss<double, 10>::integrate(
        [&](double x) { return x * inst.density(g.a(x)) * -g.slope(x); }, x0, x1);
    const double mass = e.mass + q.mass;
    if (mass <= 0) continue;
    const Eigen::Index col = b.new_column((e.cost_moment + x_ineff) / mass);
    e.col = q.col = col;
    e.assigned = inst.cost(e.type);
    q.assigned = g.x_of(std::clamp(q.type, p->types.lo, p->types.hi));
    e.trades = q.trades = true;
    if (e.mass > 0) b.ds.cells.push_back(e);
    if (q.mass > 0) b.ds.cells.push_back(q);
  }
}

}  // namespace

Eigen::SparseMatrix<double> DiscreteSignal::mass() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(cells.size());
  for (const auto& c : cells) t.emplace_back(c.row, c.col, c.mass);
  Eigen::SparseMatrix<double> m(rows(), cols());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

DiscreteSignal discretize(const SignalPlan& plan, const MarketInstance& inst, int n) {
  if (n < 10) throw DomainError("discretization needs at least 10 cells");
  Builder b;
  b.n = n;
  b.ds.theta_grid = Eigen::VectorXd::LinSpaced(n + 1, 0.0, 1.0);
  b.ds.cell_mass.resize(n);
  for (int i = 0; i < n; ++i) b.ds.cell_mass(i) = inst.mass(b.ds.theta_grid(i), b.ds.theta_grid(i + 1));
  b.ds.halfcell = 0.5 / n;
  b.ds.market = inst;
  CrossingProfile prof = find_crossings(inst);
  b.ds.theta_star = prof.crossings.empty() ? 0.0 : prof.crossings.front();

  for (const auto& s : plan.segments) {
    if (s.kind == SegmentKind::Reveal) add_reveal(b, inst, s, prof.crossings);
    if (s.kind != SegmentKind::CostMatch) continue;
    std::vector<const Segment*> pools;
    for (const auto& p : plan.segments)
      if (p.kind == SegmentKind::PoolCurve && p.pair == s.pair) pools.push_back(&p);
    add_pair(b, inst, s, pools);
  }

  // order columns by mean
  std::vector<Eigen::Index> order(b.col_x.size()), rank(b.col_x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) { return b.col_x[a] < b.col_x[c]; });
  b.ds.x_grid.resize(static_cast<Eigen::Index>(order.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    rank[order[k]] = static_cast<Eigen::Index>(k);
    b.ds.x_grid(static_cast<Eigen::Index>(k)) = b.col_x[order[k]];
  }
  for (auto& c : b.ds.cells) c.col = rank[c.col];
  std::stable_sort(b.ds.cells.begin(), b.ds.cells.end(), [](const SignalCell& a, const SignalCell& c) {
    return a.col != c.col ? a.col < c.col : a.row < c.row;
  });
  return b.ds;
}

DiscreteSignal atom_signal(const AtomMarket& atoms, const Eigen::VectorXd& means, const Eigen::MatrixXd& joint) {
  atoms.validate();
  if (joint.rows() != atoms.size() || joint.cols() != means.size())
    throw ValidationError("signal masses: shape must be atoms × means");
  if ((joint.array() < 0).any()) throw ValidationError("signal masses: must be nonnegative");
  DiscreteSignal ds;
  ds.theta_grid = atoms.types;
  ds.cell_mass = atoms.masses;
  ds.x_grid = means;
  for (Eigen::Index j = 0; j < joint.cols(); ++j)
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
      if (joint(i, j) <= 0) continue;
      SignalCell c;
      c.row = i;
      c.col = j;
      c.lo = c.hi = c.type = atoms.types(i);
      c.mass = joint(i, j);
      c.moment = c.type * c.mass;
      c.cost_moment = atoms.costs(i) * c.mass;
      c.assigned = means(j);
      c.aux_cost = atoms.auxiliary_cost(i);
      c.trades = atoms.costs(i) <= means(j) + 1e-12;
      ds.cells.push_back(c);
    }
  return ds;
}

FeasibilityReport check_feasibility(const DiscreteSignal& ds) {
  FeasibilityReport rep;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(ds.rows());
  Eigen::VectorXd cols = Eigen::VectorXd::Zero(ds.cols());
  for (const auto& c : ds.cells) {
    rows(c.row) += c.mass;
    cols(c.col) += ds.x_grid(c.col) * c.mass - c.moment;
    rep.total_mass += c.mass;
    if (c.aux_cost > ds.x_grid(c.col) + ds.halfcell + 1e-12) rep.pm_residual = std::max(rep.pm_residual, c.mass);
  }
  rep.bp_residual = (rows - ds.cell_mass).cwiseAbs().maxCoeff();
  rep.m_residual = cols.size() ? cols.cwiseAbs().maxCoeff() : 0.0;
  rep.m_total = cols.cwiseAbs().sum();
  return rep;
}

ObjectiveValue evaluate_objective(const DiscreteSignal& ds, const Objective& objective) {
  ObjectiveValue out;
  if (const auto* vol = std::get_if<VolumeObjective>(&objective)) {
    std::optional<PiecewisePoly> weighted;
    if (ds.market) weighted = (vol->alpha * ds.market->density_fn().poly()).antiderivative();
    for (const auto& c : ds.cells) {
      if (!c.trades) continue;
      out.value += c.hi > c.lo && weighted ? (*weighted)(c.hi) - (*weighted)(c.lo) : vol->alpha(c.type) * c.mass;
    }
    out.theta_form = out.value;
    return out;
  }
  const double keep = 1.0 - std::get<PriceSurplusObjective>(objective).beta;
  double m_trade = 0;
  for (const auto& c : ds.cells) {
    if (!c.trades) continue;
    out.value += ds.x_grid(c.col) * c.mass - keep * c.cost_moment;
    out.theta_form += c.moment - keep * c.cost_moment;
  }
  m_trade = check_feasibility(ds).m_total;
  out.difference = out.value - out.theta_form;
  out.consistent = std::abs(out.difference) <= 10 * m_trade + 1e-12;
  return out;
}

DualCertificate::DualCertificate(MarketInstance inst, PiecewisePoly alpha, SignalPlan plan,
                                 std::vector<DualBranch> branches, double C)
    : inst_(std::move(inst)), alpha_(std::move(alpha)), plan_(std::move(plan)), branches_(std::move(branches)), C_(C) {
  theta_star_ = plan_.params.at("theta_star");
  c1_ = inst_.cost(1.0);
  C_alt_ = C_;

  constexpr int kSamples = 1001;
  x_samples = theta_samples = Eigen::VectorXd::LinSpaced(kSamples, 0.0, 1.0);
  q_samples.resize(kSamples);
  m_samples.resize(kSamples);
  w_samples.resize(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    q_samples(i) = q(x_samples(i));
    m_samples(i) = m(x_samples(i));
    w_samples(i) = w(theta_samples(i));
    max_abs_q_ = std::max(max_abs_q_, std::abs(q_samples(i)));
  }
  max_abs_q_ = std::max(max_abs_q_, std::abs(q(theta_star_ + 1e-6)));

  // ∫ w f, split where w changes formula
  std::vector<double> cuts{0.0, 1.0, theta_star_};
  for (const auto& s : plan_.segments) cuts.push_back(s.types.lo);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 1e-15) continue;
    dual_value_ += gauss_kronrod<double, 31>::integrate([&](double t) { return w(t) * inst_.density(t); }, cuts[i],
                                                       cuts[i + 1], 12, 1e-11);
  }

  // first-order condition, q′ by a five-point stencil kept inside one branch
  for (int i = 0; i < kSamples; ++i) {
    const double x = x_samples(i);
    if (x < theta_star_ + 1e-3 || x > c1_) continue;
    const DualBranch* b = branch_at(x);
    const double room = std::min(x - b->means.lo, b->means.hi - x);
    if (room < 1e-6) continue;
    const double h = std::min(1e-4, 2e-3 * room);
    const double dq = (-q(x + 2 * h) + 8 * q(x + h) - 8 * q(x - h) + q(x - 2 * h)) / (12 * h);
    ode_residual_ = std::max(ode_residual_, std::abs(dq * (x - b->curve->a(x)) + q(x)));
  }
}

const DualBranch* DualCertificate::branch_at(double x) const {
  for (const auto& b : branches_)
    if (x >= b.means.lo && x <= b.means.hi) return &b;
  return &branches_.back();
}

double DualCertificate::q(double x) const {
  if (x <= theta_star_) return C_;
  const double xe = std::min(x, c1_);
  const DualBranch* b = branch_at(xe);
  return b->anchor_value * std::exp(b->curve->log_kernel(b->anchor) - b->curve->log_kernel(xe));
}

double DualCertificate::trade_value(double t, double x) const { return x >= theta_star_ - 1e-12 ? alpha_(t) : 0.0; }

double DualCertificate::constraint(double t, double x) const {
  double v = trade_value(t, x) + q(x) * (x - t);
  if (std::min(t, inst_.cost(t)) > x) v += m(x);
  return v;
}

double DualCertificate::w(double t) const { return constraint(t, plan_.assign(inst_, t)); }

DualCertificate build_dual_volume(const MarketInstance& inst, const PiecewisePoly& alpha, const SignalPlan& plan) {
  std::vector<const Segment*> pools;
  for (const auto& s : plan.segments)
    if (s.kind == SegmentKind::PoolCurve) pools.push_back(&s);
  const double c1 = inst.cost(1.0);
  if (!plan.params.count("theta_star"))
    throw DomainError("no dual certificate construction for plan shape '" + plan.shape + "'");
  const double ts = plan.params.at("theta_star");
  if (plan.shape == "nam" && pools.size() == 1) {
    const double low = plan.params.at("theta_low");
    const double C = -alpha(low) / (c1 - low);
    return DualCertificate(inst, alpha, plan, {{pools[0]->curve, {ts, c1}, c1, C}}, C);
  }
  if ((plan.shape == "pool-reveal-pool" || plan.shape == "x-beta-nam") && pools.size() == 2) {
    const double xs = plan.params.at("x_star"), t1 = plan.params.at("theta1"), t2 = plan.params.at("theta2");
    const double C = -alpha(t1) / (xs - t1);
    DualCertificate cert(inst, alpha, plan, {{pools[1]->curve, {ts, xs}, xs, C}, {pools[0]->curve, {xs, c1}, xs, C}},
                         C);
    cert.C_alt_ = -alpha(t2) / (xs - t2);
    return cert;
  }
  throw DomainError("no dual certificate construction for plan shape '" + plan.shape + "'");
}

ZpReport verify_zp(const DualCertificate& cert, double delta) {
  ZpReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  constexpr int kN = 500;
  const double ts = cert.theta_star();
  std::vector<double> w(kN);
  for (int i = 0; i < kN; ++i) w[i] = cert.w(static_cast<double>(i) / (kN - 1));
  for (int j = 0; j < kN; ++j) {
    const double x = static_cast<double>(j) / (kN - 1);
    if (std::abs(x - ts) < delta) continue;
    for (int i = 0; i < kN; ++i) {
      const double t = static_cast<double>(i) / (kN - 1);
      const double slack = w[i] - cert.constraint(t, x);
      ++rep.evaluated;
      if (slack < rep.min_slack) {
        rep.min_slack = slack;
        rep.argmin_theta = t;
        rep.argmin_x = x;
      }
    }
  }
  // inside the strip: below θ* the multiplier is the negative constant C, so every term is ≤ 0 ≤ w;
  // above θ*, y_θ'(x) = q(x)(θ − a(x))/(x − a(x)) has the sign of a(x) − θ as long as q < 0 < x − a
  bool ok = cert.C() < 0 && *std::min_element(w.begin(), w.end()) >= -1e-12;
  for (int k = 1; ok && k < 200; ++k) {
    const double x = ts + delta * k / 200.0;
    const double a = cert.plan().segment_at(ts).kind == SegmentKind::PoolCurve
                         ? cert.plan().segment_at(ts).curve->a(x)
                         : ts;
    ok = cert.q(x) < 0 && x - a > 0;
  }
  rep.strip_certified = ok;
  return rep;
}

double duality_gap(double primal, const DualCertificate& cert) { return cert.dual_value() - primal; }

SlackReport check_support_optimality(const DiscreteSignal& ds, const DualCertificate& cert) {
  SlackReport rep;
  for (const auto& c : ds.cells) {
    if (c.mass <= 1e-12) continue;
    ++rep.support_cells;
    const double s = std::abs(cert.w(c.type) - cert.constraint(c.type, c.assigned));
    if (s > rep.max_slack) {
      rep.max_slack = s;
      rep.argmax_theta = c.type;
    }
  }
  return rep;
}

void write_dual_csv(std::ostream& os, const DualCertificate& cert) {
  os << "series,point,value,m\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < cert.x_samples.size(); ++i)
    os << "q," << cert.x_samples(i) << ',' << cert.q_samples(i) << ',' << cert.m_samples(i) << '\n';
  for (Eigen::Index i = 0; i < cert.theta_samples.size(); ++i)
    os << "w," << cert.theta_samples(i) << ',' << cert.w_samples(i) << ",\n";
}

}  // namespace lemons
