#include "lemons/market.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lemons {

namespace {

constexpr double kKnotTol = 1e-10;
constexpr double kRootTol = 1e-12;
constexpr int kSampleCount = 1001;  // 1e-3 spacing on [0,1]

Eigen::Index effective_degree(const Poly& p) {
  Eigen::Index d = p.degree();
  while (d > 0 && p.coefficients()(d) == 0.0) --d;
  return d;
}

PiecewisePoly identity_poly() { return PiecewisePoly::single(Poly({0.0, 1.0})); }

}  // namespace

const char* to_string(FnKind kind) {
  switch (kind) {
    case FnKind::Density: return "density";
    case FnKind::Cost: return "cost";
    case FnKind::Weight: return "weight";
  }
  return "?";
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::GainsAtTop: return "gains-at-top";
    case Regime::GainsAtBottom: return "gains-at-bottom";
    case Regime::MultiCrossing: return "multi-crossing";
    case Regime::AllInefficient: return "all-inefficient";
    case Regime::AllEfficient: return "all-efficient";
  }
  return "?";
}

ScalarFn::ScalarFn(PiecewisePoly fn, FnKind kind, bool allow_zero_at_origin)
    : fn_(std::move(fn)), slope_(fn_.derivative()), kind_(kind) {
  const std::string name = to_string(kind);
  const auto& k = fn_.knots();
  if (k.front() != 0.0 || k.back() != 1.0) throw ValidationError(name + ": breakpoints must start at 0 and end at 1");
  for (std::size_t i = 1; i + 1 < k.size(); ++i) {
    const Poly& l = fn_.pieces()[i - 1];
    const Poly& r = fn_.pieces()[i];
    if (std::abs(l(k[i]) - r(k[i])) > kKnotTol || std::abs(l.derivative()(k[i]) - r.derivative()(k[i])) > kKnotTol) {
      std::ostringstream os;
      os << name << ": value or slope jumps at knot " << k[i];
      throw ValidationError(os.str());
    }
  }
  for (const Poly& p : fn_.pieces()) {
    if (!p.coefficients().allFinite()) throw ValidationError(name + ": non-finite coefficient");
    if (kind != FnKind::Weight && effective_degree(p) > 3) throw ValidationError(name + ": piece degree exceeds 3");
  }
  for (int i = 0; i < kSampleCount; ++i) {
    double t = static_cast<double>(i) / (kSampleCount - 1);
    double v = fn_(t);
    switch (kind) {
      case FnKind::Density:
        if (!(v > 0)) throw ValidationError(name + ": must be positive on [0,1]");
        break;
      case FnKind::Cost:
        if (!(v > 0) && !(allow_zero_at_origin && i == 0 && v == 0))
          throw ValidationError(name + ": must be positive on [0,1]");
        if (!(slope_(t) > 0)) throw ValidationError(name + ": must be strictly increasing on [0,1]");
        break;
      case FnKind::Weight:
        // a zero at the top endpoint is a null set and keeps shapes like (1−θ)^4 admissible
        if (!(v > 0 || (i == kSampleCount - 1 && v == 0)) || !std::isfinite(v))
          throw ValidationError(name + ": must be positive and bounded on [0,1)");
        break;
    }
  }
  if (kind == FnKind::Density && std::abs(fn_.integrate(0.0, 1.0) - 1.0) > 1e-8)
    throw ValidationError(name + ": must integrate to 1");
}

double CrossingProfile::theta_star() const {
  if (regime != Regime::GainsAtTop && regime != Regime::GainsAtBottom)
    throw DomainError(std::string("no single crossing in regime ") + to_string(regime));
  return crossings.front();
}

MarketInstance::MarketInstance(ScalarFn density, ScalarFn cost, bool declared_gains_at_bottom)
    : f_(std::move(density)), c_(std::move(cost)), gains_at_bottom_(declared_gains_at_bottom) {
  if (f_.kind() != FnKind::Density) throw ValidationError("density: wrong function kind");
  if (c_.kind() != FnKind::Cost) throw ValidationError("cost: wrong function kind");
  if (c_(0.0) <= 0.0 && !gains_at_bottom_)
    throw ValidationError("cost: c(0) = 0 requires an explicit gains-at-bottom regime declaration");
  F_ = f_.poly().antiderivative();
  Mf_ = (f_.poly() * identity_poly()).antiderivative();
  Cf_ = (f_.poly() * c_.poly()).antiderivative();
}

double MarketInstance::inverse_cost(double x) const {
  const double lo = c_(0.0), hi = c_(1.0);
  if (x < lo - 1e-12 || x > hi + 1e-12) {
    std::ostringstream os;
    os << "inverse cost: " << x << " outside [" << lo << ", " << hi << "]";
    throw DomainError(os.str());
  }
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  double guess = (x - lo) / (hi - lo);
  return boost::math::tools::newton_raphson_iterate(
      [&](double t) { return std::make_pair(c_(t) - x, c_.slope(t)); }, guess, 0.0, 1.0, 50);
}

double MarketInstance::weighted(const PiecewisePoly& g, double a, double b) const {
  return (g * f_.poly()).integrate(a, b);
}

Posterior::Posterior(std::vector<double> types, std::vector<double> weights)
    : types_(std::move(types)), weights_(std::move(weights)) {
  if (types_.empty() || types_.size() != weights_.size()) throw ValidationError("posterior: empty or ragged support");
  double total = 0;
  for (double w : weights_) {
    if (!(w > 0)) throw ValidationError("posterior: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("posterior: weights must sum to 1");
}

double Posterior::mean() const {
  return std::inner_product(types_.begin(), types_.end(), weights_.begin(), 0.0);
}

void AtomMarket::validate() const {
  if (types.size() == 0 || types.size() != masses.size() || types.size() != costs.size())
    throw ValidationError("atoms: types, masses and costs must have equal nonzero length");
  for (Eigen::Index i = 0; i < types.size(); ++i) {
    if (types(i) < 0 || types(i) > 1) throw ValidationError("atoms.types: outside [0,1]");
    if (!(masses(i) > 0)) throw ValidationError("atoms.masses: must be positive");
    if (!(costs(i) > 0)) throw ValidationError("atoms.costs: must be positive");
    if (i > 0 && !(types(i) > types(i - 1))) throw ValidationError("atoms.types: must be strictly increasing");
    if (i > 0 && !(costs(i) > costs(i - 1))) throw ValidationError("atoms.costs: must be strictly increasing");
  }
  if (std::abs(masses.sum() - 1.0) > 1e-12) throw ValidationError("atoms.masses: must sum to 1");
}

double auxiliary_cost(const MarketInstance& inst, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("auxiliary cost: type outside [0,1]");
  return std::min(t, inst.cost(t));
}

CrossingProfile find_crossings(const MarketInstance& inst) {
  PiecewisePoly gap = inst.cost_fn().poly() - identity_poly();
  std::vector<double> touches;
  std::vector<double> roots = gap.roots(0.0, 1.0, kRootTol, &touches);
  for (double t : touches)
    if (t > kRootTol && t < 1.0 - kRootTol) {
      std::ostringstream os;
      os << "c(θ) − θ touches zero without crossing at θ = " << t;
      throw DegenerateTangencyError(os.str());
    }
  CrossingProfile out;
  for (double r : roots)
    if (r > kRootTol && r < 1.0 - kRootTol) out.crossings.push_back(r);

  std::vector<double> cuts{0.0};
  cuts.insert(cuts.end(), out.crossings.begin(), out.crossings.end());
  cuts.push_back(1.0);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    out.blocks.push_back({{cuts[i], cuts[i + 1]}, inst.cost(mid) < mid});
  }
  const std::size_t n = out.crossings.size();
  if (n == 0)
    out.regime = out.blocks.front().efficient ? Regime::AllEfficient : Regime::AllInefficient;
  else if (n == 1)
    out.regime = out.blocks.front().efficient ? Regime::GainsAtBottom : Regime::GainsAtTop;
  else
    out.regime = Regime::MultiCrossing;
  return out;
}

EquilibriumResult equilibrium_price(const Posterior& post, const std::vector<double>& costs) {
  const auto& th = post.types();
  const auto& w = post.weights();
  if (costs.size() != th.size()) throw ValidationError("equilibrium price: one cost per support point required");
  std::vector<std::size_t> order(th.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });

  // candidate threshold sets are prefixes of the cost order, one per distinct cost level
  EquilibriumResult out;
  double mass = 0, moment = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    mass += w[order[k]];
    moment += w[order[k]] * th[order[k]];
    double level = costs[order[k]];
    if (k + 1 < order.size() && costs[order[k + 1]] == level) continue;
    double p = moment / mass;
    bool above = p >= level - 1e-12;
    bool below_next = k + 1 == order.size() || p < costs[order[k + 1]];
    if (above && below_next) out.fixed_points.push_back(p);
  }
  std::sort(out.fixed_points.begin(), out.fixed_points.end());
  if (!out.fixed_points.empty()) {
    out.trade = true;
    out.price = out.fixed_points.back();
  }
  return out;
}

EquilibriumResult equilibrium_price(const MarketInstance& inst, const Posterior& post) {
  std::vector<double> costs;
  costs.reserve(post.types().size());
  for (double t : post.types()) costs.push_back(inst.cost(t));
  return equilibrium_price(post, costs);
}

std::vector<SignalOutcome> induced_posteriors(const AtomMarket& market, const Eigen::MatrixXd& conditional) {
  market.validate();
  if (conditional.rows() != market.size()) throw ValidationError("signal: one row per type required");
  for (Eigen::Index i = 0; i < conditional.rows(); ++i)
    if (std::abs(conditional.row(i).sum() - 1.0) > 1e-12 || (conditional.row(i).array() < 0).any())
      throw ValidationError("signal: each row must be a probability vector");
  std::vector<SignalOutcome> out;
  for (Eigen::Index j = 0; j < conditional.cols(); ++j) {
    Eigen::VectorXd joint = market.masses.cwiseProduct(conditional.col(j));
    SignalOutcome s;
    s.probability = joint.sum();
    if (s.probability > 0) {
      std::vector<double> types, weights;
      for (Eigen::Index i = 0; i < joint.size(); ++i)
        if (joint(i) > 0) {
          types.push_back(market.types(i));
          weights.push_back(joint(i) / s.probability);
        }
      s.posterior.emplace(std::move(types), std::move(weights));
    }
    out.push_back(std::move(s));
  }
  return out;
}

double cost_cutoff(const MarketInstance& inst, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("beta outside [0,1]");
  PiecewisePoly h = inst.cost_fn().poly() * (1.0 - beta) - identity_poly();
  std::vector<double> roots = h.roots(0.0, 1.0, kRootTol);
  if (roots.empty()) throw DomainError("no cutoff type for this beta");
  return roots.front();
}

AssumptionReport check_assumptions(const MarketInstance& inst, std::optional<double> theta_low) {
  AssumptionReport rep;
  try {
    rep.regime = find_crossings(inst).regime;
    rep.a1 = rep.regime == Regime::GainsAtTop;
    if (!rep.a1) rep.notes.push_back(std::string("regime is ") + to_string(rep.regime));
  } catch (const DegenerateTangencyError& e) {
    rep.notes.push_back(e.what());
  }
  if (!theta_low)
    rep.notes.push_back("lower matching endpoint unavailable (curve escaped)");
  else if (*theta_low > 1e-9)
    rep.a2 = true;
  else
    rep.notes.push_back("lower matching endpoint is not positive: full trade is feasible");

  rep.a3 = true;
  for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    PiecewisePoly h = inst.cost_fn().poly() * (1.0 - beta) - identity_poly();
    std::vector<double> roots = h.roots(0.0, 1.0, kRootTol);
    bool ok = roots.size() == 1;
    for (int i = 0; ok && i < kSampleCount; ++i) {
      double t = static_cast<double>(i) / (kSampleCount - 1);
      if (std::abs(t - roots.front()) < 1e-9) continue;
      if ((t < roots.front()) != (h(t) > 0)) ok = false;
    }
    if (!ok) {
      rep.a3 = false;
      std::ostringstream os;
      os << "cutoff is not unique at beta = " << beta;
      rep.notes.push_back(os.str());
    }
  }
  return rep;
}

ScalarFn uniform_density() { return ScalarFn(PiecewisePoly::single(Poly({1.0})), FnKind::Density); }

MarketInstance canonical_instance() {
  return MarketInstance(uniform_density(), ScalarFn(PiecewisePoly::single(Poly({0.25, 0.5})), FnKind::Cost));
}

}  // namespace lemons
