#include "lemons/signal.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lemons {

namespace {

constexpr double kEndpointTol = 1e-9;

double single_crossing(const MarketInstance& inst) {
  CrossingProfile prof = find_crossings(inst);
  if (prof.regime != Regime::GainsAtTop)
    throw DomainError(std::string("construction needs gains at the top, instance is ") + to_string(prof.regime));
  return prof.theta_star();
}

Segment reveal(double lo, double hi) {
  Segment s;
  s.kind = SegmentKind::Reveal;
  s.types = {lo, hi};
  s.means = {lo, hi};
  return s;
}

Segment pool(std::shared_ptr<const MatchingCurve> curve, double lo, double hi, int pair) {
  Segment s;
  s.kind = SegmentKind::PoolCurve;
  s.types = {lo, hi};
  s.means = {curve->x_of(hi), curve->x_of(lo)};
  s.curve = std::move(curve);
  s.pair = pair;
  return s;
}

Segment cost_match(const MarketInstance& inst, double lo, double hi, int pair) {
  Segment s;
  s.kind = SegmentKind::CostMatch;
  s.types = {lo, hi};
  s.means = {inst.cost(lo), inst.cost(hi)};
  s.pair = pair;
  return s;
}

/// Sorts by type, fills gaps with reveals and canonicalizes.
void assemble(SignalPlan& plan) {
  std::sort(plan.segments.begin(), plan.segments.end(),
            [](const Segment& a, const Segment& b) { return a.types.lo < b.types.lo; });
  std::vector<Segment> out;
  double cursor = 0.0;
  for (auto& s : plan.segments) {
    if (s.types.lo > cursor + 1e-15) out.push_back(reveal(cursor, s.types.lo));
    cursor = std::max(cursor, s.types.hi);
    out.push_back(std::move(s));
  }
  if (cursor < 1.0) out.push_back(reveal(cursor, 1.0));
  plan.segments = std::move(out);
  canonicalize(plan);
}

bool ratio_increasing_on(const PiecewisePoly& alpha, Interval types, Interval means) {
  constexpr int kN = 50;
  for (int i = 0; i < kN; ++i) {
    const double x = means.lo + means.length() * i / (kN - 1);
    double prev = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < kN; ++j) {
      const double t = types.lo + types.length() * j / kN;
      if (x - t < 1e-12) break;
      const double r = alpha(t) / (x - t);
      if (!(r > prev)) return false;
      prev = r;
    }
  }
  return true;
}

double find_root(const std::function<double(double)>& fn, double lo, double hi) {
  std::uintmax_t iters = 300;
  auto r = boost::math::tools::toms748_solve(fn, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

const char* to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::Reveal: return "reveal";
    case SegmentKind::PoolCurve: return "pool";
    case SegmentKind::CostMatch: return "cost-match";
  }
  return "?";
}

const char* to_string(RatioShape s) {
  switch (s) {
    case RatioShape::Increasing: return "increasing";
    case RatioShape::ConvexWithEndpoint: return "convex-with-endpoint-condition";
    case RatioShape::Other: return "other";
  }
  return "?";
}

double Segment::assign(const MarketInstance& inst, double t) const {
  switch (kind) {
    case SegmentKind::Reveal: return t;
    case SegmentKind::CostMatch: return inst.cost(t);
    case SegmentKind::PoolCurve: return curve->x_of(t);
  }
  return t;
}

const Segment& SignalPlan::segment_at(double t) const {
  for (const auto& s : segments)
    if (t <= s.types.hi) return s;
  return segments.back();
}

void canonicalize(SignalPlan& plan) {
  std::vector<Segment> out;
  for (auto& s : plan.segments) {
    if (s.types.length() <= 1e-15) continue;
    if (!out.empty() && s.kind == SegmentKind::Reveal && out.back().kind == SegmentKind::Reveal) {
      out.back().types.hi = s.types.hi;
      out.back().means.hi = s.means.hi;
      continue;
    }
    out.push_back(std::move(s));
  }
  plan.segments = std::move(out);
}

void validate_plan(const SignalPlan& plan, const MarketInstance& inst) {
  if (plan.segments.empty()) throw ValidationError("plan has no segments");
  if (std::abs(plan.segments.front().types.lo) > 1e-12 || std::abs(plan.segments.back().types.hi - 1.0) > 1e-12)
    throw ValidationError("plan does not cover [0,1]");
  for (std::size_t i = 1; i < plan.segments.size(); ++i)
    if (std::abs(plan.segments[i].types.lo - plan.segments[i - 1].types.hi) > 1e-12)
      throw ValidationError("plan segments leave a gap or overlap");

  std::map<int, std::vector<Interval>> pools;
  std::map<int, Interval> costs;
  for (const auto& s : plan.segments) {
    for (int k = 0; k <= 20; ++k) {
      double t = s.types.lo + s.types.length() * k / 20.0;
      if (s.assign(inst, t) < auxiliary_cost(inst, t) - 1e-9) {
        std::ostringstream os;
        os << to_string(s.kind) << " segment violates prices-as-means at type " << t;
        throw ValidationError(os.str());
      }
    }
    if (s.kind == SegmentKind::PoolCurve) pools[s.pair].push_back(s.means);
    if (s.kind == SegmentKind::CostMatch) {
      if (costs.count(s.pair)) throw ValidationError("two cost-matched intervals share a pairing id");
      costs[s.pair] = s.means;
    }
  }
  for (auto& [id, images] : pools) {
    if (!costs.count(id)) throw ValidationError("pooled interval without a cost-matched partner");
    std::sort(images.begin(), images.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    double cursor = costs[id].lo;
    for (const auto& im : images) {
      if (std::abs(im.lo - cursor) > 1e-8) throw ValidationError("pool images do not tile the cost image");
      cursor = im.hi;
    }
    if (std::abs(cursor - costs[id].hi) > 1e-8) throw ValidationError("pool images do not tile the cost image");
  }
  for (const auto& [id, im] : costs)
    if (!pools.count(id)) throw ValidationError("cost-matched interval without pooled partner");
}

SignalPlan build_full_reveal(const MarketInstance&) {
  SignalPlan plan;
  plan.shape = "full-reveal";
  plan.segments.push_back(reveal(0.0, 1.0));
  return plan;
}

SignalPlan build_nam(const MarketInstance& inst, const CurveOptions& opt) {
  const double ts = single_crossing(inst);
  auto g2 = std::make_shared<const MatchingCurve>(solve_g2(inst, ts, 1.0, opt));
  const double low = g2->types().lo;
  SignalPlan plan;
  plan.shape = "nam";
  plan.segments = {reveal(0.0, low), pool(g2, low, ts, 0), cost_match(inst, ts, 1.0, 0)};
  plan.params = {{"theta_star", ts}, {"theta_low", low}};
  canonicalize(plan);
  return plan;
}

double ratio(const PiecewisePoly& alpha, double x, double t) {
  if (x - t < 1e-12) throw DomainError("ratio needs x − θ ≥ 1e-12");
  return alpha(t) / (x - t);
}

RatioReport classify_ratio(const MarketInstance& inst, const PiecewisePoly& alpha, double lo, double theta_low) {
  const double ts = single_crossing(inst);
  const double c1 = inst.cost(1.0);
  constexpr int kN = 200;
  RatioReport rep;
  rep.increasing = rep.convex = true;
  std::vector<double> t(kN);
  for (int i = 0; i < kN; ++i) {
    const double x = ts + (c1 - ts) * i / (kN - 1);
    for (int j = 0; j < kN; ++j) t[j] = ratio(alpha, x, lo + (ts - lo) * j / kN);
    for (int j = 0; j + 1 < kN; ++j)
      if (!(t[j + 1] > t[j])) rep.increasing = false;
    for (int j = 0; j + 2 < kN; ++j)
      if (!(t[j + 2] - 2 * t[j + 1] + t[j] > 0)) rep.convex = false;
  }
  rep.endpoint_low = ratio(alpha, c1, lo);
  rep.endpoint_match = ratio(alpha, c1, theta_low);
  if (rep.increasing)
    rep.shape = RatioShape::Increasing;
  else if (rep.convex && rep.endpoint_low > rep.endpoint_match)
    rep.shape = RatioShape::ConvexWithEndpoint;
  return rep;
}

RatioReport classify_ratio(const MarketInstance& inst, const PiecewisePoly& alpha) {
  const double ts = single_crossing(inst);
  const double low = solve_g2(inst, ts, 1.0).types().lo;
  return classify_ratio(inst, alpha, 0.0, low);
}

PoolRevealPoolParams find_x_star(const PiecewisePoly& alpha, const MatchingCurve& upper, const MatchingCurve& lower) {
  const double ts = lower.means().lo, c1 = lower.means().hi;
  auto h = [&](double x) { return ratio(alpha, x, upper.a(x)) - ratio(alpha, x, lower.a(x)); };
  constexpr int kScan = 2000;
  std::vector<double> roots;
  double prev_x = ts + (c1 - ts) / kScan, prev_h = h(prev_x);
  if (!(prev_h < 0)) throw NoBracketError("meeting-mean function is not negative next to the crossing");
  if (!(h(c1) > 0)) throw NoBracketError("meeting-mean function is not positive at c(1)");
  for (int k = 2; k <= kScan; ++k) {
    const double x = ts + (c1 - ts) * k / kScan, hx = h(x);
    if (hx == 0)
      roots.push_back(x);
    else if ((hx < 0) != (prev_h < 0) && prev_h != 0)
      roots.push_back(find_root(h, prev_x, x));
    prev_x = x;
    prev_h = hx;
  }
  if (roots.empty()) throw NoBracketError("meeting mean not bracketed");
  PoolRevealPoolParams out;
  out.x_star = roots.front();
  out.other_roots.assign(roots.begin() + 1, roots.end());
  out.bracket_residual = std::abs(h(out.x_star));
  out.theta1 = upper.a(out.x_star);
  out.theta2 = lower.a(out.x_star);
  if (!(out.theta1 > 0 && out.theta1 < out.theta2 && out.theta2 < ts))
    throw NoBracketError("meeting mean does not order the pooled types");
  return out;
}

PoolRevealPoolParams find_x_star(const MarketInstance& inst, const PiecewisePoly& alpha) {
  const double ts = single_crossing(inst);
  MatchingCurve g1 = solve_g1(inst, 0.0, ts, 1.0), g2 = solve_g2(inst, ts, 1.0);
  return find_x_star(alpha, g1, g2);
}

namespace {

SignalPlan pool_reveal_pool(const MarketInstance& inst, const PiecewisePoly& alpha, double start) {
  const double ts = single_crossing(inst);
  auto upper = std::make_shared<const MatchingCurve>(solve_g1(inst, start, ts, 1.0));
  auto lower = std::make_shared<const MatchingCurve>(solve_g2(inst, ts, 1.0));
  PoolRevealPoolParams prp = find_x_star(alpha, *upper, *lower);
  SignalPlan plan;
  plan.shape = start > 0 ? "x-beta-nam" : "pool-reveal-pool";
  plan.segments = {reveal(0.0, start), pool(upper, start, prp.theta1, 0), reveal(prp.theta1, prp.theta2),
                   pool(lower, prp.theta2, ts, 0), cost_match(inst, ts, 1.0, 0)};
  // both pools meet exactly at the meeting mean
  plan.segments[1].means.lo = prp.x_star;
  plan.segments[3].means.hi = prp.x_star;
  plan.params = {{"theta_star", ts},
                 {"x_star", prp.x_star},
                 {"theta1", prp.theta1},
                 {"theta2", prp.theta2},
                 {"theta_low", lower->types().lo},
                 {"theta_bar", upper->a(ts)},
                 {"bracket_residual", prp.bracket_residual}};
  if (start > 0) plan.params["theta_beta"] = start;
  for (double r : prp.other_roots) {
    std::ostringstream os;
    os << "additional meeting-mean root at x = " << std::setprecision(12) << r;
    plan.notes.push_back(os.str());
  }
  canonicalize(plan);
  return plan;
}

}  // namespace

SignalPlan build_pool_reveal_pool(const MarketInstance& inst, const PiecewisePoly& alpha) {
  return pool_reveal_pool(inst, alpha, 0.0);
}

double theta_beta(const MarketInstance& inst, double beta) { return cost_cutoff(inst, beta); }

SignalPlan build_price_surplus_plan(const MarketInstance& inst, double beta) {
  const double ts = single_crossing(inst);
  const double tb = theta_beta(inst, beta);
  auto g2 = std::make_shared<const MatchingCurve>(solve_g2(inst, ts, 1.0));
  const double low = g2->types().lo;
  const PiecewisePoly alpha = price_surplus_weight(inst, beta);

  if (tb > low + kEndpointTol || tb >= ts) {
    // pooling starts at θ_β; the lower curve stops matching once it reaches θ_β
    SignalPlan plan;
    plan.shape = "price-surplus-reveal";
    const double x_hit = g2->x_of(std::min(tb, ts));
    const double top = inst.inverse_cost(x_hit);
    plan.segments = {reveal(0.0, tb), pool(g2, tb, ts, 0), cost_match(inst, ts, top, 0), reveal(top, 1.0)};
    plan.params = {{"theta_star", ts}, {"theta_low", low}, {"theta_beta", tb}, {"matched_top", top}};
    if (top - ts <= 1e-15) plan.segments = {reveal(0.0, 1.0)};
    canonicalize(plan);
    return plan;
  }
  RatioReport rep = classify_ratio(inst, alpha, tb, low);
  if (rep.shape == RatioShape::Increasing) {
    SignalPlan plan = build_nam(inst);
    plan.params["theta_beta"] = tb;
    return plan;
  }
  if (rep.shape == RatioShape::ConvexWithEndpoint) return pool_reveal_pool(inst, alpha, tb);
  throw UnclassifiedRatioError("price/surplus weight ratio is neither increasing nor convex on [θ_β, θ*]");
}

SignalPlan greedy_multicross(const MarketInstance& inst, const PiecewisePoly& alpha, const CurveOptions& opt) {
  CrossingProfile prof = find_crossings(inst);
  const auto& blocks = prof.blocks;
  SignalPlan plan;
  plan.shape = "greedy";
  plan.params["crossings"] = static_cast<double>(prof.crossings.size());

  int e = -1;
  for (int k = static_cast<int>(blocks.size()) - 1; k >= 0; --k)
    if (blocks[k].efficient) {
      e = k;
      break;
    }
  if (e < 0 || e == 0) {
    plan = build_full_reveal(inst);
    plan.notes.push_back("no inefficient mass below an efficient block: full revelation");
    return plan;
  }
  Interval E = blocks[e].range;
  int i = e - 1;
  Interval I = blocks[i].range;
  int pair = 0;
  while (true) {
    CurveProblem p;
    p.x_start = inst.cost(E.lo);
    p.a_start = I.hi;
    p.x_end = inst.cost(E.hi);
    p.seeded = std::abs(p.x_start - p.a_start) < 1e-12;
    p.floor = I.lo;
    p.stop_at_floor = true;
    p.ceiling = I.hi;
    CurveSolution sol = integrate_curve(inst, p, opt);
    if (!ratio_increasing_on(alpha, I, {p.x_start, p.x_end})) {
      std::ostringstream os;
      os << "weight ratio not increasing on types [" << I.lo << ", " << I.hi << "]; greedy plan is not certified";
      plan.notes.push_back(os.str());
    }
    auto curve = std::make_shared<const MatchingCurve>(std::move(sol.curve));
    int e_next = e - 2;
    if (!sol.hit_floor) {
      const double tk = curve->types().lo;
      plan.segments.push_back(pool(curve, tk, I.hi, pair));
      plan.segments.push_back(cost_match(inst, E.lo, E.hi, pair));
      ++pair;
      if (e_next < 0) break;
      E = blocks[e_next].range;
      if (e_next > i && tk > I.lo + 1e-15) {
        I = {I.lo, tk};
      } else {
        i = e_next - 1;
        if (i < 0) break;
        I = blocks[i].range;
      }
      e = e_next;
    } else {
      const double split = inst.inverse_cost(sol.x_hit);
      Segment s = pool(curve, I.lo, I.hi, pair);
      s.means = {inst.cost(E.lo), sol.x_hit};
      plan.segments.push_back(std::move(s));
      plan.segments.push_back(cost_match(inst, E.lo, split, pair));
      ++pair;
      E = {split, E.hi};
      i -= 2;
      if (i < 0) break;
      I = blocks[i].range;
    }
  }
  assemble(plan);
  return plan;
}

SignalPlan build_optimal_plan(const MarketInstance& inst, const Objective& objective) {
  CrossingProfile prof = find_crossings(inst);
  if (prof.regime == Regime::GainsAtBottom || prof.regime == Regime::AllEfficient ||
      prof.regime == Regime::AllInefficient) {
    SignalPlan plan = build_full_reveal(inst);
    plan.notes.push_back(std::string(to_string(prof.regime)) + ": full revelation is optimal for any objective");
    return plan;
  }
  if (prof.regime == Regime::MultiCrossing) {
    if (std::holds_alternative<PriceSurplusObjective>(objective))
      throw UnclassifiedRatioError("no construction for price/surplus objectives with several crossings");
    return greedy_multicross(inst, std::get<VolumeObjective>(objective).alpha);
  }
  if (const auto* ps = std::get_if<PriceSurplusObjective>(&objective)) return build_price_surplus_plan(inst, ps->beta);
  const PiecewisePoly& alpha = std::get<VolumeObjective>(objective).alpha;
  RatioReport rep = classify_ratio(inst, alpha);
  if (rep.shape == RatioShape::Increasing) return build_nam(inst);
  if (rep.shape == RatioShape::ConvexWithEndpoint) return build_pool_reveal_pool(inst, alpha);
  throw UnclassifiedRatioError("weight ratio is neither increasing nor convex with the endpoint condition");
}

void write_plan_csv(std::ostream& os, const MarketInstance& inst, const SignalPlan& plan, int samples) {
  os << std::setprecision(17);
  for (int k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / (samples - 1);
    const Segment& s = plan.segment_at(t);
    os << t << ',' << s.assign(inst, t) << ',' << to_string(s.kind) << '\n';
  }
}

}  // namespace lemons
