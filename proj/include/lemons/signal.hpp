#pragma once

#include "lemons/matching.hpp"
#include "lemons/objective.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace lemons {

enum class SegmentKind { Reveal, PoolCurve, CostMatch };

const char* to_string(SegmentKind k);

/// One piece of a deterministic signal θ ↦ x.
struct Segment {
  SegmentKind kind = SegmentKind::Reveal;
  Interval types;
  Interval means;
  std::shared_ptr<const MatchingCurve> curve;  ///< PoolCurve only
  int pair = -1;  ///< pools and the cost-matched interval they share means with carry the same id

  double assign(const MarketInstance& inst, double t) const;
};

/// Continuum signal: segments partitioning [0,1] in increasing type order.
struct SignalPlan {
  std::string shape;
  std::vector<Segment> segments;
  std::map<std::string, double> params;
  std::vector<std::string> notes;

  const Segment& segment_at(double t) const;
  double assign(const MarketInstance& inst, double t) const { return segment_at(t).assign(inst, t); }
};

/// Drops empty segments and merges adjacent reveals.
void canonicalize(SignalPlan& plan);

/// Checks partition, prices-as-means on every segment and pool/cost-match image pairing.
void validate_plan(const SignalPlan& plan, const MarketInstance& inst);

struct PoolRevealPoolParams {
  double x_star = 0;
  double theta1 = 0;
  double theta2 = 0;
  double bracket_residual = 0;
  std::vector<double> other_roots;
};

enum class RatioShape { Increasing, ConvexWithEndpoint, Other };

const char* to_string(RatioShape s);

struct RatioReport {
  RatioShape shape = RatioShape::Other;
  bool increasing = false;
  bool convex = false;
  double endpoint_low = 0;    ///< t_{c(1)} at the first pooled type
  double endpoint_match = 0;  ///< t_{c(1)} at θ̲
};

SignalPlan build_full_reveal(const MarketInstance& inst);
SignalPlan build_nam(const MarketInstance& inst, const CurveOptions& opt = {});

/// α(θ) / (x − θ).
double ratio(const PiecewisePoly& alpha, double x, double t);

RatioReport classify_ratio(const MarketInstance& inst, const PiecewisePoly& alpha);
/// Shape of α(θ)/(x−θ) over θ ∈ [lo, θ*] for x ∈ [θ*, c(1)], endpoint condition compared at θ̲.
RatioReport classify_ratio(const MarketInstance& inst, const PiecewisePoly& alpha, double lo, double theta_low);

PoolRevealPoolParams find_x_star(const MarketInstance& inst, const PiecewisePoly& alpha);
/// Meeting mean of an upper curve (starting at `upper`'s top type) and the lower curve.
PoolRevealPoolParams find_x_star(const PiecewisePoly& alpha, const MatchingCurve& upper, const MatchingCurve& lower);

SignalPlan build_pool_reveal_pool(const MarketInstance& inst, const PiecewisePoly& alpha);

double theta_beta(const MarketInstance& inst, double beta);
SignalPlan build_price_surplus_plan(const MarketInstance& inst, double beta);

/// Greedy construction for any number of crossings.
SignalPlan greedy_multicross(const MarketInstance& inst, const PiecewisePoly& alpha, const CurveOptions& opt = {});

/// Routes an objective to the matching construction for the instance's regime.
SignalPlan build_optimal_plan(const MarketInstance& inst, const Objective& objective);

/// CSV rows (θ, x, segment label) on `samples` evenly spaced types.
void write_plan_csv(std::ostream& os, const MarketInstance& inst, const SignalPlan& plan, int samples = 1001);

}  // namespace lemons
