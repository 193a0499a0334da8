#pragma once

#include "lemons/market.hpp"

#include <variant>

namespace lemons {

/// Weighted volume of trade: ∫ α(θ) 1{trade} dπ.
struct VolumeObjective {
  PiecewisePoly alpha;
};

/// Convex combination of price and surplus: ∫ [x − (1−β)c(θ)] 1{trade} dπ.
struct PriceSurplusObjective {
  double beta = 0;
};

using Objective = std::variant<VolumeObjective, PriceSurplusObjective>;

/// θ − (1−β)c(θ), the per-type weight the price/surplus objective reduces to under the mean constraint.
inline PiecewisePoly price_surplus_weight(const MarketInstance& inst, double beta) {
  return PiecewisePoly::single(Poly({0.0, 1.0})) - inst.cost_fn().poly() * (1.0 - beta);
}

/// The per-type weight whose volume objective has the same value on every feasible signal.
inline PiecewisePoly effective_weight(const MarketInstance& inst, const Objective& obj) {
  if (const auto* v = std::get_if<VolumeObjective>(&obj)) return v->alpha;
  return price_surplus_weight(inst, std::get<PriceSurplusObjective>(obj).beta);
}

inline VolumeObjective unit_volume() { return {PiecewisePoly::single(Poly({1.0}))}; }

}  // namespace lemons
