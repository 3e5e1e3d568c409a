#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/market_core.hpp"

namespace stablelab {

enum class RuleKind { UniformPair, UniformAgentBest, SurplusTotal, SurplusGain, Custom };

using CustomWeight =
    std::function<double(const Market&, const Matching&, const BlockingPair&, std::uint64_t stepIndex)>;

/// How the next blocking pair is drawn.
///  UniformPair      every blocking pair equally likely.
///  UniformAgentBest an agent with blocking partners is drawn uniformly and
///                   matches its best blocking partner.
///  SurplusTotal     weight firmValue + workerValue.
///  SurplusGain      weight of the pair minus both agents' current values.
///  Custom           user weight; `bestOnly` restricts it to best pairs.
/// Surplus weights are clipped into [max/kappa, max] at every step; custom
/// weights must already respect kappa.
struct WeightRule {
  RuleKind kind = RuleKind::UniformPair;
  double kappa = 1.0;
  CustomWeight custom;
  bool bestOnly = false;

  bool usesBestPairs() const noexcept { return kind == RuleKind::UniformAgentBest || (kind == RuleKind::Custom && bestOnly); }
  static WeightRule uniform() { return {}; }
  static WeightRule agentBest() { return {RuleKind::UniformAgentBest, 2.0, {}, false}; }
};

std::string_view toString(RuleKind kind);
/// "uniform", "agent-best", "surplus-total", "surplus-gain". Throws ConfigError.
RuleKind parseRuleKind(std::string_view name);

/// Throws MissingCardinalValues, InvalidWeights (kappa < 1, custom without a function).
void validateRule(const Market& market, const WeightRule& rule);

struct PairWeight {
  BlockingPair pair;
  double weight;
};

/// Admissible pairs of `matching` with unnormalized weights. Empty iff stable.
/// Throws InvalidWeights (non-positive custom weight), KappaViolated.
std::vector<PairWeight> transitionWeights(const Market& market, const Matching& matching, const WeightRule& rule,
                                          std::uint64_t stepIndex = 0);

/// Raw weights for an explicit admissible list, before clamping. Shared with
/// the incremental tracker in the simulator.
double rawPairWeight(const Market& market, const Matching& matching, const BlockingPair& pair, const WeightRule& rule,
                     std::uint64_t stepIndex);

/// Clips surplus weights into [max/kappa, max]; checks the ratio for custom ones.
void applyKappa(std::vector<double>& weights, const WeightRule& rule);

}  // namespace stablelab
