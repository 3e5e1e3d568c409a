#include "stablelab/weights.hpp"

#include <algorithm>

#include "stablelab/error.hpp"

namespace stablelab {

std::string_view toString(RuleKind kind) {
  switch (kind) {
    case RuleKind::UniformPair: return "uniform";
    case RuleKind::UniformAgentBest: return "agent-best";
    case RuleKind::SurplusTotal: return "surplus-total";
    case RuleKind::SurplusGain: return "surplus-gain";
    case RuleKind::Custom: return "custom";
  }
  return "?";
}

RuleKind parseRuleKind(std::string_view name) {
  if (name == "uniform") return RuleKind::UniformPair;
  if (name == "agent-best") return RuleKind::UniformAgentBest;
  if (name == "surplus-total") return RuleKind::SurplusTotal;
  if (name == "surplus-gain") return RuleKind::SurplusGain;
  throw LabError(ErrorCode::ConfigError, "unknown rule '" + std::string(name) + "'");
}

void validateRule(const Market& market, const WeightRule& rule) {
  if (!(rule.kappa >= 1.0)) throw LabError(ErrorCode::InvalidWeights, "kappa must be at least 1");
  if ((rule.kind == RuleKind::SurplusTotal || rule.kind == RuleKind::SurplusGain) && !market.hasValues()) {
    throw LabError(ErrorCode::MissingCardinalValues, std::string(toString(rule.kind)) + " needs cardinal values");
  }
  if (rule.kind == RuleKind::Custom && !rule.custom) {
    throw LabError(ErrorCode::InvalidWeights, "custom rule without a weight function");
  }
}

double rawPairWeight(const Market& market, const Matching& matching, const BlockingPair& p, const WeightRule& rule,
                     std::uint64_t stepIndex) {
  switch (rule.kind) {
    case RuleKind::UniformPair:
    case RuleKind::UniformAgentBest:
      return 1.0;
    case RuleKind::SurplusTotal:
      return market.firmValue(p.firm, p.worker) + market.workerValue(p.firm, p.worker);
    case RuleKind::SurplusGain: {
      const int cw = matching.firmPartner(p.firm);
      const int cf = matching.workerPartner(p.worker);
      const double before = (cw == kUnmatched ? 0.0 : market.firmValue(p.firm, cw)) +
                            (cf == kUnmatched ? 0.0 : market.workerValue(cf, p.worker));
      return market.firmValue(p.firm, p.worker) + market.workerValue(p.firm, p.worker) - before;
    }
    case RuleKind::Custom: {
      const double w = rule.custom(market, matching, p, stepIndex);
      if (!(w > 0.0)) {
        throw LabError(ErrorCode::InvalidWeights, "custom weight for (f" + std::to_string(p.firm) + ", w" +
                                                      std::to_string(p.worker) + ") is not positive");
      }
      return w;
    }
  }
  return 1.0;
}

void applyKappa(std::vector<double>& weights, const WeightRule& rule) {
  if (weights.empty()) return;
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  const double maxW = *hi;
  if (rule.kind == RuleKind::SurplusTotal || rule.kind == RuleKind::SurplusGain) {
    const double floor = maxW / rule.kappa;
    for (auto& w : weights) w = std::max(w, floor);
  } else if (rule.kind == RuleKind::Custom && maxW > rule.kappa * *lo * (1 + 1e-12)) {
    throw LabError(ErrorCode::KappaViolated, "custom weights span a ratio of " + std::to_string(maxW / *lo));
  }
}

std::vector<PairWeight> transitionWeights(const Market& market, const Matching& matching, const WeightRule& rule,
                                          std::uint64_t stepIndex) {
  auto pairs = blockingPairs(market, matching);
  std::vector<PairWeight> out;
  if (rule.kind == RuleKind::UniformAgentBest) {
    // Each agent with blocking partners names its best pair; a pair named by
    // both of its members collects two votes.
    for (const auto& p : pairs) {
      const int votes = (p.bestForFirm ? 1 : 0) + (p.bestForWorker ? 1 : 0);
      if (votes) out.push_back({p, static_cast<double>(votes)});
    }
    return out;
  }
  std::vector<double> w;
  for (const auto& p : pairs) {
    if (rule.usesBestPairs() && !p.bestForFirm && !p.bestForWorker) continue;
    out.push_back({p, 0.0});
    w.push_back(rawPairWeight(market, matching, p, rule, stepIndex));
  }
  applyKappa(w, rule);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = w[i];
  return out;
}

}  // namespace stablelab
