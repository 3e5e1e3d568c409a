#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/market_core.hpp"
#include "stablelab/weights.hpp"

namespace stablelab {

enum class GraphRule { AllPairs, BestPairs };

struct GraphEdge {
  BlockingPair pair;
  std::size_t to;
};

/// Every matching of a market with its one-step successors. State indices
/// follow enumerateMatchings order.
struct MatchingGraph {
  GraphRule rule = GraphRule::AllPairs;
  std::vector<Matching> states;
  std::vector<std::vector<GraphEdge>> edges;
  std::vector<std::size_t> stableStates;  // ascending
  std::unordered_map<Matching, std::size_t, MatchingHash> index;

  /// Throws StateNotFound.
  std::size_t indexOf(const Matching& m) const;
  bool isAbsorbing(std::size_t s) const noexcept { return edges[s].empty(); }
};

/// Throws CapExceeded.
MatchingGraph buildGraph(const Market& market, GraphRule rule, std::uint64_t cap = kDefaultMatchingCap);

/// Stable matchings reachable from `start`, in state order. Throws StateNotFound.
std::vector<Matching> reachableStableSet(const MatchingGraph& graph, const Matching& start);

struct Theorem1Report {
  struct PerRule {
    bool condI = false;   // every unstable matching reaches every stable one
    bool condII = false;  // every almost-stable matching does
    bool condIII = false;
    bool equivalent() const noexcept { return condI == condII && condII == condIII; }
  };
  bool condIII = false;  // no non-trivial fragments
  PerRule allPairs;
  PerRule bestPairs;
  bool equivalent() const noexcept { return allPairs.equivalent() && bestPairs.equivalent(); }
};

/// Almost-stable here means unstable with a single-pair edge into a stable state.
/// Throws NotBalanced, CapExceeded.
Theorem1Report verifyTheorem1(const Market& market, std::uint64_t cap = kDefaultMatchingCap);

/// Above this many transient states the dense solve refuses to run.
inline constexpr std::size_t kDenseSolveCap = 4000;

struct AbsorptionResult {
  std::vector<std::size_t> stableStates;          // graph indices of absorbing states
  std::vector<std::vector<double>> probability;   // [state][k] -> P(absorb at stableStates[k])
  std::vector<double> expectedSteps;              // [state]
};

using Rational = boost::multiprecision::cpp_rational;

struct ExactAbsorptionResult {
  std::vector<std::size_t> stableStates;
  std::vector<std::vector<Rational>> probability;
  std::vector<Rational> expectedSteps;
};

/// Transition probabilities come from transitionWeights; every admissible pair
/// must be an edge of the graph. Throws InvalidWeights, SingularSystem, CapExceeded.
AbsorptionResult absorption(const MatchingGraph& graph, const Market& market, const WeightRule& rule);

/// Same system solved over rationals; restricted to markets with at most 9 pairs.
ExactAbsorptionResult absorptionExact(const MatchingGraph& graph, const Market& market, const WeightRule& rule);

/// Rows "state_index,stable_index,probability,expected_steps"; stable_index is
/// the graph index of the absorbing matching.
void writeAbsorptionCsv(std::ostream& out, const AbsorptionResult& result);

}  // namespace stablelab
