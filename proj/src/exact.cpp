#include "stablelab/exact.hpp"

#include <cmath>
#include <deque>
#include <iomanip>
#include <ostream>
#include <type_traits>

#include "stablelab/error.hpp"
#include "stablelab/fragments.hpp"

namespace stablelab {

std::size_t MatchingGraph::indexOf(const Matching& m) const {
  auto it = index.find(m);
  if (it == index.end()) throw LabError(ErrorCode::StateNotFound, toString(m));
  return it->second;
}

namespace {

// One enumeration serves both rules; best edges are the flagged subset.
std::pair<MatchingGraph, MatchingGraph> buildBoth(const Market& market, std::uint64_t cap, bool wantBest) {
  MatchingGraph all;
  all.rule = GraphRule::AllPairs;
  forEachMatching(market.nFirms(), market.nWorkers(), [&](const Matching& m) { all.states.push_back(m); }, cap);
  all.index.reserve(all.states.size());
  for (std::size_t i = 0; i < all.states.size(); ++i) all.index.emplace(all.states[i], i);
  all.edges.resize(all.states.size());
  for (std::size_t i = 0; i < all.states.size(); ++i) {
    const Matching& m = all.states[i];
    for (const auto& p : blockingPairs(market, m)) {
      Matching next = m;
      next.match(p.firm, p.worker);
      all.edges[i].push_back({p, all.index.at(next)});
    }
    if (all.edges[i].empty()) all.stableStates.push_back(i);
  }
  MatchingGraph best;
  if (wantBest) {
    best.rule = GraphRule::BestPairs;
    best.states = all.states;
    best.index = all.index;
    best.stableStates = all.stableStates;
    best.edges.resize(all.edges.size());
    for (std::size_t i = 0; i < all.edges.size(); ++i) {
      for (const auto& e : all.edges[i]) {
        if (e.pair.bestForFirm || e.pair.bestForWorker) best.edges[i].push_back(e);
      }
    }
  }
  return {std::move(all), std::move(best)};
}

// reach[k][s]: state s reaches stableStates[k].
std::vector<std::vector<char>> reachersOfStable(const MatchingGraph& g) {
  const std::size_t n = g.states.size();
  std::vector<std::vector<std::size_t>> rev(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& e : g.edges[s]) rev[e.to].push_back(s);
  }
  std::vector<std::vector<char>> reach;
  for (std::size_t t : g.stableStates) {
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> q{t};
    seen[t] = 1;
    while (!q.empty()) {
      const std::size_t s = q.front();
      q.pop_front();
      for (std::size_t p : rev[s]) {
        if (!seen[p]) {
          seen[p] = 1;
          q.push_back(p);
        }
      }
    }
    reach.push_back(std::move(seen));
  }
  return reach;
}

template <typename T>
void gaussSolve(std::vector<T>& a, std::vector<T>& b, std::size_t n, std::size_t m) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = n;
    if constexpr (std::is_floating_point_v<T>) {
      double best = 0.0;
      for (std::size_t r = col; r < n; ++r) {
        const double v = std::abs(a[r * n + col]);
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (best < 1e-13) piv = n;
    } else {
      for (std::size_t r = col; r < n && piv == n; ++r) {
        if (a[r * n + col] != 0) piv = r;
      }
    }
    if (piv == n) throw LabError(ErrorCode::SingularSystem, "pivot vanished at column " + std::to_string(col));
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      for (std::size_t c = 0; c < m; ++c) std::swap(b[piv * m + c], b[col * m + c]);
    }
    const T inv = T(1) / a[col * n + col];
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a[r * n + col] == 0) continue;
      const T factor = a[r * n + col] * inv;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
      for (std::size_t c = 0; c < m; ++c) b[r * m + c] -= factor * b[col * m + c];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const T inv = T(1) / a[r * n + r];
    for (std::size_t c = 0; c < m; ++c) b[r * m + c] *= inv;
  }
}

template <typename T>
struct Solved {
  std::vector<std::vector<T>> probability;
  std::vector<T> steps;
};

template <typename T>
Solved<T> solveChain(const MatchingGraph& g, const Market& market, const WeightRule& rule) {
  validateRule(market, rule);
  const std::size_t n = g.states.size();
  const std::size_t k = g.stableStates.size();
  std::vector<std::size_t> transientIndex(n, SIZE_MAX);
  std::vector<std::size_t> stableIndex(n, SIZE_MAX);
  std::vector<std::size_t> transient;
  for (std::size_t i = 0; i < k; ++i) stableIndex[g.stableStates[i]] = i;
  for (std::size_t s = 0; s < n; ++s) {
    if (!g.isAbsorbing(s)) {
      transientIndex[s] = transient.size();
      transient.push_back(s);
    }
  }
  const std::size_t t = transient.size();
  if (t > kDenseSolveCap) {
    throw LabError(ErrorCode::CapExceeded,
                   std::to_string(t) + " transient states exceed the dense solve cap of " + std::to_string(kDenseSolveCap));
  }
  // (I - Q) X = [R | 1]
  const std::size_t m = k + 1;
  std::vector<T> a(t * t, T(0));
  std::vector<T> b(t * m, T(0));
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t s = transient[i];
    a[i * t + i] = T(1);
    b[i * m + k] = T(1);
    auto weights = transitionWeights(market, g.states[s], rule);
    T total(0);
    for (const auto& pw : weights) total += T(pw.weight);
    for (const auto& pw : weights) {
      const GraphEdge* edge = nullptr;
      for (const auto& e : g.edges[s]) {
        if (e.pair == pw.pair) edge = &e;
      }
      if (!edge) {
        throw LabError(ErrorCode::InvalidWeights, "rule admits (f" + std::to_string(pw.pair.firm) + ", w" +
                                                      std::to_string(pw.pair.worker) + ") which the graph lacks");
      }
      const T p = T(pw.weight) / total;
      if (g.isAbsorbing(edge->to)) {
        b[i * m + stableIndex[edge->to]] += p;
      } else {
        a[i * t + transientIndex[edge->to]] -= p;
      }
    }
  }
  gaussSolve(a, b, t, m);

  Solved<T> out;
  out.probability.assign(n, std::vector<T>(k, T(0)));
  out.steps.assign(n, T(0));
  for (std::size_t s = 0; s < n; ++s) {
    if (g.isAbsorbing(s)) {
      out.probability[s][stableIndex[s]] = T(1);
      continue;
    }
    const std::size_t i = transientIndex[s];
    for (std::size_t j = 0; j < k; ++j) out.probability[s][j] = b[i * m + j];
    out.steps[s] = b[i * m + k];
  }
  return out;
}

}  // namespace

MatchingGraph buildGraph(const Market& market, GraphRule rule, std::uint64_t cap) {
  auto [all, best] = buildBoth(market, cap, rule == GraphRule::BestPairs);
  return rule == GraphRule::BestPairs ? std::move(best) : std::move(all);
}

std::vector<Matching> reachableStableSet(const MatchingGraph& graph, const Matching& start) {
  const std::size_t s0 = graph.indexOf(start);
  std::vector<char> seen(graph.states.size(), 0);
  std::deque<std::size_t> q{s0};
  seen[s0] = 1;
  while (!q.empty()) {
    const std::size_t s = q.front();
    q.pop_front();
    for (const auto& e : graph.edges[s]) {
      if (!seen[e.to]) {
        seen[e.to] = 1;
        q.push_back(e.to);
      }
    }
  }
  std::vector<Matching> out;
  for (std::size_t t : graph.stableStates) {
    if (seen[t]) out.push_back(graph.states[t]);
  }
  return out;
}

Theorem1Report verifyTheorem1(const Market& market, std::uint64_t cap) {
  if (!market.balanced()) throw LabError(ErrorCode::NotBalanced, "the characterization concerns balanced markets");
  auto [all, best] = buildBoth(market, cap, true);
  Theorem1Report report;
  report.condIII = !hasNontrivialFragment(market);

  std::vector<char> almost(all.states.size(), 0);
  for (std::size_t s = 0; s < all.states.size(); ++s) {
    for (const auto& e : all.edges[s]) {
      if (all.isAbsorbing(e.to)) almost[s] = 1;
    }
  }
  auto evaluate = [&](const MatchingGraph& g) {
    Theorem1Report::PerRule r;
    r.condIII = report.condIII;
    r.condI = r.condII = true;
    const auto reach = reachersOfStable(g);
    for (std::size_t s = 0; s < g.states.size(); ++s) {
      if (g.isAbsorbing(s)) continue;
      for (const auto& row : reach) {
        if (!row[s]) {
          r.condI = false;
          if (almost[s]) r.condII = false;
        }
      }
    }
    return r;
  };
  report.allPairs = evaluate(all);
  report.bestPairs = evaluate(best);
  return report;
}

AbsorptionResult absorption(const MatchingGraph& graph, const Market& market, const WeightRule& rule) {
  auto solved = solveChain<double>(graph, market, rule);
  return {graph.stableStates, std::move(solved.probability), std::move(solved.steps)};
}

ExactAbsorptionResult absorptionExact(const MatchingGraph& graph, const Market& market, const WeightRule& rule) {
  if (market.nFirms() * market.nWorkers() > 9) {
    throw LabError(ErrorCode::CapExceeded, "exact absorption is limited to markets of at most 3x3");
  }
  auto solved = solveChain<Rational>(graph, market, rule);
  return {graph.stableStates, std::move(solved.probability), std::move(solved.steps)};
}

void writeAbsorptionCsv(std::ostream& out, const AbsorptionResult& result) {
  out << "state_index,stable_index,probability,expected_steps\n" << std::setprecision(17);
  for (std::size_t s = 0; s < result.probability.size(); ++s) {
    for (std::size_t k = 0; k < result.stableStates.size(); ++k) {
      out << s << ',' << result.stableStates[k] << ',' << result.probability[s][k] << ',' << result.expectedSteps[s]
          << '\n';
    }
  }
}

}  // namespace stablelab
