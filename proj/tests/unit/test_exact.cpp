#include <doctest.h>

#include <set>
#include <sstream>

#include "check.hpp"
#include "oracles.hpp"
#include "stablelab/exact.hpp"
#include "stablelab/stable.hpp"

using namespace stablelab;

TEST_SUITE("exact") {
  TEST_CASE("graph of the 2x2 example") {
    const Market m = oracle::example1();
    const auto g = buildGraph(m, GraphRule::AllPairs);
    CHECK(g.states.size() == 7);
    CHECK(g.edges[g.indexOf(oracle::pairs(2, 2, {{0, 0}}))].size() == 2);
    for (std::size_t s : g.stableStates) CHECK(g.isAbsorbing(s));
    CHECK(g.stableStates.size() == 2);
    CHECK_LAB_ERROR(g.indexOf(Matching(3, 3)), StateNotFound);
  }

  TEST_CASE("every unstable 3x3 state reaches a stable one") {
    const Market m = randomMarket(3, 3, 4);
    const auto g = buildGraph(m, GraphRule::AllPairs);
    CHECK(g.states.size() == 34);
    for (const auto& s : g.states) CHECK_FALSE(reachableStableSet(g, s).empty());
  }

  TEST_CASE("reachable stable sets") {
    const Market m1 = oracle::example1();
    const auto g1 = buildGraph(m1, GraphRule::AllPairs);
    CHECK(reachableStableSet(g1, oracle::pairs(2, 2, {{0, 0}})).size() == 2);
    CHECK(reachableStableSet(g1, oracle::identity(2)) == std::vector<Matching>{oracle::identity(2)});

    const Market m2 = oracle::example2();
    const auto g2 = buildGraph(m2, GraphRule::AllPairs);
    CHECK(reachableStableSet(g2, oracle::pairs(3, 3, {{0, 0}, {1, 1}})) == std::vector<Matching>{oracle::identity(3)});
  }

  TEST_CASE("reachability matches the BFS oracle and best pairs reach no more") {
    for (std::uint64_t i = 0; i < 30; ++i) {
      const Market m = randomMarket(3, 3, deriveSeed(41, 0, i));
      const auto all = buildGraph(m, GraphRule::AllPairs);
      const auto best = buildGraph(m, GraphRule::BestPairs);
      for (const auto& s : all.states) {
        const auto r = reachableStableSet(all, s);
        const auto expect = oracle::reachableStable(m, s);
        CHECK(std::set<Matching>(r.begin(), r.end()) == expect);
        const auto b = reachableStableSet(best, s);
        for (const auto& x : b) CHECK(expect.count(x) == 1);
      }
    }
  }

  TEST_CASE("verifyTheorem1 on the examples") {
    const auto r1 = verifyTheorem1(oracle::example1());
    CHECK(r1.condIII);
    CHECK(r1.allPairs.condI);
    CHECK(r1.allPairs.condII);
    CHECK(r1.bestPairs.condI);
    CHECK(r1.equivalent());
    const auto r2 = verifyTheorem1(oracle::example2());
    CHECK_FALSE(r2.condIII);
    CHECK_FALSE(r2.allPairs.condI);
    CHECK_FALSE(r2.allPairs.condII);
    CHECK(r2.equivalent());
    CHECK_LAB_ERROR(verifyTheorem1(randomMarket(2, 3, 1)), NotBalanced);
  }

  TEST_CASE("absorption on the 2x2 example, float and rational") {
    const Market m = oracle::example1();
    const auto g = buildGraph(m, GraphRule::AllPairs);
    const std::size_t start = g.indexOf(oracle::pairs(2, 2, {{0, 0}}));
    const std::size_t muW = g.indexOf(oracle::pairs(2, 2, {{0, 1}, {1, 0}}));
    const auto res = absorption(g, m, WeightRule::uniform());
    const auto k = static_cast<std::size_t>(std::find(res.stableStates.begin(), res.stableStates.end(), muW) -
                                            res.stableStates.begin());
    CHECK(std::abs(res.probability[start][k] - 1.0 / 3) < 1e-12);
    const auto ex = absorptionExact(g, m, WeightRule::uniform());
    CHECK(ex.probability[start][k] == Rational(1, 3));
    CHECK(ex.probability[start][1 - k] == Rational(2, 3));
    for (std::size_t s : g.stableStates) {
      CHECK(res.expectedSteps[s] == 0.0);
      for (std::size_t j = 0; j < res.stableStates.size(); ++j) {
        CHECK(res.probability[s][j] == (res.stableStates[j] == s ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("absorption agrees with distribution iteration") {
    for (std::uint64_t i = 0; i < 10; ++i) {
      const Market m = randomMarket(3, 3, deriveSeed(42, 0, i));
      const auto g = buildGraph(m, GraphRule::AllPairs);
      const auto res = absorption(g, m, WeightRule::uniform());
      for (std::size_t s = 0; s < g.states.size(); s += 5) {
        const auto expect = oracle::absorptionByIteration(m, g.states[s]);
        double total = 0;
        for (std::size_t k = 0; k < res.stableStates.size(); ++k) {
          const auto it = expect.find(g.states[res.stableStates[k]]);
          const double want = it == expect.end() ? 0.0 : it->second;
          CHECK(std::abs(res.probability[s][k] - want) < 1e-9);
          total += res.probability[s][k];
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(res.expectedSteps[s] >= 0.0);
      }
    }
  }

  TEST_CASE("the 3x3 trap is absorbed at the firm-optimal matching") {
    const Market m = oracle::example2();
    const auto g = buildGraph(m, GraphRule::AllPairs);
    const auto res = absorption(g, m, WeightRule::uniform());
    const std::size_t s = g.indexOf(oracle::pairs(3, 3, {{0, 0}, {1, 1}}));
    const std::size_t muF = g.indexOf(oracle::identity(3));
    for (std::size_t k = 0; k < res.stableStates.size(); ++k) {
      CHECK(std::abs(res.probability[s][k] - (res.stableStates[k] == muF ? 1.0 : 0.0)) < 1e-12);
    }
  }

  TEST_CASE("absorption refuses a rule that admits pairs outside the graph") {
    // From the empty matching (f1, w1) is best for neither side.
    const Market m = oracle::assortative(3);
    const auto best = buildGraph(m, GraphRule::BestPairs);
    CHECK_LAB_ERROR(absorption(best, m, WeightRule::uniform()), InvalidWeights);
    CHECK_NOTHROW(absorption(best, m, WeightRule::agentBest()));
  }

  TEST_CASE("absorption CSV") {
    const Market m = oracle::example1();
    const auto g = buildGraph(m, GraphRule::AllPairs);
    std::ostringstream s;
    writeAbsorptionCsv(s, absorption(g, m, WeightRule::uniform()));
    CHECK(s.str().rfind("state_index,stable_index,probability,expected_steps\n", 0) == 0);
  }
}
