#include <doctest.h>

#include <sstream>

#include "check.hpp"
#include "oracles.hpp"
#include "stablelab/dynamics.hpp"
#include "stablelab/stable.hpp"

using namespace stablelab;

TEST_SUITE("weights") {
  TEST_CASE("uniform and agent-best weights on the 2x2 example") {
    const Market m = oracle::example1();
    const auto lam = oracle::pairs(2, 2, {{0, 0}});
    const auto u = transitionWeights(m, lam, WeightRule::uniform());
    REQUIRE(u.size() == 2);
    CHECK(u[0].weight == u[1].weight);
    const auto b = transitionWeights(m, lam, WeightRule::agentBest());
    REQUIRE(b.size() == 2);
    double total = 0, best = 0;
    for (const auto& pw : b) {
      total += pw.weight;
      if (pw.pair == BlockingPair{1, 1}) best = pw.weight;
    }
    CHECK(best / total == doctest::Approx(2.0 / 3));
    CHECK(transitionWeights(m, oracle::identity(2), WeightRule::uniform()).empty());
  }

  TEST_CASE("rule parsing and validation") {
    CHECK(parseRuleKind("agent-best") == RuleKind::UniformAgentBest);
    CHECK(toString(RuleKind::SurplusGain) == "surplus-gain");
    CHECK_LAB_ERROR(parseRuleKind("nope"), ConfigError);
    CHECK_LAB_ERROR(validateRule(oracle::example1(), {RuleKind::SurplusTotal, 2.0, {}, false}), MissingCardinalValues);
    CHECK_LAB_ERROR(validateRule(oracle::example1(), {RuleKind::UniformPair, 0.5, {}, false}), InvalidWeights);
  }

  TEST_CASE("surplus weights stay within kappa") {
    const Market m = randomMarket(6, 6, 3, true);
    for (double kappa : {1.0, 1.5, 4.0}) {
      const WeightRule r{RuleKind::SurplusTotal, kappa, {}, false};
      const auto w = transitionWeights(m, Matching(6, 6), r);
      REQUIRE_FALSE(w.empty());
      double lo = w[0].weight, hi = w[0].weight;
      for (const auto& pw : w) {
        lo = std::min(lo, pw.weight);
        hi = std::max(hi, pw.weight);
      }
      CHECK(hi / lo <= kappa + 1e-12);
    }
  }
}

TEST_SUITE("dynamics") {
  TEST_CASE("step frequencies follow the weights") {
    const Market m = oracle::example1();
    Rng rng(17);
    int u = 0, b = 0;
    const int n = 30000;
    for (int i = 0; i < n; ++i) {
      Matching a = oracle::pairs(2, 2, {{0, 0}});
      if (step(m, a, WeightRule::uniform(), 0, rng)->worker == 1) ++u;
      Matching c = oracle::pairs(2, 2, {{0, 0}});
      if (step(m, c, WeightRule::agentBest(), 0, rng)->worker == 1) ++b;
    }
    CHECK(std::abs(u / double(n) - 0.5) < 0.015);
    CHECK(std::abs(b / double(n) - 2.0 / 3) < 0.015);
    Matching s = oracle::identity(2);
    CHECK_FALSE(step(m, s, WeightRule::uniform(), 0, rng));
    CHECK(s == oracle::identity(2));
  }

  TEST_CASE("tracker agrees with a full recount") {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const Market m = randomMarket(6, 8, deriveSeed(51, 0, i));
      BlockingTracker t(m, Matching(6, 8));
      Rng rng(i);
      for (int k = 0; k < 40 && !t.stable(); ++k) {
        const auto p = t.pairAt(static_cast<std::size_t>(rng.below(t.size())));
        t.satisfy(p.firm, p.worker);
        CHECK(t.size() == oracle::blockingPairs(m, t.matching()).size());
        for (const auto& [f, w] : oracle::blockingPairs(m, t.matching())) CHECK(t.blocking(f, w));
      }
    }
  }

  TEST_CASE("a stable start takes zero steps") {
    const Market m = oracle::example2();
    const auto t = simulate(m, oracle::identity(3), WeightRule::uniform(), oracle::identity(3), 100, 1);
    CHECK(t.steps == 0);
    REQUIRE(t.absorbed);
    CHECK(*t.absorbed == oracle::identity(3));
    CHECK_LAB_ERROR(simulate(m, oracle::identity(3), WeightRule::uniform(), oracle::identity(3), 0, 1), DomainError);
  }

  TEST_CASE("2x2 example absorbs at the worker-optimal matching a third of the time") {
    const Market m = oracle::example1();
    const auto s = batchRun(m, oracle::pairs(2, 2, {{0, 0}}), WeightRule::uniform(), oracle::identity(2), 10000, 1000,
                            9);
    CHECK(s.absorbed == 10000);
    std::size_t toW = 0;
    for (const auto& [mu, c] : s.outcomes) {
      if (mu == oracle::pairs(2, 2, {{0, 1}, {1, 0}})) toW = c;
    }
    CHECK(toW / 10000.0 >= 0.32);
    CHECK(toW / 10000.0 <= 0.35);
    CHECK(s.returnProb >= 0.65);
    CHECK(s.returnProb <= 0.68);
  }

  TEST_CASE("the 3x3 trap always returns") {
    const Market m = oracle::example2();
    for (const auto& rule : {WeightRule::uniform(), WeightRule::agentBest()}) {
      const auto s = batchRun(m, oracle::pairs(3, 3, {{0, 0}, {1, 1}}), rule, oracle::identity(3), 500, 1000, 3);
      CHECK(s.returnProb == 1.0);
      CHECK(s.ultMismatch == 0.0);
      CHECK(s.censored == 0);
    }
  }

  TEST_CASE("assortative 10x10 absorbs from random starts") {
    const Market m = oracle::assortative(10);
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto t = simulate(m, randomMaximumMatching(10, 10, i), WeightRule::uniform(), oracle::identity(10),
                              1'000'000, i);
      REQUIRE(t.absorbed);
      CHECK(*t.absorbed == oracle::identity(10));
    }
  }

  TEST_CASE("batches are deterministic and thread invariant") {
    const Market m = randomMarket(6, 6, 77);
    const Matching mu = deferredAcceptance(m);
    const Matching start = almostStable(m, mu, 2);
    const auto a = batchRun(m, start, WeightRule::uniform(), mu, 64, 100000, 5, 0, 1);
    const auto b = batchRun(m, start, WeightRule::uniform(), mu, 64, 100000, 5, 0, 4);
    CHECK(a.pathSteps == b.pathSteps);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.meanSteps == b.meanSteps);
    CHECK(a.onPathMismatch == b.onPathMismatch);
    const auto c = batchRun(m, start, WeightRule::uniform(), mu, 64, 100000, 6, 0, 1);
    CHECK(c.pathSteps != a.pathSteps);
  }

  TEST_CASE("each step moves the stable-pair count by at most one") {
    const Market m = randomMarket(8, 8, 12);
    const Matching mu = deferredAcceptance(m);
    int prev = stablePairCount(Matching(8, 8), mu);
    SimOptions opt;
    opt.onStep = [&](std::uint64_t, const BlockingPair&, const Matching& cur) {
      const int now = stablePairCount(cur, mu);
      CHECK(std::abs(now - prev) <= 1);
      prev = now;
    };
    simulate(m, Matching(8, 8), WeightRule::uniform(), mu, 100000, 4, opt);
  }

  TEST_CASE("censoring and the trace header") {
    const Market m = randomMarket(8, 8, 1);
    const auto t = simulate(m, Matching(8, 8), WeightRule::uniform(), deferredAcceptance(m), 1, 1);
    CHECK(t.steps == 1);
    CHECK(t.hitMaxSteps);
    CHECK_FALSE(t.absorbed);
    std::ostringstream s;
    writeTrace(s, oracle::example1(), oracle::pairs(2, 2, {{0, 0}}), WeightRule::uniform(), oracle::identity(2), 10, 1);
    CHECK(s.str().rfind("step\tfirm\tworker\tstable_pairs\tblocking_pairs\tmatching\n", 0) == 0);
  }
}
