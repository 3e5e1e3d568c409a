// Invariants over hand-rolled generators: random markets of random shapes and
// random partial matchings.
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "stablelab/fragments.hpp"
#include "stablelab/market_core.hpp"
#include "stablelab/stable.hpp"
#include "stablelab/weights.hpp"

using namespace stablelab;

namespace {

struct Gen {
  Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  int size(int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }
  Market market(int nF, int nW) { return randomMarket(nF, nW, rng()); }
  Matching matching(int nF, int nW) {
    std::vector<int> ws(static_cast<std::size_t>(nW));
    for (int i = 0; i < nW; ++i) ws[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<int>(ws));
    Matching m(nF, nW);
    for (int f = 0; f < std::min(nF, nW); ++f) {
      if (rng.below(3) != 0) m.match(f, ws[static_cast<std::size_t>(f)]);
    }
    return m;
  }
};

bool weaklyBetterForFirms(const Market& m, const Matching& a, const Matching& b) {
  for (int f = 0; f < m.nFirms(); ++f) {
    const int x = a.firmPartner(f), y = b.firmPartner(f);
    if (x == y) continue;
    if (x == kUnmatched) return false;
    if (y != kUnmatched && m.firmRank(f, x) > m.firmRank(f, y)) return false;
  }
  return true;
}

bool weaklyWorseForWorkers(const Market& m, const Matching& a, const Matching& b) {
  for (int w = 0; w < m.nWorkers(); ++w) {
    const int x = a.workerPartner(w), y = b.workerPartner(w);
    if (x == y) continue;
    if (y == kUnmatched) return false;
    if (x != kUnmatched && m.workerRank(w, x) < m.workerRank(w, y)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("blocking pairs match brute force on every matching up to 4x4") {
    Gen g(101);
    for (int n = 1; n <= 4; ++n) {
      for (int rep = 0; rep < 5; ++rep) {
        const Market m = g.market(n, n);
        for (const auto& mu : enumerateMatchings(n, n)) {
          const auto bp = blockingPairs(m, mu);
          std::vector<std::pair<int, int>> got;
          for (const auto& p : bp) got.emplace_back(p.firm, p.worker);
          REQUIRE(got == oracle::blockingPairs(m, mu));
        }
      }
    }
  }

  TEST_CASE("best flags mark the top blocking partner of each agent") {
    Gen g(102);
    for (int it = 0; it < 300; ++it) {
      const int nF = g.size(1, 6), nW = g.size(1, 6);
      const Market m = g.market(nF, nW);
      const Matching mu = g.matching(nF, nW);
      const auto bp = blockingPairs(m, mu);
      for (const auto& p : bp) {
        bool firmBest = true, workerBest = true;
        for (const auto& q : bp) {
          if (q.firm == p.firm && m.firmRank(p.firm, q.worker) < m.firmRank(p.firm, p.worker)) firmBest = false;
          if (q.worker == p.worker && m.workerRank(p.worker, q.firm) < m.workerRank(p.worker, p.firm)) {
            workerBest = false;
          }
        }
        CHECK(p.bestForFirm == firmBest);
        CHECK(p.bestForWorker == workerBest);
      }
    }
  }

  TEST_CASE("satisfy leaves a consistent matching containing the pair") {
    Gen g(103);
    for (int it = 0; it < 300; ++it) {
      const int nF = g.size(1, 6), nW = g.size(1, 6);
      const Market m = g.market(nF, nW);
      const Matching mu = g.matching(nF, nW);
      for (const auto& p : blockingPairs(m, mu)) {
        const Matching next = satisfy(m, mu, p);
        CHECK(next.consistent());
        CHECK(next.firmPartner(p.firm) == p.worker);
        CHECK(next.pairCount() >= mu.pairCount() - 1);
        CHECK(next.pairCount() <= mu.pairCount() + 1);
      }
    }
  }

  TEST_CASE("lattice extremes, opposition of interests, rural hospitals") {
    Gen g(104);
    for (int it = 0; it < 300; ++it) {
      const bool rect = it % 3 == 0;
      const int nF = rect ? 5 : g.size(2, 6);
      const int nW = rect ? 7 : nF;
      const Market m = g.market(nF, nW);
      const auto set = enumerateStable(m);
      const Matching& muF = set.matchings[set.firmOptimal];
      const Matching& muW = set.matchings[set.workerOptimal];
      CHECK(muF == deferredAcceptance(m, Side::Firm));
      CHECK(muW == deferredAcceptance(m, Side::Worker));
      for (const auto& mu : set.matchings) {
        CHECK(isStable(m, mu));
        CHECK(weaklyBetterForFirms(m, muF, mu));
        CHECK(weaklyWorseForWorkers(m, muF, mu));
        for (int f = 0; f < nF; ++f) CHECK((mu.firmPartner(f) == kUnmatched) == (muF.firmPartner(f) == kUnmatched));
        for (int w = 0; w < nW; ++w) {
          CHECK((mu.workerPartner(w) == kUnmatched) == (muF.workerPartner(w) == kUnmatched));
        }
      }
    }
  }

  TEST_CASE("successful breakmarriage gives a stable matching no firm prefers") {
    Gen g(105);
    for (int it = 0; it < 300; ++it) {
      const int n = g.size(2, 6);
      const Market m = g.market(n, n);
      const auto set = enumerateStable(m);
      for (const auto& mu : set.matchings) {
        for (int f = 0; f < n; ++f) {
          const auto out = breakmarriage(m, mu, f);
          if (out.status != BreakmarriageOutcome::Status::Success) continue;
          CHECK(isStable(m, *out.result));
          CHECK(*out.result != mu);
          CHECK(weaklyBetterForFirms(m, mu, *out.result));
        }
      }
    }
  }

  TEST_CASE("best-pair moves are a subset of all moves") {
    Gen g(106);
    for (int it = 0; it < 200; ++it) {
      const int n = g.size(2, 6);
      const Market m = g.market(n, n);
      const Matching mu = g.matching(n, n);
      const auto all = transitionWeights(m, mu, WeightRule::uniform());
      const auto best = transitionWeights(m, mu, WeightRule::agentBest());
      CHECK(all.empty() == best.empty());
      for (const auto& b : best) {
        bool found = false;
        for (const auto& a : all) found |= a.pair == b.pair;
        CHECK(found);
      }
    }
  }

  TEST_CASE("size-one fragments are mutual first choices, and nobody inside a fragment blocks") {
    Gen g(107);
    for (int it = 0; it < 200; ++it) {
      const int n = g.size(2, 6);
      const Market m = g.market(n, n);
      for (const auto& fr : findFragments(m)) {
        if (fr.size() == 1) {
          CHECK(m.firmPrefs(fr.firms[0])[0] == fr.workers[0]);
          CHECK(m.workerPrefs(fr.workers[0])[0] == fr.firms[0]);
        }
        for (const auto& in : fr.inducing) {
          for (const auto& p : blockingPairs(m, in)) {
            CHECK(std::find(fr.firms.begin(), fr.firms.end(), p.firm) == fr.firms.end());
            CHECK(std::find(fr.workers.begin(), fr.workers.end(), p.worker) == fr.workers.end());
          }
        }
      }
    }
  }
}
