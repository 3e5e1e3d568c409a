#include <doctest.h>

#include <sstream>

#include "check.hpp"
#include "oracles.hpp"
#include "stablelab/constructions.hpp"
#include "stablelab/stable.hpp"

using namespace stablelab;

TEST_SUITE("constructions") {
  TEST_CASE("eta conditions on assortative markets") {
    const auto r = checkEtaConditions(oracle::assortative(4), 0.25);
    CHECK(r.passes);
    CHECK(r.threshold == 1);
    CHECK(r.exceptionFirm == 3);
    CHECK(r.exceptionWorker == 3);
    CHECK(r.perFirmAdmirers == std::vector<int>{3, 2, 1, 0});
    CHECK(r.perWorkerAdmirers == std::vector<int>{3, 2, 1, 0});
    CHECK(r.achievedEta == doctest::Approx(0.25));
    CHECK(r.stable == oracle::identity(4));
    CHECK_FALSE(checkEtaConditions(oracle::assortative(10), 0.2).passes);
    CHECK_LAB_ERROR(checkEtaConditions(oracle::example1(), 0.2), NotUniqueStable);
    CHECK_LAB_ERROR(checkEtaConditions(randomMarket(3, 4, 1), 0.2), NotBalanced);
    CHECK_LAB_ERROR(checkEtaConditions(oracle::assortative(4), 1.0), DomainError);
  }

  TEST_CASE("hub markets are uniquely stable") {
    for (int n : {4, 6, 8, 12}) {
      for (int d = 0; d <= n - 2; ++d) {
        for (std::uint64_t seed : {0ULL, 7ULL}) CHECK(isUniqueStable(hubMarket(n, d, seed)));
      }
      CHECK(checkEtaConditions(hubMarket(n, (n - 2) / 2, 3), 0.5 - 1e-9).achievedEta == doctest::Approx(0.5));
    }
    CHECK_LAB_ERROR(hubMarket(2, 0, 0), DomainError);
    CHECK_LAB_ERROR(hubMarket(6, 5, 0), DomainError);
  }

  TEST_CASE("eta search") {
    const auto r = searchEtaMarket(6, 0.2, 11, 100000);
    CHECK(r.report.passes);
    CHECK(checkEtaConditions(r.market, 0.2).passes);
    const auto hard = searchEtaMarket(12, 0.45, 2, 20000);
    CHECK(hard.report.achievedEta >= 0.45);
    CHECK_LAB_ERROR(searchEtaMarket(6, 0.9, 1, 200), NotFound);
    CHECK_LAB_ERROR(searchEtaMarket(3, 0.2, 1, 200), DomainError);
    CHECK_LAB_ERROR(searchEtaMarket(6, 0.0, 1, 200), DomainError);
  }

  TEST_CASE("delta augmentation") {
    const Market out = deltaAugment(oracle::assortative(4), oracle::assortative(2));
    CHECK(out.nFirms() == 6);
    CHECK(deferredAcceptance(out) == oracle::identity(6));
    const std::vector<int> orig = {0, 1, 2, 3};
    CHECK(out.submarket(orig, orig) == oracle::assortative(4));
    CHECK_LAB_ERROR(deltaAugment(oracle::example1(), oracle::assortative(2)), PreconditionFailed);
    CHECK_LAB_ERROR(deltaAugment(oracle::assortative(2), oracle::example1()), PreconditionFailed);
    CHECK_LAB_ERROR(deltaAugment(randomMarket(2, 3, 1), oracle::assortative(2)), PreconditionFailed);

    const Market eta = hubMarket(4, 1, 5);
    int built = 0;
    for (std::uint64_t i = 0; built < 100 && i < 10000; ++i) {
      const Market o = randomMarket(4, 4, deriveSeed(61, 0, i));
      if (!isUniqueStable(o)) continue;
      ++built;
      const Market a = deltaAugment(o, eta);
      const Matching mu = deferredAcceptance(a);
      const Matching before = deferredAcceptance(o);
      for (int f = 0; f < 4; ++f) CHECK(mu.firmPartner(f) == before.firmPartner(f));
      CHECK(isUniqueStable(a));
    }
    CHECK(built == 100);
  }

  TEST_CASE("destabilization bound") {
    CHECK(pDestabLowerBound(0.45, 0.05, 1.0) == doctest::Approx(0.8));
    CHECK(pDestabLowerBound(0.45, 0.05, 2.0) == doctest::Approx(0.4 / 0.6));
    CHECK(pDestabLowerBound(0.45, 1e-12, 3.0) == doctest::Approx(1.0));
    CHECK_LAB_ERROR(pDestabLowerBound(0.2, 0.2, 1.0), DomainError);
    CHECK_LAB_ERROR(pDestabLowerBound(0.2, 0.1, 0.5), DomainError);
  }

  TEST_CASE("star condition and the pair partition") {
    const Market m = hubMarket(8, 3, 9);
    const auto rep = checkEtaConditions(m, 0.3);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
      const auto s = sampleStarState(m, rep.stable, 5, rep.exceptionFirm, rep.exceptionWorker, rng);
      REQUIRE(s);
      CHECK(starCondition(*s, rep.exceptionFirm, rep.exceptionWorker));
      CHECK(stablePairCount(*s, rep.stable) >= 5);
      CHECK_FALSE(isStable(m, *s));
      const auto part = classifyStarPairs(m, *s, rep.stable, rep.exceptionFirm, rep.exceptionWorker);
      const auto all = blockingPairs(m, *s);
      CHECK(part.destabilizing.size() + part.stabilizing.size() + part.neutral.size() == all.size());
      std::vector<BlockingPair> joined = part.destabilizing;
      joined.insert(joined.end(), part.stabilizing.begin(), part.stabilizing.end());
      joined.insert(joined.end(), part.neutral.begin(), part.neutral.end());
      for (const auto& p : all) CHECK(std::count(joined.begin(), joined.end(), p) == 1);
    }
    CHECK_FALSE(sampleStarState(m, rep.stable, 8, rep.exceptionFirm, rep.exceptionWorker, rng));
    CHECK_LAB_ERROR(classifyStarPairs(m, rep.stable, rep.stable, rep.exceptionFirm, rep.exceptionWorker),
                    StarConditionViolated);
  }

  TEST_CASE("biased walk") {
    for (int gap : {1, 4, 5, 12}) {
      CHECK(biasedWalk({0, gap, 0.0}, 1000, 1) == static_cast<std::uint64_t>((gap + 3) / 4));
    }
    for (int gap : {4, 8, 12}) {
      for (double p : {0.5, 0.9, 0.95}) {
        const double e = biasedWalkExpectedSteps({0, gap, p});
        CHECK(e == doctest::Approx(oracle::walkExpectedByIteration(gap, p)).epsilon(1e-7));
      }
    }
    CHECK(biasedWalkExpectedSteps({0, 8, 0.95}) == doctest::Approx(76.661766).epsilon(1e-7));
    CHECK(biasedWalkExpectedSteps({0, 12, 0.5}) == doctest::Approx(6.983892617).epsilon(1e-8));
    CHECK_FALSE(biasedWalk({0, 40, 0.99}, 10, 1));
    CHECK_LAB_ERROR(biasedWalk({0, 4, 1.0}, 10, 1), DomainError);
    CHECK_LAB_ERROR(biasedWalk({4, 4, 0.5}, 10, 1), DomainError);
  }

  TEST_CASE("eta report CSV") {
    std::ostringstream s;
    writeEtaReportCsv(s, checkEtaConditions(oracle::assortative(4), 0.25));
    const std::string out = s.str();
    CHECK(out.rfind("# eta=", 0) == 0);
    CHECK(out.find("side,index,admirers,exception\n") != std::string::npos);
  }
}
