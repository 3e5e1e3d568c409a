#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stablelab/market.hpp"

namespace stablelab {

/// A firm-worker pair that mutually prefer each other to their current assignment.
/// bestForFirm: no other blocking partner of the firm ranks higher with it
/// (symmetrically for bestForWorker).
struct BlockingPair {
  int firm = kUnmatched;
  int worker = kUnmatched;
  bool bestForFirm = false;
  bool bestForWorker = false;

  friend bool operator==(const BlockingPair& a, const BlockingPair& b) noexcept {
    return a.firm == b.firm && a.worker == b.worker;
  }
};

bool isBlocking(const Market& market, const Matching& matching, int firm, int worker) noexcept;

/// All blocking pairs in (firm, worker) lexicographic order, with best-pair flags.
std::vector<BlockingPair> blockingPairs(const Market& market, const Matching& matching);

/// Matches the pair and divorces their former partners. Throws NotABlockingPair.
Matching satisfy(const Market& market, const Matching& matching, const BlockingPair& pair);

bool isStable(const Market& market, const Matching& matching) noexcept;

/// Firms matched in both and to the same worker.
int stablePairCount(const Matching& matching, const Matching& reference);

/// 1 - stablePairCount / nFirms.
double mismatchProportion(const Matching& matching, const Matching& reference);

/// Fraction of agents on `side` whose partner (unmatched included) differs from reference.
double sideMismatch(const Matching& matching, const Matching& reference, Side side);

inline constexpr std::uint64_t kDefaultMatchingCap = 1'000'000;

/// Number of partial matchings, sum_k C(nF,k) C(nW,k) k!. Saturates at UINT64_MAX.
std::uint64_t matchingCount(int nFirms, int nWorkers) noexcept;

/// Visits every partial matching once: by pair count, then lexicographically by
/// the firm-sorted pair list. Throws CapExceeded when matchingCount > cap.
void forEachMatching(int nFirms, int nWorkers, const std::function<void(const Matching&)>& visit,
                     std::uint64_t cap = kDefaultMatchingCap);

std::vector<Matching> enumerateMatchings(int nFirms, int nWorkers,
                                         std::uint64_t cap = kDefaultMatchingCap);

/// Independent uniform permutations per agent. With cardinal values, each
/// agent's draws from (0,1) are sorted to agree with its ordinal list.
Market randomMarket(int nFirms, int nWorkers, std::uint64_t seed, bool withCardinal = false);

/// Every firm ranks workers 0,1,2,... and every worker ranks firms 0,1,2,...
Market assortativeMarket(int nFirms, int nWorkers);

/// Stable matching with `firm` and its partner divorced. Throws FirmUnmatched, InputNotStable.
Matching almostStable(const Market& market, const Matching& stable, int firm);

/// Unmatches ceil(epsilon * nFirms) uniformly chosen matched firms (capped at
/// the number of matched firms).
Matching perturbEpsilon(const Market& market, const Matching& stable, double epsilon,
                        std::uint64_t seed);

/// Uniformly random perfect matching of the smaller side into the larger one.
Matching randomMaximumMatching(int nFirms, int nWorkers, std::uint64_t seed);

}  // namespace stablelab
