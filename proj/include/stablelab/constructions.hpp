#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/market_core.hpp"
#include "stablelab/rng.hpp"

namespace stablelab {

/// Admirers of an agent: agents of the other side that prefer it to their own
/// partner in the unique stable matching.
struct EtaReport {
  bool passes = false;
  double eta = 0.0;          // requested
  double achievedEta = 0.0;  // min non-exception admirer count / n
  int threshold = 0;         // ceil(eta * n)
  std::optional<int> exceptionFirm;
  std::optional<int> exceptionWorker;
  std::vector<int> perFirmAdmirers;
  std::vector<int> perWorkerAdmirers;
  Matching stable;
};

/// Throws NotBalanced, NotUniqueStable, DomainError (eta outside (0,1)).
EtaReport checkEtaConditions(const Market& market, double eta);

/// A market of the "hub" family: agent 0 on each side admires no one in the
/// other side's eyes, every other firm a lists its admired set S_a first, then
/// its stable partner, then worker 0. S_a is a circulant of size `d` over
/// 1..n-1. Labels are then shuffled with `seed` (0 keeps them as built).
Market hubMarket(int n, int d, std::uint64_t seed);

struct EtaSearchResult {
  Market market;
  EtaReport report;
  std::uint64_t evaluations = 0;
};

/// Randomized local search for a market passing checkEtaConditions(., eta).
/// Seeds: perturbed assortative markets and relabelled hub markets. Moves swap
/// adjacent entries of one preference list. The result is re-verified before
/// it is returned. Throws DomainError (n < 4 or eta outside (0, 1)), NotFound
/// when the budget runs out.
EtaSearchResult searchEtaMarket(int n, double eta, std::uint64_t seed, std::uint64_t budget);

/// Original agents keep their lists with the new agents appended in index
/// order; new agents rank all originals (index order) above the new side,
/// which they order as in `etaMarket`. Throws PreconditionFailed naming the
/// clause that failed.
Market deltaAugment(const Market& original, const Market& etaMarket);

/// (eta - zeta) / (eta + (2 kappa - 1) zeta). Throws DomainError unless
/// 0 < zeta < eta and kappa >= 1.
double pDestabLowerBound(double eta, double zeta, double kappa);

/// Some agent other than the exceptions is unmatched.
bool starCondition(const Matching& matching, std::optional<int> exceptionFirm, std::optional<int> exceptionWorker);

struct StarPartition {
  std::vector<BlockingPair> destabilizing;
  std::vector<BlockingPair> stabilizing;
  std::vector<BlockingPair> neutral;
};

/// Throws StarConditionViolated when `matching` itself violates the condition.
StarPartition classifyStarPairs(const Market& market, const Matching& matching, const Matching& reference,
                                std::optional<int> exceptionFirm, std::optional<int> exceptionWorker);

/// Uniform-ish sample from the part of {S >= minStable} that satisfies the star
/// condition and is unstable: up to n - minStable firms leave their stable
/// partners and the freed agents are re-paired at random, avoiding stable
/// pairs. nullopt when no such state exists (e.g. minStable = n).
std::optional<Matching> sampleStarState(const Market& market, const Matching& reference, int minStable,
                                        std::optional<int> exceptionFirm, std::optional<int> exceptionWorker,
                                        Rng& rng);

struct WalkConfig {
  int startLevel = 0;  // k
  int target = 0;      // n
  double pDestab = 0.0;
  int stepUp = 4;
  int stepDown = 1;
};

/// First step with S >= target, or nullopt when censored at maxSteps.
/// Throws DomainError unless 0 <= pDestab < 1 and startLevel < target.
std::optional<std::uint64_t> biasedWalk(const WalkConfig& config, std::uint64_t maxSteps, std::uint64_t seed);

/// Expected hitting time of the walk from its start level, by direct solve.
double biasedWalkExpectedSteps(const WalkConfig& config);

void writeEtaReportCsv(std::ostream& out, const EtaReport& report);

}  // namespace stablelab
