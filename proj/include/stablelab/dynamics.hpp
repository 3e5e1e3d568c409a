#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/market_core.hpp"
#include "stablelab/rng.hpp"
#include "stablelab/weights.hpp"

namespace stablelab {

/// Draws one admissible pair with probability proportional to its weight and
/// satisfies it in place. Returns nullopt (and leaves `matching` alone) when
/// the matching is stable. Throws MissingCardinalValues.
std::optional<BlockingPair> step(const Market& market, Matching& matching, const WeightRule& rule,
                                 std::uint64_t stepIndex, Rng& rng);

/// Incrementally maintained blocking-pair set. A satisfy touches only the rows
/// of the two firms and the columns of the two workers involved.
class BlockingTracker {
 public:
  BlockingTracker(const Market& market, const Matching& start);

  const Matching& matching() const noexcept { return matching_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool stable() const noexcept { return pairs_.empty(); }
  bool blocking(int f, int w) const noexcept { return pos_[cell(f, w)] != kNone; }

  /// i-th pair in the tracker's (unordered) list.
  BlockingPair pairAt(std::size_t i) const noexcept {
    const std::size_t c = pairs_[i];
    return {static_cast<int>(c / nW_), static_cast<int>(c % nW_), false, false};
  }

  /// Number of agents with at least one blocking partner.
  std::size_t activeAgents() const noexcept { return activeFirms_.size() + activeWorkers_.size(); }
  /// Agent i among the active ones (firms first) with its best blocking partner.
  BlockingPair bestOfActive(std::size_t i) const noexcept;

  void satisfy(int f, int w);

 private:
  static constexpr std::size_t kNone = SIZE_MAX;
  std::size_t cell(int f, int w) const noexcept { return static_cast<std::size_t>(f) * nW_ + static_cast<std::size_t>(w); }
  void set(int f, int w, bool on);
  void refresh(int f, int w);
  static void toggle(std::vector<int>& list, std::vector<std::size_t>& where, int agent, bool on);

  const Market* market_;
  std::size_t nW_;
  Matching matching_;
  std::vector<std::size_t> pairs_;
  std::vector<std::size_t> pos_;
  std::vector<int> rowCount_, colCount_;
  std::vector<int> activeFirms_, activeWorkers_;
  std::vector<std::size_t> firmSlot_, workerSlot_;
};

struct StepStat {
  std::uint64_t step;
  int stablePairs;
  int blockingPairs;
  friend bool operator==(const StepStat&, const StepStat&) = default;
};

struct Trajectory {
  std::uint64_t steps = 0;
  std::optional<Matching> absorbed;
  bool hitMaxSteps = false;
  /// Steps 0, 1, 2, 4, 8, ... and the last one.
  std::vector<StepStat> perStepStats;
  /// Averages over every visited matching, start and end included.
  double onPathMismatchMean = 0.0;
  double onPathFirmMismatch = 0.0;
  double onPathWorkerMismatch = 0.0;
};

struct SimOptions {
  bool recordSeries = false;
  /// Called after every satisfied pair with the step number (1-based).
  std::function<void(std::uint64_t, const BlockingPair&, const Matching&)> onStep;
};

/// Throws DomainError (maxSteps == 0) and anything step() throws.
Trajectory simulate(const Market& market, const Matching& start, const WeightRule& rule, const Matching& reference,
                    std::uint64_t maxSteps, std::uint64_t seed, const SimOptions& options = {});

struct BatchStats {
  std::size_t paths = 0;
  std::size_t absorbed = 0;
  std::size_t returned = 0;  // absorbed at the reference
  std::size_t censored = 0;
  double returnProb = 0.0;      // returned / paths
  double meanSteps = 0.0;       // censored paths count as maxSteps
  double medianSteps = 0.0;
  double meanLnSteps = 0.0;     // ln(max(1, steps))
  double ultMismatch = 0.0;     // over absorbed paths
  double onPathMismatch = 0.0;
  double onPathFirmMismatch = 0.0;
  double onPathWorkerMismatch = 0.0;
  double censoredFrac() const noexcept { return paths ? static_cast<double>(censored) / paths : 0.0; }
  /// Steps of every path in path order (maxSteps when censored).
  std::vector<std::uint64_t> pathSteps;
  /// Absorption counts keyed by matching, in first-seen path order.
  std::vector<std::pair<Matching, std::size_t>> outcomes;
};

/// Path p runs with seed deriveSeed(masterSeed, stream, p). Results do not
/// depend on `threads`.
BatchStats batchRun(const Market& market, const Matching& start, const WeightRule& rule, const Matching& reference,
                    std::size_t paths, std::uint64_t maxSteps, std::uint64_t masterSeed, std::uint64_t stream = 0,
                    unsigned threads = 1);

/// One record per start; start i uses stream i.
std::vector<BatchStats> batchRun(const Market& market, const std::vector<Matching>& starts, const WeightRule& rule,
                                 const Matching& reference, std::size_t paths, std::uint64_t maxSteps,
                                 std::uint64_t masterSeed, unsigned threads = 1);

/// Per-step TSV: step, firm, worker, stable_pairs, blocking_pairs, matching.
void writeTrace(std::ostream& out, const Market& market, const Matching& start, const WeightRule& rule,
                const Matching& reference, std::uint64_t maxSteps, std::uint64_t seed);

}  // namespace stablelab
