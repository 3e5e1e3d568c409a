#pragma once

#include <iosfwd>
#include <tuple>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/market_core.hpp"

namespace stablelab {

Matching deferredAcceptance(const Market& market, Side proposingSide = Side::Firm);

bool isUniqueStable(const Market& market);

struct Proposal {
  int firm;
  int worker;
  bool accepted;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct BreakmarriageOutcome {
  enum class Status { Success, FirmExhausted, UnmatchedWorkerProposed };
  Status status = Status::FirmExhausted;
  std::optional<Matching> result;
  std::vector<Proposal> proposalLog;
};

std::string_view toString(BreakmarriageOutcome::Status s);

/// Restarted firm-proposing DA after divorcing `firm` from its partner. The
/// ex-partner stays semi-free: it accepts only firms it prefers to `firm`, and
/// that acceptance ends the run successfully.
/// Throws InputNotStable, FirmUnmatched.
BreakmarriageOutcome breakmarriage(const Market& market, const Matching& mu, int firm);

/// Same operation with the roles of the sides exchanged (`worker` is divorced,
/// workers propose). The result is expressed in the original orientation.
BreakmarriageOutcome breakmarriageWorker(const Market& market, const Matching& mu, int worker);

/// Pairs that carry almostStable(mu, firm) to the breakmarriage result through
/// satisfy. Throws BreakmarriageUnsuccessful.
std::vector<BlockingPair> breakmarriagePath(const Market& market, const Matching& mu, int firm);

struct StableSet {
  std::vector<Matching> matchings;  // firm-optimal first, worker-optimal last
  std::size_t firmOptimal = 0;
  std::size_t workerOptimal = 0;
};

enum class EnumMethod { Breakmarriage, BruteForce };

/// BruteForce throws CapExceeded above the matching cap.
StableSet enumerateStable(const Market& market, EnumMethod method = EnumMethod::Breakmarriage,
                          std::uint64_t cap = kDefaultMatchingCap);

/// Matchings in the matching text format separated by "---" lines.
void writeStableSet(std::ostream& out, const StableSet& set);
StableSet readStableSet(std::istream& in, int nFirms, int nWorkers);

}  // namespace stablelab
