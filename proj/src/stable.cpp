#include "stablelab/stable.hpp"

#include <deque>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "stablelab/error.hpp"
#include "stablelab/io.hpp"

namespace stablelab {

namespace {

Matching firmProposing(const Market& market) {
  const int nF = market.nFirms();
  Matching m(nF, market.nWorkers());
  std::vector<int> next(static_cast<std::size_t>(nF), 0);
  for (int start = 0; start < nF; ++start) {
    int cur = start;
    // cur proposes until it is held or exhausted; a displaced firm takes over.
    while (cur != kUnmatched) {
      auto& ptr = next[static_cast<std::size_t>(cur)];
      if (ptr >= market.nWorkers()) break;
      const int w = market.firmPrefs(cur)[static_cast<std::size_t>(ptr++)];
      const int held = m.workerPartner(w);
      if (market.workerPrefers(w, cur, held)) {
        m.match(cur, w);
        cur = held;
      }
    }
  }
  return m;
}

}  // namespace

Matching deferredAcceptance(const Market& market, Side proposingSide) {
  if (proposingSide == Side::Firm) return firmProposing(market);
  return firmProposing(market.transposed()).transposed();
}

bool isUniqueStable(const Market& market) {
  return deferredAcceptance(market, Side::Firm) == deferredAcceptance(market, Side::Worker);
}

std::string_view toString(BreakmarriageOutcome::Status s) {
  switch (s) {
    case BreakmarriageOutcome::Status::Success: return "Success";
    case BreakmarriageOutcome::Status::FirmExhausted: return "FirmExhausted";
    case BreakmarriageOutcome::Status::UnmatchedWorkerProposed: return "UnmatchedWorkerProposed";
  }
  return "?";
}

BreakmarriageOutcome breakmarriage(const Market& market, const Matching& mu, int firm) {
  if (firm < 0 || firm >= market.nFirms() || mu.firmPartner(firm) == kUnmatched) {
    throw LabError(ErrorCode::FirmUnmatched, "f" + std::to_string(firm) + " is unmatched in " + toString(mu));
  }
  if (!isStable(market, mu)) throw LabError(ErrorCode::InputNotStable, toString(mu));

  using Status = BreakmarriageOutcome::Status;
  BreakmarriageOutcome out;
  const int semiFree = mu.firmPartner(firm);
  Matching m = mu;
  m.unmatchFirm(firm);

  // Every firm starts just past its partner in mu and never revisits a worker.
  std::vector<int> next(static_cast<std::size_t>(market.nFirms()));
  for (int f = 0; f < market.nFirms(); ++f) {
    if (mu.firmPartner(f) != kUnmatched) next[static_cast<std::size_t>(f)] = market.firmRank(f, mu.firmPartner(f)) + 1;
  }
  int cur = firm;
  while (true) {
    int& ptr = next[static_cast<std::size_t>(cur)];
    if (ptr >= market.nWorkers()) {
      out.status = Status::FirmExhausted;
      return out;
    }
    const int w = market.firmPrefs(cur)[static_cast<std::size_t>(ptr++)];
    if (w == semiFree) {
      const bool accepted = market.workerPrefers(w, cur, firm);
      out.proposalLog.push_back({cur, w, accepted});
      if (accepted) {
        m.match(cur, w);
        out.status = Status::Success;
        out.result = std::move(m);
        return out;
      }
      continue;
    }
    const int held = m.workerPartner(w);
    if (held == kUnmatched) {
      // w is single in mu; by the rural-hospital property no stable matching can follow.
      out.proposalLog.push_back({cur, w, true});
      out.status = Status::UnmatchedWorkerProposed;
      return out;
    }
    const bool accepted = market.workerPrefers(w, cur, held);
    out.proposalLog.push_back({cur, w, accepted});
    if (accepted) {
      m.match(cur, w);
      cur = held;
    }
  }
}

BreakmarriageOutcome breakmarriageWorker(const Market& market, const Matching& mu, int worker) {
  auto out = breakmarriage(market.transposed(), mu.transposed(), worker);
  if (out.result) out.result = out.result->transposed();
  for (auto& p : out.proposalLog) std::swap(p.firm, p.worker);
  return out;
}

std::vector<BlockingPair> breakmarriagePath(const Market& market, const Matching& mu, int firm) {
  auto outcome = breakmarriage(market, mu, firm);
  if (outcome.status != BreakmarriageOutcome::Status::Success) {
    throw LabError(ErrorCode::BreakmarriageUnsuccessful,
                   "f" + std::to_string(firm) + " in " + toString(mu) + ": " + std::string(toString(outcome.status)));
  }
  std::vector<BlockingPair> path;
  Matching m = almostStable(market, mu, firm);
  for (const auto& p : outcome.proposalLog) {
    if (!p.accepted) continue;
    BlockingPair bp{p.firm, p.worker, false, false};
    for (const auto& q : blockingPairs(market, m)) {
      if (q == bp) bp = q;
    }
    m = satisfy(market, m, bp);
    path.push_back(bp);
  }
  return path;
}

StableSet enumerateStable(const Market& market, EnumMethod method, std::uint64_t cap) {
  StableSet set;
  const Matching muW = deferredAcceptance(market, Side::Worker);
  if (method == EnumMethod::BruteForce) {
    const Matching muF = deferredAcceptance(market, Side::Firm);
    std::vector<Matching> interior;
    forEachMatching(
        market.nFirms(), market.nWorkers(),
        [&](const Matching& m) {
          if (m != muF && m != muW && isStable(market, m)) interior.push_back(m);
        },
        cap);
    set.matchings.push_back(muF);
    set.matchings.insert(set.matchings.end(), interior.begin(), interior.end());
  } else {
    std::unordered_set<Matching, MatchingHash> seen;
    std::deque<Matching> queue;
    std::vector<Matching> found;
    auto push = [&](const Matching& m) {
      if (seen.insert(m).second) {
        queue.push_back(m);
        if (m != muW) found.push_back(m);
      }
    };
    push(deferredAcceptance(market, Side::Firm));
    while (!queue.empty()) {
      Matching mu = std::move(queue.front());
      queue.pop_front();
      for (int f = 0; f < market.nFirms(); ++f) {
        if (mu.firmPartner(f) == kUnmatched) continue;
        auto outcome = breakmarriage(market, mu, f);
        if (outcome.result) push(*outcome.result);
      }
    }
    set.matchings = std::move(found);
  }
  // muW goes last; when the set is a singleton muF == muW and it is already there.
  if (set.matchings.empty() || set.matchings.front() != muW) set.matchings.push_back(muW);
  set.firmOptimal = 0;
  set.workerOptimal = set.matchings.size() - 1;
  return set;
}

void writeStableSet(std::ostream& out, const StableSet& set) {
  for (const auto& m : set.matchings) {
    writeMatching(out, m);
    out << "---\n";
  }
}

StableSet readStableSet(std::istream& in, int nFirms, int nWorkers) {
  StableSet set;
  while (in.peek() != std::char_traits<char>::eof()) {
    Matching m = readMatching(in, nFirms, nWorkers);
    if (m.pairCount() == 0 && in.eof()) break;
    set.matchings.push_back(std::move(m));
  }
  set.workerOptimal = set.matchings.empty() ? 0 : set.matchings.size() - 1;
  return set;
}

}  // namespace stablelab
