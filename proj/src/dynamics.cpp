#include "stablelab/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "stablelab/error.hpp"
#include "stablelab/parallel.hpp"

namespace stablelab {

namespace {

std::size_t drawWeighted(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return w.size() - 1;
}

}  // namespace

std::optional<BlockingPair> step(const Market& market, Matching& matching, const WeightRule& rule,
                                 std::uint64_t stepIndex, Rng& rng) {
  validateRule(market, rule);
  const auto admissible = transitionWeights(market, matching, rule, stepIndex);
  if (admissible.empty()) return std::nullopt;
  std::size_t pick;
  if (rule.kind == RuleKind::UniformPair) {
    pick = static_cast<std::size_t>(rng.below(admissible.size()));
  } else {
    std::vector<double> w;
    w.reserve(admissible.size());
    for (const auto& pw : admissible) w.push_back(pw.weight);
    pick = drawWeighted(w, rng);
  }
  const BlockingPair chosen = admissible[pick].pair;
  matching.match(chosen.firm, chosen.worker);
  return chosen;
}

BlockingTracker::BlockingTracker(const Market& market, const Matching& start)
    : market_(&market),
      nW_(static_cast<std::size_t>(market.nWorkers())),
      matching_(start),
      pos_(static_cast<std::size_t>(market.nFirms()) * nW_, kNone),
      rowCount_(static_cast<std::size_t>(market.nFirms()), 0),
      colCount_(nW_, 0),
      firmSlot_(static_cast<std::size_t>(market.nFirms()), kNone),
      workerSlot_(nW_, kNone) {
  if (start.nFirms() != market.nFirms() || start.nWorkers() != market.nWorkers()) {
    throw LabError(ErrorCode::SizeMismatch, "start matching does not fit the market");
  }
  for (int f = 0; f < market.nFirms(); ++f) {
    for (int w = 0; w < market.nWorkers(); ++w) refresh(f, w);
  }
}

void BlockingTracker::toggle(std::vector<int>& list, std::vector<std::size_t>& where, int agent, bool on) {
  auto& slot = where[static_cast<std::size_t>(agent)];
  if (on) {
    slot = list.size();
    list.push_back(agent);
  } else {
    const int last = list.back();
    list[slot] = last;
    where[static_cast<std::size_t>(last)] = slot;
    list.pop_back();
    slot = kNone;
  }
}

void BlockingTracker::set(int f, int w, bool on) {
  const std::size_t c = cell(f, w);
  if (on == (pos_[c] != kNone)) return;
  auto& rc = rowCount_[static_cast<std::size_t>(f)];
  auto& cc = colCount_[static_cast<std::size_t>(w)];
  if (on) {
    pos_[c] = pairs_.size();
    pairs_.push_back(c);
    if (rc++ == 0) toggle(activeFirms_, firmSlot_, f, true);
    if (cc++ == 0) toggle(activeWorkers_, workerSlot_, w, true);
  } else {
    const std::size_t last = pairs_.back();
    pairs_[pos_[c]] = last;
    pos_[last] = pos_[c];
    pairs_.pop_back();
    pos_[c] = kNone;
    if (--rc == 0) toggle(activeFirms_, firmSlot_, f, false);
    if (--cc == 0) toggle(activeWorkers_, workerSlot_, w, false);
  }
}

void BlockingTracker::refresh(int f, int w) { set(f, w, isBlocking(*market_, matching_, f, w)); }

void BlockingTracker::satisfy(int f, int w) {
  const int oldW = matching_.firmPartner(f);
  const int oldF = matching_.workerPartner(w);
  matching_.match(f, w);
  const int nF = market_->nFirms();
  const int nW = market_->nWorkers();
  for (int x = 0; x < nW; ++x) {
    refresh(f, x);
    if (oldF != kUnmatched) refresh(oldF, x);
  }
  for (int y = 0; y < nF; ++y) {
    refresh(y, w);
    if (oldW != kUnmatched) refresh(y, oldW);
  }
}

BlockingPair BlockingTracker::bestOfActive(std::size_t i) const noexcept {
  if (i < activeFirms_.size()) {
    const int f = activeFirms_[i];
    for (int w : market_->firmPrefs(f)) {
      if (blocking(f, w)) return {f, w, true, false};
    }
  } else {
    const int w = activeWorkers_[i - activeFirms_.size()];
    for (int f : market_->workerPrefs(w)) {
      if (blocking(f, w)) return {f, w, false, true};
    }
  }
  return {};
}

Trajectory simulate(const Market& market, const Matching& start, const WeightRule& rule, const Matching& reference,
                    std::uint64_t maxSteps, std::uint64_t seed, const SimOptions& options) {
  if (maxSteps == 0) throw LabError(ErrorCode::DomainError, "maxSteps must be at least 1");
  validateRule(market, rule);
  if (reference.nFirms() != market.nFirms() || reference.nWorkers() != market.nWorkers()) {
    throw LabError(ErrorCode::SizeMismatch, "reference matching does not fit the market");
  }
  Rng rng(seed);
  BlockingTracker tracker(market, start);
  const Matching& m = tracker.matching();
  const int nF = market.nFirms();
  const int nW = market.nWorkers();

  int stablePairs = stablePairCount(start, reference);
  int firmsOff = 0, workersOff = 0;
  for (int f = 0; f < nF; ++f) firmsOff += start.firmPartner(f) != reference.firmPartner(f);
  for (int w = 0; w < nW; ++w) workersOff += start.workerPartner(w) != reference.workerPartner(w);
  auto account = [&](int f, int w, int sign) {
    if (f != kUnmatched) {
      const int p = m.firmPartner(f);
      firmsOff += sign * (p != reference.firmPartner(f));
      stablePairs += sign * (p != kUnmatched && p == reference.firmPartner(f));
    }
    if (w != kUnmatched) workersOff += sign * (m.workerPartner(w) != reference.workerPartner(w));
  };

  Trajectory tr;
  double sumMismatch = 0.0, sumFirm = 0.0, sumWorker = 0.0;
  std::vector<double> weights;
  std::uint64_t s = 0;
  for (;; ++s) {
    sumMismatch += 1.0 - static_cast<double>(stablePairs) / nF;
    sumFirm += static_cast<double>(firmsOff) / nF;
    sumWorker += static_cast<double>(workersOff) / nW;
    if (options.recordSeries && (s == 0 || std::has_single_bit(s))) {
      tr.perStepStats.push_back({s, stablePairs, static_cast<int>(tracker.size())});
    }
    if (tracker.stable()) {
      tr.absorbed = m;
      break;
    }
    if (s == maxSteps) {
      tr.hitMaxSteps = true;
      break;
    }

    BlockingPair chosen;
    switch (rule.kind) {
      case RuleKind::UniformPair:
        chosen = tracker.pairAt(static_cast<std::size_t>(rng.below(tracker.size())));
        break;
      case RuleKind::UniformAgentBest:
        chosen = tracker.bestOfActive(static_cast<std::size_t>(rng.below(tracker.activeAgents())));
        break;
      default: {
        std::vector<BlockingPair> admissible;
        if (rule.usesBestPairs()) {
          for (const auto& p : blockingPairs(market, m)) {
            if (p.bestForFirm || p.bestForWorker) admissible.push_back(p);
          }
        } else {
          for (std::size_t i = 0; i < tracker.size(); ++i) admissible.push_back(tracker.pairAt(i));
        }
        weights.clear();
        for (const auto& p : admissible) weights.push_back(rawPairWeight(market, m, p, rule, s));
        applyKappa(weights, rule);
        chosen = admissible[drawWeighted(weights, rng)];
      }
    }

    const int oldW = m.firmPartner(chosen.firm);
    const int oldF = m.workerPartner(chosen.worker);
    account(chosen.firm, chosen.worker, -1);
    account(oldF, oldW, -1);
    tracker.satisfy(chosen.firm, chosen.worker);
    account(chosen.firm, chosen.worker, +1);
    account(oldF, oldW, +1);
    if (options.onStep) options.onStep(s + 1, chosen, m);
  }
  tr.steps = s;
  if (options.recordSeries && tr.perStepStats.back().step != s) {
    tr.perStepStats.push_back({s, stablePairs, static_cast<int>(tracker.size())});
  }
  const double visited = static_cast<double>(s + 1);
  tr.onPathMismatchMean = sumMismatch / visited;
  tr.onPathFirmMismatch = sumFirm / visited;
  tr.onPathWorkerMismatch = sumWorker / visited;
  return tr;
}

BatchStats batchRun(const Market& market, const Matching& start, const WeightRule& rule, const Matching& reference,
                    std::size_t paths, std::uint64_t maxSteps, std::uint64_t masterSeed, std::uint64_t stream,
                    unsigned threads) {
  std::vector<Trajectory> runs(paths);
  parallelFor(paths, threads, [&](std::size_t p) {
    runs[p] = simulate(market, start, rule, reference, maxSteps, deriveSeed(masterSeed, stream, p));
  });

  BatchStats b;
  b.paths = paths;
  std::vector<double> steps;
  std::unordered_map<Matching, std::size_t, MatchingHash> outcomeIndex;
  double sumSteps = 0, sumLn = 0, sumUlt = 0, sumOn = 0, sumOnF = 0, sumOnW = 0;
  for (const auto& t : runs) {
    const double st = static_cast<double>(t.steps);
    steps.push_back(st);
    b.pathSteps.push_back(t.steps);
    sumSteps += st;
    sumLn += std::log(std::max(1.0, st));
    sumOn += t.onPathMismatchMean;
    sumOnF += t.onPathFirmMismatch;
    sumOnW += t.onPathWorkerMismatch;
    if (t.hitMaxSteps) {
      ++b.censored;
      continue;
    }
    ++b.absorbed;
    if (*t.absorbed == reference) ++b.returned;
    sumUlt += mismatchProportion(*t.absorbed, reference);
    auto [it, fresh] = outcomeIndex.emplace(*t.absorbed, b.outcomes.size());
    if (fresh) b.outcomes.emplace_back(*t.absorbed, 0);
    ++b.outcomes[it->second].second;
  }
  if (paths) {
    const double n = static_cast<double>(paths);
    b.returnProb = static_cast<double>(b.returned) / n;
    b.meanSteps = sumSteps / n;
    b.meanLnSteps = sumLn / n;
    b.onPathMismatch = sumOn / n;
    b.onPathFirmMismatch = sumOnF / n;
    b.onPathWorkerMismatch = sumOnW / n;
    std::sort(steps.begin(), steps.end());
    const std::size_t mid = paths / 2;
    b.medianSteps = paths % 2 ? steps[mid] : 0.5 * (steps[mid - 1] + steps[mid]);
  }
  b.ultMismatch = b.absorbed ? sumUlt / static_cast<double>(b.absorbed) : 0.0;
  return b;
}

std::vector<BatchStats> batchRun(const Market& market, const std::vector<Matching>& starts, const WeightRule& rule,
                                 const Matching& reference, std::size_t paths, std::uint64_t maxSteps,
                                 std::uint64_t masterSeed, unsigned threads) {
  std::vector<BatchStats> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    out.push_back(batchRun(market, starts[i], rule, reference, paths, maxSteps, masterSeed, i, threads));
  }
  return out;
}

void writeTrace(std::ostream& out, const Market& market, const Matching& start, const WeightRule& rule,
                const Matching& reference, std::uint64_t maxSteps, std::uint64_t seed) {
  out << "step\tfirm\tworker\tstable_pairs\tblocking_pairs\tmatching\n";
  out << "0\t-\t-\t" << stablePairCount(start, reference) << '\t' << blockingPairs(market, start).size() << '\t'
      << toString(start) << '\n';
  SimOptions opts;
  opts.onStep = [&](std::uint64_t s, const BlockingPair& p, const Matching& m) {
    out << s << '\t' << p.firm << '\t' << p.worker << '\t' << stablePairCount(m, reference) << '\t'
        << blockingPairs(market, m).size() << '\t' << toString(m) << '\n';
  };
  simulate(market, start, rule, reference, maxSteps, seed, opts);
}

}  // namespace stablelab
