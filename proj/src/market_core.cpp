#include "stablelab/market_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "stablelab/error.hpp"
#include "stablelab/rng.hpp"

namespace stablelab {

bool isBlocking(const Market& market, const Matching& matching, int firm, int worker) noexcept {
  const int current = matching.firmPartner(firm);
  if (current == worker) return false;
  return market.firmPrefers(firm, worker, current) && market.workerPrefers(worker, firm, matching.workerPartner(worker));
}

std::vector<BlockingPair> blockingPairs(const Market& market, const Matching& matching) {
  std::vector<BlockingPair> out;
  std::vector<int> bestForFirm(static_cast<std::size_t>(market.nFirms()), kUnmatched);
  std::vector<int> bestForWorker(static_cast<std::size_t>(market.nWorkers()), kUnmatched);
  for (int f = 0; f < market.nFirms(); ++f) {
    for (int w = 0; w < market.nWorkers(); ++w) {
      if (!isBlocking(market, matching, f, w)) continue;
      out.push_back({f, w, false, false});
      int& bf = bestForFirm[static_cast<std::size_t>(f)];
      if (bf == kUnmatched || market.firmRank(f, w) < market.firmRank(f, bf)) bf = w;
      int& bw = bestForWorker[static_cast<std::size_t>(w)];
      if (bw == kUnmatched || market.workerRank(w, f) < market.workerRank(w, bw)) bw = f;
    }
  }
  for (auto& p : out) {
    p.bestForFirm = bestForFirm[static_cast<std::size_t>(p.firm)] == p.worker;
    p.bestForWorker = bestForWorker[static_cast<std::size_t>(p.worker)] == p.firm;
  }
  return out;
}

Matching satisfy(const Market& market, const Matching& matching, const BlockingPair& pair) {
  if (pair.firm < 0 || pair.firm >= market.nFirms() || pair.worker < 0 || pair.worker >= market.nWorkers() ||
      !isBlocking(market, matching, pair.firm, pair.worker)) {
    throw LabError(ErrorCode::NotABlockingPair,
                   "(f" + std::to_string(pair.firm) + ", w" + std::to_string(pair.worker) + ") in " + toString(matching));
  }
  Matching next = matching;
  next.match(pair.firm, pair.worker);
  return next;
}

bool isStable(const Market& market, const Matching& matching) noexcept {
  for (int f = 0; f < market.nFirms(); ++f) {
    for (int w = 0; w < market.nWorkers(); ++w) {
      if (isBlocking(market, matching, f, w)) return false;
    }
  }
  return true;
}

int stablePairCount(const Matching& matching, const Matching& reference) {
  if (matching.nFirms() != reference.nFirms() || matching.nWorkers() != reference.nWorkers()) {
    throw LabError(ErrorCode::SizeMismatch, "matchings belong to different market sizes");
  }
  int count = 0;
  for (int f = 0; f < matching.nFirms(); ++f) {
    const int w = matching.firmPartner(f);
    if (w != kUnmatched && w == reference.firmPartner(f)) ++count;
  }
  return count;
}

double mismatchProportion(const Matching& matching, const Matching& reference) {
  return 1.0 - static_cast<double>(stablePairCount(matching, reference)) / matching.nFirms();
}

double sideMismatch(const Matching& matching, const Matching& reference, Side side) {
  auto mine = side == Side::Firm ? matching.firmPartners() : matching.workerPartners();
  auto ref = side == Side::Firm ? reference.firmPartners() : reference.workerPartners();
  if (mine.size() != ref.size()) throw LabError(ErrorCode::SizeMismatch, "matchings belong to different market sizes");
  std::size_t differ = 0;
  for (std::size_t i = 0; i < mine.size(); ++i) differ += mine[i] != ref[i];
  return static_cast<double>(differ) / static_cast<double>(mine.size());
}

std::uint64_t matchingCount(int nFirms, int nWorkers) noexcept {
  constexpr std::uint64_t kMax = UINT64_MAX;
  auto mulSat = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
    if (a != 0 && b > kMax / a) return kMax;
    return a * b;
  };
  // term_k = C(nF,k) C(nW,k) k! = [nF!/(nF-k)!] * C(nW,k); build incrementally.
  std::uint64_t total = 1;
  std::uint64_t falling = 1;  // nF (nF-1) ... (nF-k+1)
  std::uint64_t binom = 1;    // C(nW, k)
  const int kMaxPairs = std::min(nFirms, nWorkers);
  for (int k = 1; k <= kMaxPairs; ++k) {
    falling = mulSat(falling, static_cast<std::uint64_t>(nFirms - k + 1));
    // C(nW,k) = C(nW,k-1) * (nW-k+1) / k; exact in this order while it fits.
    const std::uint64_t num = mulSat(binom, static_cast<std::uint64_t>(nWorkers - k + 1));
    binom = num == kMax ? kMax : num / static_cast<std::uint64_t>(k);
    const std::uint64_t term = mulSat(falling, binom);
    total = (term == kMax || total > kMax - term) ? kMax : total + term;
  }
  return total;
}

namespace {

void extend(Matching& current, int firstFirm, int remaining, std::vector<char>& workerUsed,
            const std::function<void(const Matching&)>& visit) {
  if (remaining == 0) {
    visit(current);
    return;
  }
  const int nF = current.nFirms();
  const int nW = current.nWorkers();
  for (int f = firstFirm; f + remaining <= nF; ++f) {
    for (int w = 0; w < nW; ++w) {
      if (workerUsed[static_cast<std::size_t>(w)]) continue;
      workerUsed[static_cast<std::size_t>(w)] = 1;
      current.match(f, w);
      extend(current, f + 1, remaining - 1, workerUsed, visit);
      current.unmatchFirm(f);
      workerUsed[static_cast<std::size_t>(w)] = 0;
    }
  }
}

}  // namespace

void forEachMatching(int nFirms, int nWorkers, const std::function<void(const Matching&)>& visit,
                     std::uint64_t cap) {
  const std::uint64_t count = matchingCount(nFirms, nWorkers);
  if (count > cap) {
    throw LabError(ErrorCode::CapExceeded, std::to_string(nFirms) + "x" + std::to_string(nWorkers) + " market has " +
                                               std::to_string(count) + " matchings, cap is " + std::to_string(cap));
  }
  Matching current(nFirms, nWorkers);
  std::vector<char> used(static_cast<std::size_t>(nWorkers), 0);
  for (int k = 0; k <= std::min(nFirms, nWorkers); ++k) extend(current, 0, k, used, visit);
}

std::vector<Matching> enumerateMatchings(int nFirms, int nWorkers, std::uint64_t cap) {
  std::vector<Matching> all;
  forEachMatching(nFirms, nWorkers, [&](const Matching& m) { all.push_back(m); }, cap);
  return all;
}

Market randomMarket(int nFirms, int nWorkers, std::uint64_t seed, bool withCardinal) {
  Rng rng(seed);
  RawMarket raw;
  auto drawList = [&](int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(std::span<int>(p));
    return p;
  };
  for (int f = 0; f < nFirms; ++f) raw.firmPrefs.push_back(drawList(nWorkers));
  for (int w = 0; w < nWorkers; ++w) raw.workerPrefs.push_back(drawList(nFirms));
  if (withCardinal) {
    const auto nW = static_cast<std::size_t>(nWorkers);
    CardinalValues v;
    v.firm.assign(static_cast<std::size_t>(nFirms) * nW, 0.0);
    v.worker.assign(static_cast<std::size_t>(nFirms) * nW, 0.0);
    auto sortedDraws = [&](int n) {
      std::vector<double> d(static_cast<std::size_t>(n));
      for (auto& x : d) x = rng.uniform01();
      std::sort(d.begin(), d.end(), std::greater<>());
      // Ties have probability ~2^-53 per pair; nudge so the order stays strict.
      for (std::size_t i = 1; i < d.size(); ++i) {
        if (!(d[i] < d[i - 1])) d[i] = std::nextafter(d[i - 1], 0.0);
      }
      return d;
    };
    for (int f = 0; f < nFirms; ++f) {
      auto d = sortedDraws(nWorkers);
      for (std::size_t r = 0; r < nW; ++r) v.firm[static_cast<std::size_t>(f) * nW + raw.firmPrefs[f][r]] = d[r];
    }
    for (int w = 0; w < nWorkers; ++w) {
      auto d = sortedDraws(nFirms);
      for (std::size_t r = 0; r < static_cast<std::size_t>(nFirms); ++r) {
        v.worker[static_cast<std::size_t>(raw.workerPrefs[w][r]) * nW + static_cast<std::size_t>(w)] = d[r];
      }
    }
    raw.values = std::move(v);
  }
  return validateMarket(std::move(raw));
}

Market assortativeMarket(int nFirms, int nWorkers) {
  RawMarket raw;
  std::vector<int> workers(static_cast<std::size_t>(nWorkers));
  std::iota(workers.begin(), workers.end(), 0);
  std::vector<int> firms(static_cast<std::size_t>(nFirms));
  std::iota(firms.begin(), firms.end(), 0);
  raw.firmPrefs.assign(static_cast<std::size_t>(nFirms), workers);
  raw.workerPrefs.assign(static_cast<std::size_t>(nWorkers), firms);
  return validateMarket(std::move(raw));
}

Matching almostStable(const Market& market, const Matching& stable, int firm) {
  if (firm < 0 || firm >= market.nFirms() || stable.firmPartner(firm) == kUnmatched) {
    throw LabError(ErrorCode::FirmUnmatched, "f" + std::to_string(firm) + " has no partner to divorce");
  }
  if (!isStable(market, stable)) throw LabError(ErrorCode::InputNotStable, toString(stable));
  Matching out = stable;
  out.unmatchFirm(firm);
  return out;
}

Matching perturbEpsilon(const Market& market, const Matching& stable, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw LabError(ErrorCode::DomainError, "epsilon must lie in (0, 1]");
  }
  std::vector<int> matched;
  for (int f = 0; f < market.nFirms(); ++f) {
    if (stable.firmPartner(f) != kUnmatched) matched.push_back(f);
  }
  // The 1e-9 slack keeps products like 0.3 * 10 from rounding up to 4.
  auto want = static_cast<std::size_t>(std::ceil(epsilon * market.nFirms() - 1e-9));
  want = std::min(want, matched.size());
  Rng rng(seed);
  rng.shuffle(std::span<int>(matched));
  Matching out = stable;
  for (std::size_t k = 0; k < want; ++k) out.unmatchFirm(matched[k]);
  return out;
}

Matching randomMaximumMatching(int nFirms, int nWorkers, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> workers(static_cast<std::size_t>(nWorkers));
  std::iota(workers.begin(), workers.end(), 0);
  std::vector<int> firms(static_cast<std::size_t>(nFirms));
  std::iota(firms.begin(), firms.end(), 0);
  rng.shuffle(std::span<int>(workers));
  rng.shuffle(std::span<int>(firms));
  Matching m(nFirms, nWorkers);
  const int k = std::min(nFirms, nWorkers);
  for (int i = 0; i < k; ++i) m.match(firms[static_cast<std::size_t>(i)], workers[static_cast<std::size_t>(i)]);
  return m;
}

}  // namespace stablelab
