#include "stablelab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "stablelab/error.hpp"
#include "stablelab/stable.hpp"

namespace stablelab {

namespace {

int etaThreshold(double eta, int n) { return static_cast<int>(std::ceil(eta * n - 1e-9)); }

std::vector<int> admirersOfWorkers(const Market& market, const Matching& stable) {
  std::vector<int> count(static_cast<std::size_t>(market.nWorkers()), 0);
  for (int f = 0; f < market.nFirms(); ++f) {
    const int mine = stable.firmPartner(f);
    for (int w : market.firmPrefs(f)) {
      if (w == mine) break;
      ++count[static_cast<std::size_t>(w)];
    }
  }
  return count;
}

std::vector<int> admirersOfFirms(const Market& market, const Matching& stable) {
  std::vector<int> count(static_cast<std::size_t>(market.nFirms()), 0);
  for (int w = 0; w < market.nWorkers(); ++w) {
    const int mine = stable.workerPartner(w);
    for (int f : market.workerPrefs(w)) {
      if (f == mine) break;
      ++count[static_cast<std::size_t>(f)];
    }
  }
  return count;
}

// Index of the smallest count (lowest index on ties) and the smallest count
// among everyone else.
std::pair<int, int> worstAndRest(const std::vector<int>& counts) {
  const auto worst = static_cast<int>(std::min_element(counts.begin(), counts.end()) - counts.begin());
  int rest = INT32_MAX;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (static_cast<int>(i) != worst) rest = std::min(rest, counts[i]);
  }
  return {worst, rest};
}

struct Fitness {
  bool unique = false;
  int score = 0;  // min admirer count once the worst agent per side is set aside
  auto operator<=>(const Fitness&) const = default;
};

Fitness evaluate(const Market& market) {
  const Matching muF = deferredAcceptance(market, Side::Firm);
  Fitness fit;
  fit.unique = muF == deferredAcceptance(market, Side::Worker);
  fit.score = std::min(worstAndRest(admirersOfFirms(market, muF)).second,
                       worstAndRest(admirersOfWorkers(market, muF)).second);
  return fit;
}

RawMarket perturbedAssortative(int n, Rng& rng) {
  RawMarket raw = assortativeMarket(n, n).raw();
  for (int k = 0; k < 2 * n; ++k) {
    auto& lists = rng.bernoulli(0.5) ? raw.firmPrefs : raw.workerPrefs;
    auto& list = lists[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
    const auto r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - 1)));
    std::swap(list[r], list[r + 1]);
  }
  return raw;
}

}  // namespace

EtaReport checkEtaConditions(const Market& market, double eta) {
  if (!market.balanced()) throw LabError(ErrorCode::NotBalanced, "eta conditions concern balanced markets");
  if (!(eta > 0.0 && eta < 1.0)) throw LabError(ErrorCode::DomainError, "eta must lie in (0, 1)");
  const Matching muF = deferredAcceptance(market, Side::Firm);
  if (muF != deferredAcceptance(market, Side::Worker)) {
    throw LabError(ErrorCode::NotUniqueStable, "market has more than one stable matching");
  }
  const int n = market.nFirms();
  EtaReport r;
  r.eta = eta;
  r.threshold = etaThreshold(eta, n);
  r.stable = muF;
  r.perFirmAdmirers = admirersOfFirms(market, muF);
  r.perWorkerAdmirers = admirersOfWorkers(market, muF);

  bool ok = true;
  auto side = [&](const std::vector<int>& counts, std::optional<int>& exception) {
    const auto [worst, rest] = worstAndRest(counts);
    if (counts[static_cast<std::size_t>(worst)] < r.threshold) exception = worst;
    if (rest < r.threshold) ok = false;
    return n > 1 ? rest : counts[0];
  };
  const int firmRest = side(r.perFirmAdmirers, r.exceptionFirm);
  const int workerRest = side(r.perWorkerAdmirers, r.exceptionWorker);
  r.achievedEta = static_cast<double>(std::min(firmRest, workerRest)) / n;
  r.passes = ok;
  return r;
}

Market hubMarket(int n, int d, std::uint64_t seed) {
  if (n < 3 || d < 0 || d > n - 2) throw LabError(ErrorCode::DomainError, "hub market needs n >= 3, 0 <= d <= n-2");
  Rng rng(seed);
  // admired[a][b]: firm a (>= 1) ranks worker b above its stable partner.
  std::vector<std::vector<char>> admired(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  const int ring = n - 1;
  for (int a = 1; a < n; ++a) {
    for (int off = 1; off <= d; ++off) admired[static_cast<std::size_t>(a)][static_cast<std::size_t>((a - 1 + off) % ring + 1)] = 1;
  }
  RawMarket raw;
  raw.firmPrefs.resize(static_cast<std::size_t>(n));
  raw.workerPrefs.resize(static_cast<std::size_t>(n));
  auto shuffled = [&](std::vector<int> v) {
    if (seed) rng.shuffle(std::span<int>(v));
    return v;
  };
  {
    std::vector<int> others(static_cast<std::size_t>(n - 1));
    std::iota(others.begin(), others.end(), 1);
    auto l = shuffled(others);
    l.push_back(0);
    raw.firmPrefs[0] = l;
    l = shuffled(others);
    l.push_back(0);
    raw.workerPrefs[0] = l;
  }
  for (int a = 1; a < n; ++a) {
    std::vector<int> top, rest;
    for (int b = 1; b < n; ++b) {
      if (b == a) continue;
      (admired[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ? top : rest).push_back(b);
    }
    auto l = shuffled(top);
    l.push_back(a);
    l.push_back(0);
    for (int b : shuffled(rest)) l.push_back(b);
    raw.firmPrefs[static_cast<std::size_t>(a)] = l;
  }
  for (int b = 1; b < n; ++b) {
    std::vector<int> top, rest;
    for (int a = 1; a < n; ++a) {
      if (a == b) continue;
      (admired[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ? rest : top).push_back(a);
    }
    auto l = shuffled(top);
    l.push_back(b);
    l.push_back(0);
    for (int a : shuffled(rest)) l.push_back(a);
    raw.workerPrefs[static_cast<std::size_t>(b)] = l;
  }
  if (seed) {
    // Relabel both sides so the exceptions are not always agent 0.
    std::vector<int> pf(static_cast<std::size_t>(n)), pw(static_cast<std::size_t>(n));
    std::iota(pf.begin(), pf.end(), 0);
    std::iota(pw.begin(), pw.end(), 0);
    rng.shuffle(std::span<int>(pf));
    rng.shuffle(std::span<int>(pw));
    RawMarket out;
    out.firmPrefs.resize(static_cast<std::size_t>(n));
    out.workerPrefs.resize(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
      auto& l = out.firmPrefs[static_cast<std::size_t>(pf[static_cast<std::size_t>(a)])];
      for (int b : raw.firmPrefs[static_cast<std::size_t>(a)]) l.push_back(pw[static_cast<std::size_t>(b)]);
    }
    for (int b = 0; b < n; ++b) {
      auto& l = out.workerPrefs[static_cast<std::size_t>(pw[static_cast<std::size_t>(b)])];
      for (int a : raw.workerPrefs[static_cast<std::size_t>(b)]) l.push_back(pf[static_cast<std::size_t>(a)]);
    }
    raw = std::move(out);
  }
  return validateMarket(std::move(raw));
}

EtaSearchResult searchEtaMarket(int n, double eta, std::uint64_t seed, std::uint64_t budget) {
  if (n < 4) throw LabError(ErrorCode::DomainError, "eta search needs n >= 4");
  if (!(eta > 0.0 && eta < 1.0)) throw LabError(ErrorCode::DomainError, "eta must lie in (0, 1)");
  const int threshold = etaThreshold(eta, n);
  Rng rng(seed);
  std::uint64_t evaluations = 0;

  struct Candidate {
    RawMarket raw;
    Fitness fit;
  };
  auto finish = [&](const RawMarket& raw) -> std::optional<EtaSearchResult> {
    Market m = validateMarket(raw);
    EtaReport rep = checkEtaConditions(m, eta);
    if (!rep.passes) return std::nullopt;
    return EtaSearchResult{std::move(m), std::move(rep), evaluations};
  };

  constexpr int kPopulation = 8;
  std::vector<Candidate> pop;
  for (int i = 0; i < kPopulation && evaluations < budget; ++i) {
    RawMarket raw;
    if (i % 2 == 0) {
      raw = perturbedAssortative(n, rng);
    } else {
      // Spread d around the middle, where the hub family peaks.
      const int offsets[] = {0, 1, -1, 2};
      const int d = std::clamp((n - 2) / 2 + offsets[(i / 2) % 4], 0, n - 2);
      raw = hubMarket(n, d, rng() | 1).raw();
    }
    const Fitness fit = evaluate(validateMarket(raw));
    ++evaluations;
    if (fit.unique && fit.score >= threshold) {
      if (auto done = finish(raw)) return *done;
    }
    pop.push_back({std::move(raw), fit});
  }

  for (std::size_t turn = 0; evaluations < budget; ++turn) {
    Candidate& cur = pop[turn % pop.size()];
    RawMarket next = cur.raw;
    auto& lists = rng.bernoulli(0.5) ? next.firmPrefs : next.workerPrefs;
    auto& list = lists[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
    const auto r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - 1)));
    std::swap(list[r], list[r + 1]);
    const Fitness fit = evaluate(validateMarket(next));
    ++evaluations;
    if (fit >= cur.fit) {
      cur.raw = std::move(next);
      cur.fit = fit;
      if (fit.unique && fit.score >= threshold) {
        if (auto done = finish(cur.raw)) return *done;
      }
    }
  }
  throw LabError(ErrorCode::NotFound, "no market of size " + std::to_string(n) + " meets eta = " +
                                          std::to_string(eta) + " within " + std::to_string(budget) + " evaluations");
}

Market deltaAugment(const Market& original, const Market& etaMarket) {
  if (!original.balanced() || !etaMarket.balanced()) {
    throw LabError(ErrorCode::PreconditionFailed, "both markets must be balanced");
  }
  if (!isUniqueStable(original)) {
    throw LabError(ErrorCode::PreconditionFailed, "original market has more than one stable matching");
  }
  const int n = original.nFirms();
  const int m = etaMarket.nFirms();
  RawMarket raw;
  for (int f = 0; f < n; ++f) {
    auto p = original.firmPrefs(f);
    std::vector<int> l(p.begin(), p.end());
    for (int j = 0; j < m; ++j) l.push_back(n + j);
    raw.firmPrefs.push_back(std::move(l));
  }
  for (int f = 0; f < m; ++f) {
    std::vector<int> l(static_cast<std::size_t>(n));
    std::iota(l.begin(), l.end(), 0);
    for (int w : etaMarket.firmPrefs(f)) l.push_back(n + w);
    raw.firmPrefs.push_back(std::move(l));
  }
  for (int w = 0; w < n; ++w) {
    auto p = original.workerPrefs(w);
    std::vector<int> l(p.begin(), p.end());
    for (int j = 0; j < m; ++j) l.push_back(n + j);
    raw.workerPrefs.push_back(std::move(l));
  }
  for (int w = 0; w < m; ++w) {
    std::vector<int> l(static_cast<std::size_t>(n));
    std::iota(l.begin(), l.end(), 0);
    for (int f : etaMarket.workerPrefs(w)) l.push_back(n + f);
    raw.workerPrefs.push_back(std::move(l));
  }
  Market out = validateMarket(std::move(raw));

  std::vector<int> originals(static_cast<std::size_t>(n));
  std::iota(originals.begin(), originals.end(), 0);
  const RawMarket back = out.submarket(originals, originals).raw();
  const RawMarket orig = original.raw();
  if (back.firmPrefs != orig.firmPrefs || back.workerPrefs != orig.workerPrefs) {
    throw LabError(ErrorCode::PreconditionFailed, "restriction to the original agents differs from the original");
  }
  const Matching mu = deferredAcceptance(out, Side::Firm);
  if (mu != deferredAcceptance(out, Side::Worker)) {
    throw LabError(ErrorCode::PreconditionFailed, "augmented market has more than one stable matching");
  }
  const Matching before = deferredAcceptance(original, Side::Firm);
  for (int f = 0; f < n; ++f) {
    if (mu.firmPartner(f) != before.firmPartner(f)) {
      throw LabError(ErrorCode::PreconditionFailed, "stable partner of original firm f" + std::to_string(f) + " moved");
    }
  }
  return out;
}

double pDestabLowerBound(double eta, double zeta, double kappa) {
  if (!(zeta > 0.0 && zeta < eta) || !(kappa >= 1.0)) {
    throw LabError(ErrorCode::DomainError, "need 0 < zeta < eta and kappa >= 1");
  }
  return (eta - zeta) / (eta + (2.0 * kappa - 1.0) * zeta);
}

bool starCondition(const Matching& matching, std::optional<int> exceptionFirm, std::optional<int> exceptionWorker) {
  for (int f = 0; f < matching.nFirms(); ++f) {
    if (matching.firmPartner(f) == kUnmatched && f != exceptionFirm) return true;
  }
  for (int w = 0; w < matching.nWorkers(); ++w) {
    if (matching.workerPartner(w) == kUnmatched && w != exceptionWorker) return true;
  }
  return false;
}

StarPartition classifyStarPairs(const Market& market, const Matching& matching, const Matching& reference,
                                std::optional<int> exceptionFirm, std::optional<int> exceptionWorker) {
  if (!starCondition(matching, exceptionFirm, exceptionWorker)) {
    throw LabError(ErrorCode::StarConditionViolated, toString(matching));
  }
  const int s = stablePairCount(matching, reference);
  StarPartition out;
  for (const auto& p : blockingPairs(market, matching)) {
    Matching next = matching;
    next.match(p.firm, p.worker);
    const int s2 = stablePairCount(next, reference);
    const bool star = starCondition(next, exceptionFirm, exceptionWorker);
    if (star && s2 == s - 1) {
      out.destabilizing.push_back(p);
    } else if (!star || s2 == s + 1) {
      out.stabilizing.push_back(p);
    } else {
      out.neutral.push_back(p);
    }
  }
  return out;
}

std::optional<Matching> sampleStarState(const Market& market, const Matching& reference, int minStable,
                                        std::optional<int> exceptionFirm, std::optional<int> exceptionWorker,
                                        Rng& rng) {
  std::vector<int> matched;
  for (int f = 0; f < market.nFirms(); ++f) {
    if (reference.firmPartner(f) != kUnmatched) matched.push_back(f);
  }
  const int maxDisplaced = static_cast<int>(matched.size()) - minStable;
  if (maxDisplaced < 1) return std::nullopt;
  for (int attempt = 0; attempt < 256; ++attempt) {
    const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(maxDisplaced)));
    rng.shuffle(std::span<int>(matched));
    std::vector<int> firms(matched.begin(), matched.begin() + r);
    std::vector<int> workers;
    Matching m = reference;
    for (int f : firms) {
      workers.push_back(reference.firmPartner(f));
      m.unmatchFirm(f);
    }
    rng.shuffle(std::span<int>(workers));
    const int pairs = static_cast<int>(rng.below(static_cast<std::uint64_t>(r)));
    for (int i = 0; i < pairs; ++i) {
      const int f = firms[static_cast<std::size_t>(i)];
      for (int w : workers) {
        if (m.workerPartner(w) == kUnmatched && w != reference.firmPartner(f)) {
          m.match(f, w);
          break;
        }
      }
    }
    if (starCondition(m, exceptionFirm, exceptionWorker) && !isStable(market, m)) return m;
  }
  return std::nullopt;
}

std::optional<std::uint64_t> biasedWalk(const WalkConfig& c, std::uint64_t maxSteps, std::uint64_t seed) {
  if (!(c.pDestab >= 0.0 && c.pDestab < 1.0) || c.startLevel >= c.target) {
    throw LabError(ErrorCode::DomainError, "walk needs 0 <= pDestab < 1 and startLevel < target");
  }
  Rng rng(seed);
  int s = c.startLevel;
  for (std::uint64_t i = 1; i <= maxSteps; ++i) {
    if (s == c.startLevel || !rng.bernoulli(c.pDestab)) {
      s += c.stepUp;
    } else {
      s = std::max(c.startLevel, s - c.stepDown);
    }
    if (s >= c.target) return i;
  }
  return std::nullopt;
}

double biasedWalkExpectedSteps(const WalkConfig& c) {
  const int k = c.startLevel;
  const auto m = static_cast<std::size_t>(c.target - k);
  // E[s] = 1 + sum_t P(s,t) E[t], with E = 0 at or above the target.
  std::vector<double> a(m * m, 0.0), b(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    a[i * m + i] += 1.0;
    const int s = k + static_cast<int>(i);
    const double pUp = (s == k) ? 1.0 : 1.0 - c.pDestab;
    const int up = s + c.stepUp;
    if (up < c.target) a[i * m + static_cast<std::size_t>(up - k)] -= pUp;
    if (s != k) a[i * m + static_cast<std::size_t>(std::max(k, s - c.stepDown) - k)] -= c.pDestab;
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(a[r * m + col]) > std::abs(a[piv * m + col])) piv = r;
    }
    for (std::size_t j = 0; j < m; ++j) std::swap(a[piv * m + j], a[col * m + j]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = a[r * m + col] / a[col * m + col];
      for (std::size_t j = col; j < m; ++j) a[r * m + j] -= f * a[col * m + j];
      b[r] -= f * b[col];
    }
  }
  return b[0] / a[0];
}

void writeEtaReportCsv(std::ostream& out, const EtaReport& r) {
  out << "# eta=" << r.eta << " threshold=" << r.threshold << " achieved_eta=" << r.achievedEta
      << " passes=" << (r.passes ? 1 : 0) << '\n';
  out << "side,index,admirers,exception\n";
  for (std::size_t f = 0; f < r.perFirmAdmirers.size(); ++f) {
    out << "firm," << f << ',' << r.perFirmAdmirers[f] << ',' << (r.exceptionFirm == static_cast<int>(f) ? 1 : 0)
        << '\n';
  }
  for (std::size_t w = 0; w < r.perWorkerAdmirers.size(); ++w) {
    out << "worker," << w << ',' << r.perWorkerAdmirers[w] << ','
        << (r.exceptionWorker == static_cast<int>(w) ? 1 : 0) << '\n';
  }
}

}  // namespace stablelab
