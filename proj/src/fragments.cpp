#include "stablelab/fragments.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <set>
#include <sstream>

#include "stablelab/error.hpp"

namespace stablelab {

namespace {

void requireBalanced(const Market& market) {
  if (!market.balanced()) {
    throw LabError(ErrorCode::NotBalanced, "fragments need a balanced market, got " + std::to_string(market.nFirms()) +
                                               "x" + std::to_string(market.nWorkers()));
  }
}

std::vector<int> maskToList(std::uint64_t mask) {
  std::vector<int> out;
  while (mask) {
    out.push_back(std::countr_zero(mask));
    mask &= mask - 1;
  }
  return out;
}

std::uint64_t listToMask(std::span<const int> xs) {
  std::uint64_t m = 0;
  for (int x : xs) m |= std::uint64_t{1} << x;
  return m;
}

// Stable matchings agree with each other on f's partner.
std::vector<char> commonFirms(const StableSet& stable, int nFirms) {
  std::vector<char> common(static_cast<std::size_t>(nFirms), 1);
  for (const auto& m : stable.matchings) {
    for (int f = 0; f < nFirms; ++f) {
      if (m.firmPartner(f) != stable.matchings.front().firmPartner(f)) common[static_cast<std::size_t>(f)] = 0;
    }
  }
  return common;
}

bool trivialOn(const StableSet& stable, std::span<const int> firms) {
  const Matching& first = stable.matchings.front();
  for (const auto& m : stable.matchings) {
    for (int f : firms) {
      if (m.firmPartner(f) != first.firmPartner(f)) return false;
    }
  }
  return true;
}

Fragment makeFragment(const Market& market, const StableSet& stable, std::uint64_t fMask, std::uint64_t wMask) {
  Fragment fr;
  fr.firms = maskToList(fMask);
  fr.workers = maskToList(wMask);
  fr.inducing = isFragment(market, fr.firms, fr.workers);
  fr.trivial = trivialOn(stable, fr.firms);
  return fr;
}

bool fragmentLess(const Fragment& a, const Fragment& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.firms != b.firms) return a.firms < b.firms;
  return a.workers < b.workers;
}

}  // namespace

std::vector<Matching> isFragment(const Market& market, std::span<const int> firms, std::span<const int> workers) {
  requireBalanced(market);
  const int n = market.nFirms();
  if (firms.size() != workers.size() || firms.empty()) {
    throw LabError(ErrorCode::SizeMismatch, "fragment sides must be non-empty and of equal size");
  }
  if (static_cast<int>(firms.size()) >= n) {
    throw LabError(ErrorCode::FullSizeSubset, "a fragment must leave some agents outside");
  }
  std::vector<char> inF(static_cast<std::size_t>(n), 0), inW(static_cast<std::size_t>(n), 0);
  for (int f : firms) inF[static_cast<std::size_t>(f)] = 1;
  for (int w : workers) inW[static_cast<std::size_t>(w)] = 1;

  // An inside agent may only be paired with partners it ranks above every outsider.
  auto prefixLen = [](std::span<const int> prefs, const std::vector<char>& inside) {
    std::size_t r = 0;
    while (r < prefs.size() && inside[static_cast<std::size_t>(prefs[r])]) ++r;
    return static_cast<int>(r);
  };
  std::vector<int> firmCut(static_cast<std::size_t>(n), 0), workerCut(static_cast<std::size_t>(n), 0);
  for (int f : firms) {
    firmCut[static_cast<std::size_t>(f)] = prefixLen(market.firmPrefs(f), inW);
    if (firmCut[static_cast<std::size_t>(f)] == 0) return {};
  }
  for (int w : workers) {
    workerCut[static_cast<std::size_t>(w)] = prefixLen(market.workerPrefs(w), inF);
    if (workerCut[static_cast<std::size_t>(w)] == 0) return {};
  }

  std::vector<Matching> out;
  Matching m(n, n);
  const std::size_t k = firms.size();
  auto insideStable = [&]() {
    for (int f : firms) {
      for (int w : workers) {
        if (isBlocking(market, m, f, w)) return false;
      }
    }
    return true;
  };
  auto assign = [&](auto&& self, std::size_t i) -> void {
    if (i == k) {
      if (insideStable()) out.push_back(m);
      return;
    }
    const int f = firms[i];
    auto prefs = market.firmPrefs(f);
    for (int r = 0; r < firmCut[static_cast<std::size_t>(f)]; ++r) {
      const int w = prefs[static_cast<std::size_t>(r)];
      if (m.workerPartner(w) != kUnmatched) continue;
      if (market.workerRank(w, f) >= workerCut[static_cast<std::size_t>(w)]) continue;
      m.match(f, w);
      self(self, i + 1);
      m.unmatchFirm(f);
    }
  };
  assign(assign, 0);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint64_t> pairClosures(const Market& market, const Matching& stable) {
  requireBalanced(market);
  const int n = market.nFirms();
  if (n > 64) throw LabError(ErrorCode::CapExceeded, "closure masks support at most 64 pairs");
  if (stable.pairCount() != n) throw LabError(ErrorCode::InputNotStable, "closures need a perfect matching");
  // adj[f]: firms g whose pair is forced in with f's pair.
  std::vector<std::uint64_t> adj(static_cast<std::size_t>(n), 0);
  for (int f = 0; f < n; ++f) {
    const int w = stable.firmPartner(f);
    auto fp = market.firmPrefs(f);
    for (int r = 0; r < market.firmRank(f, w); ++r) {
      adj[static_cast<std::size_t>(f)] |= std::uint64_t{1} << stable.workerPartner(fp[static_cast<std::size_t>(r)]);
    }
    auto wp = market.workerPrefs(w);
    for (int r = 0; r < market.workerRank(w, f); ++r) {
      adj[static_cast<std::size_t>(f)] |= std::uint64_t{1} << wp[static_cast<std::size_t>(r)];
    }
  }
  std::vector<std::uint64_t> closure(static_cast<std::size_t>(n), 0);
  for (int f = 0; f < n; ++f) {
    std::uint64_t seen = std::uint64_t{1} << f;
    std::uint64_t frontier = seen;
    while (frontier) {
      std::uint64_t next = 0;
      for (int g : maskToList(frontier)) next |= adj[static_cast<std::size_t>(g)];
      frontier = next & ~seen;
      seen |= next;
    }
    closure[static_cast<std::size_t>(f)] = seen;
  }
  return closure;
}

std::vector<Fragment> findFragments(const Market& market, FragmentMethod method, std::size_t unionCap) {
  requireBalanced(market);
  if (method == FragmentMethod::BruteForce && market.nFirms() > kBruteForceFragmentMaxN) {
    throw LabError(ErrorCode::CapExceeded, "brute-force fragment search is limited to n <= 10");
  }
  return findFragments(market, enumerateStable(market), method, unionCap);
}

std::vector<Fragment> findFragments(const Market& market, const StableSet& stable, FragmentMethod method,
                                    std::size_t unionCap) {
  requireBalanced(market);
  const int n = market.nFirms();
  std::vector<Fragment> out;
  if (method == FragmentMethod::BruteForce) {
    if (n > kBruteForceFragmentMaxN) {
      throw LabError(ErrorCode::CapExceeded, "brute-force fragment search is limited to n <= 10");
    }
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    std::vector<std::uint64_t> bySize[kBruteForceFragmentMaxN + 1];
    for (std::uint64_t s = 1; s < full; ++s) bySize[std::popcount(s)].push_back(s);
    for (int k = 1; k < n; ++k) {
      for (std::uint64_t fm : bySize[k]) {
        // Every inside firm's favourite must be inside.
        std::uint64_t needW = 0;
        for (int f : maskToList(fm)) needW |= std::uint64_t{1} << market.firmPrefs(f)[0];
        if (std::popcount(needW) > k) continue;
        for (std::uint64_t wm : bySize[k]) {
          if ((wm & needW) != needW) continue;
          bool ok = true;
          for (int w : maskToList(wm)) {
            if (!((fm >> market.workerPrefs(w)[0]) & 1)) {
              ok = false;
              break;
            }
          }
          if (!ok) continue;
          Fragment fr = makeFragment(market, stable, fm, wm);
          if (!fr.inducing.empty()) out.push_back(std::move(fr));
        }
      }
    }
  } else {
    std::set<std::pair<std::uint64_t, std::uint64_t>> found;
    for (const auto& mu : stable.matchings) {
      const auto closures = pairClosures(market, mu);
      const std::uint64_t full = (n == 64) ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
      std::vector<std::uint64_t> singles;
      for (auto c : closures) {
        if (c != full && std::find(singles.begin(), singles.end(), c) == singles.end()) singles.push_back(c);
      }
      // Closed sets are exactly unions of single-pair closures.
      std::vector<std::uint64_t> closed = singles;
      std::set<std::uint64_t> seen(closed.begin(), closed.end());
      for (std::size_t i = 0; i < closed.size() && closed.size() < unionCap; ++i) {
        for (auto c : singles) {
          const std::uint64_t u = closed[i] | c;
          if (u != full && seen.insert(u).second) {
            closed.push_back(u);
            if (closed.size() >= unionCap) break;
          }
        }
      }
      for (auto fm : closed) {
        std::uint64_t wm = 0;
        for (int f : maskToList(fm)) wm |= std::uint64_t{1} << mu.firmPartner(f);
        found.emplace(fm, wm);
      }
    }
    for (auto [fm, wm] : found) out.push_back(makeFragment(market, stable, fm, wm));
  }
  std::sort(out.begin(), out.end(), fragmentLess);
  return out;
}

bool hasNontrivialFragment(const Market& market, const StableSet& stable) {
  requireBalanced(market);
  if (stable.matchings.size() < 2) return false;
  const int n = market.nFirms();
  const auto common = commonFirms(stable, n);
  const std::uint64_t full = (n == 64) ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  for (const auto& mu : stable.matchings) {
    const auto closures = pairClosures(market, mu);
    for (int f = 0; f < n; ++f) {
      if (!common[static_cast<std::size_t>(f)] && closures[static_cast<std::size_t>(f)] != full) return true;
    }
  }
  return false;
}

bool hasNontrivialFragment(const Market& market) {
  requireBalanced(market);
  return hasNontrivialFragment(market, enumerateStable(market));
}

std::optional<std::vector<std::pair<int, int>>> nestedFragmentChain(const Market& market) {
  const int nF = market.nFirms();
  const int nW = market.nWorkers();
  std::vector<char> firmLeft(static_cast<std::size_t>(nF), 1), workerLeft(static_cast<std::size_t>(nW), 1);
  auto topWorker = [&](int f) {
    for (int w : market.firmPrefs(f)) {
      if (workerLeft[static_cast<std::size_t>(w)]) return w;
    }
    return kUnmatched;
  };
  auto topFirm = [&](int w) {
    for (int f : market.workerPrefs(w)) {
      if (firmLeft[static_cast<std::size_t>(f)]) return f;
    }
    return kUnmatched;
  };
  std::vector<std::pair<int, int>> chain;
  const int target = std::min(nF, nW);
  while (static_cast<int>(chain.size()) < target) {
    bool peeled = false;
    for (int f = 0; f < nF && !peeled; ++f) {
      if (!firmLeft[static_cast<std::size_t>(f)]) continue;
      const int w = topWorker(f);
      if (topFirm(w) == f) {
        chain.emplace_back(f, w);
        firmLeft[static_cast<std::size_t>(f)] = 0;
        workerLeft[static_cast<std::size_t>(w)] = 0;
        peeled = true;
      }
    }
    if (!peeled) return std::nullopt;
  }
  return chain;
}

namespace {

std::vector<Fragment> fragmentsForChecks(const Market& market, const StableSet& stable) {
  // Brute force keeps the lemma checks independent of the closure shortcut.
  const auto method = market.nFirms() <= 8 ? FragmentMethod::BruteForce : FragmentMethod::ClosureBased;
  return findFragments(market, stable, method);
}

}  // namespace

LemmaReport checkLemma1(const Market& market) {
  requireBalanced(market);
  const StableSet stable = enumerateStable(market);
  LemmaReport report;
  for (const auto& fr : fragmentsForChecks(market, stable)) {
    ++report.fragmentsChecked;
    const std::uint64_t wMask = listToMask(fr.workers);
    for (const auto& mu : stable.matchings) {
      for (int f : fr.firms) {
        const int w = mu.firmPartner(f);
        if (w == kUnmatched || !((wMask >> w) & 1)) {
          report.violations.push_back(formatFragment(fr) + " broken by " + toString(mu));
          break;
        }
      }
    }
  }
  return report;
}

LemmaReport checkLemma3(const Market& market) {
  requireBalanced(market);
  const StableSet stable = enumerateStable(market);
  const auto fragments = fragmentsForChecks(market, stable);
  if (fragments.empty()) throw LabError(ErrorCode::PremiseViolated, "market has no fragments");
  for (const auto& fr : fragments) {
    if (!fr.trivial) throw LabError(ErrorCode::PremiseViolated, "non-trivial " + formatFragment(fr));
  }
  LemmaReport report;
  const int n = market.nFirms();
  for (const auto& fr : fragments) {
    ++report.fragmentsChecked;
    std::vector<int> restF, restW;
    const auto fMask = listToMask(fr.firms);
    const auto wMask = listToMask(fr.workers);
    for (int i = 0; i < n; ++i) {
      if (!((fMask >> i) & 1)) restF.push_back(i);
      if (!((wMask >> i) & 1)) restW.push_back(i);
    }
    const Market rest = market.submarket(restF, restW);
    if (hasNontrivialFragment(rest)) report.violations.push_back("removing " + formatFragment(fr) + " leaves a non-trivial fragment");
  }
  return report;
}

std::string formatFragment(const Fragment& fr) {
  auto set = [](const std::vector<int>& xs) {
    std::string s = "{";
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s + "}";
  };
  std::ostringstream os;
  os << "fragment k=" << fr.size() << " F=" << set(fr.firms) << " W=" << set(fr.workers)
     << " trivial=" << (fr.trivial ? 1 : 0) << " inducing=" << fr.inducing.size();
  return os.str();
}

void writeFragments(std::ostream& out, const std::vector<Fragment>& fragments) {
  for (const auto& fr : fragments) out << formatFragment(fr) << '\n';
}

}  // namespace stablelab
