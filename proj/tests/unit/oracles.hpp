// Independent reference implementations. They read preference lists directly
// and never call the library's rank tables, enumerators or solvers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/rng.hpp"

namespace oracle {

using stablelab::kUnmatched;
using stablelab::Market;
using stablelab::Matching;
using stablelab::RawMarket;

// Position of x in list, or list size when absent (absent ranks below everyone).
inline int pos(std::span<const int> list, int x) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i] == x) return static_cast<int>(i);
  }
  return static_cast<int>(list.size());
}

inline bool blocks(const Market& m, const Matching& mu, int f, int w) {
  if (mu.firmPartner(f) == w) return false;
  const int curW = mu.firmPartner(f);
  const int curF = mu.workerPartner(w);
  const bool firmWants = curW == kUnmatched || pos(m.firmPrefs(f), w) < pos(m.firmPrefs(f), curW);
  const bool workerWants = curF == kUnmatched || pos(m.workerPrefs(w), f) < pos(m.workerPrefs(w), curF);
  return firmWants && workerWants;
}

inline std::vector<std::pair<int, int>> blockingPairs(const Market& m, const Matching& mu) {
  std::vector<std::pair<int, int>> out;
  for (int f = 0; f < m.nFirms(); ++f) {
    for (int w = 0; w < m.nWorkers(); ++w) {
      if (blocks(m, mu, f, w)) out.emplace_back(f, w);
    }
  }
  return out;
}

inline bool stable(const Market& m, const Matching& mu) { return blockingPairs(m, mu).empty(); }

// Every partial matching, by recursion over firms.
inline void allMatchings(int nF, int nW, std::vector<Matching>& out) {
  std::vector<int> partner(static_cast<std::size_t>(nF), kUnmatched);
  std::vector<char> used(static_cast<std::size_t>(nW), 0);
  auto rec = [&](auto& self, int f) -> void {
    if (f == nF) {
      out.push_back(Matching::fromFirmPartners(nW, partner));
      return;
    }
    partner[static_cast<std::size_t>(f)] = kUnmatched;
    self(self, f + 1);
    for (int w = 0; w < nW; ++w) {
      if (used[static_cast<std::size_t>(w)]) continue;
      used[static_cast<std::size_t>(w)] = 1;
      partner[static_cast<std::size_t>(f)] = w;
      self(self, f + 1);
      used[static_cast<std::size_t>(w)] = 0;
    }
    partner[static_cast<std::size_t>(f)] = kUnmatched;
  };
  rec(rec, 0);
}

inline std::uint64_t matchingCountFormula(int nF, int nW) {
  auto choose = [](int n, int k) {
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
  };
  std::uint64_t total = 0;
  for (int k = 0; k <= std::min(nF, nW); ++k) {
    std::uint64_t fact = 1;
    for (int i = 2; i <= k; ++i) fact *= static_cast<std::uint64_t>(i);
    total += choose(nF, k) * choose(nW, k) * fact;
  }
  return total;
}

inline std::set<Matching> stableSet(const Market& m) {
  std::vector<Matching> all;
  allMatchings(m.nFirms(), m.nWorkers(), all);
  std::set<Matching> out;
  for (const auto& mu : all) {
    if (stable(m, mu)) out.insert(mu);
  }
  return out;
}

inline Market fromLists(std::vector<std::vector<int>> firms, std::vector<std::vector<int>> workers) {
  RawMarket raw;
  raw.firmPrefs = std::move(firms);
  raw.workerPrefs = std::move(workers);
  return stablelab::validateMarket(std::move(raw));
}

// f0: w0>w1, f1: w1>w0, w0: f1>f0, w1: f0>f1.
inline Market example1() { return fromLists({{0, 1}, {1, 0}}, {{1, 0}, {0, 1}}); }

inline Market example2() {
  return fromLists({{0, 2, 1}, {1, 2, 0}, {0, 1, 2}}, {{1, 0, 2}, {0, 1, 2}, {2, 1, 0}});
}

inline Market assortative(int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  return fromLists(std::vector<std::vector<int>>(static_cast<std::size_t>(n), order),
                   std::vector<std::vector<int>>(static_cast<std::size_t>(n), order));
}

inline Matching identity(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  return Matching::fromFirmPartners(n, p);
}

inline Matching pairs(int nF, int nW, std::vector<std::pair<int, int>> ps) {
  return Matching::fromPairs(nF, nW, ps);
}

// Fraction of the 16 2x2 profiles with two stable matchings, and the fraction
// with a non-trivial fragment (a size-1 fragment whose pair some stable
// matching does not use).
struct TwoByTwo {
  int profiles = 0;
  int twoStable = 0;
  int nontrivial = 0;
};

inline bool isFragmentByDefinition(const Market& m, const std::vector<int>& F, const std::vector<int>& W,
                                   const Matching& inside) {
  // inside pairs F with W; stable within, and nobody inside wants an outsider
  // more than the inside partner.
  for (int f : F) {
    const int w = inside.firmPartner(f);
    if (std::find(W.begin(), W.end(), w) == W.end()) return false;
  }
  for (int f : F) {
    for (int w : W) {
      if (blocks(m, inside, f, w)) return false;
    }
  }
  auto inF = [&](int f) { return std::find(F.begin(), F.end(), f) != F.end(); };
  auto inW = [&](int w) { return std::find(W.begin(), W.end(), w) != W.end(); };
  for (int f : F) {
    const int mine = inside.firmPartner(f);
    for (int w = 0; w < m.nWorkers(); ++w) {
      if (!inW(w) && pos(m.firmPrefs(f), w) < pos(m.firmPrefs(f), mine)) return false;
    }
  }
  for (int w : W) {
    const int mine = inside.workerPartner(w);
    for (int f = 0; f < m.nFirms(); ++f) {
      if (!inF(f) && pos(m.workerPrefs(w), f) < pos(m.workerPrefs(w), mine)) return false;
    }
  }
  return true;
}

struct FragmentKey {
  std::vector<int> firms, workers;
  bool trivial;
  auto operator<=>(const FragmentKey&) const = default;
};

// Every (F, W) with |F| = |W| < n and some inside matching satisfying the
// definition. Triviality: every stable matching of the full market restricted
// to F is the same.
inline std::vector<FragmentKey> fragments(const Market& m) {
  const int n = m.nFirms();
  const auto st = stableSet(m);
  std::vector<FragmentKey> out;
  for (unsigned fm = 1; fm < (1u << n); ++fm) {
    for (unsigned wm = 1; wm < (1u << n); ++wm) {
      if (__builtin_popcount(fm) != __builtin_popcount(wm) || __builtin_popcount(fm) == n) continue;
      std::vector<int> F, W;
      for (int i = 0; i < n; ++i) {
        if (fm >> i & 1) F.push_back(i);
        if (wm >> i & 1) W.push_back(i);
      }
      std::vector<int> perm = W;
      bool found = false;
      do {
        Matching inside(n, n);
        for (std::size_t i = 0; i < F.size(); ++i) inside.match(F[i], perm[i]);
        if (isFragmentByDefinition(m, F, W, inside)) found = true;
      } while (!found && std::next_permutation(perm.begin(), perm.end()));
      if (!found) continue;
      bool trivial = true;
      const Matching& first = *st.begin();
      for (const auto& s : st) {
        for (int f : F) {
          if (s.firmPartner(f) != first.firmPartner(f)) trivial = false;
        }
      }
      out.push_back({F, W, trivial});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline TwoByTwo classifyAll2x2() {
  TwoByTwo t;
  const std::vector<std::vector<int>> lists = {{0, 1}, {1, 0}};
  for (int code = 0; code < 16; ++code) {
    const Market m = fromLists({lists[code & 1], lists[code >> 1 & 1]}, {lists[code >> 2 & 1], lists[code >> 3 & 1]});
    ++t.profiles;
    if (stableSet(m).size() == 2) ++t.twoStable;
    for (const auto& fr : fragments(m)) {
      if (!fr.trivial) {
        ++t.nontrivial;
        break;
      }
    }
  }
  return t;
}

// Stable matchings reachable from start by satisfying blocking pairs (BFS).
inline std::set<Matching> reachableStable(const Market& m, const Matching& start) {
  std::set<Matching> seen{start}, out;
  std::queue<Matching> q;
  q.push(start);
  while (!q.empty()) {
    const Matching cur = q.front();
    q.pop();
    const auto bp = blockingPairs(m, cur);
    if (bp.empty()) out.insert(cur);
    for (const auto& [f, w] : bp) {
      Matching next = cur;
      next.match(f, w);
      if (seen.insert(next).second) q.push(next);
    }
  }
  return out;
}

// Absorption distribution under uniform pair choice by iterating the chain's
// distribution until the transient mass is below tol.
inline std::map<Matching, double> absorptionByIteration(const Market& m, const Matching& start, double tol = 1e-13) {
  std::map<Matching, double> dist{{start, 1.0}}, absorbed;
  for (int iter = 0; iter < 100000 && !dist.empty(); ++iter) {
    std::map<Matching, double> next;
    double transient = 0;
    for (const auto& [mu, p] : dist) {
      const auto bp = blockingPairs(m, mu);
      if (bp.empty()) {
        absorbed[mu] += p;
        continue;
      }
      for (const auto& [f, w] : bp) {
        Matching s = mu;
        s.match(f, w);
        next[s] += p / static_cast<double>(bp.size());
      }
    }
    for (const auto& [mu, p] : next) transient += p;
    dist = std::move(next);
    if (transient < tol) break;
  }
  return absorbed;
}

// Expected hitting time of the reflected walk by Monte-Carlo-free recursion:
// value iteration on E[s] = 1 + sum P(s,t) E[t].
inline double walkExpectedByIteration(int gap, double p, int up = 4, int down = 1) {
  std::vector<double> e(static_cast<std::size_t>(gap), 0.0);
  for (int iter = 0; iter < 2'000'000; ++iter) {
    double delta = 0;
    for (int s = 0; s < gap; ++s) {
      auto at = [&](int t) { return t >= gap ? 0.0 : e[static_cast<std::size_t>(std::max(0, t))]; };
      const double v = s == 0 ? 1 + at(s + up) : 1 + p * at(s - down) + (1 - p) * at(s + up);
      delta = std::max(delta, std::abs(v - e[static_cast<std::size_t>(s)]));
      e[static_cast<std::size_t>(s)] = v;
    }
    if (delta < 1e-10) break;
  }
  return e[0];
}

inline Market randomMarket(int nF, int nW, std::uint64_t seed) {
  stablelab::Rng rng(seed);
  RawMarket raw;
  for (int f = 0; f < nF; ++f) {
    std::vector<int> l(static_cast<std::size_t>(nW));
    for (int i = 0; i < nW; ++i) l[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<int>(l));
    raw.firmPrefs.push_back(l);
  }
  for (int w = 0; w < nW; ++w) {
    std::vector<int> l(static_cast<std::size_t>(nF));
    for (int i = 0; i < nF; ++i) l[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<int>(l));
    raw.workerPrefs.push_back(l);
  }
  return stablelab::validateMarket(std::move(raw));
}

}  // namespace oracle
