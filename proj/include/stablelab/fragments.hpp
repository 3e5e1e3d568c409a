#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stablelab/market.hpp"
#include "stablelab/stable.hpp"

namespace stablelab {

struct Fragment {
  std::vector<int> firms;    // sorted
  std::vector<int> workers;  // sorted
  /// Full-size matchings that pair only the fragment's agents.
  std::vector<Matching> inducing;
  bool trivial = false;

  int size() const noexcept { return static_cast<int>(firms.size()); }
};

/// All matchings of firms x workers that are stable inside the submarket and
/// leave every inside agent preferring its partner to every outsider.
/// Throws NotBalanced, SizeMismatch (|firms| != |workers|), FullSizeSubset.
std::vector<Matching> isFragment(const Market& market, std::span<const int> firms, std::span<const int> workers);

enum class FragmentMethod { BruteForce, ClosureBased };

inline constexpr int kBruteForceFragmentMaxN = 10;
inline constexpr std::size_t kDefaultClosureUnionCap = 4096;

/// Sorted by (size, firms, workers). BruteForce throws CapExceeded for n > 10.
/// ClosureBased stops adding unions once `unionCap` subsets per stable matching
/// have been produced.
std::vector<Fragment> findFragments(const Market& market, FragmentMethod method = FragmentMethod::ClosureBased,
                                    std::size_t unionCap = kDefaultClosureUnionCap);

/// Same, reusing a precomputed stable set.
std::vector<Fragment> findFragments(const Market& market, const StableSet& stable, FragmentMethod method,
                                    std::size_t unionCap = kDefaultClosureUnionCap);

/// Bitmask (over firms) of the pairs reachable from firm f's pair in the
/// preference graph of a perfect stable matching.
std::vector<std::uint64_t> pairClosures(const Market& market, const Matching& stable);

bool hasNontrivialFragment(const Market& market);
bool hasNontrivialFragment(const Market& market, const StableSet& stable);

/// Pairs peeled off as successive top-top matches; nullopt when the peeling
/// stalls before every agent of the smaller side is used.
std::optional<std::vector<std::pair<int, int>>> nestedFragmentChain(const Market& market);

struct LemmaReport {
  std::size_t fragmentsChecked = 0;
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Every stable matching maps each fragment's firms onto its workers.
LemmaReport checkLemma1(const Market& market);

/// Removing any trivial fragment leaves a submarket without non-trivial
/// fragments. Throws PremiseViolated unless the market has at least one
/// fragment and none of them is non-trivial.
LemmaReport checkLemma3(const Market& market);

std::string formatFragment(const Fragment& fragment);
void writeFragments(std::ostream& out, const std::vector<Fragment>& fragments);

}  // namespace stablelab
