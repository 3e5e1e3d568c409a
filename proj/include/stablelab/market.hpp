#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stablelab {

enum class Side { Firm, Worker };

constexpr Side opposite(Side s) noexcept { return s == Side::Firm ? Side::Worker : Side::Firm; }

struct AgentId {
  Side side;
  int index;
  friend bool operator==(const AgentId&, const AgentId&) = default;
};

std::string toString(AgentId id);

inline constexpr int kUnmatched = -1;

/// Per-pair cardinal payoffs, row-major nFirms x nWorkers.
/// firm[f * nWorkers + w] is what firm f gets from w; worker[...] what w gets from f.
struct CardinalValues {
  std::vector<double> firm;
  std::vector<double> worker;
  friend bool operator==(const CardinalValues&, const CardinalValues&) = default;
};

/// Unchecked preference tables as read from disk or built by hand.
struct RawMarket {
  std::vector<std::vector<int>> firmPrefs;
  std::vector<std::vector<int>> workerPrefs;
  std::optional<CardinalValues> values;
};

/// Immutable two-sided market with complete strict preferences (every pair
/// mutually acceptable). Construct through validateMarket().
class Market {
 public:
  int nFirms() const noexcept { return nFirms_; }
  int nWorkers() const noexcept { return nWorkers_; }
  bool balanced() const noexcept { return nFirms_ == nWorkers_; }

  /// Workers in firm f's order, most preferred first.
  std::span<const int> firmPrefs(int f) const noexcept {
    return {firmPrefs_.data() + static_cast<std::size_t>(f) * nWorkers_,
            static_cast<std::size_t>(nWorkers_)};
  }
  std::span<const int> workerPrefs(int w) const noexcept {
    return {workerPrefs_.data() + static_cast<std::size_t>(w) * nFirms_,
            static_cast<std::size_t>(nFirms_)};
  }

  /// 0 is the top choice.
  int firmRank(int f, int w) const noexcept { return firmRank_[static_cast<std::size_t>(f) * nWorkers_ + w]; }
  int workerRank(int w, int f) const noexcept { return workerRank_[static_cast<std::size_t>(w) * nFirms_ + f]; }

  /// Does firm f strictly prefer worker a to b? b may be kUnmatched (everyone beats it).
  bool firmPrefers(int f, int a, int b) const noexcept {
    if (a == kUnmatched) return false;
    if (b == kUnmatched) return true;
    return firmRank(f, a) < firmRank(f, b);
  }
  bool workerPrefers(int w, int a, int b) const noexcept {
    if (a == kUnmatched) return false;
    if (b == kUnmatched) return true;
    return workerRank(w, a) < workerRank(w, b);
  }

  bool hasValues() const noexcept { return values_.has_value(); }
  const std::optional<CardinalValues>& values() const noexcept { return values_; }
  double firmValue(int f, int w) const { return values_->firm[static_cast<std::size_t>(f) * nWorkers_ + w]; }
  double workerValue(int f, int w) const { return values_->worker[static_cast<std::size_t>(f) * nWorkers_ + w]; }

  /// Same market with the roles of firms and workers swapped.
  Market transposed() const;

  /// Market restricted to the listed agents. Agent k of the result is firms[k] (resp. workers[k]).
  Market submarket(std::span<const int> firms, std::span<const int> workers) const;

  RawMarket raw() const;

  friend bool operator==(const Market&, const Market&) = default;

 private:
  friend Market validateMarket(RawMarket raw);
  Market() = default;

  int nFirms_ = 0;
  int nWorkers_ = 0;
  std::vector<int> firmPrefs_;
  std::vector<int> workerPrefs_;
  std::vector<int> firmRank_;
  std::vector<int> workerRank_;
  std::optional<CardinalValues> values_;
};

/// Checks permutation and value-order invariants and builds the rank tables.
/// Throws LabError (DuplicateEntry, MissingPartner, InvalidIndex, ValueOrderMismatch, SizeMismatch).
Market validateMarket(RawMarket raw);

/// Partial one-to-one assignment stored as two mutually consistent partner arrays.
class Matching {
 public:
  Matching() = default;
  Matching(int nFirms, int nWorkers)
      : firmPartner_(static_cast<std::size_t>(nFirms), kUnmatched),
        workerPartner_(static_cast<std::size_t>(nWorkers), kUnmatched) {}

  static Matching fromPairs(int nFirms, int nWorkers, std::span<const std::pair<int, int>> pairs);
  /// firmPartners[f] is f's worker or kUnmatched.
  static Matching fromFirmPartners(int nWorkers, std::span<const int> firmPartners);

  int nFirms() const noexcept { return static_cast<int>(firmPartner_.size()); }
  int nWorkers() const noexcept { return static_cast<int>(workerPartner_.size()); }

  int firmPartner(int f) const noexcept { return firmPartner_[static_cast<std::size_t>(f)]; }
  int workerPartner(int w) const noexcept { return workerPartner_[static_cast<std::size_t>(w)]; }
  std::span<const int> firmPartners() const noexcept { return firmPartner_; }
  std::span<const int> workerPartners() const noexcept { return workerPartner_; }

  /// Pairs f with w, leaving any previous partners of either unmatched.
  void match(int f, int w);
  void unmatchFirm(int f);
  void unmatchWorker(int w);

  int pairCount() const noexcept;
  std::vector<std::pair<int, int>> pairs() const;
  bool consistent() const noexcept;
  Matching transposed() const;

  friend bool operator==(const Matching&, const Matching&) = default;
  friend auto operator<=>(const Matching& a, const Matching& b) { return a.firmPartner_ <=> b.firmPartner_; }

 private:
  std::vector<int> firmPartner_;
  std::vector<int> workerPartner_;
};

struct MatchingHash {
  std::size_t operator()(const Matching& m) const noexcept;
};

std::string toString(const Matching& m);

}  // namespace stablelab
