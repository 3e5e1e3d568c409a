#include "stablelab/market.hpp"

#include <algorithm>
#include <sstream>

#include "stablelab/error.hpp"

namespace stablelab {

std::string_view errorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::MissingPartner: return "MissingPartner";
    case ErrorCode::ValueOrderMismatch: return "ValueOrderMismatch";
    case ErrorCode::InvalidIndex: return "InvalidIndex";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NotABlockingPair: return "NotABlockingPair";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::FirmUnmatched: return "FirmUnmatched";
    case ErrorCode::InputNotStable: return "InputNotStable";
    case ErrorCode::BreakmarriageUnsuccessful: return "BreakmarriageUnsuccessful";
    case ErrorCode::FullSizeSubset: return "FullSizeSubset";
    case ErrorCode::NotBalanced: return "NotBalanced";
    case ErrorCode::PremiseViolated: return "PremiseViolated";
    case ErrorCode::StateNotFound: return "StateNotFound";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::MissingCardinalValues: return "MissingCardinalValues";
    case ErrorCode::KappaViolated: return "KappaViolated";
    case ErrorCode::NotUniqueStable: return "NotUniqueStable";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::StarConditionViolated: return "StarConditionViolated";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string toString(AgentId id) {
  return (id.side == Side::Firm ? "f" : "w") + std::to_string(id.index);
}

namespace {

// Checks that `prefs` is a permutation of [0, n) and returns its inverse.
std::vector<int> rankTable(const std::vector<int>& prefs, int n, AgentId owner) {
  if (static_cast<int>(prefs.size()) > n) {
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    for (int x : prefs) {
      if (x >= 0 && x < n && seen[static_cast<std::size_t>(x)]++) {
        throw LabError(ErrorCode::DuplicateEntry, toString(owner) + " lists " + std::to_string(x) + " twice");
      }
    }
    throw LabError(ErrorCode::SizeMismatch, toString(owner) + " lists " + std::to_string(prefs.size()) +
                                                " partners, expected " + std::to_string(n));
  }
  std::vector<int> rank(static_cast<std::size_t>(n), -1);
  for (std::size_t r = 0; r < prefs.size(); ++r) {
    const int x = prefs[r];
    if (x < 0 || x >= n) {
      throw LabError(ErrorCode::InvalidIndex, toString(owner) + " lists out-of-range partner " + std::to_string(x));
    }
    if (rank[static_cast<std::size_t>(x)] != -1) {
      throw LabError(ErrorCode::DuplicateEntry, toString(owner) + " lists " + std::to_string(x) + " twice");
    }
    rank[static_cast<std::size_t>(x)] = static_cast<int>(r);
  }
  for (int x = 0; x < n; ++x) {
    if (rank[static_cast<std::size_t>(x)] == -1) {
      throw LabError(ErrorCode::MissingPartner, toString(owner) + " does not rank " + std::to_string(x));
    }
  }
  return rank;
}

}  // namespace

Market validateMarket(RawMarket raw) {
  Market m;
  m.nFirms_ = static_cast<int>(raw.firmPrefs.size());
  m.nWorkers_ = static_cast<int>(raw.workerPrefs.size());
  if (m.nFirms_ == 0 || m.nWorkers_ == 0) {
    throw LabError(ErrorCode::SizeMismatch, "market needs at least one agent per side");
  }
  const auto nF = static_cast<std::size_t>(m.nFirms_);
  const auto nW = static_cast<std::size_t>(m.nWorkers_);
  m.firmPrefs_.reserve(nF * nW);
  m.firmRank_.reserve(nF * nW);
  for (int f = 0; f < m.nFirms_; ++f) {
    const auto& prefs = raw.firmPrefs[static_cast<std::size_t>(f)];
    auto rank = rankTable(prefs, m.nWorkers_, {Side::Firm, f});
    m.firmPrefs_.insert(m.firmPrefs_.end(), prefs.begin(), prefs.end());
    m.firmRank_.insert(m.firmRank_.end(), rank.begin(), rank.end());
  }
  m.workerPrefs_.reserve(nF * nW);
  m.workerRank_.reserve(nF * nW);
  for (int w = 0; w < m.nWorkers_; ++w) {
    const auto& prefs = raw.workerPrefs[static_cast<std::size_t>(w)];
    auto rank = rankTable(prefs, m.nFirms_, {Side::Worker, w});
    m.workerPrefs_.insert(m.workerPrefs_.end(), prefs.begin(), prefs.end());
    m.workerRank_.insert(m.workerRank_.end(), rank.begin(), rank.end());
  }

  if (raw.values) {
    const auto& v = *raw.values;
    if (v.firm.size() != nF * nW || v.worker.size() != nF * nW) {
      throw LabError(ErrorCode::SizeMismatch, "cardinal value matrices must be nFirms x nWorkers");
    }
    for (int f = 0; f < m.nFirms_; ++f) {
      auto prefs = m.firmPrefs(f);
      for (std::size_t r = 0; r < prefs.size(); ++r) {
        const double here = v.firm[static_cast<std::size_t>(f) * nW + prefs[r]];
        if (!(here > 0.0)) {
          throw LabError(ErrorCode::ValueOrderMismatch, toString({Side::Firm, f}) + " has a non-positive value");
        }
        if (r > 0 && !(v.firm[static_cast<std::size_t>(f) * nW + prefs[r - 1]] > here)) {
          throw LabError(ErrorCode::ValueOrderMismatch,
                         toString({Side::Firm, f}) + " values disagree with its ranking");
        }
      }
    }
    for (int w = 0; w < m.nWorkers_; ++w) {
      auto prefs = m.workerPrefs(w);
      for (std::size_t r = 0; r < prefs.size(); ++r) {
        const double here = v.worker[static_cast<std::size_t>(prefs[r]) * nW + w];
        if (!(here > 0.0)) {
          throw LabError(ErrorCode::ValueOrderMismatch, toString({Side::Worker, w}) + " has a non-positive value");
        }
        if (r > 0 && !(v.worker[static_cast<std::size_t>(prefs[r - 1]) * nW + w] > here)) {
          throw LabError(ErrorCode::ValueOrderMismatch,
                         toString({Side::Worker, w}) + " values disagree with its ranking");
        }
      }
    }
    m.values_ = std::move(raw.values);
  }
  return m;
}

RawMarket Market::raw() const {
  RawMarket r;
  for (int f = 0; f < nFirms_; ++f) {
    auto p = firmPrefs(f);
    r.firmPrefs.emplace_back(p.begin(), p.end());
  }
  for (int w = 0; w < nWorkers_; ++w) {
    auto p = workerPrefs(w);
    r.workerPrefs.emplace_back(p.begin(), p.end());
  }
  r.values = values_;
  return r;
}

Market Market::transposed() const {
  RawMarket r;
  RawMarket mine = raw();
  r.firmPrefs = std::move(mine.workerPrefs);
  r.workerPrefs = std::move(mine.firmPrefs);
  if (values_) {
    CardinalValues v;
    const auto nF = static_cast<std::size_t>(nFirms_);
    const auto nW = static_cast<std::size_t>(nWorkers_);
    v.firm.resize(nF * nW);
    v.worker.resize(nF * nW);
    for (std::size_t f = 0; f < nF; ++f) {
      for (std::size_t w = 0; w < nW; ++w) {
        v.firm[w * nF + f] = values_->worker[f * nW + w];
        v.worker[w * nF + f] = values_->firm[f * nW + w];
      }
    }
    r.values = std::move(v);
  }
  return validateMarket(std::move(r));
}

Market Market::submarket(std::span<const int> firms, std::span<const int> workers) const {
  std::vector<int> workerIndex(static_cast<std::size_t>(nWorkers_), -1);
  std::vector<int> firmIndex(static_cast<std::size_t>(nFirms_), -1);
  for (std::size_t k = 0; k < workers.size(); ++k) workerIndex[static_cast<std::size_t>(workers[k])] = static_cast<int>(k);
  for (std::size_t k = 0; k < firms.size(); ++k) firmIndex[static_cast<std::size_t>(firms[k])] = static_cast<int>(k);

  RawMarket r;
  for (int f : firms) {
    std::vector<int> prefs;
    for (int w : firmPrefs(f)) {
      if (workerIndex[static_cast<std::size_t>(w)] >= 0) prefs.push_back(workerIndex[static_cast<std::size_t>(w)]);
    }
    r.firmPrefs.push_back(std::move(prefs));
  }
  for (int w : workers) {
    std::vector<int> prefs;
    for (int f : workerPrefs(w)) {
      if (firmIndex[static_cast<std::size_t>(f)] >= 0) prefs.push_back(firmIndex[static_cast<std::size_t>(f)]);
    }
    r.workerPrefs.push_back(std::move(prefs));
  }
  if (values_) {
    CardinalValues v;
    for (int f : firms) {
      for (int w : workers) {
        v.firm.push_back(firmValue(f, w));
        v.worker.push_back(workerValue(f, w));
      }
    }
    r.values = std::move(v);
  }
  return validateMarket(std::move(r));
}

Matching Matching::fromPairs(int nFirms, int nWorkers, std::span<const std::pair<int, int>> pairs) {
  Matching m(nFirms, nWorkers);
  for (auto [f, w] : pairs) {
    if (f < 0 || f >= nFirms || w < 0 || w >= nWorkers) {
      throw LabError(ErrorCode::InvalidIndex, "pair (" + std::to_string(f) + "," + std::to_string(w) + ") out of range");
    }
    if (m.firmPartner(f) != kUnmatched || m.workerPartner(w) != kUnmatched) {
      throw LabError(ErrorCode::DuplicateEntry, "agent appears in two pairs: (" + std::to_string(f) + "," +
                                                    std::to_string(w) + ")");
    }
    m.match(f, w);
  }
  return m;
}

Matching Matching::fromFirmPartners(int nWorkers, std::span<const int> firmPartners) {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t f = 0; f < firmPartners.size(); ++f) {
    if (firmPartners[f] != kUnmatched) pairs.emplace_back(static_cast<int>(f), firmPartners[f]);
  }
  return fromPairs(static_cast<int>(firmPartners.size()), nWorkers, pairs);
}

void Matching::match(int f, int w) {
  unmatchFirm(f);
  unmatchWorker(w);
  firmPartner_[static_cast<std::size_t>(f)] = w;
  workerPartner_[static_cast<std::size_t>(w)] = f;
}

void Matching::unmatchFirm(int f) {
  int& w = firmPartner_[static_cast<std::size_t>(f)];
  if (w != kUnmatched) {
    workerPartner_[static_cast<std::size_t>(w)] = kUnmatched;
    w = kUnmatched;
  }
}

void Matching::unmatchWorker(int w) {
  int& f = workerPartner_[static_cast<std::size_t>(w)];
  if (f != kUnmatched) {
    firmPartner_[static_cast<std::size_t>(f)] = kUnmatched;
    f = kUnmatched;
  }
}

int Matching::pairCount() const noexcept {
  return static_cast<int>(std::count_if(firmPartner_.begin(), firmPartner_.end(), [](int w) { return w != kUnmatched; }));
}

std::vector<std::pair<int, int>> Matching::pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int f = 0; f < nFirms(); ++f) {
    if (firmPartner(f) != kUnmatched) out.emplace_back(f, firmPartner(f));
  }
  return out;
}

bool Matching::consistent() const noexcept {
  for (int f = 0; f < nFirms(); ++f) {
    const int w = firmPartner(f);
    if (w == kUnmatched) continue;
    if (w < 0 || w >= nWorkers() || workerPartner(w) != f) return false;
  }
  for (int w = 0; w < nWorkers(); ++w) {
    const int f = workerPartner(w);
    if (f == kUnmatched) continue;
    if (f < 0 || f >= nFirms() || firmPartner(f) != w) return false;
  }
  return true;
}

Matching Matching::transposed() const {
  Matching t;
  t.firmPartner_ = workerPartner_;
  t.workerPartner_ = firmPartner_;
  return t;
}

std::size_t MatchingHash::operator()(const Matching& m) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int w : m.firmPartners()) {
    h ^= static_cast<std::uint64_t>(w + 1);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

std::string toString(const Matching& m) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (auto [f, w] : m.pairs()) {
    os << (first ? "" : ", ") << 'f' << f << "-w" << w;
    first = false;
  }
  os << '}';
  return os.str();
}

}  // namespace stablelab
