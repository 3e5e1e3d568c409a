#include "stablelab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stablelab/constructions.hpp"
#include "stablelab/error.hpp"
#include "stablelab/exact.hpp"
#include "stablelab/fragments.hpp"
#include "stablelab/io.hpp"
#include "stablelab/market_core.hpp"
#include "stablelab/parallel.hpp"
#include "stablelab/stable.hpp"

namespace stablelab {

namespace {

// Seed streams, one per use, so that experiments sharing a master seed do not
// share draws.
enum Stream : std::uint64_t {
  kFreqMarkets = 1 << 20,
  kMultiMarkets = 2 << 20,
  kMultiStarts = 3 << 20,
  kMultiPaths = 4 << 20,
  kUniqueMarkets = 5 << 20,
  kUniqueStarts = 6 << 20,
  kUniquePaths = 7 << 20,
  kTimingStarts = 8 << 20,
  kTimingPaths = 9 << 20,
  kTimingMarkets = 10 << 20,
  kEtaSearch = 11 << 20,
  kWalks = 12 << 20,
  kTheorem1Markets = 13 << 20,
};

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::FragmentsFreq, "fragments-freq"}, {Experiment::MultiStable, "multi-stable"},
    {Experiment::UniqueStable, "unique-stable"},   {Experiment::Timing, "timing"},
    {Experiment::EtaConstruct, "eta-construct"},   {Experiment::Walk, "walk"},
    {Experiment::Absorption, "absorption"},        {Experiment::VerifyTheorem1, "verify-theorem1"},
};

[[noreturn]] void configError(const std::string& what) { throw LabError(ErrorCode::ConfigError, what); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parseNumber(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    configError("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

bool parseBool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  configError("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
}

std::vector<std::string_view> splitComma(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = text.find(',');
    out.push_back(trim(text.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return out;
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string sizesText(const std::vector<std::pair<int, int>>& sizes) {
  std::string s;
  for (const auto& [f, w] : sizes) {
    if (!s.empty()) s += ',';
    s += std::to_string(f) + 'x' + std::to_string(w);
  }
  return s;
}

std::string_view armName(TimingArm a) {
  switch (a) {
    case TimingArm::Assortative: return "a";
    case TimingArm::Eta: return "b";
    case TimingArm::Both: return "both";
  }
  return "both";
}

std::vector<std::pair<int, int>> squares(std::initializer_list<int> ns) {
  std::vector<std::pair<int, int>> out;
  for (int n : ns) out.emplace_back(n, n);
  return out;
}

// Nearest-rank quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

double median(const std::vector<double>& sorted) {
  if (sorted.empty()) return 0.0;
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

struct Pool {
  PooledStats s;
  double returned = 0, absorbed = 0, censored = 0, sumUlt = 0, sumSteps = 0, sumLn = 0, sumOn = 0, sumOnF = 0,
         sumOnW = 0;

  void add(const BatchStats& b) {
    const auto n = static_cast<double>(b.paths);
    s.paths += b.paths;
    returned += static_cast<double>(b.returned);
    absorbed += static_cast<double>(b.absorbed);
    censored += static_cast<double>(b.censored);
    sumUlt += b.ultMismatch * static_cast<double>(b.absorbed);
    sumSteps += b.meanSteps * n;
    sumLn += b.meanLnSteps * n;
    sumOn += b.onPathMismatch * n;
    sumOnF += b.onPathFirmMismatch * n;
    sumOnW += b.onPathWorkerMismatch * n;
  }

  PooledStats finish(std::size_t markets) const {
    PooledStats out = s;
    out.markets = markets;
    if (out.paths) {
      const auto n = static_cast<double>(out.paths);
      out.returnProb = returned / n;
      out.meanSteps = sumSteps / n;
      out.meanLnSteps = sumLn / n;
      out.onPathMismatch = sumOn / n;
      out.onPathFirmMismatch = sumOnF / n;
      out.onPathWorkerMismatch = sumOnW / n;
      out.censoredFrac = censored / n;
    }
    out.ultMismatch = absorbed > 0 ? sumUlt / absorbed : 0.0;
    return out;
  }
};

void requireBalanced(const ExperimentConfig& c) {
  for (const auto& [f, w] : c.sizes) {
    if (f != w) configError(std::string(toString(c.experiment)) + " needs balanced sizes, got " + sizesText({{f, w}}));
  }
}

int pickFirm(const Matching& mu, Rng& rng) {
  std::vector<int> matched;
  for (int f = 0; f < mu.nFirms(); ++f) {
    if (mu.firmPartner(f) != kUnmatched) matched.push_back(f);
  }
  return matched[static_cast<std::size_t>(rng.below(matched.size()))];
}

// Deterministic scan of seeded random markets for the first uniquely stable one.
Market uniqueStableMarket(int nF, int nW, std::uint64_t master, std::uint64_t stream, std::uint64_t& cursor) {
  for (std::uint64_t tries = 0; tries < 1'000'000; ++tries) {
    Market m = randomMarket(nF, nW, deriveSeed(master, stream, cursor++));
    if (isUniqueStable(m)) return m;
  }
  throw LabError(ErrorCode::NotFound, "no uniquely stable market of size " + sizesText({{nF, nW}}));
}

}  // namespace

Experiment parseExperiment(std::string_view name) {
  for (const auto& [e, n] : kNames) {
    if (n == name) return e;
  }
  configError("unknown experiment '" + std::string(name) + "'");
}

std::string_view toString(Experiment e) {
  for (const auto& [x, n] : kNames) {
    if (x == e) return n;
  }
  return "?";
}

std::vector<std::pair<int, int>> parseSizes(std::string_view text) {
  std::vector<std::pair<int, int>> out;
  for (auto item : splitComma(text)) {
    if (item.empty()) configError("empty entry in sizes");
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const int lo = parseNumber<int>("sizes", item.substr(0, dots));
      const int hi = parseNumber<int>("sizes", item.substr(dots + 2));
      if (lo > hi) configError("empty size range '" + std::string(item) + "'");
      for (int n = lo; n <= hi; ++n) out.emplace_back(n, n);
    } else if (const auto x = item.find('x'); x != std::string_view::npos) {
      out.emplace_back(parseNumber<int>("sizes", item.substr(0, x)), parseNumber<int>("sizes", item.substr(x + 1)));
    } else {
      const int n = parseNumber<int>("sizes", item);
      out.emplace_back(n, n);
    }
  }
  for (const auto& [f, w] : out) {
    if (f < 1 || w < 1) configError("sizes must be positive");
  }
  return out;
}

void applyConfigEntry(ExperimentConfig& c, std::string_view rawKey, std::string_view value) {
  std::string key(trim(rawKey));
  std::replace(key.begin(), key.end(), '_', '-');
  value = trim(value);
  if (key == "experiment") {
    c.experiment = parseExperiment(value);
  } else if (key == "sizes") {
    c.sizes = parseSizes(value);
  } else if (key == "markets") {
    c.marketsPerSize = parseNumber<std::size_t>(key, value);
  } else if (key == "paths") {
    c.pathsPerStart = parseNumber<std::size_t>(key, value);
  } else if (key == "max-steps") {
    c.maxSteps = parseNumber<std::uint64_t>(key, value);
  } else if (key == "rule") {
    c.rule.kind = parseRuleKind(value);
  } else if (key == "kappa") {
    c.rule.kappa = parseNumber<double>(key, value);
  } else if (key == "seed") {
    c.masterSeed = parseNumber<std::uint64_t>(key, value);
  } else if (key == "out") {
    c.outputPath = std::string(value);
  } else if (key == "threads") {
    c.threads = parseNumber<unsigned>(key, value);
  } else if (key == "full-scale") {
    c.fullScale = parseBool(key, value);
  } else if (key == "eta") {
    c.eta = parseNumber<double>(key, value);
  } else if (key == "epsilon") {
    c.epsilon = parseNumber<double>(key, value);
  } else if (key == "p-destab") {
    c.pDestab = parseNumber<double>(key, value);
  } else if (key == "budget") {
    c.searchBudget = parseNumber<std::uint64_t>(key, value);
  } else if (key == "arm") {
    if (value == "a") {
      c.arm = TimingArm::Assortative;
    } else if (value == "b") {
      c.arm = TimingArm::Eta;
    } else if (value == "both") {
      c.arm = TimingArm::Both;
    } else {
      configError("arm must be a, b or both");
    }
  } else if (key == "extra-workers") {
    c.extraWorkers.clear();
    for (auto item : splitComma(value)) c.extraWorkers.push_back(item == "n" ? -1 : parseNumber<int>(key, item));
  } else if (key == "market") {
    c.marketPath = std::string(value);
  } else if (key == "start") {
    c.startPath = std::string(value);
  } else if (key == "market-out") {
    c.marketOut = std::string(value);
  } else {
    configError("unknown key '" + key + "'");
  }
}

void applyConfigFile(ExperimentConfig& config, std::istream& in) {
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) configError("line " + std::to_string(lineNo) + ": expected key=value");
    applyConfigEntry(config, body.substr(0, eq), body.substr(eq + 1));
  }
}

ExperimentConfig resolveDefaults(ExperimentConfig c) {
  const std::size_t markets = c.fullScale ? kFullMarkets : kDeskMarkets;
  const std::size_t paths = c.fullScale ? kFullPaths : kDeskPaths;
  auto fill = [](auto& field, auto value) {
    if (field == 0) field = value;
  };
  switch (c.experiment) {
    case Experiment::FragmentsFreq:
      if (c.sizes.empty()) c.sizes = squares({2, 3, 4, 5, 6, 7, 8});
      fill(c.marketsPerSize, std::size_t{2000});
      fill(c.pathsPerStart, std::size_t{1});
      fill(c.maxSteps, std::uint64_t{1});
      break;
    case Experiment::MultiStable:
      if (c.sizes.empty()) c.sizes = c.fullScale ? squares({14}) : squares({3, 4, 5, 6, 7, 8, 9, 10});
      fill(c.marketsPerSize, markets);
      fill(c.pathsPerStart, paths);
      fill(c.maxSteps, std::uint64_t{1'000'000});
      break;
    case Experiment::UniqueStable:
      if (c.sizes.empty()) c.sizes = squares({3, 4, 5, 6, 7, 8});
      fill(c.marketsPerSize, markets);
      fill(c.pathsPerStart, paths);
      fill(c.maxSteps, std::uint64_t{1'000'000});
      break;
    case Experiment::Timing:
      fill(c.marketsPerSize, std::size_t{4});
      fill(c.pathsPerStart, std::size_t{5});
      fill(c.maxSteps, std::uint64_t{10'000'000});
      break;
    case Experiment::EtaConstruct:
      if (c.sizes.empty()) c.sizes = squares({8, 12, 16, 20});
      fill(c.marketsPerSize, std::size_t{1});
      fill(c.pathsPerStart, std::size_t{1});
      fill(c.maxSteps, std::uint64_t{1});
      break;
    case Experiment::Walk:
      if (c.sizes.empty()) c.sizes = squares({4, 8, 12, 16});
      fill(c.marketsPerSize, std::size_t{1});
      fill(c.pathsPerStart, std::size_t{1000});
      fill(c.maxSteps, std::uint64_t{100'000});
      break;
    case Experiment::Absorption:
      if (c.marketPath.empty()) configError("absorption needs a market file");
      fill(c.marketsPerSize, std::size_t{1});
      fill(c.pathsPerStart, std::size_t{1});
      fill(c.maxSteps, std::uint64_t{1});
      break;
    case Experiment::VerifyTheorem1:
      if (c.sizes.empty()) c.sizes = squares({3, 4});
      fill(c.marketsPerSize, std::size_t{1000});
      fill(c.pathsPerStart, std::size_t{1});
      fill(c.maxSteps, std::uint64_t{1});
      break;
  }
  switch (c.experiment) {
    case Experiment::FragmentsFreq:
    case Experiment::MultiStable:
    case Experiment::UniqueStable:
    case Experiment::Timing:
    case Experiment::EtaConstruct:
    case Experiment::VerifyTheorem1:
      requireBalanced(c);
      break;
    default:
      break;
  }
  if (c.experiment == Experiment::EtaConstruct || (c.experiment == Experiment::Timing && c.arm != TimingArm::Assortative)) {
    if (!(c.eta > 0.0 && c.eta < 1.0)) configError("eta must lie in (0, 1)");
  }
  if (c.experiment == Experiment::EtaConstruct) {
    for (const auto& s : c.sizes) {
      if (s.first < 4) configError("eta-construct needs n >= 4");
    }
  }
  if (c.experiment == Experiment::Timing && c.arm != TimingArm::Assortative) {
    for (const auto& s : c.sizes) {
      if (s.first < 8) configError("timing arm b needs n >= 8");
    }
  }
  if (c.experiment == Experiment::Walk && !(c.pDestab >= 0.0 && c.pDestab < 1.0)) {
    configError("p-destab must lie in [0, 1)");
  }
  if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) configError("epsilon must lie in (0, 1]");
  if (!(c.rule.kappa >= 1.0)) configError("kappa must be at least 1");
  if (c.rule.kind == RuleKind::Custom) configError("custom rules cannot be configured from text");
  if (c.searchBudget == 0) configError("budget must be positive");
  return c;
}

std::string canonicalConfig(const ExperimentConfig& c) {
  std::ostringstream s;
  s << "experiment=" << toString(c.experiment) << '\n'
    << "sizes=" << sizesText(c.sizes) << '\n'
    << "markets=" << c.marketsPerSize << '\n'
    << "paths=" << c.pathsPerStart << '\n'
    << "max-steps=" << c.maxSteps << '\n'
    << "rule=" << toString(c.rule.kind) << '\n'
    << "kappa=" << fmt(c.rule.kappa) << '\n'
    << "seed=" << c.masterSeed << '\n'
    << "full-scale=" << (c.fullScale ? 1 : 0) << '\n'
    << "eta=" << fmt(c.eta) << '\n'
    << "epsilon=" << fmt(c.epsilon) << '\n'
    << "p-destab=" << fmt(c.pDestab) << '\n'
    << "budget=" << c.searchBudget << '\n'
    << "arm=" << armName(c.arm) << '\n'
    << "extra-workers=";
  for (std::size_t i = 0; i < c.extraWorkers.size(); ++i) {
    if (i) s << ',';
    if (c.extraWorkers[i] < 0) {
      s << 'n';
    } else {
      s << c.extraWorkers[i];
    }
  }
  s << '\n' << "market=" << c.marketPath << '\n' << "start=" << c.startPath << '\n';
  return s.str();
}

std::uint64_t configHash(const ExperimentConfig& config) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : canonicalConfig(config)) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void writeCsvHeader(std::ostream& out, const ExperimentConfig& config) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(configHash(config)));
  out << "# stablelab experiment=" << toString(config.experiment) << " config_hash=" << hash
      << " master_seed=" << config.masterSeed << " format_revision=" << kFormatRevision << '\n';
}

std::vector<FreqRow> runFragmentsFreq(const ExperimentConfig& config) {
  std::vector<FreqRow> rows;
  for (const auto& [n, _] : config.sizes) {
    std::vector<char> hit(config.marketsPerSize, 0);
    parallelFor(config.marketsPerSize, config.threads, [&](std::size_t i) {
      const Market m = randomMarket(n, n, deriveSeed(config.masterSeed, kFreqMarkets + static_cast<std::uint64_t>(n), i));
      hit[i] = hasNontrivialFragment(m) ? 1 : 0;
    });
    FreqRow r;
    r.n = n;
    r.samples = config.marketsPerSize;
    r.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    r.freq = static_cast<double>(r.hits) / static_cast<double>(r.samples);
    r.se = std::sqrt(r.freq * (1.0 - r.freq) / static_cast<double>(r.samples));
    rows.push_back(r);
  }
  return rows;
}

std::vector<MultiStableRow> runMultiStable(const ExperimentConfig& config) {
  std::vector<MultiStableRow> rows;
  for (const auto& [n, _] : config.sizes) {
    const auto un = static_cast<std::uint64_t>(n);
    // Markets are drawn serially so the accepted sequence does not depend on threads.
    std::vector<Market> markets;
    std::vector<StableSet> sets;
    for (std::uint64_t cursor = 0; markets.size() < config.marketsPerSize; ++cursor) {
      if (cursor >= 100'000 * config.marketsPerSize) {
        throw LabError(ErrorCode::NotFound, "too few multi-stable markets at n = " + std::to_string(n));
      }
      Market m = randomMarket(n, n, deriveSeed(config.masterSeed, kMultiMarkets + un, cursor));
      if (isUniqueStable(m)) continue;
      sets.push_back(enumerateStable(m));
      markets.push_back(std::move(m));
    }
    std::vector<BatchStats> extremal(markets.size()), random(markets.size());
    parallelFor(markets.size(), config.threads, [&](std::size_t i) {
      const Market& m = markets[i];
      const StableSet& set = sets[i];
      Rng rng(deriveSeed(config.masterSeed, kMultiStarts + un, i));
      const Matching& muF = set.matchings[set.firmOptimal];
      const Matching& muR = set.matchings[static_cast<std::size_t>(rng.below(set.matchings.size()))];
      const Matching startF = almostStable(m, muF, pickFirm(muF, rng));
      const Matching startR = almostStable(m, muR, pickFirm(muR, rng));
      const std::uint64_t seed = deriveSeed(config.masterSeed, kMultiPaths + un, i);
      extremal[i] = batchRun(m, startF, config.rule, muF, config.pathsPerStart, config.maxSteps, seed, 0);
      random[i] = batchRun(m, startR, config.rule, muR, config.pathsPerStart, config.maxSteps, seed, 1);
    });
    Pool pe, pr;
    for (std::size_t i = 0; i < markets.size(); ++i) {
      pe.add(extremal[i]);
      pr.add(random[i]);
    }
    rows.push_back({n, "extremal", pe.finish(markets.size())});
    rows.push_back({n, "random", pr.finish(markets.size())});
  }
  return rows;
}

std::vector<UniqueStableRow> runUniqueStable(const ExperimentConfig& config) {
  std::vector<UniqueStableRow> rows;
  for (const auto& [n, _] : config.sizes) {
    std::vector<int> done;
    for (int kk : config.extraWorkers) {
      const int k = kk < 0 ? n : kk;
      if (std::find(done.begin(), done.end(), k) != done.end()) continue;
      done.push_back(k);
      const int nW = n + k;
      const auto stream = static_cast<std::uint64_t>(n) * 4096 + static_cast<std::uint64_t>(nW);
      std::vector<Market> markets;
      std::uint64_t cursor = 0;
      while (markets.size() < config.marketsPerSize) {
        markets.push_back(uniqueStableMarket(n, nW, config.masterSeed, kUniqueMarkets + stream, cursor));
      }
      std::vector<BatchStats> stats(markets.size());
      parallelFor(markets.size(), config.threads, [&](std::size_t i) {
        const Market& m = markets[i];
        const Matching mu = deferredAcceptance(m);
        Rng rng(deriveSeed(config.masterSeed, kUniqueStarts + stream, i));
        const Matching start = almostStable(m, mu, pickFirm(mu, rng));
        stats[i] = batchRun(m, start, config.rule, mu, config.pathsPerStart, config.maxSteps,
                            deriveSeed(config.masterSeed, kUniquePaths + stream, i));
      });
      Pool pool;
      for (const auto& b : stats) pool.add(b);
      rows.push_back({n, k, nW, pool.finish(markets.size())});
    }
  }
  return rows;
}

namespace {

TimingRow timingRow(std::string arm, std::string kind, int n, const std::vector<BatchStats>& batches) {
  TimingRow r;
  r.arm = std::move(arm);
  r.kind = std::move(kind);
  r.n = n;
  std::vector<double> steps;
  std::size_t censored = 0;
  for (const auto& b : batches) {
    for (auto s : b.pathSteps) steps.push_back(static_cast<double>(s));
    censored += b.censored;
  }
  std::sort(steps.begin(), steps.end());
  r.paths = steps.size();
  if (!steps.empty()) {
    double sum = 0;
    for (double s : steps) sum += s;
    r.meanSteps = sum / static_cast<double>(steps.size());
    r.censoredFrac = static_cast<double>(censored) / static_cast<double>(steps.size());
  }
  r.q10 = quantile(steps, 0.10);
  r.q25 = quantile(steps, 0.25);
  r.medianSteps = median(steps);
  r.q75 = quantile(steps, 0.75);
  r.q90 = quantile(steps, 0.90);
  r.medianCensored = 2 * censored >= steps.size() && censored > 0;
  return r;
}

std::vector<BatchStats> runStarts(const ExperimentConfig& config, const Market& market, const Matching& reference,
                                  const std::vector<Matching>& starts, std::uint64_t pathSeed) {
  std::vector<BatchStats> out(starts.size());
  parallelFor(starts.size(), config.threads, [&](std::size_t i) {
    out[i] = batchRun(market, starts[i], config.rule, reference, config.pathsPerStart, config.maxSteps, pathSeed, i);
  });
  return out;
}

}  // namespace

std::vector<TimingRow> runTimingStudy(const ExperimentConfig& config) {
  std::vector<TimingRow> rows;
  auto sizesFor = [&](std::initializer_list<int> fallback) {
    return config.sizes.empty() ? squares(fallback) : config.sizes;
  };
  if (config.arm != TimingArm::Eta) {
    for (const auto& [n, _] : sizesFor({10, 20, 30, 40, 50})) {
      const auto un = static_cast<std::uint64_t>(n);
      const Market m = assortativeMarket(n, n);
      const Matching mu = deferredAcceptance(m);
      std::vector<Matching> starts;
      for (std::size_t i = 0; i < config.marketsPerSize; ++i) {
        starts.push_back(randomMaximumMatching(n, n, deriveSeed(config.masterSeed, kTimingStarts + un, i)));
      }
      rows.push_back(timingRow("a", "assortative", n,
                               runStarts(config, m, mu, starts, deriveSeed(config.masterSeed, kTimingPaths + un, 0))));
    }
  }
  if (config.arm != TimingArm::Assortative) {
    for (const auto& [n, _] : sizesFor({8, 12, 16, 20})) {
      const auto un = static_cast<std::uint64_t>(n);
      const std::uint64_t armB = (1 << 16) + un * 2;
      const Market eta = searchEtaMarket(n, config.eta, deriveSeed(config.masterSeed, kEtaSearch + un, 0),
                                         config.searchBudget)
                             .market;
      // delta = 1: n original agents per side plus n new ones
      std::uint64_t cursor = 0;
      const Market original = uniqueStableMarket(n, n, config.masterSeed, kTimingMarkets + un, cursor);
      const Market delta = deltaAugment(
          original,
          searchEtaMarket(n, config.eta, deriveSeed(config.masterSeed, kEtaSearch + un, 1), config.searchBudget).market);
      std::uint64_t kindIndex = 0;
      for (const auto& [kind, market] : {std::pair<const char*, const Market*>{"eta", &eta}, {"delta", &delta}}) {
        const Matching mu = deferredAcceptance(*market);
        std::vector<Matching> starts;
        for (std::size_t i = 0; i < config.marketsPerSize; ++i) {
          starts.push_back(perturbEpsilon(*market, mu, config.epsilon,
                                          deriveSeed(config.masterSeed, kTimingStarts + armB + kindIndex, i)));
        }
        rows.push_back(timingRow(
            "b", kind, n,
            runStarts(config, *market, mu, starts, deriveSeed(config.masterSeed, kTimingPaths + armB + kindIndex, 0))));
        ++kindIndex;
      }
    }
  }
  return rows;
}

double logLogSlope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) throw LabError(ErrorCode::DomainError, "slope needs two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<EtaRow> runEtaConstruct(const ExperimentConfig& config) {
  std::vector<EtaRow> rows;
  for (const auto& [n, _] : config.sizes) {
    const std::uint64_t seed = deriveSeed(config.masterSeed, kEtaSearch + static_cast<std::uint64_t>(n), 0);
    const EtaSearchResult found = searchEtaMarket(n, config.eta, seed, config.searchBudget);
    EtaRow r;
    r.n = n;
    r.eta = config.eta;
    r.achievedEta = found.report.achievedEta;
    r.threshold = found.report.threshold;
    r.evaluations = found.evaluations;
    r.exceptionFirm = found.report.exceptionFirm;
    r.exceptionWorker = found.report.exceptionWorker;
    rows.push_back(r);
    if (!config.marketOut.empty()) {
      const std::string path = config.marketOut + "n" + std::to_string(n) + ".txt";
      std::ofstream f(path);
      if (!f) throw LabError(ErrorCode::ConfigError, "cannot write " + path);
      writeMarket(f, found.market,
                  {" provenance seed=" + std::to_string(seed) + " budget=" + std::to_string(config.searchBudget) +
                   " eta=" + fmt(config.eta) + " achieved_eta=" + fmt(found.report.achievedEta)});
    }
  }
  return rows;
}

std::vector<WalkRow> runWalk(const ExperimentConfig& config) {
  std::vector<WalkRow> rows;
  for (const auto& [gap, _] : config.sizes) {
    WalkConfig wc;
    wc.startLevel = 0;
    wc.target = gap;
    wc.pDestab = config.pDestab;
    std::vector<std::optional<std::uint64_t>> hits(config.pathsPerStart);
    parallelFor(hits.size(), config.threads, [&](std::size_t i) {
      hits[i] = biasedWalk(wc, config.maxSteps, deriveSeed(config.masterSeed, kWalks + static_cast<std::uint64_t>(gap), i));
    });
    WalkRow r;
    r.gap = gap;
    r.walks = hits.size();
    std::vector<double> steps;
    for (const auto& h : hits) {
      if (!h) ++r.censored;
      steps.push_back(h ? static_cast<double>(*h) : static_cast<double>(config.maxSteps));
    }
    std::sort(steps.begin(), steps.end());
    double sum = 0;
    for (double s : steps) sum += s;
    r.meanSteps = steps.empty() ? 0.0 : sum / static_cast<double>(steps.size());
    if (2 * r.censored < r.walks) r.medianSteps = median(steps);
    r.expectedSteps = biasedWalkExpectedSteps(wc);
    rows.push_back(r);
  }
  return rows;
}

std::vector<Theorem1Row> runVerifyTheorem1(const ExperimentConfig& config) {
  std::vector<Theorem1Row> rows;
  for (const auto& [n, _] : config.sizes) {
    std::vector<Theorem1Report> reports(config.marketsPerSize);
    parallelFor(reports.size(), config.threads, [&](std::size_t i) {
      reports[i] = verifyTheorem1(
          randomMarket(n, n, deriveSeed(config.masterSeed, kTheorem1Markets + static_cast<std::uint64_t>(n), i)));
    });
    Theorem1Row r;
    r.n = n;
    r.markets = reports.size();
    for (const auto& rep : reports) {
      r.condIIITrue += rep.condIII;
      r.allPairsEquivalent += rep.allPairs.equivalent();
      r.bestPairsEquivalent += rep.bestPairs.equivalent();
    }
    rows.push_back(r);
  }
  return rows;
}

namespace {

void writeAbsorption(std::ostream& out, const ExperimentConfig& config) {
  const Market market = readMarketFile(config.marketPath);
  const MatchingGraph graph =
      buildGraph(market, config.rule.usesBestPairs() ? GraphRule::BestPairs : GraphRule::AllPairs);
  const AbsorptionResult res = absorption(graph, market, config.rule);
  if (config.startPath.empty()) {
    writeAbsorptionCsv(out, res);
    return;
  }
  std::ifstream in(config.startPath);
  if (!in) throw LabError(ErrorCode::ConfigError, "cannot read " + config.startPath);
  const std::size_t s = graph.indexOf(readMatching(in, market.nFirms(), market.nWorkers()));
  out << "state_index,stable_index,probability,expected_steps\n";
  for (std::size_t k = 0; k < res.stableStates.size(); ++k) {
    out << s << ',' << res.stableStates[k] << ',' << fmt(res.probability[s][k]) << ',' << fmt(res.expectedSteps[s])
        << '\n';
  }
}

void writePooled(std::ostream& out, const PooledStats& s) {
  out << fmt(s.returnProb) << ',' << fmt(s.ultMismatch) << ',' << fmt(s.meanSteps) << ',' << fmt(s.meanLnSteps) << ','
      << fmt(s.onPathMismatch);
}

}  // namespace

void runExperiment(const ExperimentConfig& raw, std::ostream& out) {
  const ExperimentConfig config = resolveDefaults(raw);
  std::ostringstream body;
  switch (config.experiment) {
    case Experiment::FragmentsFreq:
      body << "n,samples,freq,se\n";
      for (const auto& r : runFragmentsFreq(config)) {
        body << r.n << ',' << r.samples << ',' << fmt(r.freq) << ',' << fmt(r.se) << '\n';
      }
      break;
    case Experiment::MultiStable:
      body << "n,start_type,return_prob,ult_mismatch,mean_steps,mean_ln_steps,onpath_mismatch,censored_frac\n";
      for (const auto& r : runMultiStable(config)) {
        body << r.n << ',' << r.startType << ',';
        writePooled(body, r.stats);
        body << ',' << fmt(r.stats.censoredFrac) << '\n';
      }
      break;
    case Experiment::UniqueStable:
      body << "n,k,n_workers,markets,mean_steps,mean_ln_steps,onpath_mismatch,onpath_firm_mismatch,"
              "onpath_worker_mismatch,censored_frac\n";
      for (const auto& r : runUniqueStable(config)) {
        body << r.n << ',' << r.k << ',' << r.nWorkers << ',' << r.stats.markets << ',' << fmt(r.stats.meanSteps) << ','
             << fmt(r.stats.meanLnSteps) << ',' << fmt(r.stats.onPathMismatch) << ','
             << fmt(r.stats.onPathFirmMismatch) << ',' << fmt(r.stats.onPathWorkerMismatch) << ','
             << fmt(r.stats.censoredFrac) << '\n';
      }
      break;
    case Experiment::Timing:
      body << "arm,kind,n,paths,mean_steps,q10,q25,median_steps,q75,q90,censored_frac\n";
      for (const auto& r : runTimingStudy(config)) {
        body << r.arm << ',' << r.kind << ',' << r.n << ',' << r.paths << ',' << fmt(r.meanSteps) << ','
             << fmt(r.q10) << ',' << fmt(r.q25) << ',' << fmt(r.medianSteps) << ',' << fmt(r.q75) << ','
             << fmt(r.q90) << ',' << fmt(r.censoredFrac) << '\n';
      }
      break;
    case Experiment::EtaConstruct:
      body << "n,eta,achieved_eta,threshold,evaluations,exception_firm,exception_worker\n";
      for (const auto& r : runEtaConstruct(config)) {
        body << r.n << ',' << fmt(r.eta) << ',' << fmt(r.achievedEta) << ',' << r.threshold << ',' << r.evaluations
             << ',' << (r.exceptionFirm ? std::to_string(*r.exceptionFirm) : "") << ','
             << (r.exceptionWorker ? std::to_string(*r.exceptionWorker) : "") << '\n';
      }
      break;
    case Experiment::Walk:
      body << "gap,p_destab,walks,censored_frac,median_steps,mean_steps,expected_steps\n";
      for (const auto& r : runWalk(config)) {
        body << r.gap << ',' << fmt(config.pDestab) << ',' << r.walks << ','
             << fmt(static_cast<double>(r.censored) / static_cast<double>(r.walks)) << ','
             << (r.medianSteps ? fmt(*r.medianSteps) : "inf") << ',' << fmt(r.meanSteps) << ','
             << fmt(r.expectedSteps) << '\n';
      }
      break;
    case Experiment::Absorption:
      writeAbsorption(body, config);
      break;
    case Experiment::VerifyTheorem1:
      body << "n,markets,cond_iii_true,all_pairs_equivalent,best_pairs_equivalent\n";
      for (const auto& r : runVerifyTheorem1(config)) {
        body << r.n << ',' << r.markets << ',' << r.condIIITrue << ',' << r.allPairsEquivalent << ','
             << r.bestPairsEquivalent << '\n';
      }
      break;
  }
  writeCsvHeader(out, config);
  out << body.str();
}

}  // namespace stablelab
