#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stablelab/dynamics.hpp"
#include "stablelab/weights.hpp"

namespace stablelab {

enum class Experiment { FragmentsFreq, MultiStable, UniqueStable, Timing, EtaConstruct, Walk, Absorption, VerifyTheorem1 };

/// "fragments-freq", "multi-stable", "unique-stable", "timing", "eta-construct",
/// "walk", "absorption", "verify-theorem1". Throws ConfigError.
Experiment parseExperiment(std::string_view name);
std::string_view toString(Experiment e);

inline constexpr int kFormatRevision = 1;
inline constexpr std::size_t kDeskMarkets = 200;
inline constexpr std::size_t kDeskPaths = 100;
inline constexpr std::size_t kFullMarkets = 1000;
inline constexpr std::size_t kFullPaths = 300;

enum class TimingArm { Assortative, Eta, Both };

/// Zero counts and empty sizes mean "use the experiment's default"; see
/// resolveDefaults().
struct ExperimentConfig {
  Experiment experiment = Experiment::FragmentsFreq;
  std::vector<std::pair<int, int>> sizes;
  std::size_t marketsPerSize = 0;
  std::size_t pathsPerStart = 0;
  std::uint64_t maxSteps = 0;
  WeightRule rule;
  std::uint64_t masterSeed = 1;
  std::string outputPath;  // empty or "-" is stdout
  unsigned threads = 1;
  bool fullScale = false;

  double eta = 0.45;
  double epsilon = 0.1;
  double pDestab = 0.95;
  std::uint64_t searchBudget = 20000;
  TimingArm arm = TimingArm::Both;
  std::vector<int> extraWorkers = {0, 1, 2, 3, -1};  // unique-stable k values; -1 stands for k = n
  std::string marketPath;                            // absorption input
  std::string startPath;                             // absorption: report one state only
  std::string marketOut;                             // eta-construct: file prefix for the markets found
};

/// "8", "2..8", "5x7", comma separated. Throws ConfigError.
std::vector<std::pair<int, int>> parseSizes(std::string_view text);

/// key=value; keys match the long CLI flags ("max-steps" or "max_steps").
/// Throws ConfigError on unknown keys or bad values.
void applyConfigEntry(ExperimentConfig& config, std::string_view key, std::string_view value);

/// One key=value per line; blank lines and '#' comments are skipped.
void applyConfigFile(ExperimentConfig& config, std::istream& in);

/// Fills zero counts and empty sizes, then checks the result. Throws ConfigError.
ExperimentConfig resolveDefaults(ExperimentConfig config);

/// Every field that affects results, one key=value per line. Threads and the
/// output path are left out.
std::string canonicalConfig(const ExperimentConfig& config);
std::uint64_t configHash(const ExperimentConfig& config);  // FNV-1a over canonicalConfig

/// "# stablelab experiment=... config_hash=... master_seed=... format_revision=..."
void writeCsvHeader(std::ostream& out, const ExperimentConfig& config);

struct FreqRow {
  int n = 0;
  std::size_t samples = 0;
  std::size_t hits = 0;
  double freq = 0.0;
  double se = 0.0;
};
std::vector<FreqRow> runFragmentsFreq(const ExperimentConfig& config);

/// Pooled over every path of every market of one size.
struct PooledStats {
  std::size_t markets = 0;
  std::size_t paths = 0;
  double returnProb = 0.0;
  double ultMismatch = 0.0;
  double meanSteps = 0.0;
  double meanLnSteps = 0.0;
  double onPathMismatch = 0.0;
  double onPathFirmMismatch = 0.0;
  double onPathWorkerMismatch = 0.0;
  double censoredFrac = 0.0;
};

struct MultiStableRow {
  int n = 0;
  std::string startType;  // "extremal" or "random"
  PooledStats stats;
};
std::vector<MultiStableRow> runMultiStable(const ExperimentConfig& config);

struct UniqueStableRow {
  int n = 0;
  int k = 0;
  int nWorkers = 0;
  PooledStats stats;
};
std::vector<UniqueStableRow> runUniqueStable(const ExperimentConfig& config);

struct TimingRow {
  std::string arm;   // "a" or "b"
  std::string kind;  // "assortative", "eta", "delta"
  int n = 0;
  std::size_t paths = 0;
  double meanSteps = 0.0;
  double q10 = 0.0, q25 = 0.0, medianSteps = 0.0, q75 = 0.0, q90 = 0.0;
  double censoredFrac = 0.0;
  bool medianCensored = false;
};
std::vector<TimingRow> runTimingStudy(const ExperimentConfig& config);

/// Least-squares slope of ln y against ln x.
double logLogSlope(const std::vector<double>& x, const std::vector<double>& y);

struct EtaRow {
  int n = 0;
  double eta = 0.0;
  double achievedEta = 0.0;
  int threshold = 0;
  std::uint64_t evaluations = 0;
  std::optional<int> exceptionFirm, exceptionWorker;
};
/// Writes each market to marketOut + "n<size>.txt" when marketOut is set.
std::vector<EtaRow> runEtaConstruct(const ExperimentConfig& config);

struct WalkRow {
  int gap = 0;
  std::size_t walks = 0;
  std::size_t censored = 0;
  std::optional<double> medianSteps;  // nullopt when at least half the walks are censored
  double meanSteps = 0.0;             // censored walks count as maxSteps
  double expectedSteps = 0.0;         // exact
};
std::vector<WalkRow> runWalk(const ExperimentConfig& config);

struct Theorem1Row {
  int n = 0;
  std::size_t markets = 0;
  std::size_t condIIITrue = 0;
  std::size_t allPairsEquivalent = 0;
  std::size_t bestPairsEquivalent = 0;
};
std::vector<Theorem1Row> runVerifyTheorem1(const ExperimentConfig& config);

/// Runs the configured experiment and writes its CSV, header comment first.
void runExperiment(const ExperimentConfig& config, std::ostream& out);

}  // namespace stablelab
