// stablelab command line: market utilities plus one subcommand per experiment.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "stablelab/constructions.hpp"
#include "stablelab/dynamics.hpp"
#include "stablelab/error.hpp"
#include "stablelab/experiments.hpp"
#include "stablelab/fragments.hpp"
#include "stablelab/io.hpp"
#include "stablelab/stable.hpp"

using namespace stablelab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCap = 3;

// Output goes to --out when given, stdout otherwise.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw LabError(ErrorCode::ConfigError, "cannot write " + path);
    os = &file;
  }
};

Matching readMatchingFile(const std::string& path, const Market& m) {
  std::ifstream in(path);
  if (!in) throw LabError(ErrorCode::ConfigError, "cannot read " + path);
  return readMatching(in, m.nFirms(), m.nWorkers());
}

std::string fmtd(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sided matching market laboratory"};
  app.require_subcommand(1);

  // Market utilities.
  std::string marketPath, outPath, startPath, methodName = "breakmarriage", ruleName = "uniform";
  std::string sizeText = "5";
  double kappa = 1.0, eta = 0.45;
  std::uint64_t seed = 1, maxSteps = 1'000'000;
  std::size_t paths = 100;
  unsigned threads = 1;
  bool trace = false, cardinal = false;

  auto* generate = app.add_subcommand("generate", "Write a seeded random market");
  generate->add_option("--sizes", sizeText, "N or NxM")->default_val("5");
  generate->add_option("--seed", seed);
  generate->add_flag("--cardinal", cardinal, "Attach cardinal values");
  generate->add_option("--out", outPath);

  auto* stable = app.add_subcommand("stable", "Enumerate stable matchings");
  stable->add_option("--market", marketPath)->required();
  stable->add_option("--method", methodName)->check(CLI::IsMember({"breakmarriage", "brute-force"}));
  stable->add_option("--out", outPath);

  auto* fragments = app.add_subcommand("fragments", "List fragments");
  fragments->add_option("--market", marketPath)->required();
  fragments->add_option("--method", methodName)->check(CLI::IsMember({"closure", "brute-force"}));
  fragments->add_option("--out", outPath);

  auto* simulate = app.add_subcommand("simulate", "Random blocking-pair dynamics from one start");
  simulate->add_option("--market", marketPath)->required();
  simulate->add_option("--start", startPath, "Start matching (default: firm 0 divorced from the firm-optimal matching)");
  simulate->add_option("--rule", ruleName);
  simulate->add_option("--kappa", kappa);
  simulate->add_option("--seed", seed);
  simulate->add_option("--max-steps", maxSteps);
  simulate->add_option("--paths", paths);
  simulate->add_option("--threads", threads);
  simulate->add_flag("--trace", trace, "Per-step TSV of a single path");
  simulate->add_option("--out", outPath);

  auto* etaCheck = app.add_subcommand("eta-check", "Admirer counts of a uniquely stable market");
  etaCheck->add_option("--market", marketPath)->required();
  etaCheck->add_option("--eta", eta)->required();
  etaCheck->add_option("--out", outPath);

  // Experiments: every flag is forwarded as a config entry, then --config overrides.
  struct ExperimentCli {
    CLI::App* cmd;
    Experiment kind;
    std::map<std::string, std::string> values;
    std::string configPath;
    bool fullScale = false;
  };
  std::vector<std::unique_ptr<ExperimentCli>> experiments;
  const std::vector<std::pair<std::string, std::string>> flags = {
      {"sizes", "Sizes: N, A..B or NxM, comma separated"},
      {"markets", "Markets (or starts) per size"},
      {"paths", "Paths per start"},
      {"max-steps", "Censoring limit"},
      {"rule", "uniform|agent-best|surplus-total|surplus-gain"},
      {"kappa", "Weight ratio bound"},
      {"seed", "Master seed"},
      {"out", "Output CSV (default stdout)"},
      {"threads", "Worker threads (0 = all cores)"},
      {"eta", "Admirer fraction for constructed markets"},
      {"epsilon", "Fraction of firms displaced in timing arm b"},
      {"p-destab", "Down-step probability of the walk"},
      {"budget", "Evaluation budget of the eta search"},
      {"arm", "Timing arm: a, b or both"},
      {"extra-workers", "Unique-stable k values (n means k = n)"},
      {"market", "Market file (absorption)"},
      {"start", "Start matching file (absorption)"},
      {"market-out", "File prefix for constructed markets"},
  };
  for (const auto& [name, help] :
       std::vector<std::pair<Experiment, std::string>>{
           {Experiment::FragmentsFreq, "Frequency of markets with non-trivial fragments"},
           {Experiment::MultiStable, "Return probability and timing in multi-stable markets"},
           {Experiment::UniqueStable, "Timing in uniquely stable markets, balanced and not"},
           {Experiment::Timing, "Assortative versus eta-market convergence times"},
           {Experiment::EtaConstruct, "Search for eta-markets"},
           {Experiment::Walk, "Reference biased walk"},
           {Experiment::Absorption, "Exact absorption probabilities of a market"},
           {Experiment::VerifyTheorem1, "Reachability equivalence on random small markets"},
       }) {
    auto e = std::make_unique<ExperimentCli>();
    e->kind = name;
    e->cmd = app.add_subcommand(std::string(toString(name)), help);
    for (const auto& [flag, text] : flags) e->cmd->add_option("--" + flag, e->values[flag], text);
    e->cmd->add_option("--config", e->configPath, "key=value file applied after the flags");
    e->cmd->add_flag("--full-scale", e->fullScale, "1000 markets x 300 paths unless set explicitly");
    experiments.push_back(std::move(e));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (generate->parsed()) {
      const auto sizes = parseSizes(sizeText);
      if (sizes.size() != 1) throw LabError(ErrorCode::ConfigError, "generate takes one size");
      Sink sink(outPath);
      writeMarket(*sink.os, randomMarket(sizes[0].first, sizes[0].second, seed, cardinal),
                  {" random seed=" + std::to_string(seed)});
      return 0;
    }
    if (stable->parsed()) {
      const Market m = readMarketFile(marketPath);
      Sink sink(outPath);
      writeStableSet(*sink.os,
                     enumerateStable(m, methodName == "brute-force" ? EnumMethod::BruteForce : EnumMethod::Breakmarriage));
      return 0;
    }
    if (fragments->parsed()) {
      const Market m = readMarketFile(marketPath);
      Sink sink(outPath);
      writeFragments(*sink.os, findFragments(m, methodName == "brute-force" ? FragmentMethod::BruteForce
                                                                             : FragmentMethod::ClosureBased));
      return 0;
    }
    if (simulate->parsed()) {
      const Market m = readMarketFile(marketPath);
      WeightRule rule;
      rule.kind = parseRuleKind(ruleName);
      rule.kappa = kappa;
      const Matching muF = deferredAcceptance(m);
      const Matching start = startPath.empty() ? almostStable(m, muF, 0) : readMatchingFile(startPath, m);
      Sink sink(outPath);
      if (trace) {
        writeTrace(*sink.os, m, start, rule, muF, maxSteps, seed);
        return 0;
      }
      const BatchStats b = batchRun(m, start, rule, muF, paths, maxSteps, seed, 0, threads);
      *sink.os << "paths,absorbed,returned,return_prob,mean_steps,median_steps,mean_ln_steps,ult_mismatch,"
                  "onpath_mismatch,censored_frac\n"
               << b.paths << ',' << b.absorbed << ',' << b.returned << ',' << fmtd(b.returnProb) << ','
               << fmtd(b.meanSteps) << ',' << fmtd(b.medianSteps) << ',' << fmtd(b.meanLnSteps) << ','
               << fmtd(b.ultMismatch) << ',' << fmtd(b.onPathMismatch) << ',' << fmtd(b.censoredFrac()) << '\n';
      return 0;
    }
    if (etaCheck->parsed()) {
      const Market m = readMarketFile(marketPath);
      Sink sink(outPath);
      writeEtaReportCsv(*sink.os, checkEtaConditions(m, eta));
      return 0;
    }
    for (const auto& e : experiments) {
      if (!e->cmd->parsed()) continue;
      ExperimentConfig config;
      config.experiment = e->kind;
      config.fullScale = e->fullScale;
      for (const auto& [flag, _] : flags) {
        if (e->cmd->count("--" + flag)) applyConfigEntry(config, flag, e->values[flag]);
      }
      if (!e->configPath.empty()) {
        std::ifstream in(e->configPath);
        if (!in) throw LabError(ErrorCode::ConfigError, "cannot read " + e->configPath);
        applyConfigFile(config, in);
      }
      if (config.experiment != e->kind) throw LabError(ErrorCode::ConfigError, "config names another experiment");
      Sink sink(config.outputPath);
      runExperiment(config, *sink.os);
      return 0;
    }
  } catch (const LabError& e) {
    std::cerr << e.what() << '\n';
    if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::ParseError) return kExitConfig;
    if (e.code() == ErrorCode::CapExceeded) return kExitCap;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
