#include <doctest.h>

#include <sstream>

#include "check.hpp"
#include "stablelab/experiments.hpp"

using namespace stablelab;

namespace {

std::string run(const ExperimentConfig& c) {
  std::ostringstream s;
  runExperiment(c, s);
  return s.str();
}

std::string firstDataHeader(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') return line;
  }
  return {};
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("size lists") {
    using V = std::vector<std::pair<int, int>>;
    CHECK(parseSizes("8") == V{{8, 8}});
    CHECK(parseSizes("2..4") == V{{2, 2}, {3, 3}, {4, 4}});
    CHECK(parseSizes("5x7,3") == V{{5, 7}, {3, 3}});
    CHECK_LAB_ERROR(parseSizes("4..2"), ConfigError);
    CHECK_LAB_ERROR(parseSizes("x"), ConfigError);
    CHECK_LAB_ERROR(parseSizes("0"), ConfigError);
  }

  TEST_CASE("config entries and files") {
    ExperimentConfig c;
    applyConfigEntry(c, "max_steps", "500");
    CHECK(c.maxSteps == 500);
    applyConfigEntry(c, "rule", "agent-best");
    CHECK(c.rule.kind == RuleKind::UniformAgentBest);
    CHECK_LAB_ERROR(applyConfigEntry(c, "colour", "red"), ConfigError);
    CHECK_LAB_ERROR(applyConfigEntry(c, "paths", "-3"), ConfigError);
    CHECK_LAB_ERROR(applyConfigEntry(c, "arm", "c"), ConfigError);
    std::istringstream f("# comment\nexperiment = walk\nseed=9\n\nsizes=4,8\n");
    applyConfigFile(c, f);
    CHECK(c.experiment == Experiment::Walk);
    CHECK(c.masterSeed == 9);
    std::istringstream bad("seed 9\n");
    CHECK_LAB_ERROR(applyConfigFile(c, bad), ConfigError);
    CHECK_LAB_ERROR(parseExperiment("figure-9"), ConfigError);
    CHECK(toString(parseExperiment("verify-theorem1")) == "verify-theorem1");
  }

  TEST_CASE("defaults and hashing") {
    ExperimentConfig c;
    c.experiment = Experiment::MultiStable;
    const auto d = resolveDefaults(c);
    CHECK(d.marketsPerSize == kDeskMarkets);
    CHECK(d.pathsPerStart == kDeskPaths);
    c.fullScale = true;
    CHECK(resolveDefaults(c).pathsPerStart == kFullPaths);
    ExperimentConfig a, b;
    CHECK(configHash(a) == configHash(b));
    b.masterSeed = 2;
    CHECK(configHash(a) != configHash(b));
    b.masterSeed = 1;
    b.threads = 8;
    CHECK(configHash(a) == configHash(b));
  }

  TEST_CASE("validation") {
    ExperimentConfig c;
    c.experiment = Experiment::MultiStable;
    c.sizes = {{3, 4}};
    CHECK_LAB_ERROR(run(c), ConfigError);
    c.experiment = Experiment::EtaConstruct;
    c.sizes = {{8, 8}};
    c.eta = 1.5;
    CHECK_LAB_ERROR(run(c), ConfigError);
    c.experiment = Experiment::Walk;
    c.eta = 0.45;
    c.pDestab = 1.0;
    CHECK_LAB_ERROR(run(c), ConfigError);
  }

  TEST_CASE("output is byte identical across runs and thread counts") {
    ExperimentConfig c;
    c.experiment = Experiment::MultiStable;
    c.sizes = {{4, 4}, {5, 5}};
    c.marketsPerSize = 6;
    c.pathsPerStart = 20;
    c.maxSteps = 100000;
    const std::string one = run(c);
    CHECK(one == run(c));
    c.threads = 3;
    CHECK(one == run(c));
    CHECK(one.rfind("# stablelab experiment=multi-stable config_hash=", 0) == 0);
    CHECK(one.find("master_seed=1 format_revision=1") != std::string::npos);
    CHECK(firstDataHeader(one) ==
          "n,start_type,return_prob,ult_mismatch,mean_steps,mean_ln_steps,onpath_mismatch,censored_frac");
  }

  TEST_CASE("schemas") {
    ExperimentConfig c;
    c.experiment = Experiment::FragmentsFreq;
    c.sizes = {{2, 2}, {3, 3}};
    c.marketsPerSize = 50;
    const std::string f = run(c);
    CHECK(firstDataHeader(f) == "n,samples,freq,se");
    CHECK(f.find("\n2,50,0,0\n") != std::string::npos);

    c.experiment = Experiment::UniqueStable;
    c.sizes = {{3, 3}};
    c.marketsPerSize = 3;
    c.pathsPerStart = 5;
    CHECK(firstDataHeader(run(c)) ==
          "n,k,n_workers,markets,mean_steps,mean_ln_steps,onpath_mismatch,onpath_firm_mismatch,"
          "onpath_worker_mismatch,censored_frac");

    c = {};
    c.experiment = Experiment::Walk;
    c.pathsPerStart = 20;
    CHECK(firstDataHeader(run(c)) == "gap,p_destab,walks,censored_frac,median_steps,mean_steps,expected_steps");

    c = {};
    c.experiment = Experiment::VerifyTheorem1;
    c.sizes = {{3, 3}};
    c.marketsPerSize = 20;
    const auto rows = runVerifyTheorem1(resolveDefaults(c));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].allPairsEquivalent == 20);
    CHECK(rows[0].bestPairsEquivalent == 20);

    c = {};
    c.experiment = Experiment::EtaConstruct;
    c.sizes = {{8, 8}};
    CHECK(firstDataHeader(run(c)) == "n,eta,achieved_eta,threshold,evaluations,exception_firm,exception_worker");

    c = {};
    c.experiment = Experiment::Timing;
    c.arm = TimingArm::Assortative;
    c.sizes = {{6, 6}, {8, 8}};
    c.pathsPerStart = 3;
    c.marketsPerSize = 1;
    CHECK(firstDataHeader(run(c)) ==
          "arm,kind,n,paths,mean_steps,q10,q25,median_steps,q75,q90,censored_frac");
  }

  TEST_CASE("log-log slope") {
    const std::vector<double> x = {10, 20, 40}, y = {100, 400, 1600};
    CHECK(logLogSlope(x, y) == doctest::Approx(2.0));
  }
}
