#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nngp/csv.hpp"
#include "nngp/nngp.hpp"

namespace fs = std::filesystem;
using namespace nngp;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + NNGP_IMPUTE_BIN + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nngp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  // Small generated scenario with its mask applied, rows grouped by pattern.
  Dataset scenario_csv(const std::string& name, std::uint64_t seed) const {
    SynthConfig c = *preset("p50-gaussian-mar");
    c.n = 40;
    c.seed = seed;
    const Scenario s = generate_scenario(c);
    const Dataset grouped = select_rows(s.dataset, pattern_row_order(detect_patterns(s.dataset)));
    csv::write(path(name), grouped.values, grouped.column_names, &grouped.mask);
    return grouped;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ImputeWritesParsableOutputsThatKeepObservedCells) {
  const Dataset d = scenario_csv("toy.csv", 3);
  const auto r = run("impute " + path("toy.csv") + " --header --m 3 --seed 5 --method mi-nngp2");
  ASSERT_EQ(r.code, 0);
  for (int m = 1; m <= 3; ++m) {
    const Dataset out = csv::read(path("toy.imp" + std::to_string(m) + ".csv"), true);
    ASSERT_EQ(out.rows(), d.rows());
    ASSERT_EQ(out.cols(), d.cols());
    EXPECT_TRUE(out.mask.all());
    EXPECT_EQ(out.column_names, d.column_names);
    for (Index i = 0; i < d.rows(); ++i)
      for (Index j = 0; j < d.cols(); ++j)
        if (d.mask(i, j)) {
          ASSERT_EQ(out.values(i, j), d.values(i, j));
        }
  }
  const auto diag = nlohmann::json::parse(slurp(path("toy.diag.json")));
  EXPECT_EQ(diag["provenance"]["seed"], 5);
  EXPECT_EQ(diag["provenance"]["version"], kVersion);
  EXPECT_EQ(diag["provenance"]["config"]["method"], "mi-nngp2");
  EXPECT_EQ(diag["jitter_events"].size(), 3u);
  EXPECT_EQ(diag["patterns"].size(), detect_patterns(d).k());
}

TEST_F(Cli, OutputsMatchLibraryBitForBit) {
  const Dataset d = scenario_csv("toy.csv", 4);
  ASSERT_EQ(run("impute " + path("toy.csv") + " --header --m 2 --seed 9 --method mi-nngp1-bs").code, 0);
  ImputationConfig cfg;
  cfg.m_imputations = 2;
  cfg.seed = 9;
  // Library run on the re-parsed input, which is what the tool saw.
  const Dataset parsed = csv::read(path("toy.csv"), true);
  const ImputedSet set = impute(parsed, ImputationMethod::MiNngp1Bootstrap, cfg);
  for (int m = 0; m < 2; ++m) {
    const Dataset out = csv::read(path("toy.imp" + std::to_string(m + 1) + ".csv"), true);
    EXPECT_TRUE((out.values.array() == set.imputations[static_cast<std::size_t>(m)].array()).all());
  }
}

TEST_F(Cli, RepeatedRunsAndThreadCountsAgree) {
  scenario_csv("toy.csv", 5);
  const std::string args = " --header --method mi-nngp2-bs --m 10 --seed 7";
  ASSERT_EQ(run("impute " + path("toy.csv") + args + " --out-dir " + path("a")).code, 0);
  ASSERT_EQ(run("impute " + path("toy.csv") + args + " --out-dir " + path("b")).code, 0);
  ASSERT_EQ(run("impute " + path("toy.csv") + args + " --out-dir " + path("c"), "NNGP_IMPUTE_THREADS=4").code, 0);
  for (int m = 1; m <= 10; ++m) {
    const std::string f = "toy.imp" + std::to_string(m) + ".csv";
    const std::string a = slurp(dir_ / "a" / f);
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir_ / "b" / f));
    EXPECT_EQ(a, slurp(dir_ / "c" / f));
  }
  const auto diag = nlohmann::json::parse(slurp(dir_ / "c" / "toy.diag.json"));
  EXPECT_EQ(diag["provenance"]["threads"], 4);
}

TEST_F(Cli, FullyObservedInputGivesIdenticalCopies) {
  write("full.csv", "1,2.5,3\n4,5,6e-3\n7,8,9\n");
  ASSERT_EQ(run("impute " + path("full.csv") + " --m 3").code, 0);
  const std::string first = slurp(path("full.imp1.csv"));
  EXPECT_EQ(first, "1,2.5,3\n4,5,0.0060000000000000001\n7,8,9\n");
  EXPECT_EQ(first, slurp(path("full.imp2.csv")));
  EXPECT_EQ(first, slurp(path("full.imp3.csv")));
}

TEST_F(Cli, SortRowsRestoresOriginalOrder) {
  write("mixed.csv", "x,y,z\n1,2,3\nNA,2.1,3.1\n1.2,2.2,3.2\n,2.3,3.3\n");
  EXPECT_EQ(run("impute " + path("mixed.csv") + " --header --m 1").code, 3);
  ASSERT_EQ(run("impute " + path("mixed.csv") + " --header --m 1 --sort-rows --method mi-nngp1").code, 0);
  const Dataset out = csv::read(path("mixed.imp1.csv"), true);
  EXPECT_EQ(out.values(0, 0), 1.0);
  EXPECT_EQ(out.values(2, 0), 1.2);
  EXPECT_EQ(out.values(1, 1), 2.1);
  EXPECT_EQ(out.values(3, 2), 3.3);
  EXPECT_TRUE(std::isfinite(out.values(1, 0)));
  EXPECT_TRUE(nlohmann::json::parse(slurp(path("mixed.diag.json")))["rows_reordered"].get<bool>());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("impute " + path("absent.csv")).code, 2);
  write("ragged.csv", "1,2\n3\n");
  EXPECT_EQ(run("impute " + path("ragged.csv")).code, 2);
  write("nocc.csv", "1,,3\n,2,3\n");
  EXPECT_EQ(run("impute " + path("nocc.csv") + " --method mi-nngp1").code, 4);
  EXPECT_EQ(run("impute " + path("nocc.csv") + " --method mi-nngp2 --m 2").code, 0);
  EXPECT_EQ(run("impute " + path("nocc.csv") + " --method nope").code, 2);
  EXPECT_EQ(run("benchmark no-such-scenario").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("impute " + path("nocc.csv") + " --unknown-flag").code, 2);
  write("binary.csv", "1,0\n2,2\n,1\n");
  EXPECT_EQ(run("impute " + path("binary.csv") + " --binary-cols 2").code, 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  scenario_csv("toy.csv", 6);
  write("cfg.json", R"({"method": "mi-nngp1", "m": 2, "seed": 1})");
  ASSERT_EQ(run("impute " + path("toy.csv") + " --header --config " + path("cfg.json") + " --m 3").code, 0);
  const auto diag = nlohmann::json::parse(slurp(path("toy.diag.json")));
  EXPECT_EQ(diag["provenance"]["config"]["m"], 3);
  EXPECT_EQ(diag["provenance"]["config"]["method"], "mi-nngp1");
  EXPECT_EQ(diag["provenance"]["seed"], 1);
  write("bad.json", R"({"m": 2, "colour": "red"})");
  EXPECT_EQ(run("impute " + path("toy.csv") + " --header --config " + path("bad.json")).code, 2);
}

TEST_F(Cli, PoolFlagsZeroBetweenAndRejectsShapeMismatch) {
  write("a.csv", "1,2.0\n2,4.1\n3,5.9\n4,8.2\n5,9.9\n");
  write("b.csv", "1,2.0\n2,4.1\n3,5.9\n");
  const auto same = run("pool " + path("a.csv") + " " + path("a.csv") + " --response 2 --predictors 1");
  ASSERT_EQ(same.code, 0);
  const auto j = nlohmann::json::parse(same.out);
  EXPECT_TRUE(j["zero_between_variance"].get<bool>());
  EXPECT_TRUE(j["coefficients"][1]["dof_infinite"].get<bool>());
  EXPECT_EQ(j["coefficients"][1]["total_variance"], j["coefficients"][1]["within_variance"]);
  EXPECT_EQ(run("pool " + path("a.csv") + " " + path("b.csv") + " --response 2 --predictors 1").code, 2);
  write("holes.csv", "1,2\n2,\n3,6\n");
  EXPECT_EQ(run("pool " + path("holes.csv") + " --response 2 --predictors 1").code, 2);
}

TEST_F(Cli, PoolMatchesLibrary) {
  scenario_csv("toy.csv", 8);
  ASSERT_EQ(run("impute " + path("toy.csv") + " --header --m 3 --seed 2").code, 0);
  const auto r = run("pool --header --response y --predictors x40,x44,x48 " + path("toy.imp1.csv") + " " +
                     path("toy.imp2.csv") + " " + path("toy.imp3.csv"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  std::vector<OlsFit> fits;
  RegressionSpec spec{{39, 43, 47}, 50, true};
  for (int m = 1; m <= 3; ++m)
    fits.push_back(fit_regression(csv::read(path("toy.imp" + std::to_string(m) + ".csv"), true).values, spec));
  const auto pooled = rubin_pool(fits, 40);
  EXPECT_EQ(j["m"], 3);
  EXPECT_EQ(j["coefficients"][1]["term"], "x40");
  EXPECT_EQ(j["coefficients"][1]["estimate"].get<double>(), pooled.coefficients[1].estimate);
  EXPECT_EQ(j["coefficients"][1]["std_error"].get<double>(), pooled.coefficients[1].std_error);
}

TEST_F(Cli, BenchmarkRepeatableAndThreadInvariant) {
  const std::string args = "benchmark p50-gaussian-mar --mc 3 --seed 11 --m 3";
  const auto a = run(args + " --threads 1");
  const auto b = run(args + " --threads 1");
  const auto c = run(args + " --threads 8");
  ASSERT_EQ(a.code, 0);
  // Drop the timing column before comparing.
  auto strip = [](const std::string& table) {
    std::istringstream in(table);
    std::string line, out;
    while (std::getline(in, line)) {
      auto f = csv::split_line(line);
      f.erase(f.begin() + 3);
      for (const auto& s : f) out += s + ",";
      out += "\n";
    }
    return out;
  };
  EXPECT_EQ(strip(a.out), strip(b.out));
  EXPECT_EQ(strip(a.out), strip(c.out));
  std::istringstream in(a.out);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "scenario,method,style,Time(s),Imp MSE,Bias,CR,SE,SD");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    const auto f = csv::split_line(line);
    if (f[1] == "complete-data" || f[1] == "complete-case") {
      EXPECT_TRUE(f[4].empty());
    }
  }
  EXPECT_EQ(rows, 7);
}

TEST_F(Cli, BenchmarkDiscreteAndJsonScenario) {
  const auto r = run("benchmark discrete-mar --mc 1 --methods colmean --out " + path("m.csv"));
  ASSERT_EQ(r.code, 0);
  const std::string table = slurp(path("m.csv"));
  EXPECT_NE(table.find("Imp accu"), std::string::npos);
  const auto prov = nlohmann::json::parse(slurp(path("m.csv.provenance.json")));
  EXPECT_EQ(prov["config"]["synth"]["binary_append"], true);
  write("s.json", R"({"preset": "p50-gaussian-mnar", "n": 60})");
  const auto j = run("benchmark " + path("s.json") + " --mc 1 --methods colmean,complete-data");
  ASSERT_EQ(j.code, 0);
  EXPECT_NE(j.out.find("custom,colmean"), std::string::npos);
  write("bad.json", R"({"n": "many"})");
  EXPECT_EQ(run("benchmark " + path("bad.json") + " --mc 1").code, 2);
}

TEST_F(Cli, KernelCheckPasses) {
  const auto r = run("kernel-check --cases 9 --min-pass 8 --samples 20000 --seed 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("PASS oracle agreement"), std::string::npos);
  EXPECT_NE(r.out.find("PASS diagonal halving"), std::string::npos);
}
