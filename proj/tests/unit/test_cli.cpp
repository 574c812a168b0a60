#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hot/cli.hpp"

using namespace hot;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hot");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hot_cli_test_" + name)).string();
}

std::string slurp(const std::string& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"verify", "--suite", "nope"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"chains", "--model", "nope"}).code, 2);
  EXPECT_EQ(run({"bench", "--impl", "nope"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, VerifySuiteWritesJson) {
  auto r = run({"verify", "--suite", "oracle", "--json", "-"});
  EXPECT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["command"], "verify");
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_FALSE(j["checks"].empty());
}

TEST(Cli, RegistryHasEightOrMoreSuites) { EXPECT_GE(cli::suites().size(), 8u); }

TEST(Cli, GoldenMutationFlipsThm1) {
  std::string path = tmp("golden.bin");
  ASSERT_EQ(run({"verify", "--write-golden", path}).code, 0);
  EXPECT_EQ(run({"verify", "--suite", "thm1", "--golden", path, "--json", tmp("g.json")}).code, 0);
  auto g = cli::read_golden(path);
  g.model.layers[0].attn.at(0, 0).w_v.v[0] += 0.5;
  cli::write_golden(path, g);
  EXPECT_EQ(run({"verify", "--suite", "thm1", "--golden", path, "--json", tmp("g.json")}).code, 1);
  std::remove(path.c_str());
}

TEST(Cli, ChainsCsvRows) {
  std::string csv = tmp("chains.csv");
  auto r = run({"chains", "--model", "gcn", "--epochs", "3", "--csv", csv, "--json", tmp("c.json")});
  EXPECT_EQ(r.code, 0);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,loss,train_f1,test_micro_f1,test_macro_f1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
  std::string again = slurp(csv);
  run({"chains", "--model", "gcn", "--epochs", "3", "--csv", csv, "--json", tmp("c.json")});
  EXPECT_EQ(slurp(csv), again);
}

TEST(Cli, BenchCsvColumns) {
  std::string csv = tmp("bench.csv");
  auto r = run({"bench", "--impl", "sparse-kernel", "--m-list", "200,400", "--reps", "1", "--warmup", "0", "--csv", csv,
                "--json", tmp("b.json")});
  EXPECT_EQ(r.code, 0);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "impl,n,m,forward_ms_median,peak_bytes");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Cli, BenchRecordsOomAndStops) {
  cli::BenchOptions o;
  o.impl = "dense";
  o.sizes = {6, 40, 50};  // n = 40 needs about 28 MB
  o.reps = 1;
  o.warmup = 0;
  o.cap_bytes = 4 << 20;
  auto rows = cli::run_bench(o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].oom);
  EXPECT_TRUE(rows[1].oom);
}

TEST(Cli, MpnnEquiv) {
  EXPECT_EQ(run({"mpnn-equiv", "--n", "6", "--graph", "path", "--json", tmp("m.json")}).code, 0);
  EXPECT_EQ(run({"mpnn-equiv", "--n", "7", "--graph", "disconnected", "--json", tmp("m.json")}).code, 0);
  EXPECT_EQ(run({"mpnn-equiv", "--drop-self-loops", "--json", tmp("m.json")}).code, 1);
  EXPECT_LE(cli::mpnn_equiv(6, 3, "path", true).max_dev, 1e-6);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  std::string cfg = tmp("cfg.txt");
  {
    std::ofstream f(cfg);
    f << "chains.epochs = 2\nchains.model = gcn\n";
  }
  std::string csv = tmp("cfg.csv");
  EXPECT_EQ(run({"--config", cfg, "chains", "--csv", csv, "--json", tmp("c.json")}).code, 0);
  int rows = 0;
  std::istringstream in(slurp(csv));
  std::string line;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(run({"--config", cfg, "chains", "--epochs", "1", "--csv", csv, "--json", tmp("c.json")}).code, 0);
  rows = 0;
  std::istringstream in2(slurp(csv));
  while (std::getline(in2, line)) ++rows;
  EXPECT_EQ(rows, 2);
}
