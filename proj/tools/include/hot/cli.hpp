#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hot/encoder.hpp"
#include "json.hpp"

namespace hot::cli {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2 };

struct Check {
  std::string suite;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tol = 0.0;
  std::string detail;
};

struct RunReport {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json timings = nlohmann::json::object();
  std::size_t peak_bytes = 0;
  std::vector<Check> checks;

  // pass iff value <= tol and finite
  Check& expect_le(const std::string& suite, const std::string& name, double value, double tol,
                   std::string detail = {});
  Check& expect(const std::string& suite, const std::string& name, bool pass, std::string detail = {});
  bool ok() const;
  nlohmann::json to_json() const;
  void write(const std::string& path) const;
};

// Wall-clock phase timer writing milliseconds into report.timings[name].
class PhaseTimer {
 public:
  PhaseTimer(RunReport& r, std::string name);
  ~PhaseTimer();

 private:
  RunReport& r_;
  std::string name_;
  std::int64_t t0_;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string golden;  // thm1 golden file
  std::string dump;    // snapshot prefix
};

using Suite = std::function<void(const VerifyOptions&, RunReport&)>;
const std::vector<std::pair<std::string, Suite>>& suites();
bool run_suite(const std::string& name, const VerifyOptions& opt, RunReport& report);

// Golden file: reference single-layer model, dense input, and the reduced layer output.
struct Golden {
  Model model;
  DenseTensor input;
  DenseTensor expected;
};
Golden make_golden(std::uint64_t seed);
void write_golden(const std::string& path, const Golden& g);
Golden read_golden(const std::string& path);
// Reduced-layer output of the golden model on its input.
DenseTensor golden_output(const Golden& g);

struct BenchRow {
  std::string impl;
  int n = 0;
  long m = 0;
  double forward_ms_median = 0.0;
  std::size_t peak_bytes = 0;
  bool oom = false;
  std::uint64_t work = 0;  // plan counter: pairs (softmax) or pooled rows (kernel)
};

struct BenchOptions {
  std::string impl = "sparse-kernel";
  std::vector<long> sizes;  // n for dense and mlp-pi, m otherwise
  int reps = 10;
  int warmup = 2;
  std::uint64_t seed = 0;
  std::size_t cap_bytes = 0;  // 0 = impl default
  int width = 32;
};
std::vector<std::string> bench_impls();
// Runs until the first OOM row; on_row fires per completed size.
std::vector<BenchRow> run_bench(const BenchOptions& opt, const std::function<void(const BenchRow&)>& on_row = {});
// Node count whose uniform-attachment graph (attach 5, with loops) has about m entries.
int ba_nodes_for_entries(long m);

struct MpnnEquivResult {
  double max_dev = 0.0;
  int n = 0;
  long edges = 0;
};
// graph: path | random | disconnected
MpnnEquivResult mpnn_equiv(int n, std::uint64_t seed, const std::string& graph, bool self_loops);

// Full command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hot::cli
