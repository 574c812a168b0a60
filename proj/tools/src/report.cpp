#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hot/binio.hpp"
#include "hot/cli.hpp"

namespace hot::cli {

namespace {
std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
constexpr char kGoldenMagic[4] = {'H', 'O', 'T', 'G'};
}  // namespace

Check& RunReport::expect_le(const std::string& suite, const std::string& name, double value, double tol,
                            std::string detail) {
  checks.push_back({suite, name, std::isfinite(value) && value <= tol, value, tol, std::move(detail)});
  return checks.back();
}

Check& RunReport::expect(const std::string& suite, const std::string& name, bool pass, std::string detail) {
  checks.push_back({suite, name, pass, pass ? 1.0 : 0.0, 1.0, std::move(detail)});
  return checks.back();
}

bool RunReport::ok() const {
  for (auto& c : checks)
    if (!c.pass) return false;
  return true;
}

nlohmann::json RunReport::to_json() const {
  auto cs = nlohmann::json::array();
  for (auto& c : checks) {
    nlohmann::json j{{"suite", c.suite}, {"name", c.name}, {"pass", c.pass}, {"tol", c.tol}};
    j["value"] = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr);
    if (!c.detail.empty()) j["detail"] = c.detail;
    cs.push_back(std::move(j));
  }
  return {{"command", command}, {"config", config},         {"seed", seed},           {"metrics", metrics},
          {"timings", timings}, {"peak_bytes", peak_bytes}, {"checks", std::move(cs)}, {"pass", ok()}};
}

void RunReport::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report " + path);
  os << to_json().dump(2) << "\n";
}

PhaseTimer::PhaseTimer(RunReport& r, std::string name) : r_(r), name_(std::move(name)), t0_(now_ns()) {}

PhaseTimer::~PhaseTimer() { r_.timings[name_] = static_cast<double>(now_ns() - t0_) / 1e6; }

Golden make_golden(std::uint64_t seed) {
  LayerSpec ls;
  ls.k = 2;
  ls.l = 2;
  ls.d_in = 3;
  ls.d_out = 3;
  ls.d_H = 4;
  ls.H = 2;
  ModelSpec spec;
  spec.layers = {ls};
  spec.final_norm = false;
  Golden g;
  g.model = build_model(spec, seed);
  for (auto& b : g.model.layers[0].mlp2.bias.v) b = 0.25;
  std::mt19937_64 rng(seed ^ 0x901d);
  g.input = DenseTensor::random(4, 2, 3, rng);
  g.expected = golden_output(g);
  return g;
}

DenseTensor golden_output(const Golden& g) {
  if (g.model.layers.size() != 1) throw std::invalid_argument("golden: expected a single-layer model");
  EncoderLayer layer = g.model.layers[0];
  reduce_to_linear(layer);
  return enc_forward(layer, g.input);
}

void write_golden(const std::string& path, const Golden& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write golden file " + path);
  binio::put_block(os, kGoldenMagic, 1, nlohmann::json{{"contents", {"model", "input", "expected"}}}.dump());
  save_checkpoint(os, g.model);
  save_snapshot(os, g.input);
  save_snapshot(os, g.expected);
}

Golden read_golden(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read golden file " + path);
  binio::get_block(is, kGoldenMagic, 1);
  Golden g;
  g.model = load_checkpoint(is);
  g.input = load_dense_snapshot(is);
  g.expected = load_dense_snapshot(is);
  return g;
}

}  // namespace hot::cli
