#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hot/cli.hpp"
#include "hot/experiments.hpp"
#include "hot/memory_stats.hpp"

namespace hot::cli {

namespace {

void emit(const RunReport& r, const std::string& path, std::ostream& out) {
  if (path == "-") out << r.to_json().dump(2) << "\n";
  else r.write(path);
}

std::ostream& human(const std::string& json_path, std::ostream& out, std::ostream& err) {
  return json_path == "-" ? err : out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "OOM";
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Higher-order permutation-equivariant transformer toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file, keys as <command>.<option>");
  int threads = 1;
  app.add_option("--threads", threads, "worker threads")->envname("HOT_THREADS")->check(CLI::PositiveNumber);

  struct {
    std::string suite = "all", json = "-", golden, write_golden, dump;
    std::uint64_t seed = 0;
  } v;
  auto* verify = app.add_subcommand("verify", "run verification suites");
  verify->add_option("--suite", v.suite, "all|equivariance|oracle|sparse|kernel|thm1|thm2|prop1|prop5|gradient");
  verify->add_option("--seed", v.seed);
  verify->add_option("--json", v.json, "report path, - for stdout");
  verify->add_option("--golden", v.golden, "golden file checked by thm1");
  verify->add_option("--write-golden", v.write_golden, "write a golden file and exit");
  verify->add_option("--dump", v.dump, "snapshot path prefix for the sparse suite tensors");

  struct {
    std::string model = "ours-s", csv, json = "-", loss = "bce", dump_dataset;
    std::uint64_t seed = 0;
    int epochs = 100, batch = 16, eval_every = 1;
    double lr = 1e-3;
  } c;
  auto* chains = app.add_subcommand("chains", "train on the synthetic chain task");
  chains->add_option("--model", c.model, "ours-s|ours-s-phi|ours-ablated|gcn|gin0|mlp-pi");
  chains->add_option("--seed", c.seed);
  chains->add_option("--epochs", c.epochs)->check(CLI::NonNegativeNumber);
  chains->add_option("--batch", c.batch)->check(CLI::PositiveNumber);
  chains->add_option("--lr", c.lr)->check(CLI::PositiveNumber);
  chains->add_option("--loss", c.loss, "bce|ce")->check(CLI::IsMember({"bce", "ce"}));
  chains->add_option("--eval-every", c.eval_every, "test evaluation period in epochs, 0 = last only");
  chains->add_option("--csv", c.csv, "per-epoch csv, - for stdout");
  chains->add_option("--json", c.json, "report path, - for stdout");
  chains->add_option("--dump-dataset", c.dump_dataset, "write the generated dataset");

  struct {
    std::string impl = "sparse-kernel", csv, json = "-";
    std::vector<long> n_list, m_list;
    int reps = 10, warmup = 2;
    std::uint64_t seed = 0;
    std::size_t cap = 0;
  } b;
  auto* bench = app.add_subcommand("bench", "forward time and memory scaling");
  bench->add_option("--impl", b.impl)->check(CLI::IsMember(bench_impls()));
  bench->add_option("--n-list", b.n_list, "node counts (dense, mlp-pi)")->delimiter(',');
  bench->add_option("--m-list", b.m_list, "entry counts (sparse, sparse-kernel)")->delimiter(',');
  bench->add_option("--reps", b.reps)->check(CLI::PositiveNumber);
  bench->add_option("--warmup", b.warmup)->check(CLI::NonNegativeNumber);
  bench->add_option("--seed", b.seed);
  bench->add_option("--cap-bytes", b.cap, "allocation cap, 0 = impl default");
  bench->add_option("--csv", b.csv, "csv path, - for stdout");
  bench->add_option("--json", b.json, "report path, - for stdout");

  struct {
    int n = 10;
    std::uint64_t seed = 0;
    std::string json = "-", graph = "path";
    bool drop = false;
  } q;
  auto* mp = app.add_subcommand("mpnn-equiv", "two-layer emulation of a linear message-passing step");
  mp->add_option("--n", q.n)->check(CLI::PositiveNumber);
  mp->add_option("--seed", q.seed);
  mp->add_option("--graph", q.graph)->check(CLI::IsMember({"path", "random", "disconnected"}));
  mp->add_option("--json", q.json, "report path, - for stdout");
  mp->add_flag("--drop-self-loops", q.drop, "negative control");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  RunReport r;
  try {
    if (*verify) {
      r.command = "verify";
      r.seed = v.seed;
      r.config = {{"suite", v.suite}, {"threads", threads}, {"golden", v.golden}};
      if (!v.write_golden.empty()) {
        write_golden(v.write_golden, make_golden(v.seed));
        human(v.json, out, err) << "wrote " << v.write_golden << "\n";
        return kOk;
      }
      VerifyOptions opt{v.seed, threads, v.golden, v.dump};
      if (!run_suite(v.suite, opt, r)) {
        err << "error: unknown suite '" << v.suite << "'\n";
        return kUsage;
      }
      auto& h = human(v.json, out, err);
      for (auto& ck : r.checks)
        h << (ck.pass ? "PASS " : "FAIL ") << ck.suite << "/" << ck.name << " value=" << fmt(ck.value)
          << " tol=" << ck.tol << (ck.detail.empty() ? "" : " (" + ck.detail + ")") << "\n";
      r.peak_bytes = memory::peak_bytes();
      emit(r, v.json, out);
      return r.ok() ? kOk : kCheckFailed;
    }

    if (*chains) {
      r.command = "chains";
      r.seed = c.seed;
      TrainConfig cfg;
      cfg.lr = c.lr;
      cfg.batch = c.batch;
      cfg.epochs = c.epochs;
      cfg.loss = loss_kind_from_string(c.loss);
      cfg.seed = c.seed;
      cfg.threads = threads;
      cfg.eval_every = c.eval_every;
      r.config = {{"model", c.model}, {"epochs", c.epochs}, {"batch", c.batch},     {"lr", c.lr},
                  {"loss", c.loss},   {"threads", threads}, {"eval_every", c.eval_every}};
      std::unique_ptr<NodeClassifier> model;
      try {
        model = make_chain_model(c.model, c.seed);
      } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
      }
      ChainDataset ds;
      {
        PhaseTimer t(r, "generate");
        ds = gen_chains(c.seed);
      }
      if (!c.dump_dataset.empty()) {
        std::ofstream os(c.dump_dataset, std::ios::binary);
        save_dataset(os, ds);
      }
      std::ofstream csv_file;
      std::ostream* csv = nullptr;
      if (c.csv == "-") csv = &out;
      else if (!c.csv.empty()) {
        csv_file.open(c.csv);
        if (!csv_file) throw std::runtime_error("cannot write " + c.csv);
        csv = &csv_file;
      }
      if (csv) *csv << "epoch,loss,train_f1,test_micro_f1,test_macro_f1\n";
      auto& h = c.csv == "-" || c.json == "-" ? err : out;
      TrainResult res;
      {
        PhaseTimer t(r, "train");
        res = train_model(*model, ds, cfg, [&](const EpochRecord& e) {
          if (csv) {
            *csv << e.epoch << "," << fmt(e.loss) << "," << fmt(e.train_f1) << ",";
            if (e.evaluated) *csv << fmt(e.test.micro) << "," << fmt(e.test.macro);
            else *csv << ",";
            *csv << "\n";
          }
          if (e.evaluated)
            h << "epoch " << e.epoch << " loss " << fmt(e.loss) << " test micro-F1 " << fmt(e.test.micro) << "\n";
        });
      }
      r.metrics = {{"parameters", model->parameter_count()},
                   {"test_micro_f1", res.final_test.micro},
                   {"test_macro_f1", res.final_test.macro}};
      if (!res.curve.empty()) {
        r.metrics["final_loss"] = res.curve.back().loss;
        r.metrics["first_loss"] = res.curve.front().loss;
        r.metrics["train_f1"] = res.curve.back().train_f1;
      }
      r.expect("chains", "finite_loss", res.curve.empty() || std::isfinite(res.curve.back().loss));
      r.peak_bytes = memory::peak_bytes();
      emit(r, c.json, out);
      return r.ok() ? kOk : kCheckFailed;
    }

    if (*bench) {
      r.command = "bench";
      r.seed = b.seed;
      BenchOptions opt;
      opt.impl = b.impl;
      bool dense = b.impl == "dense" || b.impl == "mlp-pi";
      opt.sizes = dense ? b.n_list : b.m_list;
      if (opt.sizes.empty())
        opt.sizes = dense ? std::vector<long>{8, 16, 32} : std::vector<long>{1024, 2048, 4096, 8192};
      opt.reps = b.reps;
      opt.warmup = b.warmup;
      opt.seed = b.seed;
      opt.cap_bytes = b.cap;
      r.config = {{"impl", b.impl}, {"sizes", opt.sizes}, {"reps", b.reps}, {"warmup", b.warmup}, {"cap_bytes", b.cap}};
      if (!memory::instrumented()) err << "warning: allocator counters unavailable, peak_bytes reads 0\n";
      std::ofstream csv_file;
      std::ostream* csv = nullptr;
      if (b.csv == "-") csv = &out;
      else if (!b.csv.empty()) {
        csv_file.open(b.csv);
        if (!csv_file) throw std::runtime_error("cannot write " + b.csv);
        csv = &csv_file;
      }
      if (csv) *csv << "impl,n,m,forward_ms_median,peak_bytes\n";
      auto rows_json = nlohmann::json::array();
      {
        PhaseTimer t(r, "bench");
        run_bench(opt, [&](const BenchRow& row) {
          if (csv) *csv << row.impl << "," << row.n << "," << row.m << "," << fmt(row.forward_ms_median) << ","
                        << (row.oom ? std::string("OOM") : std::to_string(row.peak_bytes)) << "\n";
          rows_json.push_back({{"n", row.n},
                               {"m", row.m},
                               {"oom", row.oom},
                               {"forward_ms_median", row.oom ? nlohmann::json(nullptr) : nlohmann::json(row.forward_ms_median)},
                               {"peak_bytes", row.peak_bytes},
                               {"work", row.work}});
        });
      }
      r.metrics["rows"] = rows_json;
      r.peak_bytes = memory::peak_bytes();
      emit(r, b.json, out);
      return kOk;
    }

    if (*mp) {
      r.command = "mpnn-equiv";
      r.seed = q.seed;
      r.config = {{"n", q.n}, {"graph", q.graph}, {"drop_self_loops", q.drop}};
      MpnnEquivResult res;
      {
        PhaseTimer t(r, "emulate");
        res = mpnn_equiv(q.n, q.seed, q.graph, !q.drop);
      }
      r.metrics = {{"max_dev", std::isfinite(res.max_dev) ? nlohmann::json(res.max_dev) : nlohmann::json(nullptr)},
                   {"n", res.n},
                   {"directed_edges", res.edges}};
      r.expect_le("mpnn-equiv", "diag_matches_oracle", res.max_dev, 1e-4,
                  std::isfinite(res.max_dev) ? "" : "diagonal outputs missing");
      human(q.json, out, err) << "max deviation " << fmt(res.max_dev) << (r.ok() ? " PASS" : " FAIL") << "\n";
      r.peak_bytes = memory::peak_bytes();
      emit(r, q.json, out);
      return r.ok() ? kOk : kCheckFailed;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace hot::cli
