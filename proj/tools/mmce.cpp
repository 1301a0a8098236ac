// Command-line front end: dataset generation, denoiser training, single-shot
// estimation, Monte-Carlo sweeps and runtime benchmarks.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mmce/harness.hpp"

namespace {

using mmce::ExperimentConfig;

struct CliState {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Every ExperimentConfig field is exposed as a long flag with the same name
// as its config-file key; values are forwarded verbatim.
void add_config_flags(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_file, "key=value config file");
  static const char* keys[] = {"nt", "nr", "lt", "lr", "k", "kp", "gt", "gr", "gtr", "grr",
                               "l", "nc", "nq", "rolloff", "ts", "m", "snr", "trials", "seed",
                               "estimators", "weights", "eps-mult", "ns", "dataset-size",
                               "split", "learning-rate", "epochs", "batch", "patience",
                               "threads"};
  for (const char* key : keys) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [&st, key](const std::string& v) { st.overrides.emplace_back(key, v); });
  }
  cmd->add_flag_function("--on-grid", [&st](int64_t) { st.overrides.emplace_back("on-grid", "1"); });
}

ExperimentConfig resolve(const CliState& st) {
  ExperimentConfig cfg;
  if (!st.config_file.empty()) cfg = mmce::load_config_file(st.config_file, cfg);
  for (const auto& [k, v] : st.overrides) cfg.apply(k, v);
  cfg.validate();
  return cfg;
}

std::string summary_path(const std::string& rows_path) {
  const auto dot = rows_path.rfind(".csv");
  if (dot != std::string::npos && dot == rows_path.size() - 4)
    return rows_path.substr(0, dot) + "_summary.csv";
  return rows_path + "_summary.csv";
}

int cmd_gen_data(const CliState& st, const std::string& out) {
  const ExperimentConfig cfg = resolve(st);
  mmce::Rng rng(cfg.seed);
  const mmce::Dataset ds = mmce::build_dataset(cfg, rng);
  mmce::write_dataset(ds, out);
  mmce::write_config_echo(cfg, out + ".config");
  std::printf("wrote %zu image pairs (%dx%d) to %s\n", ds.pairs.size(), ds.g_r, ds.g_t,
              out.c_str());
  return 0;
}

int cmd_train(const CliState& st, const std::string& data, const std::string& out) {
  const ExperimentConfig cfg = resolve(st);
  const mmce::Dataset ds = mmce::read_dataset(data);
  mmce::TrainHyper hp;
  hp.lr = cfg.lr;
  hp.epochs = cfg.epochs;
  hp.batch_size = cfg.batch;
  hp.split = cfg.split;
  hp.patience = cfg.patience;
  mmce::Rng rng(cfg.seed);
  const mmce::DnCnn<float> net = mmce::train_dncnn(ds.pairs, hp, rng);
  mmce::save_weights(net, out);

  std::ofstream log(out + ".log.csv");
  if (!log) throw mmce::IoError("train: cannot open " + out + ".log.csv");
  log << "epoch,train_loss,val_loss\n";
  for (size_t e = 0; e < net.train_log.size(); ++e)
    log << e + 1 << ',' << net.train_log[e].first << ',' << net.train_log[e].second << '\n';

  const float best = net.train_log.empty() ? 0.f : net.train_log.back().second;
  std::printf("trained on %zu pairs, %zu epochs logged, saved %s (val loss %.6g)\n",
              ds.pairs.size(), net.train_log.size(), out.c_str(), best);
  return 0;
}

int cmd_sweep(const CliState& st, const std::string& out, bool quiet) {
  const ExperimentConfig cfg = resolve(st);
  const mmce::SweepResult res = mmce::run_sweep(cfg);
  mmce::write_rows_csv(res, out);
  mmce::write_summary_csv(res, summary_path(out));
  mmce::write_config_echo(cfg, out + ".config");
  if (!quiet)
    std::printf("sweep complete: %zu rows -> %s, summary -> %s\n", res.rows.size(), out.c_str(),
                summary_path(out).c_str());
  return 0;
}

int cmd_estimate(const CliState& st) {
  ExperimentConfig cfg = resolve(st);
  cfg.trials = 1;
  cfg.snr_db = {cfg.snr_db.front()};
  cfg.m_list = {cfg.m_list.front()};
  const mmce::SweepResult res = mmce::run_sweep(cfg);
  std::printf("%-16s %10s %8s %6s %10s %10s\n", "estimator", "nmse_db", "support", "l_hat",
              "se_bps_hz", "runtime_s");
  for (const auto& r : res.rows)
    std::printf("%-16s %10.3f %8s %6d %10.3f %10.4f\n", r.estimator.c_str(), r.nmse_db,
                r.support_hit ? "hit" : "miss", r.l_hat, r.se_bits_hz, r.runtime_s);
  return 0;
}

int cmd_bench(const CliState& st, int runs, const std::string& out) {
  const ExperimentConfig cfg = resolve(st);
  const mmce::BenchResult res = mmce::benchmark_runtimes(cfg, runs);
  std::printf("%-20s %8s %8s %12s\n", "estimator", "g_t", "g_r", "median_s");
  for (const auto& e : res.entries)
    std::printf("%-20s %8d %8d %12.4f\n", e.name.c_str(), e.g_t, e.g_r, e.median_s);
  std::printf("refined / swomp on refinement grids: %.3f\n", res.refined_vs_swomp_ratio);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw mmce::IoError("bench: cannot open " + out);
    f << "estimator,g_t,g_r,median_s,runs\n";
    for (const auto& e : res.entries)
      f << e.name << ',' << e.g_t << ',' << e.g_r << ',' << e.median_s << ',' << e.runs << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-selective mmWave hybrid-MIMO channel estimation simulator"};
  app.require_subcommand(1);

  CliState st_gen, st_train, st_est, st_sweep, st_bench;
  std::string gen_out = "dataset.bin", train_data, train_out = "weights.bin";
  std::string sweep_out = "sweep.csv", bench_out;
  int bench_runs = 20;
  bool quiet = false;

  auto* gen = app.add_subcommand("gen-data", "generate a denoiser training dataset");
  add_config_flags(gen, st_gen);
  gen->add_option("--out", gen_out, "output dataset file");

  auto* train = app.add_subcommand("train", "train the denoiser on a dataset file");
  add_config_flags(train, st_train);
  train->add_option("--data", train_data, "input dataset file")->required();
  train->add_option("--out", train_out, "output weights file");

  auto* est = app.add_subcommand("estimate", "run every estimator on one realization");
  add_config_flags(est, st_est);

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over SNR, M and trials");
  add_config_flags(sweep, st_sweep);
  sweep->add_option("--out", sweep_out, "output rows CSV");
  sweep->add_flag("--quiet", quiet, "suppress the completion line");

  auto* bench = app.add_subcommand("bench", "median estimator runtimes");
  add_config_flags(bench, st_bench);
  bench->add_option("--runs", bench_runs, "runs per estimator");
  bench->add_option("--out", bench_out, "optional CSV output");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(st_gen, gen_out);
    if (train->parsed()) return cmd_train(st_train, train_data, train_out);
    if (est->parsed()) return cmd_estimate(st_est);
    if (sweep->parsed()) return cmd_sweep(st_sweep, sweep_out, quiet);
    if (bench->parsed()) return cmd_bench(st_bench, bench_runs, bench_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const mmce::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const mmce::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const mmce::ParseError& e) {
    std::fprintf(stderr, "file format error: %s\n", e.what());
    return 3;
  } catch (const mmce::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
