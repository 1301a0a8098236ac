#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmce/config.hpp"
#include "mmce/dataset.hpp"
#include "mmce/denoiser.hpp"
#include "mmce/estimators.hpp"
#include "mmce/metrics.hpp"

namespace mmce {

// One CSV row: a single estimator on a single Monte-Carlo realization.
struct ResultRow {
  std::string config_hash;
  std::string estimator;
  double snr_db = 0.0;
  int m = 0;
  int trial = 0;
  std::string realization;   // hash of the shared observation
  double nmse_db = 0.0;
  std::optional<double> ncrlb_db;  // genie bound, defined for on-grid truth only
  bool support_hit = false;
  int l_hat = 0;
  double se_bits_hz = 0.0;
  double runtime_s = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;
};

struct BenchEntry {
  std::string name;
  int g_t = 0, g_r = 0;  // grid the estimator searched
  double median_s = 0.0;
  int runs = 0;
};

struct BenchResult {
  std::vector<BenchEntry> entries;
  double refined_vs_swomp_ratio = 0.0;  // refined (refinement grids) / SW-OMP (same grids)
};

// Synthetic training corpus: on-grid channels, fresh frames per realization,
// per-realization SNR drawn uniformly from the config grid, inputs are the
// whitened correlation images of the K_p strongest subcarriers.
Dataset build_dataset(const ExperimentConfig& cfg, Rng& rng);

// Monte-Carlo sweep over (SNR, M, trial); every configured estimator sees the
// identical realization. Trials run on a worker pool; per-trial substreams
// keep the output schedule-independent.
SweepResult run_sweep(const ExperimentConfig& cfg);

// Median estimator runtimes at SNR -5 dB plus the headline refined-vs-SW-OMP
// ratio on the refinement grids.
BenchResult benchmark_runtimes(const ExperimentConfig& cfg, int runs);

// CSV emission. The rows file carries one line per ResultRow in a documented
// column order; the summary aggregates per (estimator, SNR, M).
void write_rows_csv(const SweepResult& res, const std::string& path);
void write_summary_csv(const SweepResult& res, const std::string& path);
void write_config_echo(const ExperimentConfig& cfg, const std::string& path);

// Stopping threshold for a trial: eps_mult * sigma^2, with a relative floor
// replacing the zero threshold on noiseless runs (the stopping rule requires
// a positive epsilon).
double stopping_eps(const ExperimentConfig& cfg, double sigma2, const MatrixXcd& y_w);

inline double snr_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

std::shared_ptr<const DnCnn<float>> load_denoiser_for(const ExperimentConfig& cfg);

}  // namespace mmce
