#include "mmce/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

namespace mmce {

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool wants(const ExperimentConfig& cfg, const std::string& name) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) != cfg.estimators.end();
}

}  // namespace

double stopping_eps(const ExperimentConfig& cfg, double sigma2, const MatrixXcd& y_w) {
  if (sigma2 > 0.0) return cfg.eps_mult * sigma2;
  // Noiseless runs: the rule needs a positive threshold; use a relative floor.
  const double mean_energy = y_w.squaredNorm() / static_cast<double>(y_w.size());
  return std::max(1e-12 * mean_energy, 1e-300);
}

std::shared_ptr<const DnCnn<float>> load_denoiser_for(const ExperimentConfig& cfg) {
  if (!wants(cfg, "cnn-cs") && !wants(cfg, "cnn-cs-refined")) return nullptr;
  if (cfg.weights.empty())
    throw ConfigError("cnn estimators requested but no weights file configured");
  auto net = std::make_shared<DnCnn<float>>(load_weights(cfg.weights));
  if (net->img_rows != cfg.g_r || net->img_cols != cfg.g_t)
    throw ConfigError("weights were trained for a " + std::to_string(net->img_rows) + "x" +
                      std::to_string(net->img_cols) + " grid, config uses " +
                      std::to_string(cfg.g_r) + "x" + std::to_string(cfg.g_t));
  return net;
}

Dataset build_dataset(const ExperimentConfig& cfg, Rng& rng) {
  const Dictionary dict = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r);
  const int m = cfg.m_list.front();
  Dataset ds;
  ds.g_r = cfg.g_r;
  ds.g_t = cfg.g_t;
  ds.k_p = cfg.k_p;
  ds.pairs.reserve(static_cast<size_t>(cfg.dataset_size) * cfg.k_p);
  for (int i = 0; i < cfg.dataset_size; ++i) {
    Rng sub = rng.derive({0xDA7A, static_cast<uint64_t>(i)});
    const PathSet paths = sample_paths(sub, cfg.l, cfg.n_c, cfg.ts, true, &dict, cfg.rolloff);
    const FreqChannel h = make_channel(paths, cfg.n_t, cfg.n_r, cfg.k);
    const VirtualLabel label = virtual_label(paths, dict, cfg.k);
    const TrainingFrames frames =
        generate_training_frames(sub, m, cfg.n_t, cfg.n_r, cfg.l_t, cfg.l_r, cfg.n_q, cfg.k);
    const double snr = cfg.snr_db[sub.below(cfg.snr_db.size())];
    const double sigma2 = snr_to_sigma2(snr);
    const MatrixXcd y = synthesize_received(h, frames, sigma2, sub);
    const NoiseWhitening chol = noise_covariance(frames);
    const MatrixXcd y_w = chol.whiten(y);
    const WhitenedOperator ups(frames, chol, dict);
    const std::vector<int> ks = strongest_subcarriers(y, cfg.k_p);
    const MatrixXcd corr = correlate(ups, y_w, ks);
    for (size_t c = 0; c < ks.size(); ++c) {
      TrainingPair pair;
      pair.input = amplitude_image(corr.col(static_cast<int>(c)), cfg.g_r, cfg.g_t).cast<float>();
      pair.label = label.g[ks[c]].cast<float>();
      ds.pairs.push_back(std::move(pair));
    }
  }
  return ds;
}

namespace {

struct SharedSweepState {
  const ExperimentConfig& cfg;
  Dictionary dict, refined, mixed;
  std::shared_ptr<const DnCnn<float>> net;
  DenoiserFn denoiser;
  bool need_refined = false;
  bool aoa_first = true;
  std::string cfg_hash;
};

std::vector<ResultRow> run_trial(const SharedSweepState& st, int snr_idx, int m_idx, int trial) {
  const ExperimentConfig& cfg = st.cfg;
  const double snr_db = cfg.snr_db[snr_idx];
  const double sigma2 = snr_to_sigma2(snr_db);
  const int m = cfg.m_list[m_idx];

  Rng rng = Rng(cfg.seed).derive({0x731A1, static_cast<uint64_t>(snr_idx),
                                  static_cast<uint64_t>(m_idx), static_cast<uint64_t>(trial)});
  const PathSet paths =
      sample_paths(rng, cfg.l, cfg.n_c, cfg.ts, cfg.on_grid, &st.dict, cfg.rolloff);
  const FreqChannel h = make_channel(paths, cfg.n_t, cfg.n_r, cfg.k);
  const TrainingFrames frames =
      generate_training_frames(rng, m, cfg.n_t, cfg.n_r, cfg.l_t, cfg.l_r, cfg.n_q, cfg.k);
  const MatrixXcd y = synthesize_received(h, frames, sigma2, rng);
  const NoiseWhitening chol = noise_covariance(frames);
  const MatrixXcd y_w = chol.whiten(y);
  const double eps = stopping_eps(cfg, sigma2, y_w);
  const std::string realization =
      hex64(fnv1a_bytes(y.data(), static_cast<size_t>(y.size()) * sizeof(cxd)));

  const WhitenedOperator ups_w(frames, chol, st.dict);
  WhitenedOperator ups_mixed, ups_refined;
  if (st.need_refined) {
    ups_mixed = WhitenedOperator(frames, chol, st.mixed);
    ups_refined = WhitenedOperator(frames, chol, st.refined);
  }

  const std::vector<int> truth_coarse = nearest_support(paths, st.dict);
  const std::vector<int> truth_refined =
      st.need_refined ? nearest_support(paths, st.refined) : std::vector<int>();
  const SupportMode mode = cfg.on_grid ? SupportMode::exact : SupportMode::neighborhood;

  std::optional<double> ncrlb_db;
  if (cfg.on_grid)
    ncrlb_db = to_db(std::max(
        genie_nmse_single(h, ups_w, y_w, true_support(paths, st.dict), st.dict), 1e-30));

  const double snr_lin = std::pow(10.0, snr_db / 10.0);
  std::vector<ResultRow> rows;
  for (const auto& name : cfg.estimators) {
    ResultRow row;
    row.config_hash = st.cfg_hash;
    row.estimator = name;
    row.snr_db = snr_db;
    row.m = m;
    row.trial = trial;
    row.realization = realization;
    row.ncrlb_db = ncrlb_db;
    if (name == "perfect") {
      row.nmse_db = to_db(1e-30);
      row.support_hit = true;
      row.l_hat = paths.l();
      row.se_bits_hz = spectral_efficiency(h.h, h, snr_lin, cfg.n_s);
      row.runtime_s = 0.0;
    } else {
      EstimationResult res;
      if (name == "swomp") {
        res = sw_omp(y_w, ups_w, eps, st.dict);
      } else if (name == "cnn-cs") {
        res = cnn_cs_estimate(y, y_w, ups_w, st.denoiser, cfg.k_p, eps, st.dict);
      } else {
        res = cnn_cs_refined_estimate(y, y_w, ups_w, ups_mixed, ups_refined, st.denoiser,
                                      cfg.k_p, eps, st.dict, st.refined, st.aoa_first);
      }
      row.nmse_db = to_db(std::max(nmse(res.h_hat, h), 1e-30));
      row.support_hit = support_success(res.support, res.refined ? truth_refined : truth_coarse,
                                        res.g_r, res.g_t, mode);
      row.l_hat = res.l_hat;
      row.se_bits_hz = spectral_efficiency(res.h_hat, h, snr_lin, cfg.n_s);
      row.runtime_s = res.runtime_s;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SharedSweepState st{cfg, {}, {}, {}, nullptr, {}, false, true, cfg.hash()};
  st.dict = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r);
  st.need_refined = wants(cfg, "cnn-cs-refined");
  if (st.need_refined) {
    st.refined = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t_r, cfg.g_r_r);
    st.aoa_first = cfg.n_r >= cfg.n_t;
    st.mixed = st.aoa_first ? mixed_dictionary(st.dict, st.refined)
                            : mixed_dictionary(st.refined, st.dict);
  }
  st.net = load_denoiser_for(cfg);
  st.denoiser = st.net ? make_dncnn_denoiser(st.net) : make_identity_denoiser();

  struct Task {
    int snr_idx, m_idx, trial;
  };
  std::vector<Task> tasks;
  for (size_t si = 0; si < cfg.snr_db.size(); ++si)
    for (size_t mi = 0; mi < cfg.m_list.size(); ++mi)
      for (int t = 0; t < cfg.trials; ++t)
        tasks.push_back({static_cast<int>(si), static_cast<int>(mi), t});

  std::vector<std::vector<ResultRow>> out(tasks.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
      try {
        out[i] = run_trial(st, tasks[i].snr_idx, tasks[i].m_idx, tasks[i].trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult res;
  for (auto& rows : out)
    for (auto& r : rows) res.rows.push_back(std::move(r));
  return res;
}

BenchResult benchmark_runtimes(const ExperimentConfig& cfg, int runs) {
  cfg.validate();
  if (runs < 1) throw ConfigError("benchmark_runtimes: need at least one run");
  const Dictionary dict = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r);
  const Dictionary refined = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t_r, cfg.g_r_r);
  const bool aoa_first = cfg.n_r >= cfg.n_t;
  const Dictionary mixed =
      aoa_first ? mixed_dictionary(dict, refined) : mixed_dictionary(refined, dict);
  ExperimentConfig net_cfg = cfg;
  net_cfg.estimators = {"cnn-cs"};
  auto net = load_denoiser_for(net_cfg);
  const DenoiserFn denoiser = make_dncnn_denoiser(net);

  const double snr_db = -5.0;
  const double sigma2 = snr_to_sigma2(snr_db);
  const int m = cfg.m_list.front();

  std::map<std::string, std::vector<double>> times;
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng(cfg.seed).derive({0xBE7C, static_cast<uint64_t>(r)});
    const PathSet paths = sample_paths(rng, cfg.l, cfg.n_c, cfg.ts, false, &dict, cfg.rolloff);
    const FreqChannel h = make_channel(paths, cfg.n_t, cfg.n_r, cfg.k);
    const TrainingFrames frames =
        generate_training_frames(rng, m, cfg.n_t, cfg.n_r, cfg.l_t, cfg.l_r, cfg.n_q, cfg.k);
    const MatrixXcd y = synthesize_received(h, frames, sigma2, rng);
    const NoiseWhitening chol = noise_covariance(frames);
    const MatrixXcd y_w = chol.whiten(y);
    const double eps = stopping_eps(cfg, sigma2, y_w);
    // Operators are precomputable per frame set, so their construction stays
    // outside the timed region.
    const WhitenedOperator ups_w(frames, chol, dict);
    const WhitenedOperator ups_mixed(frames, chol, mixed);
    const WhitenedOperator ups_refined(frames, chol, refined);

    times["cnn-cs"].push_back(
        cnn_cs_estimate(y, y_w, ups_w, denoiser, cfg.k_p, eps, dict).runtime_s);
    times["cnn-cs-refined"].push_back(
        cnn_cs_refined_estimate(y, y_w, ups_w, ups_mixed, ups_refined, denoiser, cfg.k_p, eps,
                                dict, refined, aoa_first)
            .runtime_s);
    times["swomp"].push_back(sw_omp(y_w, ups_w, eps, dict).runtime_s);
    times["swomp-refined-grid"].push_back(sw_omp(y_w, ups_refined, eps, refined).runtime_s);
  }

  BenchResult out;
  auto push = [&](const std::string& name, int g_t, int g_r) {
    out.entries.push_back({name, g_t, g_r, median(times[name]), runs});
  };
  push("cnn-cs", cfg.g_t, cfg.g_r);
  push("cnn-cs-refined", cfg.g_t_r, cfg.g_r_r);
  push("swomp", cfg.g_t, cfg.g_r);
  push("swomp-refined-grid", cfg.g_t_r, cfg.g_r_r);
  out.refined_vs_swomp_ratio = median(times["cnn-cs-refined"]) / median(times["swomp-refined-grid"]);
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_rows_csv(const SweepResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_rows_csv: cannot open " + path);
  out << "config_hash,estimator,snr_db,m,trial,realization,nmse_db,ncrlb_db,support_hit,"
         "l_hat,se_bits_hz,runtime_s\n";
  for (const auto& r : res.rows) {
    out << r.config_hash << ',' << r.estimator << ',' << fmt_double(r.snr_db) << ',' << r.m << ','
        << r.trial << ',' << r.realization << ',' << fmt_double(r.nmse_db) << ','
        << (r.ncrlb_db ? fmt_double(*r.ncrlb_db) : std::string()) << ',' << (r.support_hit ? 1 : 0)
        << ',' << r.l_hat << ',' << fmt_double(r.se_bits_hz) << ',' << fmt_double(r.runtime_s)
        << '\n';
  }
  if (!out) throw IoError("write_rows_csv: write failed for " + path);
}

void write_summary_csv(const SweepResult& res, const std::string& path) {
  struct Acc {
    int n = 0, hits = 0;
    double nmse_sum = 0, nmse_sq = 0, ncrlb_sum = 0, lhat_sum = 0, se_sum = 0;
    int ncrlb_n = 0;
    std::vector<double> runtimes;
  };
  std::vector<std::tuple<std::string, double, int>> order;
  std::map<std::tuple<std::string, double, int>, Acc> groups;
  for (const auto& r : res.rows) {
    const auto key = std::make_tuple(r.estimator, r.snr_db, r.m);
    auto it = groups.find(key);
    if (it == groups.end()) {
      order.push_back(key);
      it = groups.emplace(key, Acc{}).first;
    }
    Acc& a = it->second;
    const double lin = std::pow(10.0, r.nmse_db / 10.0);
    a.n += 1;
    a.hits += r.support_hit ? 1 : 0;
    a.nmse_sum += lin;
    a.nmse_sq += lin * lin;
    if (r.ncrlb_db) {
      a.ncrlb_sum += std::pow(10.0, *r.ncrlb_db / 10.0);
      a.ncrlb_n += 1;
    }
    a.lhat_sum += r.l_hat;
    a.se_sum += r.se_bits_hz;
    a.runtimes.push_back(r.runtime_s);
  }
  std::ofstream out(path);
  if (!out) throw IoError("write_summary_csv: cannot open " + path);
  out << "estimator,snr_db,m,trials,nmse_mean,nmse_std,nmse_db,ncrlb_db,success_rate,"
         "l_hat_mean,se_mean,runtime_median\n";
  for (const auto& key : order) {
    const Acc& a = groups[key];
    const double mean = a.nmse_sum / a.n;
    const double var = std::max(0.0, a.nmse_sq / a.n - mean * mean);
    out << std::get<0>(key) << ',' << fmt_double(std::get<1>(key)) << ',' << std::get<2>(key)
        << ',' << a.n << ',' << fmt_double(mean) << ',' << fmt_double(std::sqrt(var)) << ','
        << fmt_double(to_db(std::max(mean, 1e-30))) << ','
        << (a.ncrlb_n ? fmt_double(to_db(std::max(a.ncrlb_sum / a.ncrlb_n, 1e-30)))
                      : std::string())
        << ',' << fmt_double(static_cast<double>(a.hits) / a.n) << ','
        << fmt_double(a.lhat_sum / a.n) << ',' << fmt_double(a.se_sum / a.n) << ','
        << fmt_double(median(a.runtimes)) << '\n';
  }
  if (!out) throw IoError("write_summary_csv: write failed for " + path);
}

void write_config_echo(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_config_echo: cannot open " + path);
  out << "# config hash: " << cfg.hash() << "\n" << cfg.echo();
  if (!out) throw IoError("write_config_echo: write failed for " + path);
}

}  // namespace mmce
