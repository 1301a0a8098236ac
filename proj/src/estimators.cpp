#include "mmce/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace mmce {

namespace {

// Rank tolerance for the WLS pseudo-inverse: pivots below 1e-10 times the
// largest column norm are treated as zero.
constexpr double kRankTol = 1e-10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Incrementally grown WLS fit over the admitted support.
struct GreedyFit {
  MatrixXcd a;      // M*L_r x |support|
  MatrixXcd xi;     // |support| x K
  MatrixXcd resid;  // M*L_r x K
  std::vector<int> support;

  explicit GreedyFit(const MatrixXcd& y_w) : resid(y_w) {}

  // Returns false (state untouched) when the candidate column is linearly
  // dependent on the admitted ones at the rank tolerance.
  bool admit(int j, const VectorXcd& col, const MatrixXcd& y_w) {
    MatrixXcd trial(y_w.rows(), a.cols() + 1);
    if (a.cols() > 0) trial.leftCols(a.cols()) = a;
    trial.col(a.cols()) = col;
    Eigen::ColPivHouseholderQR<MatrixXcd> qr(trial);
    qr.setThreshold(kRankTol);
    if (qr.rank() < trial.cols()) return false;
    a = std::move(trial);
    support.push_back(j);
    xi = qr.solve(y_w);
    resid = y_w - a * xi;
    return true;
  }

  double mse() const {
    return resid.squaredNorm() / static_cast<double>(resid.size());
  }
};

void finalize(EstimationResult& res, GreedyFit& fit, const Dictionary& dict,
              const std::vector<int>& ks) {
  res.support = fit.support;
  res.l_hat = static_cast<int>(fit.support.size());
  res.xi = std::move(fit.xi);
  res.g_r = dict.g_r();
  res.g_t = dict.g_t();
  res.subcarriers = ks;
  res.h_hat = reconstruct_h(dict, res.support, res.xi);
}

std::vector<int> descending_order(const VectorXd& score) {
  std::vector<int> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&score](int a, int b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return a < b;
  });
  return order;
}

int argmax_lowest(const VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

// argmax_i of sum_{k in ks} |slice^* y_w[k]|.
int projection_argmax(const MatrixXcd& slice, const MatrixXcd& y_w, const std::vector<int>& ks) {
  VectorXd score = VectorXd::Zero(slice.cols());
  for (int k : ks) score += (slice.adjoint() * y_w.col(k)).cwiseAbs();
  return argmax_lowest(score);
}

}  // namespace

VectorXcd EstimationResult::hv(int k) const {
  VectorXcd v = VectorXcd::Zero(static_cast<long>(g_r) * g_t);
  for (int s = 0; s < l_hat; ++s) v(support[s]) = xi(s, k);
  return v;
}

int sub2ind(int g_r, int /*g_t*/, int i_aoa, int i_aod) { return i_aod * g_r + i_aoa; }

std::pair<int, int> ind2sub(int g_r, int /*g_t*/, int j) { return {j % g_r, j / g_r}; }

std::vector<int> strongest_subcarriers(const MatrixXcd& y, int k_p) {
  const int k = static_cast<int>(y.cols());
  if (k_p < 1 || k_p > k) throw ConfigError("strongest_subcarriers: K_p out of range");
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  VectorXd energy(k);
  for (int i = 0; i < k; ++i) energy(i) = y.col(i).squaredNorm();
  std::sort(order.begin(), order.end(), [&energy](int a, int b) {
    if (energy(a) != energy(b)) return energy(a) > energy(b);
    return a < b;
  });
  order.resize(k_p);
  return order;
}

MatrixXcd correlate(const WhitenedOperator& op, const MatrixXcd& r, const std::vector<int>& ks) {
  MatrixXcd sel(r.rows(), ks.size());
  for (size_t i = 0; i < ks.size(); ++i) sel.col(static_cast<int>(i)) = r.col(ks[i]);
  return op.correlate(sel);
}

MatrixXd amplitude_image(const VectorXcd& c, int g_r, int g_t) {
  if (c.size() != static_cast<long>(g_r) * g_t)
    throw ConfigError("amplitude_image: vector length does not match the grid");
  const VectorXd a = c.cwiseAbs();
  return Eigen::Map<const MatrixXd>(a.data(), g_r, g_t);
}

MatrixXd estimate_amplitudes(const DenoiserFn& denoiser, const MatrixXcd& corr, int g_r,
                             int g_t) {
  MatrixXd g_hat(corr.rows(), corr.cols());
  for (int i = 0; i < corr.cols(); ++i) {
    const MatrixXd denoised = denoiser(amplitude_image(corr.col(i), g_r, g_t));
    g_hat.col(i) = Eigen::Map<const VectorXd>(denoised.data(), denoised.size());
  }
  return g_hat;
}

VectorXd amplitude_score(const MatrixXd& g_hat, const std::vector<int>& ks) {
  std::vector<int> cols(ks.size());
  std::iota(cols.begin(), cols.end(), 0);
  std::sort(cols.begin(), cols.end(), [&ks](int a, int b) { return ks[a] < ks[b]; });
  VectorXd score = VectorXd::Zero(g_hat.rows());
  for (int c : cols) score += g_hat.col(c).cwiseAbs();
  return score;
}

EstimationResult reconstruct_channel(const VectorXd& score, const WhitenedOperator& ups_w,
                                     const MatrixXcd& y_w, double eps, const Dictionary& dict) {
  if (!(eps > 0.0)) throw ConfigError("reconstruct_channel: eps must be positive");
  const auto t0 = Clock::now();
  EstimationResult res;
  GreedyFit fit(y_w);
  const int max_rank = static_cast<int>(y_w.rows());
  for (int j : descending_order(score)) {
    if (static_cast<int>(fit.support.size()) >= max_rank) break;
    if (!fit.admit(j, ups_w.column(j), y_w)) {
      res.skipped.push_back(j);
      continue;
    }
    res.mse_trace.push_back(fit.mse());
    if (res.mse_trace.back() <= eps) break;
  }
  finalize(res, fit, dict, {});
  res.runtime_s = seconds_since(t0);
  return res;
}

int refine_support(int i_aoa_d, int i_aod_d, const WhitenedOperator& ups_mixed,
                   const WhitenedOperator& ups_refined, const MatrixXcd& y_w,
                   const std::vector<int>& ks, bool aoa_first) {
  int i_aoa, i_aod;
  if (aoa_first) {
    // AoA on the refined grid with the detected AoD fixed, then AoD on the
    // refined grid, then one more sweep of each with the uncertainty removed.
    i_aoa = projection_argmax(ups_mixed.aoa_slice(i_aod_d), y_w, ks);
    i_aod = projection_argmax(ups_refined.aod_slice(i_aoa), y_w, ks);
    i_aoa = projection_argmax(ups_refined.aoa_slice(i_aod), y_w, ks);
    i_aod = projection_argmax(ups_refined.aod_slice(i_aoa), y_w, ks);
  } else {
    i_aod = projection_argmax(ups_mixed.aod_slice(i_aoa_d), y_w, ks);
    i_aoa = projection_argmax(ups_refined.aoa_slice(i_aod), y_w, ks);
    i_aod = projection_argmax(ups_refined.aod_slice(i_aoa), y_w, ks);
    i_aoa = projection_argmax(ups_refined.aoa_slice(i_aod), y_w, ks);
  }
  return sub2ind(ups_refined.g_r(), ups_refined.g_t(), i_aoa, i_aod);
}

EstimationResult reconstruct_refined(const VectorXd& score, int coarse_g_r, int coarse_g_t,
                                     const WhitenedOperator& ups_mixed,
                                     const WhitenedOperator& ups_refined, const MatrixXcd& y_w,
                                     const std::vector<int>& ks, double eps,
                                     const Dictionary& refined_dict, bool aoa_first) {
  if (!(eps > 0.0)) throw ConfigError("reconstruct_refined: eps must be positive");
  const auto t0 = Clock::now();
  EstimationResult res;
  res.refined = true;
  GreedyFit fit(y_w);
  const int max_rank = static_cast<int>(y_w.rows());
  for (int j : descending_order(score)) {
    if (static_cast<int>(fit.support.size()) >= max_rank) break;
    const auto [i_aoa_d, i_aod_d] = ind2sub(coarse_g_r, coarse_g_t, j);
    const int jr = refine_support(i_aoa_d, i_aod_d, ups_mixed, ups_refined, y_w, ks, aoa_first);
    if (std::find(fit.support.begin(), fit.support.end(), jr) != fit.support.end() ||
        !fit.admit(jr, ups_refined.column(jr), y_w)) {
      res.skipped.push_back(j);
      continue;
    }
    res.mse_trace.push_back(fit.mse());
    if (res.mse_trace.back() <= eps) break;
  }
  finalize(res, fit, refined_dict, ks);
  res.runtime_s = seconds_since(t0);
  return res;
}

EstimationResult sw_omp(const MatrixXcd& y_w, const WhitenedOperator& ups_w, double eps,
                        const Dictionary& dict) {
  if (!(eps > 0.0)) throw ConfigError("sw_omp: eps must be positive");
  const auto t0 = Clock::now();
  EstimationResult res;
  GreedyFit fit(y_w);
  const long cells = ups_w.cols();
  const int max_rank = static_cast<int>(y_w.rows());
  std::vector<char> excluded(cells, 0);
  for (long iter = 0; iter < cells; ++iter) {
    if (static_cast<int>(fit.support.size()) >= max_rank) break;
    const VectorXd score = ups_w.correlate(fit.resid).cwiseAbs().rowwise().sum();
    int j = -1;
    double best = -1.0;
    for (long i = 0; i < cells; ++i)
      if (!excluded[i] && score(i) > best) {
        best = score(i);
        j = static_cast<int>(i);
      }
    if (j < 0) break;
    excluded[j] = 1;
    if (!fit.admit(j, ups_w.column(j), y_w)) {
      res.skipped.push_back(j);
      continue;
    }
    res.mse_trace.push_back(fit.mse());
    if (res.mse_trace.back() <= eps) break;
  }
  finalize(res, fit, dict, {});
  res.runtime_s = seconds_since(t0);
  return res;
}

EstimationResult cnn_cs_estimate(const MatrixXcd& y, const MatrixXcd& y_w,
                                 const WhitenedOperator& ups_w, const DenoiserFn& denoiser,
                                 int k_p, double eps, const Dictionary& dict) {
  const auto t0 = Clock::now();
  const std::vector<int> ks = strongest_subcarriers(y, k_p);
  const MatrixXcd corr = correlate(ups_w, y_w, ks);
  const MatrixXd g_hat = estimate_amplitudes(denoiser, corr, ups_w.g_r(), ups_w.g_t());
  EstimationResult res = reconstruct_channel(amplitude_score(g_hat, ks), ups_w, y_w, eps, dict);
  res.subcarriers = ks;
  res.runtime_s = seconds_since(t0);
  return res;
}

EstimationResult cnn_cs_refined_estimate(const MatrixXcd& y, const MatrixXcd& y_w,
                                         const WhitenedOperator& ups_w,
                                         const WhitenedOperator& ups_mixed,
                                         const WhitenedOperator& ups_refined,
                                         const DenoiserFn& denoiser, int k_p, double eps,
                                         const Dictionary& dict, const Dictionary& refined_dict,
                                         bool aoa_first) {
  const auto t0 = Clock::now();
  const std::vector<int> ks = strongest_subcarriers(y, k_p);
  const MatrixXcd corr = correlate(ups_w, y_w, ks);
  const MatrixXd g_hat = estimate_amplitudes(denoiser, corr, ups_w.g_r(), ups_w.g_t());
  EstimationResult res =
      reconstruct_refined(amplitude_score(g_hat, ks), dict.g_r(), dict.g_t(), ups_mixed,
                          ups_refined, y_w, ks, eps, refined_dict, aoa_first);
  res.runtime_s = seconds_since(t0);
  return res;
}

double estimate_noise_variance(const MatrixXcd& y_w, const WhitenedOperator& ups_w,
                               const std::vector<int>& support) {
  if (support.empty()) throw ConfigError("estimate_noise_variance: support must be nonempty");
  MatrixXcd xi, resid;
  wls_on_support(ups_w, support, y_w, xi, resid);
  return resid.squaredNorm() / static_cast<double>(resid.size());
}

void wls_on_support(const WhitenedOperator& ups_w, const std::vector<int>& support,
                    const MatrixXcd& y_w, MatrixXcd& xi, MatrixXcd& resid) {
  const MatrixXcd a = ups_w.columns(support);
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(a);
  qr.setThreshold(kRankTol);
  if (qr.rank() < a.cols()) throw NumericError("wls_on_support: support columns are rank deficient");
  xi = qr.solve(y_w);
  resid = y_w - a * xi;
}

std::vector<MatrixXcd> reconstruct_h(const Dictionary& dict, const std::vector<int>& support,
                                     const MatrixXcd& xi) {
  const int k = static_cast<int>(xi.cols());
  std::vector<MatrixXcd> h(k, MatrixXcd::Zero(dict.n_r(), dict.n_t()));
  for (size_t s = 0; s < support.size(); ++s) {
    const auto [i_aoa, i_aod] = ind2sub(dict.g_r(), dict.g_t(), support[s]);
    const MatrixXcd outer = dict.a_rx.col(i_aoa) * dict.a_tx.col(i_aod).adjoint();
    for (int kk = 0; kk < k; ++kk) h[kk] += xi(static_cast<int>(s), kk) * outer;
  }
  return h;
}

Dictionary mixed_dictionary(const Dictionary& tx_from, const Dictionary& rx_from) {
  Dictionary d;
  d.a_tx = tx_from.a_tx;
  d.grid_aod = tx_from.grid_aod;
  d.a_rx = rx_from.a_rx;
  d.grid_aoa = rx_from.grid_aoa;
  return d;
}

}  // namespace mmce
