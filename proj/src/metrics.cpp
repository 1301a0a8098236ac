#include "mmce/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mmce {

double nmse(const std::vector<MatrixXcd>& h_hat, const FreqChannel& h) {
  if (h_hat.size() != h.h.size()) throw ConfigError("nmse: subcarrier counts disagree");
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < h.h.size(); ++k) {
    num += (h_hat[k] - h.h[k]).squaredNorm();
    den += h.h[k].squaredNorm();
  }
  if (den == 0.0) throw ConfigError("nmse: zero-energy reference channel");
  return num / den;
}

namespace {

// Map a grid index onto its canonical mirror representative.
inline int canon(int i, int g) { return std::min(i, (g - i) % g); }

inline std::pair<int, int> canon_cell(int j, int g_r, int g_t) {
  return {canon(j % g_r, g_r), canon(j / g_r, g_t)};
}

}  // namespace

bool support_success(const std::vector<int>& estimated, const std::vector<int>& truth,
                     int g_r, int g_t, SupportMode mode) {
  for (int t : truth) {
    const auto [tr, tc] = canon_cell(t, g_r, g_t);
    bool hit = false;
    for (int e : estimated) {
      const auto [er, ec] = canon_cell(e, g_r, g_t);
      if (mode == SupportMode::exact ? (er == tr && ec == tc)
                                     : (std::abs(er - tr) <= 1 && std::abs(ec - tc) <= 1)) {
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

double spectral_efficiency(const std::vector<MatrixXcd>& h_hat, const FreqChannel& h,
                           double snr, int n_s) {
  if (h_hat.size() != h.h.size()) throw ConfigError("spectral_efficiency: subcarrier counts disagree");
  if (n_s < 1 || n_s > std::min(h.n_r(), h.n_t()))
    throw ConfigError("spectral_efficiency: N_s must be in [1, min(N_t, N_r)]");
  double rate = 0.0;
  for (size_t k = 0; k < h.h.size(); ++k) {
    Eigen::JacobiSVD<MatrixXcd> svd(h_hat[k], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const MatrixXcd u = svd.matrixU().leftCols(n_s);
    const MatrixXcd v = svd.matrixV().leftCols(n_s);
    const MatrixXcd h_eff = u.adjoint() * h.h[k] * v;
    Eigen::JacobiSVD<MatrixXcd> eff(h_eff);
    for (int n = 0; n < n_s; ++n) {
      const double lam = eff.singularValues()(n);
      rate += std::log2(1.0 + snr / n_s * lam * lam);
    }
  }
  return rate / static_cast<double>(h.h.size());
}

double genie_nmse_single(const FreqChannel& h, const WhitenedOperator& ups_w,
                         const MatrixXcd& y_w, const std::vector<int>& true_supp,
                         const Dictionary& dict) {
  MatrixXcd xi, resid;
  wls_on_support(ups_w, true_supp, y_w, xi, resid);
  return nmse(reconstruct_h(dict, true_supp, xi), h);
}

double genie_ncrlb(const PathSet& paths, const FreqChannel& h, const TrainingFrames& frames,
                   const NoiseWhitening& chol, const WhitenedOperator& ups_w,
                   const Dictionary& dict, double sigma2, int trials, Rng& rng) {
  const std::vector<int> supp = true_support(paths, dict);  // throws on off-grid input
  const MatrixXcd y0 = synthesize_noiseless(h, frames);
  const double sd = std::sqrt(sigma2);
  const int l_r = frames.l_r(), n_r = frames.n_r();
  double acc = 0.0;
  VectorXcd noise(n_r);
  for (int t = 0; t < trials; ++t) {
    MatrixXcd y = y0;
    if (sigma2 > 0.0) {
      for (int m = 0; m < frames.m(); ++m) {
        const MatrixXcd wc = frames.w_tr[m].adjoint();
        for (int k = 0; k < h.k(); ++k) {
          for (int i = 0; i < n_r; ++i) noise(i) = sd * rng.cgaussian();
          y.col(k).segment(m * l_r, l_r) += wc * noise;
        }
      }
    }
    acc += genie_nmse_single(h, ups_w, chol.whiten(y), supp, dict);
  }
  return acc / trials;
}

}  // namespace mmce
