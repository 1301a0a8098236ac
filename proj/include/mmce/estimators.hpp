#pragma once

#include <utility>
#include <vector>

#include "mmce/denoiser.hpp"
#include "mmce/measurement.hpp"

namespace mmce {

struct EstimationResult {
  std::vector<int> support;       // admitted cells, in admission order
  int l_hat = 0;                  // |support|
  MatrixXcd xi;                   // l_hat x K WLS gains
  std::vector<double> mse_trace;  // residual MSE after each admitted cell
  bool refined = false;
  int g_r = 0, g_t = 0;           // grid the support indices live on
  std::vector<MatrixXcd> h_hat;   // K reconstructed N_r x N_t channels
  std::vector<int> skipped;       // candidates rejected as rank deficient
  std::vector<int> subcarriers;   // subcarrier subset used for amplitude estimation
  double runtime_s = 0.0;

  // Sparse virtual-channel vector of subcarrier k (nonzeros on the support).
  VectorXcd hv(int k) const;
};

// Column-major linear cell index: j = i_aod * g_r + i_aoa.
int sub2ind(int g_r, int g_t, int i_aoa, int i_aod);
std::pair<int, int> ind2sub(int g_r, int g_t, int j);

// Indices of the k_p subcarriers with the largest ||y[k]||^2, energy-descending,
// ties broken by the lower subcarrier index.
std::vector<int> strongest_subcarriers(const MatrixXcd& y, int k_p);

// c[k] = Upsilon_w^* r[k] for the selected subcarriers; column i corresponds to ks[i].
MatrixXcd correlate(const WhitenedOperator& op, const MatrixXcd& r, const std::vector<int>& ks);

// Column-major reshape of |c| into a G_r x G_t image.
MatrixXd amplitude_image(const VectorXcd& c, int g_r, int g_t);

// Denoised amplitude vectors: column i is vec(denoise(C_alpha[ks[i]])).
MatrixXd estimate_amplitudes(const DenoiserFn& denoiser, const MatrixXcd& corr, int g_r, int g_t);

// sum_{k in ks} |g_hat[k]|, accumulated in ascending-k order so the result is
// independent of the ordering of ks.
VectorXd amplitude_score(const MatrixXd& g_hat, const std::vector<int>& ks);

// Greedy reconstruction on a fixed amplitude ranking: walk the score in
// descending order, WLS-project onto the accumulated support, update the
// residual, stop once the residual MSE over all K subcarriers drops to eps.
EstimationResult reconstruct_channel(const VectorXd& score, const WhitenedOperator& ups_w,
                                     const MatrixXcd& y_w, double eps, const Dictionary& dict);

// Two-step multi-resolution refinement of one detected cell. When aoa_first,
// ups_mixed must hold the refined AoA grid against the coarse AoD grid;
// otherwise the coarse AoA grid against the refined AoD grid. Returns the
// linear index on the refined grid.
int refine_support(int i_aoa_d, int i_aod_d, const WhitenedOperator& ups_mixed,
                   const WhitenedOperator& ups_refined, const MatrixXcd& y_w,
                   const std::vector<int>& ks, bool aoa_first);

// As reconstruct_channel, but every admitted coarse candidate first passes
// through refine_support and WLS/residual/reconstruction use the refined grid.
EstimationResult reconstruct_refined(const VectorXd& score, int coarse_g_r, int coarse_g_t,
                                     const WhitenedOperator& ups_mixed,
                                     const WhitenedOperator& ups_refined, const MatrixXcd& y_w,
                                     const std::vector<int>& ks, double eps,
                                     const Dictionary& refined_dict, bool aoa_first);

// Classic simultaneous weighted OMP baseline: per iteration pick the cell with
// the largest correlation magnitude summed over all K subcarriers, then the
// same WLS / residual / stopping machinery as above.
EstimationResult sw_omp(const MatrixXcd& y_w, const WhitenedOperator& ups_w, double eps,
                        const Dictionary& dict);

// End-to-end drivers (subcarrier selection + amplitude estimation + reconstruction).
EstimationResult cnn_cs_estimate(const MatrixXcd& y, const MatrixXcd& y_w,
                                 const WhitenedOperator& ups_w, const DenoiserFn& denoiser,
                                 int k_p, double eps, const Dictionary& dict);

EstimationResult cnn_cs_refined_estimate(const MatrixXcd& y, const MatrixXcd& y_w,
                                         const WhitenedOperator& ups_w,
                                         const WhitenedOperator& ups_mixed,
                                         const WhitenedOperator& ups_refined,
                                         const DenoiserFn& denoiser, int k_p, double eps,
                                         const Dictionary& dict, const Dictionary& refined_dict,
                                         bool aoa_first);

// ML noise-variance estimate given a support: residual MSE of the WLS fit.
double estimate_noise_variance(const MatrixXcd& y_w, const WhitenedOperator& ups_w,
                               const std::vector<int>& support);

// WLS fit on a fixed support. Throws NumericError if the support columns are
// rank deficient.
void wls_on_support(const WhitenedOperator& ups_w, const std::vector<int>& support,
                    const MatrixXcd& y_w, MatrixXcd& xi, MatrixXcd& resid);

// vec(H[k]) = Psi_{:,support} xi[k], materialized as N_r x N_t matrices.
std::vector<MatrixXcd> reconstruct_h(const Dictionary& dict, const std::vector<int>& support,
                                     const MatrixXcd& xi);

// Dictionary combining the TX grid of one dictionary with the RX grid of
// another (used for the mixed-resolution refinement operator).
Dictionary mixed_dictionary(const Dictionary& tx_from, const Dictionary& rx_from);

}  // namespace mmce
