#pragma once

#include <vector>

#include "mmce/channel.hpp"
#include "mmce/estimators.hpp"
#include "mmce/measurement.hpp"

namespace mmce {

// Relative estimation error summed over subcarriers.
double nmse(const std::vector<MatrixXcd>& h_hat, const FreqChannel& h);

inline double to_db(double x) { return 10.0 * std::log10(x); }

enum class SupportMode { exact, neighborhood };

// Support-detection success. Cells are compared after canonicalizing the
// angle-grid mirror ambiguity (grid indices i and G - i carry identical
// steering vectors, so the measurements cannot distinguish them). exact mode
// requires every true cell to be recovered; neighborhood mode accepts cells
// within one grid step per axis.
bool support_success(const std::vector<int>& estimated, const std::vector<int>& truth,
                     int g_r, int g_t, SupportMode mode);

// Fully-digital spectral efficiency: the n_s dominant singular directions of
// h_hat applied to the true channel. snr is linear.
double spectral_efficiency(const std::vector<MatrixXcd>& h_hat, const FreqChannel& h,
                           double snr, int n_s);

// Genie-aided error floor: the WLS estimator evaluated on the true support
// over fresh noise draws. Requires an on-grid PathSet (the bound is undefined
// otherwise). Returns the mean NMSE across trials.
double genie_ncrlb(const PathSet& paths, const FreqChannel& h, const TrainingFrames& frames,
                   const NoiseWhitening& chol, const WhitenedOperator& ups_w,
                   const Dictionary& dict, double sigma2, int trials, Rng& rng);

// Genie WLS on one concrete whitened observation (paired with an estimator run).
double genie_nmse_single(const FreqChannel& h, const WhitenedOperator& ups_w,
                         const MatrixXcd& y_w, const std::vector<int>& true_supp,
                         const Dictionary& dict);

}  // namespace mmce
