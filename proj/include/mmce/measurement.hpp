#pragma once

#include <vector>

#include "mmce/channel.hpp"
#include "mmce/rng.hpp"
#include "mmce/types.hpp"

namespace mmce {

// Pilot training frames: per frame, an analog precoder/combiner with
// phase-quantized unit-magnitude entries plus a frequency-flat symbol vector.
// Pilot scalars t[k] are normalized out at the receiver and fixed to 1.
struct TrainingFrames {
  std::vector<MatrixXcd> f_tr;  // N_t x L_t, entries with |.|^2 = 1/N_t
  std::vector<MatrixXcd> w_tr;  // N_r x L_r, entries with |.|^2 = 1/N_r
  std::vector<VectorXcd> q;     // L_t x 1, entries with |.| = 1/sqrt(L_t)
  int n_q = 2;                  // phase-quantization bits

  int m() const { return static_cast<int>(f_tr.size()); }
  int n_t() const { return f_tr.empty() ? 0 : static_cast<int>(f_tr[0].rows()); }
  int n_r() const { return w_tr.empty() ? 0 : static_cast<int>(w_tr[0].rows()); }
  int l_t() const { return f_tr.empty() ? 0 : static_cast<int>(f_tr[0].cols()); }
  int l_r() const { return w_tr.empty() ? 0 : static_cast<int>(w_tr[0].cols()); }
};

// Block-diagonal noise covariance of the stacked observation and its
// Cholesky factor, kept per frame: C_w^(m) = W_m^* W_m = D_m^* D_m with D_m
// upper triangular.
struct NoiseWhitening {
  std::vector<MatrixXcd> cw;  // L_r x L_r per frame
  std::vector<MatrixXcd> dw;  // upper-triangular factor per frame

  int m() const { return static_cast<int>(cw.size()); }
  int l_r() const { return cw.empty() ? 0 : static_cast<int>(cw[0].rows()); }
  int rows() const { return m() * l_r(); }

  // D_w^{-*} y, column-wise over a stacked M*L_r x n matrix.
  MatrixXcd whiten(const MatrixXcd& y) const;
  // D_w^* y_w (inverse of whiten).
  MatrixXcd unwhiten(const MatrixXcd& y_w) const;

  MatrixXcd cw_dense() const;
  MatrixXcd dw_dense() const;
};

// Whitened equivalent measurement operator D_w^{-*} Phi Psi held in
// Kronecker-factored form: block m is tx[m] (x) rx[m] with
//   tx[m] = (F_m q_m)^T conj(A_tx)        (1 x G_t)
//   rx[m] = D_m^{-*} W_m^* A_rx           (L_r x G_r)
// Columns, strided column slices, correlations and dense materialization are
// derived from the factors, so refinement-sized operators never have to be
// stored (G_t^r * G_r^r columns would not fit in memory at full scale).
class WhitenedOperator {
 public:
  WhitenedOperator() = default;
  WhitenedOperator(const TrainingFrames& frames, const NoiseWhitening& chol,
                   const Dictionary& dict);

  int rows() const { return m_ * l_r_; }
  long cols() const { return static_cast<long>(g_t_) * g_r_; }
  int g_r() const { return g_r_; }
  int g_t() const { return g_t_; }

  VectorXcd column(long j) const;
  MatrixXcd columns(const std::vector<int>& js) const;
  // All AoA cells with the AoD cell fixed: M*L_r x G_r.
  MatrixXcd aoa_slice(int i_aod) const;
  // All AoD cells with the AoA cell fixed: M*L_r x G_t.
  MatrixXcd aod_slice(int i_aoa) const;
  // Upsilon_w^* R for stacked vectors R (M*L_r x n) -> (G_t*G_r x n).
  MatrixXcd correlate(const MatrixXcd& r) const;
  MatrixXcd materialize() const;

 private:
  std::vector<RowVectorXcd> tx_;  // per frame, 1 x G_t
  std::vector<MatrixXcd> rx_;     // per frame, L_r x G_r
  int m_ = 0, l_r_ = 0, g_t_ = 0, g_r_ = 0;
};

// Dense assembly of every measurement-model ingredient. Intended for tests
// and small problems; sweeps use the factored operator instead.
struct MeasurementSet {
  MatrixXcd y;           // M*L_r x K stacked observations
  MatrixXcd y_w;         // whitened observations
  MatrixXcd phi;         // M*L_r x N_t*N_r
  MatrixXcd psi;         // N_t*N_r x G_t*G_r
  MatrixXcd c_w;         // M*L_r x M*L_r block diagonal
  MatrixXcd d_w;         // upper-triangular Cholesky factor
  MatrixXcd upsilon_w;   // D_w^{-*} Phi Psi
  double sigma2 = 0.0;
};

TrainingFrames generate_training_frames(Rng& rng, int m, int n_t, int n_r, int l_t,
                                        int l_r, int n_q, int k);

// Stacked measurement matrix, block m = (q_m^T F_m^T) (x) W_m^*.
MatrixXcd measurement_matrix(const TrainingFrames& frames);

// Psi = conj(A_tx) (x) A_rx, dense.
MatrixXcd dictionary_psi(const Dictionary& dict);

// y[k] = W_m^* H[k] F_m q_m + W_m^* n, n ~ CN(0, sigma2 I), stacked over m.
MatrixXcd synthesize_received(const FreqChannel& h, const TrainingFrames& frames,
                              double sigma2, Rng& rng);

// Noiseless stacked observations (the forward model without a noise draw).
MatrixXcd synthesize_noiseless(const FreqChannel& h, const TrainingFrames& frames);

// Throws NumericError naming the offending frame when a combiner block is not
// positive definite.
NoiseWhitening noise_covariance(const TrainingFrames& frames);

// Dense whitening per the definition: Upsilon_w = D_w^{-*} Phi Psi and
// y_w = D_w^{-*} y. D_w must be invertible (upper triangular, nonzero diagonal).
void whiten(const MatrixXcd& phi, const MatrixXcd& psi, const MatrixXcd& d_w,
            const MatrixXcd& y, MatrixXcd& upsilon_w, MatrixXcd& y_w);

MeasurementSet build_measurement_set(const FreqChannel& h, const TrainingFrames& frames,
                                     const Dictionary& dict, double sigma2, Rng& rng);

}  // namespace mmce
