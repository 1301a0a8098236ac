#include "mmce/measurement.hpp"

#include <cmath>
#include <string>

namespace mmce {

namespace {

// Unit-modulus entry with an N_Q-bit quantized phase.
cxd quantized_phase_entry(Rng& rng, int n_q, double modulus) {
  const int levels = 1 << n_q;
  const double phase = 2.0 * kPi * static_cast<double>(rng.below(levels)) / levels;
  return cxd(modulus * std::cos(phase), modulus * std::sin(phase));
}

}  // namespace

MatrixXcd NoiseWhitening::whiten(const MatrixXcd& y) const {
  MatrixXcd out(y.rows(), y.cols());
  const int lr = l_r();
  for (int i = 0; i < m(); ++i) {
    // D^* is lower triangular; forward substitution per block.
    out.middleRows(i * lr, lr) =
        dw[i].adjoint().triangularView<Eigen::Lower>().solve(y.middleRows(i * lr, lr));
  }
  return out;
}

MatrixXcd NoiseWhitening::unwhiten(const MatrixXcd& y_w) const {
  MatrixXcd out(y_w.rows(), y_w.cols());
  const int lr = l_r();
  for (int i = 0; i < m(); ++i)
    out.middleRows(i * lr, lr) = dw[i].adjoint() * y_w.middleRows(i * lr, lr);
  return out;
}

MatrixXcd NoiseWhitening::cw_dense() const {
  MatrixXcd out = MatrixXcd::Zero(rows(), rows());
  const int lr = l_r();
  for (int i = 0; i < m(); ++i) out.block(i * lr, i * lr, lr, lr) = cw[i];
  return out;
}

MatrixXcd NoiseWhitening::dw_dense() const {
  MatrixXcd out = MatrixXcd::Zero(rows(), rows());
  const int lr = l_r();
  for (int i = 0; i < m(); ++i) out.block(i * lr, i * lr, lr, lr) = dw[i];
  return out;
}

TrainingFrames generate_training_frames(Rng& rng, int m, int n_t, int n_r, int l_t,
                                        int l_r, int n_q, int /*k*/) {
  if (m < 1) throw ConfigError("generate_training_frames: need at least one frame");
  if (l_t >= n_t || l_r >= n_r)
    throw ConfigError("generate_training_frames: hybrid architecture requires L_t < N_t and L_r < N_r");
  if (n_q < 1) throw ConfigError("generate_training_frames: N_Q must be >= 1");

  TrainingFrames fr;
  fr.n_q = n_q;
  fr.f_tr.reserve(m);
  fr.w_tr.reserve(m);
  fr.q.reserve(m);
  const double f_mod = 1.0 / std::sqrt(static_cast<double>(n_t));
  const double w_mod = 1.0 / std::sqrt(static_cast<double>(n_r));
  // Unit-modulus symbol entries scaled so that E||F q||^2 = 1 (total power 1).
  const double q_mod = 1.0 / std::sqrt(static_cast<double>(l_t));
  for (int i = 0; i < m; ++i) {
    MatrixXcd f(n_t, l_t);
    for (int c = 0; c < l_t; ++c)
      for (int r = 0; r < n_t; ++r) f(r, c) = quantized_phase_entry(rng, n_q, f_mod);
    MatrixXcd w(n_r, l_r);
    for (int c = 0; c < l_r; ++c)
      for (int r = 0; r < n_r; ++r) w(r, c) = quantized_phase_entry(rng, n_q, w_mod);
    VectorXcd q(l_t);
    for (int r = 0; r < l_t; ++r) q(r) = quantized_phase_entry(rng, n_q, q_mod);
    fr.f_tr.push_back(std::move(f));
    fr.w_tr.push_back(std::move(w));
    fr.q.push_back(std::move(q));
  }
  return fr;
}

MatrixXcd measurement_matrix(const TrainingFrames& fr) {
  const int n_t = fr.n_t(), n_r = fr.n_r(), l_r = fr.l_r();
  MatrixXcd phi(fr.m() * l_r, n_t * n_r);
  for (int m = 0; m < fr.m(); ++m) {
    const RowVectorXcd a = (fr.f_tr[m] * fr.q[m]).transpose();  // q^T F^T, 1 x N_t
    const MatrixXcd wc = fr.w_tr[m].adjoint();                  // L_r x N_r
    for (int j = 0; j < n_t; ++j)
      phi.block(m * l_r, j * n_r, l_r, n_r) = a(j) * wc;
  }
  return phi;
}

MatrixXcd dictionary_psi(const Dictionary& dict) {
  const int n_t = dict.n_t(), n_r = dict.n_r();
  const int g_t = dict.g_t(), g_r = dict.g_r();
  MatrixXcd psi(n_t * n_r, static_cast<long>(g_t) * g_r);
  for (int jt = 0; jt < g_t; ++jt) {
    const VectorXcd at = dict.a_tx.col(jt).conjugate();
    for (int jr = 0; jr < g_r; ++jr) {
      const long col = static_cast<long>(jt) * g_r + jr;
      for (int it = 0; it < n_t; ++it)
        psi.col(col).segment(it * n_r, n_r) = at(it) * dict.a_rx.col(jr);
    }
  }
  return psi;
}

MatrixXcd synthesize_noiseless(const FreqChannel& h, const TrainingFrames& fr) {
  if (h.n_t() != fr.n_t() || h.n_r() != fr.n_r())
    throw ConfigError("synthesize_received: channel and frame dimensions disagree");
  const int l_r = fr.l_r();
  MatrixXcd y(fr.m() * l_r, h.k());
  for (int m = 0; m < fr.m(); ++m) {
    const VectorXcd fq = fr.f_tr[m] * fr.q[m];
    const MatrixXcd wc = fr.w_tr[m].adjoint();
    for (int k = 0; k < h.k(); ++k) y.col(k).segment(m * l_r, l_r) = wc * (h.h[k] * fq);
  }
  return y;
}

MatrixXcd synthesize_received(const FreqChannel& h, const TrainingFrames& fr,
                              double sigma2, Rng& rng) {
  MatrixXcd y = synthesize_noiseless(h, fr);
  if (sigma2 > 0.0) {
    const double sd = std::sqrt(sigma2);
    const int l_r = fr.l_r(), n_r = fr.n_r();
    VectorXcd n(n_r);
    for (int m = 0; m < fr.m(); ++m) {
      const MatrixXcd wc = fr.w_tr[m].adjoint();
      for (int k = 0; k < h.k(); ++k) {
        for (int i = 0; i < n_r; ++i) n(i) = sd * rng.cgaussian();
        y.col(k).segment(m * l_r, l_r) += wc * n;
      }
    }
  }
  return y;
}

NoiseWhitening noise_covariance(const TrainingFrames& fr) {
  NoiseWhitening nw;
  nw.cw.reserve(fr.m());
  nw.dw.reserve(fr.m());
  for (int m = 0; m < fr.m(); ++m) {
    MatrixXcd c = fr.w_tr[m].adjoint() * fr.w_tr[m];
    Eigen::LLT<MatrixXcd> llt(c);
    if (llt.info() != Eigen::Success)
      throw NumericError("noise_covariance: combiner block " + std::to_string(m) +
                         " is not positive definite");
    // C = L L^* with L lower; D = L^* is the upper-triangular factor.
    nw.dw.push_back(MatrixXcd(llt.matrixL()).adjoint());
    nw.cw.push_back(std::move(c));
  }
  return nw;
}

void whiten(const MatrixXcd& phi, const MatrixXcd& psi, const MatrixXcd& d_w,
            const MatrixXcd& y, MatrixXcd& upsilon_w, MatrixXcd& y_w) {
  for (int i = 0; i < d_w.rows(); ++i)
    if (std::abs(d_w(i, i)) < 1e-14)
      throw NumericError("whiten: singular whitening factor");
  const auto lower = d_w.adjoint().triangularView<Eigen::Lower>();
  upsilon_w = lower.solve(MatrixXcd(phi * psi));
  y_w = lower.solve(y);
}

WhitenedOperator::WhitenedOperator(const TrainingFrames& frames, const NoiseWhitening& chol,
                                   const Dictionary& dict) {
  if (frames.n_t() != dict.n_t() || frames.n_r() != dict.n_r())
    throw ConfigError("WhitenedOperator: frame and dictionary dimensions disagree");
  m_ = frames.m();
  l_r_ = frames.l_r();
  g_t_ = dict.g_t();
  g_r_ = dict.g_r();
  tx_.reserve(m_);
  rx_.reserve(m_);
  for (int m = 0; m < m_; ++m) {
    tx_.push_back((frames.f_tr[m] * frames.q[m]).transpose() * dict.a_tx.conjugate());
    const MatrixXcd raw = frames.w_tr[m].adjoint() * dict.a_rx;
    rx_.push_back(chol.dw[m].adjoint().triangularView<Eigen::Lower>().solve(raw));
  }
}

VectorXcd WhitenedOperator::column(long j) const {
  const int i_aoa = static_cast<int>(j % g_r_);
  const int i_aod = static_cast<int>(j / g_r_);
  VectorXcd out(rows());
  for (int m = 0; m < m_; ++m)
    out.segment(m * l_r_, l_r_) = tx_[m](i_aod) * rx_[m].col(i_aoa);
  return out;
}

MatrixXcd WhitenedOperator::columns(const std::vector<int>& js) const {
  MatrixXcd out(rows(), static_cast<int>(js.size()));
  for (size_t c = 0; c < js.size(); ++c) out.col(static_cast<int>(c)) = column(js[c]);
  return out;
}

MatrixXcd WhitenedOperator::aoa_slice(int i_aod) const {
  MatrixXcd out(rows(), g_r_);
  for (int m = 0; m < m_; ++m) out.middleRows(m * l_r_, l_r_) = tx_[m](i_aod) * rx_[m];
  return out;
}

MatrixXcd WhitenedOperator::aod_slice(int i_aoa) const {
  MatrixXcd out(rows(), g_t_);
  for (int m = 0; m < m_; ++m)
    out.middleRows(m * l_r_, l_r_) = rx_[m].col(i_aoa) * tx_[m];
  return out;
}

MatrixXcd WhitenedOperator::correlate(const MatrixXcd& r) const {
  const int n = static_cast<int>(r.cols());
  MatrixXcd out = MatrixXcd::Zero(cols(), n);
  // Column j of block m is tx[m](aod) * rx[m](:, aoa), so
  // c(aoa + aod*G_r) = sum_m conj(tx[m](aod)) * (rx[m]^* r_m)(aoa).
  for (int m = 0; m < m_; ++m) {
    const MatrixXcd u = rx_[m].adjoint() * r.middleRows(m * l_r_, l_r_);  // G_r x n
    const RowVectorXcd t = tx_[m].conjugate();
    for (int c = 0; c < n; ++c) {
      Eigen::Map<MatrixXcd> cm(out.data() + static_cast<long>(c) * cols(), g_r_, g_t_);
      cm.noalias() += u.col(c) * t;
    }
  }
  return out;
}

MatrixXcd WhitenedOperator::materialize() const {
  MatrixXcd out(rows(), cols());
  for (long j = 0; j < cols(); ++j) out.col(j) = column(j);
  return out;
}

MeasurementSet build_measurement_set(const FreqChannel& h, const TrainingFrames& frames,
                                     const Dictionary& dict, double sigma2, Rng& rng) {
  MeasurementSet ms;
  ms.sigma2 = sigma2;
  ms.y = synthesize_received(h, frames, sigma2, rng);
  ms.phi = measurement_matrix(frames);
  ms.psi = dictionary_psi(dict);
  const NoiseWhitening nw = noise_covariance(frames);
  ms.c_w = nw.cw_dense();
  ms.d_w = nw.dw_dense();
  whiten(ms.phi, ms.psi, ms.d_w, ms.y, ms.upsilon_w, ms.y_w);
  return ms;
}

}  // namespace mmce
