// Independent reference implementations the tests check the library against.
// These deliberately use the most literal formulas (elementwise loops, dense
// Kronecker products, quadruple-loop convolutions) and stay clear of the code
// paths they verify.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "mmce/channel.hpp"

namespace oracle {

using mmce::cxd;
using mmce::MatrixXcd;
using mmce::MatrixXd;
using mmce::VectorXcd;
using mmce::VectorXd;

inline VectorXcd steering(double angle, int n) {
  VectorXcd a(n);
  for (int i = 0; i < n; ++i)
    a(i) = std::exp(cxd(0.0, i * mmce::kPi * std::cos(angle))) / std::sqrt(double(n));
  return a;
}

// Direct per-entry evaluation of the tap formula.
inline std::vector<MatrixXcd> channel_taps(const mmce::PathSet& ps, int n_t, int n_r) {
  std::vector<MatrixXcd> taps(ps.nc, MatrixXcd::Zero(n_r, n_t));
  const double scale = std::sqrt(n_t * n_r / (double(ps.l()) * ps.rho_l));
  for (int d = 0; d < ps.nc; ++d)
    for (int r = 0; r < n_r; ++r)
      for (int c = 0; c < n_t; ++c) {
        cxd acc = 0.0;
        for (const auto& p : ps.paths) {
          const cxd ar = std::exp(cxd(0.0, r * mmce::kPi * std::cos(p.aoa))) / std::sqrt(double(n_r));
          const cxd at = std::exp(cxd(0.0, c * mmce::kPi * std::cos(p.aod))) / std::sqrt(double(n_t));
          acc += p.alpha * mmce::raised_cosine(d * ps.ts - p.tau, ps.rolloff, ps.ts) * ar *
                 std::conj(at);
        }
        taps[d](r, c) = scale * acc;
      }
  return taps;
}

inline std::vector<MatrixXcd> channel_freq(const std::vector<MatrixXcd>& taps, int k) {
  std::vector<MatrixXcd> h(k, MatrixXcd::Zero(taps[0].rows(), taps[0].cols()));
  for (int kk = 0; kk < k; ++kk)
    for (size_t d = 0; d < taps.size(); ++d)
      h[kk] += taps[d] * std::exp(cxd(0.0, -2.0 * mmce::kPi * kk * double(d) / k));
  return h;
}

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline VectorXcd vec(const MatrixXcd& m) {
  return Eigen::Map<const VectorXcd>(m.data(), m.size());
}

// Raised cosine by shrinking-offset extrapolation around t (for the removable
// singularities).
inline double raised_cosine_limit(double t, double rolloff, double ts) {
  double prev = 0.0;
  for (int e = 3; e <= 7; ++e) {
    const double d = std::pow(10.0, -e) * ts;
    prev = 0.5 * (mmce::raised_cosine(t + d, rolloff, ts) +
                  mmce::raised_cosine(t - d, rolloff, ts));
  }
  return prev;
}

// Zero-padded stride-1 cross-correlation, quadruple loop. Images are
// (H*W, C) with pixel p = r + c*H; weights are (out, in*9) with patch row
// ci*9 + (di+1)*3 + (dj+1).
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> conv2d(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& x, int h, int w,
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& weight,
    const Eigen::Matrix<S, Eigen::Dynamic, 1>& bias) {
  const int c_in = int(x.cols()), c_out = int(weight.rows());
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> y(h * w, c_out);
  for (int co = 0; co < c_out; ++co)
    for (int c = 0; c < w; ++c)
      for (int r = 0; r < h; ++r) {
        S acc = bias(co);
        for (int ci = 0; ci < c_in; ++ci)
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
              const int rr = r + di, cc = c + dj;
              if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
              acc += weight(co, ci * 9 + (di + 1) * 3 + (dj + 1)) * x(rr + cc * h, ci);
            }
        y(r + c * h, co) = acc;
      }
  return y;
}

// Least squares through a different factorization than the library's QR.
inline MatrixXcd lstsq_svd(const MatrixXcd& a, const MatrixXcd& b) {
  return a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

inline std::vector<int> sort_desc_indices(const VectorXd& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) > v(b); });
  return idx;
}

}  // namespace oracle
