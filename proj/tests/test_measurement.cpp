#include <doctest.h>

#include "mmce/estimators.hpp"
#include "mmce/measurement.hpp"
#include "oracles.hpp"

using namespace mmce;

namespace {

// Phase of z as a multiple of 2*pi/levels, or -1 if it is not one.
int phase_level(cxd z, int levels, double modulus) {
  if (std::abs(std::abs(z) - modulus) > 1e-12) return -1;
  double ph = std::arg(z);
  if (ph < 0) ph += 2.0 * kPi;
  const double step = 2.0 * kPi / levels;
  const int idx = static_cast<int>(std::lround(ph / step)) % levels;
  return std::abs(ph - idx * step) < 1e-9 || std::abs(ph - idx * step - 2.0 * kPi) < 1e-9 ? idx
                                                                                          : -1;
}

}  // namespace

TEST_CASE("training frames: quantized phases, exact moduli, determinism") {
  Rng rng(21);
  const TrainingFrames fr = generate_training_frames(rng, 100, 16, 64, 2, 4, 2, 16);
  CHECK(fr.m() == 100);
  for (int m = 0; m < 5; ++m) {
    for (int i = 0; i < fr.f_tr[m].size(); ++i)
      CHECK(phase_level(fr.f_tr[m].data()[i], 4, 1.0 / 4.0) >= 0);
    for (int i = 0; i < fr.w_tr[m].size(); ++i)
      CHECK(phase_level(fr.w_tr[m].data()[i], 4, 1.0 / 8.0) >= 0);
  }

  // N_Q = 1: entries are +-1 (up to the quantized-phase evaluation) over sqrt(N).
  Rng r1(3);
  const TrainingFrames bpsk = generate_training_frames(r1, 4, 8, 8, 2, 2, 1, 4);
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < bpsk.f_tr[m].size(); ++i) {
      const cxd z = bpsk.f_tr[m].data()[i] * std::sqrt(8.0);
      CHECK(std::min(std::abs(z - cxd(1, 0)), std::abs(z - cxd(-1, 0))) < 1e-12);
    }

  Rng ra(5), rb(5);
  const TrainingFrames a = generate_training_frames(ra, 3, 8, 8, 2, 2, 2, 4);
  const TrainingFrames b = generate_training_frames(rb, 3, 8, 8, 2, 2, 2, 4);
  for (int m = 0; m < 3; ++m) {
    CHECK(a.f_tr[m] == b.f_tr[m]);
    CHECK(a.w_tr[m] == b.w_tr[m]);
    CHECK(a.q[m] == b.q[m]);
  }

  CHECK_THROWS_AS(generate_training_frames(rng, 1, 4, 8, 4, 2, 2, 4), ConfigError);
  CHECK_THROWS_AS(generate_training_frames(rng, 1, 4, 8, 2, 8, 2, 4), ConfigError);
}

TEST_CASE("measurement matrix equals the Kronecker expansion") {
  Rng rng(17);
  const TrainingFrames fr = generate_training_frames(rng, 3, 4, 5, 2, 2, 2, 4);
  const MatrixXcd phi = measurement_matrix(fr);
  CHECK(phi.rows() == 3 * 2);
  CHECK(phi.cols() == 4 * 5);
  for (int m = 0; m < 3; ++m) {
    const MatrixXcd a = (fr.f_tr[m] * fr.q[m]).transpose();  // 1 x N_t
    const MatrixXcd block = oracle::kron(a, fr.w_tr[m].adjoint());
    CHECK((phi.middleRows(m * 2, 2) - block).norm() < 1e-14);
  }

  // Scalar case: one frame, one chain each side.
  Rng r1(2);
  const TrainingFrames s = generate_training_frames(r1, 1, 2, 2, 1, 1, 2, 4);
  const MatrixXcd phi1 = measurement_matrix(s);
  CHECK(phi1.rows() == 1);
  CHECK(phi1.cols() == 4);
  const MatrixXcd ref = oracle::kron((s.f_tr[0] * s.q[0]).transpose(), s.w_tr[0].adjoint());
  CHECK((phi1 - ref).norm() < 1e-14);
}

TEST_CASE("column-major vectorization convention") {
  // vec(A X B) = (B^T kron A) vec(X) for random small matrices.
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    MatrixXcd a(3, 2), x(2, 4), b(4, 3);
    for (auto* m : {&a, &x, &b})
      for (long i = 0; i < m->size(); ++i) m->data()[i] = rng.cgaussian();
    const VectorXcd lhs = oracle::vec(a * x * b);
    const VectorXcd rhs = oracle::kron(b.transpose(), a) * oracle::vec(x);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("received pilots follow the stacked forward model") {
  const Dictionary dict = build_dictionary(4, 8, 8, 16);
  Rng rng(33);
  PathSet ps = sample_paths(rng, 1, 4, 1.0, true, &dict);
  const FreqChannel h = make_channel(ps, 4, 8, 4);
  const TrainingFrames fr = generate_training_frames(rng, 6, 4, 8, 2, 2, 2, 4);

  Rng noise_rng(1);
  const MatrixXcd y = synthesize_received(h, fr, 0.0, noise_rng);
  const MatrixXcd phi = measurement_matrix(fr);

  // Direct Phi * vec(H[k]).
  for (int k = 0; k < 4; ++k)
    CHECK((y.col(k) - phi * oracle::vec(h.h[k])).norm() < 1e-10 * y.col(k).norm());

  // Sparse route Phi * Psi * h_v[k] for the on-grid channel.
  const MatrixXcd psi = dictionary_psi(dict);
  const VirtualGains vg = virtual_gains(ps, dict, 4);
  for (int k = 0; k < 4; ++k) {
    VectorXcd hv = VectorXcd::Zero(psi.cols());
    for (size_t s = 0; s < vg.support.size(); ++s) hv(vg.support[s]) = vg.gains(s, k);
    CHECK((y.col(k) - phi * psi * hv).norm() < 1e-9 * y.col(k).norm());
  }

  // Linearity: doubling the gains doubles the noiseless observation.
  PathSet doubled = ps;
  for (auto& p : doubled.paths) p.alpha *= 2.0;
  const MatrixXcd y2 = synthesize_noiseless(make_channel(doubled, 4, 8, 4), fr);
  CHECK((y2 - 2.0 * y).norm() < 1e-10 * y.norm());

  FreqChannel wrong = h;
  wrong.h[0] = MatrixXcd::Zero(3, 3);
  CHECK_THROWS_AS(synthesize_noiseless(wrong, fr), ConfigError);
}

TEST_CASE("combined noise has covariance sigma^2 C_w") {
  Rng rng(4);
  const TrainingFrames fr = generate_training_frames(rng, 2, 4, 4, 2, 2, 2, 1);
  const NoiseWhitening nw = noise_covariance(fr);
  FreqChannel zero;
  zero.h.assign(1, MatrixXcd::Zero(4, 4));

  const double sigma2 = 0.5;
  const int draws = 20000;
  MatrixXcd cov = MatrixXcd::Zero(4, 4);
  Rng noise_rng(77);
  for (int i = 0; i < draws; ++i) {
    const MatrixXcd y = synthesize_received(zero, fr, sigma2, noise_rng);
    cov += y.col(0) * y.col(0).adjoint();
  }
  cov /= draws;
  const MatrixXcd expected = sigma2 * nw.cw_dense();
  CHECK((cov - expected).norm() < 0.05 * expected.norm());
}

TEST_CASE("noise covariance blocks and Cholesky factor") {
  // Orthonormal combiner columns: C_w = I and D_w = I.
  TrainingFrames fr;
  fr.n_q = 2;
  MatrixXcd w = MatrixXcd::Zero(4, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  fr.w_tr = {w};
  fr.f_tr = {MatrixXcd::Constant(4, 2, cxd(0.5, 0.0))};
  fr.q = {VectorXcd::Constant(2, cxd(1.0, 0.0))};
  const NoiseWhitening id = noise_covariance(fr);
  CHECK((id.cw[0] - MatrixXcd::Identity(2, 2)).norm() < 1e-14);
  CHECK((id.dw[0] - MatrixXcd::Identity(2, 2)).norm() < 1e-14);

  Rng rng(8);
  const TrainingFrames rnd = generate_training_frames(rng, 5, 8, 8, 2, 4, 2, 4);
  const NoiseWhitening nw = noise_covariance(rnd);
  CHECK((nw.dw_dense().adjoint() * nw.dw_dense() - nw.cw_dense()).norm() < 1e-10);
  for (int m = 0; m < 5; ++m) {
    CHECK((nw.dw[m].adjoint() * nw.dw[m] - nw.cw[m]).norm() < 1e-10);
    // Upper triangular factor.
    for (int r = 1; r < 4; ++r)
      for (int c = 0; c < r; ++c) CHECK(nw.dw[m](r, c) == cxd(0.0, 0.0));
  }

  // Off-diagonal cross blocks of the dense covariance are exactly zero.
  const MatrixXcd dense = nw.cw_dense();
  CHECK(dense.block(0, 4, 4, 4).norm() == 0.0);

  // Rank-deficient combiner: duplicate columns make the block singular.
  TrainingFrames bad = rnd;
  bad.w_tr[2].col(1) = bad.w_tr[2].col(0);
  bad.w_tr[2].col(2) = bad.w_tr[2].col(0);
  bad.w_tr[2].col(3) = bad.w_tr[2].col(0);
  CHECK_THROWS_WITH_AS(static_cast<void>(noise_covariance(bad)),
                       doctest::Contains("block 2"), NumericError);
}

TEST_CASE("whitening: identities, round trip, whitened noise covariance") {
  Rng rng(10);
  const TrainingFrames fr = generate_training_frames(rng, 4, 6, 6, 2, 3, 2, 2);
  const NoiseWhitening nw = noise_covariance(fr);
  const MatrixXcd d = nw.dw_dense();
  const MatrixXcd c = nw.cw_dense();
  const int n = static_cast<int>(d.rows());

  // D^{-*} C D^{-1} = I.
  const MatrixXcd dinv = d.inverse();
  CHECK((dinv.adjoint() * c * dinv - MatrixXcd::Identity(n, n)).norm() < 1e-10);

  // Identity factor passes data through.
  MatrixXcd ups, yw;
  const MatrixXcd phi = measurement_matrix(fr);
  const Dictionary dict = build_dictionary(6, 6, 8, 8);
  const MatrixXcd psi = dictionary_psi(dict);
  MatrixXcd y(n, 2);
  for (long i = 0; i < y.size(); ++i) y.data()[i] = rng.cgaussian();
  whiten(phi, psi, MatrixXcd::Identity(n, n), y, ups, yw);
  CHECK((ups - phi * psi).norm() < 1e-12);
  CHECK((yw - y).norm() == 0.0);

  // Round trip through the block solver.
  const MatrixXcd y_w = nw.whiten(y);
  CHECK((nw.unwhiten(y_w) - y).norm() < 1e-10 * y.norm());
  whiten(phi, psi, d, y, ups, yw);
  CHECK((yw - y_w).norm() < 1e-10);

  MatrixXcd singular = d;
  singular(1, 1) = 0.0;
  CHECK_THROWS_AS(whiten(phi, psi, singular, y, ups, yw), NumericError);

  // Whitened pure noise is white: empirical covariance near sigma^2 I.
  FreqChannel zero;
  zero.h.assign(1, MatrixXcd::Zero(6, 6));
  const double sigma2 = 0.25;
  MatrixXcd cov = MatrixXcd::Zero(n, n);
  Rng noise_rng(55);
  for (int i = 0; i < 10000; ++i) {
    const MatrixXcd yn = nw.whiten(synthesize_received(zero, fr, sigma2, noise_rng));
    cov += yn.col(0) * yn.col(0).adjoint();
  }
  cov /= 10000;
  CHECK((cov - sigma2 * MatrixXcd::Identity(n, n)).norm() < 0.05 * sigma2 * n);
}

TEST_CASE("factored whitened operator matches the dense definition") {
  Rng rng(14);
  const Dictionary dict = build_dictionary(4, 6, 8, 12);
  const TrainingFrames fr = generate_training_frames(rng, 5, 4, 6, 2, 3, 2, 4);
  const NoiseWhitening nw = noise_covariance(fr);
  const WhitenedOperator op(fr, nw, dict);

  MatrixXcd ups, yw;
  MatrixXcd y(fr.m() * fr.l_r(), 4);
  for (long i = 0; i < y.size(); ++i) y.data()[i] = rng.cgaussian();
  whiten(measurement_matrix(fr), dictionary_psi(dict), nw.dw_dense(), y, ups, yw);

  const MatrixXcd dense = op.materialize();
  CHECK(dense.rows() == ups.rows());
  CHECK(dense.cols() == ups.cols());
  CHECK((dense - ups).norm() < 1e-10 * ups.norm());

  // Column and slice accessors agree with the materialized operator.
  for (long j : {0L, 5L, 37L, dense.cols() - 1}) CHECK((op.column(j) - dense.col(j)).norm() == 0.0);
  const MatrixXcd aoa = op.aoa_slice(3);
  CHECK((aoa - dense.middleCols(3 * 12, 12)).norm() < 1e-14 * aoa.norm());
  const MatrixXcd aod = op.aod_slice(7);
  for (int jt = 0; jt < 8; ++jt)
    CHECK((aod.col(jt) - dense.col(jt * 12 + 7)).norm() < 1e-14 * aod.norm());

  // Structured correlation equals the dense adjoint product.
  const MatrixXcd corr = op.correlate(yw);
  CHECK((corr - dense.adjoint() * yw).norm() < 1e-10 * corr.norm());
}

TEST_CASE("dense measurement set satisfies its invariants") {
  Rng rng(23);
  const Dictionary dict = build_dictionary(4, 6, 8, 12);
  const PathSet ps = sample_paths(rng, 3, 4, 1.0, false);
  const FreqChannel h = make_channel(ps, 4, 6, 4);
  const TrainingFrames fr = generate_training_frames(rng, 4, 4, 6, 2, 3, 2, 4);
  Rng noise(2);
  const MeasurementSet ms = build_measurement_set(h, fr, dict, 0.1, noise);

  CHECK((ms.d_w.adjoint() * ms.d_w - ms.c_w).norm() < 1e-10);
  const MatrixXcd dinv = ms.d_w.inverse();
  CHECK((ms.upsilon_w - dinv.adjoint() * ms.phi * ms.psi).norm() < 1e-10);
  CHECK((ms.y_w - dinv.adjoint() * ms.y).norm() < 1e-10);
  CHECK(ms.sigma2 == 0.1);

  // Block-diagonal structure: anything off the frame blocks is exactly zero.
  const NoiseWhitening nw = noise_covariance(fr);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const MatrixXcd block = ms.c_w.block(i * 3, j * 3, 3, 3);
      if (i == j)
        CHECK((block - nw.cw[i]).norm() == 0.0);
      else
        CHECK(block.norm() == 0.0);
    }
}
