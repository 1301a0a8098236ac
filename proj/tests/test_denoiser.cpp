#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "mmce/denoiser.hpp"
#include "oracles.hpp"

using namespace mmce;

namespace {

using Net = DnCnn<double>;
using Mat = Net::Mat;

Mat random_image(Rng& rng, int h, int w, double scale = 1.0) {
  Mat img(h, w);
  for (long i = 0; i < img.size(); ++i) img.data()[i] = scale * std::abs(rng.gaussian());
  return img;
}

Net zero_net(int h, int w) {
  Rng rng(0);
  Net net = Net::init(h, w, rng);
  net.w1.setZero();
  net.w2.setZero();
  net.w3.setZero();
  return net;
}

// Full forward pass in inference mode built from the quadruple-loop oracle.
Mat oracle_residual(const Net& net, const Mat& img) {
  const int h = int(img.rows()), w = int(img.cols());
  const Mat x = Eigen::Map<const Mat>(img.data(), h * w, 1);
  Mat a1 = oracle::conv2d<double>(x, h, w, net.w1, net.b1).cwiseMax(0.0);
  Mat z2 = oracle::conv2d<double>(a1, h, w, net.w2, net.b2);
  for (int c = 0; c < Net::kChannels; ++c)
    z2.col(c) = (((z2.col(c).array() - net.bn_mean(c)) / std::sqrt(net.bn_var(c) + 1e-5)) *
                     net.bn_gamma(c) +
                 net.bn_beta(c))
                    .matrix();
  const Mat a2 = z2.cwiseMax(0.0);
  const Mat r = oracle::conv2d<double>(a2, h, w, net.w3, net.b3);
  return Eigen::Map<const Mat>(r.data(), h, w);
}

}  // namespace

TEST_CASE("forward: residual identities and convolution-definition agreement") {
  Rng rng(1);
  const Mat img = random_image(rng, 8, 8);

  // All-zero conv weights predict a zero residual: output equals the input.
  const Net zero = zero_net(8, 8);
  CHECK((zero.denoise_normalized(img) - img).norm() == 0.0);

  // Zero input with zero biases stays zero.
  CHECK(zero.denoise_normalized(Mat::Zero(8, 8)).norm() == 0.0);

  // Random small weights against the naive convolution oracle.
  Rng wr(2);
  Net net = Net::init(8, 8, wr);
  for (int c = 0; c < Net::kChannels; ++c) {
    net.bn_mean(c) = 0.01 * (c % 7);
    net.bn_var(c) = 0.5 + 0.01 * c;
    net.bn_gamma(c) = 0.5 + 0.1 * c / 64.0;
    net.bn_beta(c) = 0.05 * (c % 5);
  }
  const Mat got = net.residual(img);
  const Mat ref = oracle_residual(net, img);
  CHECK((got - ref).norm() < 1e-10 * std::max(1.0, ref.norm()));

  // Inference determinism: bitwise identical on repeat evaluation.
  CHECK((net.residual(img) - got).norm() == 0.0);

  Net wrong = net;
  wrong.norm_const = 1.0;
  CHECK_THROWS_AS(wrong.cast<float>().denoise(MatrixXd::Zero(4, 4)), ConfigError);
}

TEST_CASE("loss: exact values on crafted cases") {
  Rng rng(3);
  const Mat x = random_image(rng, 4, 4);

  // Zero weights and label = input: the residual target is zero.
  const Net zero = zero_net(4, 4);
  CHECK(dncnn_loss(zero, {{x, x}}) == 0.0);

  // Bias-only network predicting exactly the residual.
  Net bias_net = zero_net(4, 4);
  bias_net.b3(0) = 0.75;
  const Mat label = x - Mat::Constant(4, 4, 0.75);
  CHECK(dncnn_loss(bias_net, {{x, label}}) < 1e-20);

  // Hand-computed 2x2 case with a zero network: loss = ||x - g||_F^2 / 2.
  Mat x2(2, 2), g2(2, 2);
  x2 << 1.0, 2.0, 3.0, 4.0;
  g2 << 0.5, 1.0, 2.0, 6.0;
  // Residual target entries: 0.5, 1.0, 1.0, -2.0 -> squared sum 6.25.
  const Net z2 = zero_net(2, 2);
  CHECK(dncnn_loss(z2, {{x2, g2}}) == doctest::Approx(6.25 / 2.0).epsilon(1e-12));

  // Quadratic scaling: doubling inputs and labels quadruples the loss.
  const double base = dncnn_loss(z2, {{x2, g2}});
  CHECK(dncnn_loss(z2, {{2.0 * x2, 2.0 * g2}}) == doctest::Approx(4.0 * base).epsilon(1e-12));

  CHECK_THROWS_AS(dncnn_loss(z2, {}), ConfigError);
}

TEST_CASE("batch normalization: train-mode output has mean beta, variance gamma^2") {
  const int h = 6, w = 5;
  Rng rng(7);
  Net net = Net::init(h, w, rng);
  // beta large enough that gamma * xhat + beta stays positive: |xhat| is
  // bounded by sqrt(count) < 10 under the biased batch normalization.
  net.bn_gamma.setConstant(0.5);
  net.bn_beta.setConstant(10.0);
  // conv3 reads out BN channel 0 through the center tap only.
  net.w3.setZero();
  net.b3.setZero();
  net.w3(0, 0 * 9 + 4) = 1.0;

  std::vector<ImgPair<double>> batch;
  for (int i = 0; i < 3; ++i) {
    const Mat x = random_image(rng, h, w);
    batch.push_back({x, x});  // residual target 0: the loss reveals the BN output energy
  }

  // Independent forward through the oracle up to z2 for channel-0 statistics.
  double sum = 0.0, sumsq = 0.0;
  const double count = 3.0 * h * w;
  for (const auto& [x, g] : batch) {
    const Mat xv = Eigen::Map<const Mat>(x.data(), h * w, 1);
    const Mat a1 = oracle::conv2d<double>(xv, h, w, net.w1, net.b1).cwiseMax(0.0);
    const Mat z2 = oracle::conv2d<double>(a1, h, w, net.w2, net.b2);
    sum += z2.col(0).sum();
    sumsq += z2.col(0).squaredNorm();
  }
  const double mean = sum / count;
  const double var = sumsq / count - mean * mean;

  // BN output channel 0 is gamma * xhat + beta under batch statistics; beta
  // keeps it positive through the ReLU, so the residual is exactly that
  // channel: per-pixel mean beta and variance gamma^2 * var/(var + eps).
  const double expected = count * (0.25 * var / (var + 1e-5) + 100.0) / (2.0 * batch.size());
  CHECK(dncnn_loss(net, batch) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central finite differences") {
  const int h = 6, w = 6;
  Rng rng(11);
  Net net = Net::init(h, w, rng);
  // Nontrivial BN parameters so their gradient paths are exercised.
  for (int c = 0; c < Net::kChannels; ++c) {
    net.bn_gamma(c) = 1.0 + 0.2 * std::sin(0.7 * c);
    net.bn_beta(c) = 0.1 * std::cos(0.3 * c);
  }

  std::vector<ImgPair<double>> batch;
  Rng ir(5);
  for (int i = 0; i < 3; ++i) {
    const Mat x = random_image(ir, h, w);
    Mat g = x;
    for (long p = 0; p < g.size(); ++p) g.data()[p] *= 0.5 + 0.1 * ((p * 7 + i) % 5);
    batch.push_back({x, g});
  }

  DnCnnGrads<double> grads;
  dncnn_loss_grad(net, batch, grads);

  const double step = 1e-4;
  auto fd_check = [&](auto& param, const auto& grad, const char* name, int samples) {
    const long n = param.size();
    double num = 0.0, den = 0.0;
    Rng pick(17);
    for (int s = 0; s < samples; ++s) {
      const long i = (n <= samples) ? s : long(pick.below(n));
      const double orig = param.data()[i];
      param.data()[i] = orig + step;
      const double up = dncnn_loss(net, batch);
      param.data()[i] = orig - step;
      const double down = dncnn_loss(net, batch);
      param.data()[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      num += std::pow(grad.data()[i] - fd, 2);
      den += std::pow(fd, 2);
    }
    INFO(std::string(name));
    // The floor covers tensors with a genuinely zero gradient (the conv-2
    // bias is cancelled by the BN mean subtraction), where the only signal
    // left in the finite difference is roundoff.
    CHECK(std::sqrt(num) < 1e-4 * std::max(std::sqrt(den), 1e-5));
  };

  fd_check(net.w1, grads.w1, "w1", 24);
  fd_check(net.b1, grads.b1, "b1", 16);
  fd_check(net.w2, grads.w2, "w2", 24);
  fd_check(net.b2, grads.b2, "b2", 16);
  fd_check(net.bn_gamma, grads.bn_gamma, "bn_gamma", 16);
  fd_check(net.bn_beta, grads.bn_beta, "bn_beta", 16);
  fd_check(net.w3, grads.w3, "w3", 24);
  fd_check(net.b3, grads.b3, "b3", 1);
}

TEST_CASE("dead ReLU units receive zero gradient") {
  const int h = 5, w = 5;
  Rng rng(19);
  Net net = Net::init(h, w, rng);
  net.b1(7) = -1e6;  // channel 7 of layer 1 never activates

  std::vector<ImgPair<double>> batch;
  Rng ir(2);
  batch.push_back({random_image(ir, h, w), random_image(ir, h, w)});

  DnCnnGrads<double> grads;
  dncnn_loss_grad(net, batch, grads);
  CHECK(grads.w1.row(7).norm() == 0.0);
  CHECK(grads.b1(7) == 0.0);
}

TEST_CASE("training: snapshots, early stopping, determinism") {
  // Small synthetic task: noisy ramp images, labels are the clean ramps.
  std::vector<TrainingPair> data;
  Rng rng(23);
  for (int i = 0; i < 16; ++i) {
    TrainingPair p;
    p.label.resize(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) p.label(r, c) = float(r + c) / 14.0f;
    p.input = p.label;
    for (long j = 0; j < p.input.size(); ++j)
      p.input.data()[j] += 0.3f * float(std::abs(rng.gaussian()));
    data.push_back(std::move(p));
  }

  TrainHyper hp;
  hp.epochs = 4;
  hp.batch_size = 4;
  hp.split = 0.75;
  hp.lr = 0.003;
  Rng tr1(31);
  const DnCnn<float> net = train_dncnn(data, hp, tr1);
  REQUIRE(!net.train_log.empty());
  CHECK(net.train_log.size() <= size_t(hp.epochs));
  CHECK(net.norm_const > 0.0f);
  for (int c = 0; c < 64; ++c) CHECK(net.bn_var(c) > 0.0f);

  // Determinism: identical seed, identical weights.
  Rng tr2(31);
  const DnCnn<float> net2 = train_dncnn(data, hp, tr2);
  CHECK(net.w1 == net2.w1);
  CHECK(net.w2 == net2.w2);
  CHECK(net.w3 == net2.w3);
  CHECK(net.b2 == net2.b2);
  CHECK(net.bn_gamma == net2.bn_gamma);
  CHECK(net.bn_mean == net2.bn_mean);

  // patience = 0 stops after the first non-improving validation; a huge
  // learning rate makes the first epoch diverge immediately.
  TrainHyper bad = hp;
  bad.lr = 1e4;
  bad.patience = 0;
  bad.epochs = 10;
  Rng tr3(7);
  const DnCnn<float> stopped = train_dncnn(data, bad, tr3);
  CHECK(stopped.train_log.size() == 1);

  CHECK_THROWS_AS(train_dncnn({}, hp, tr1), ConfigError);
}

TEST_CASE("weight files: bitwise round trip and corruption detection") {
  Rng rng(41);
  DnCnn<float> net = DnCnn<float>::init(6, 4, rng);
  net.norm_const = 3.25f;
  net.bn_mean.setConstant(0.5f);
  net.train_log = {{1.5f, 2.5f}, {1.0f, 2.0f}};
  const std::string path = "test_weights.bin";
  save_weights(net, path);

  const DnCnn<float> back = load_weights(path);
  CHECK(back.w1 == net.w1);
  CHECK(back.w2 == net.w2);
  CHECK(back.w3 == net.w3);
  CHECK(back.b1 == net.b1);
  CHECK(back.b2 == net.b2);
  CHECK(back.b3 == net.b3);
  CHECK(back.bn_gamma == net.bn_gamma);
  CHECK(back.bn_beta == net.bn_beta);
  CHECK(back.bn_mean == net.bn_mean);
  CHECK(back.bn_var == net.bn_var);
  CHECK(back.norm_const == net.norm_const);
  CHECK(back.img_rows == 6);
  CHECK(back.img_cols == 4);
  CHECK(back.train_log == net.train_log);

  // Truncation is a parse error, not a crash.
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out("test_weights_trunc.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_weights("test_weights_trunc.bin"), ParseError);

  // A flipped payload byte breaks the checksum.
  {
    std::vector<char> bad = bytes;
    bad[40] = static_cast<char>(bad[40] ^ 0x7f);
    std::ofstream out("test_weights_bad.bin", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_weights("test_weights_bad.bin"), doctest::Contains("checksum"),
                       ParseError);

  // A descriptor that disagrees with the fixed architecture (checksum made
  // valid again) is a shape error.
  {
    std::vector<char> bad = bytes;
    const uint32_t wrong = 63;  // layer-1 out_ch lives right after the 24-byte header
    std::memcpy(bad.data() + 24, &wrong, sizeof(wrong));
    uint64_t sum = 1469598103934665603ULL;
    for (size_t i = 0; i + 8 < bad.size(); ++i) {
      sum ^= static_cast<unsigned char>(bad[i]);
      sum *= 1099511628211ULL;
    }
    std::memcpy(bad.data() + bad.size() - 8, &sum, 8);
    std::ofstream out("test_weights_shape.bin", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_weights("test_weights_shape.bin"), doctest::Contains("architecture"),
                       ParseError);

  CHECK_THROWS_AS(load_weights("definitely_missing_file.bin"), IoError);
  std::remove(path.c_str());
  std::remove("test_weights_trunc.bin");
  std::remove("test_weights_bad.bin");
  std::remove("test_weights_shape.bin");
}

TEST_CASE("baseline denoisers") {
  MatrixXd img(2, 3);
  img << 0.0, 0.5, 2.0, 1.0, 0.1, 3.0;
  CHECK(baseline_denoiser(BaselineKind::identity, img) == img);
  CHECK(baseline_denoiser(BaselineKind::soft_threshold, img, 0.0) == img);
  CHECK(baseline_denoiser(BaselineKind::soft_threshold, img, 1e12).norm() == 0.0);
  const MatrixXd soft = baseline_denoiser(BaselineKind::soft_threshold, img, 0.4);
  CHECK(soft(0, 0) == 0.0);
  CHECK(soft(1, 0) == doctest::Approx(0.6));
  CHECK(soft(1, 2) == doctest::Approx(2.6));

  const DenoiserFn ident = make_identity_denoiser();
  CHECK(ident(img) == img);
  const DenoiserFn soft_fn = make_soft_threshold_denoiser(0.4);
  CHECK(soft_fn(img) == soft);
}
