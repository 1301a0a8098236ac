#include "mmce/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mmce {

namespace {

constexpr double kBnEps = 1e-5;

template <typename S>
using MatS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Activations are (H*W, C) with pixel index p = r + c*H (column-major image).
// Patch matrix is (H*W, C*9) with patch row t = ci*9 + (di+1)*3 + (dj+1).
template <typename S>
void im2col(const MatS<S>& x, int h, int w, MatS<S>& out) {
  const int c_in = static_cast<int>(x.cols());
  out.setZero(static_cast<long>(h) * w, static_cast<long>(c_in) * 9);
  for (int ci = 0; ci < c_in; ++ci)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int t = ci * 9 + (di + 1) * 3 + (dj + 1);
        const int c0 = std::max(0, -dj), c1 = w - 1 - std::max(0, dj);
        const int r0 = std::max(0, -di), r1 = h - 1 - std::max(0, di);
        const int len = r1 - r0 + 1;
        if (len <= 0 || c1 < c0) continue;
        for (int c = c0; c <= c1; ++c)
          out.col(t).segment(r0 + c * h, len) = x.col(ci).segment((r0 + di) + (c + dj) * h, len);
      }
}

// Transposed scatter of im2col; accumulates into dx.
template <typename S>
void col2im_add(const MatS<S>& dp, int h, int w, MatS<S>& dx) {
  const int c_in = static_cast<int>(dx.cols());
  for (int ci = 0; ci < c_in; ++ci)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int t = ci * 9 + (di + 1) * 3 + (dj + 1);
        const int c0 = std::max(0, -dj), c1 = w - 1 - std::max(0, dj);
        const int r0 = std::max(0, -di), r1 = h - 1 - std::max(0, di);
        const int len = r1 - r0 + 1;
        if (len <= 0 || c1 < c0) continue;
        for (int c = c0; c <= c1; ++c)
          dx.col(ci).segment((r0 + di) + (c + dj) * h, len) += dp.col(t).segment(r0 + c * h, len);
      }
}

template <typename S>
MatS<S> conv(const MatS<S>& x, int h, int w, const MatS<S>& weight, const VecS<S>& bias,
             MatS<S>& patches) {
  im2col(x, h, w, patches);
  MatS<S> y = patches * weight.transpose();
  y.rowwise() += bias.transpose();
  return y;
}

// Per-image caches of a training-mode forward pass.
template <typename S>
struct ForwardCache {
  MatS<S> x;    // (HW, 1)
  MatS<S> a1;   // (HW, C) post-ReLU
  MatS<S> z2;   // (HW, C) pre-BN
  MatS<S> xhat; // (HW, C) normalized
  MatS<S> dbn;  // (HW, C) gradient at BN output (backward only)
  MatS<S> r;    // (HW, 1) residual output
};

}  // namespace

template <typename S>
DnCnn<S> DnCnn<S>::init(int img_rows, int img_cols, Rng& rng) {
  if (img_rows < 1 || img_cols < 1) throw ConfigError("DnCnn::init: bad image shape");
  DnCnn<S> net;
  net.img_rows = img_rows;
  net.img_cols = img_cols;
  auto fill = [&rng](auto& m, double stddev) {
    for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(stddev * rng.gaussian());
  };
  net.w1.resize(kChannels, 9);
  net.w2.resize(kChannels, kChannels * 9);
  net.w3.resize(1, kChannels * 9);
  fill(net.w1, std::sqrt(2.0 / 9.0));
  fill(net.w2, std::sqrt(2.0 / (kChannels * 9.0)));
  fill(net.w3, std::sqrt(2.0 / (kChannels * 9.0)));
  net.b1 = Vec::Zero(kChannels);
  net.b2 = Vec::Zero(kChannels);
  net.b3 = Vec::Zero(1);
  net.bn_gamma = Vec::Ones(kChannels);
  net.bn_beta = Vec::Zero(kChannels);
  net.bn_mean = Vec::Zero(kChannels);
  net.bn_var = Vec::Ones(kChannels);
  return net;
}

template <typename S>
typename DnCnn<S>::Mat DnCnn<S>::residual(const Mat& img) const {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  const long hw = static_cast<long>(h) * w;
  Mat patches;
  Mat x = Eigen::Map<const Mat>(img.data(), hw, 1);
  Mat a1 = conv<S>(x, h, w, w1, b1, patches).cwiseMax(S(0));
  Mat z2 = conv<S>(a1, h, w, w2, b2, patches);
  for (int c = 0; c < kChannels; ++c) {
    const S inv_std = S(1) / std::sqrt(bn_var(c) + S(kBnEps));
    z2.col(c) = ((z2.col(c).array() - bn_mean(c)) * inv_std * bn_gamma(c) + bn_beta(c)).matrix();
  }
  z2 = z2.cwiseMax(S(0));
  Mat r = conv<S>(z2, h, w, w3, b3, patches);
  return Eigen::Map<Mat>(r.data(), h, w);
}

template <typename S>
MatrixXd DnCnn<S>::denoise(const MatrixXd& image) const {
  if (image.rows() != img_rows || image.cols() != img_cols)
    throw ConfigError("DnCnn::denoise: image shape does not match the training shape");
  const S scale = norm_const > S(0) ? norm_const : S(1);
  Mat x = image.cast<S>() / scale;
  Mat out = (x - residual(x)) * scale;
  return out.template cast<double>();
}

template <typename S>
DnCnnGrads<S> DnCnnGrads<S>::zero_like(const DnCnn<S>& net) {
  DnCnnGrads<S> g;
  g.w1 = Mat::Zero(net.w1.rows(), net.w1.cols());
  g.w2 = Mat::Zero(net.w2.rows(), net.w2.cols());
  g.w3 = Mat::Zero(net.w3.rows(), net.w3.cols());
  g.b1 = Vec::Zero(net.b1.size());
  g.b2 = Vec::Zero(net.b2.size());
  g.b3 = Vec::Zero(net.b3.size());
  g.bn_gamma = Vec::Zero(net.bn_gamma.size());
  g.bn_beta = Vec::Zero(net.bn_beta.size());
  g.batch_mean = Vec::Zero(net.bn_mean.size());
  g.batch_var = Vec::Zero(net.bn_var.size());
  return g;
}

namespace {

// Training-mode forward over a batch: fills caches through z2, computes batch
// statistics, then finishes BN -> ReLU -> conv3 and the Eq.-23 loss.
template <typename S>
S batch_forward(const DnCnn<S>& net, const std::vector<ImgPair<S>>& batch,
                std::vector<ForwardCache<S>>& caches, VecS<S>& mean, VecS<S>& var) {
  constexpr int kC = DnCnn<S>::kChannels;
  const int n = static_cast<int>(batch.size());
  const int h = static_cast<int>(batch[0].first.rows());
  const int w = static_cast<int>(batch[0].first.cols());
  const long hw = static_cast<long>(h) * w;

  caches.resize(n);
  mean = VecS<S>::Zero(kC);
  VecS<S> sumsq = VecS<S>::Zero(kC);
  MatS<S> patches;
  for (int i = 0; i < n; ++i) {
    const auto& [img, label] = batch[i];
    if (img.rows() != h || img.cols() != w || label.rows() != h || label.cols() != w)
      throw ConfigError("dncnn batch: inconsistent image shapes");
    auto& cc = caches[i];
    cc.x = Eigen::Map<const MatS<S>>(img.data(), hw, 1);
    cc.a1 = conv<S>(cc.x, h, w, net.w1, net.b1, patches).cwiseMax(S(0));
    cc.z2 = conv<S>(cc.a1, h, w, net.w2, net.b2, patches);
    mean += cc.z2.colwise().sum().transpose();
    sumsq += cc.z2.array().square().matrix().colwise().sum().transpose();
  }
  const S count = static_cast<S>(static_cast<double>(n) * hw);
  mean /= count;
  var = (sumsq / count - mean.array().square().matrix()).cwiseMax(S(0));

  S loss = S(0);
  for (int i = 0; i < n; ++i) {
    auto& cc = caches[i];
    cc.xhat.resize(hw, kC);
    MatS<S> a2(hw, kC);
    for (int c = 0; c < kC; ++c) {
      const S inv_std = S(1) / std::sqrt(var(c) + S(kBnEps));
      cc.xhat.col(c) = ((cc.z2.col(c).array() - mean(c)) * inv_std).matrix();
      a2.col(c) = ((cc.xhat.col(c) * net.bn_gamma(c)).array() + net.bn_beta(c)).matrix();
    }
    cc.z2.resize(0, 0);  // not needed past this point; keeps big batches lean
    a2 = a2.cwiseMax(S(0));
    cc.r = conv<S>(a2, h, w, net.w3, net.b3, patches);
    const MatS<S> target =
        cc.x - Eigen::Map<const MatS<S>>(batch[i].second.data(), hw, 1);
    loss += (cc.r - target).squaredNorm();
  }
  return loss / (S(2) * static_cast<S>(n));
}

}  // namespace

template <typename S>
S dncnn_loss(const DnCnn<S>& net, const std::vector<ImgPair<S>>& batch) {
  if (batch.empty()) throw ConfigError("dncnn_loss: empty batch");
  std::vector<ForwardCache<S>> caches;
  VecS<S> mean, var;
  return batch_forward(net, batch, caches, mean, var);
}

template <typename S>
S dncnn_loss_grad(const DnCnn<S>& net, const std::vector<ImgPair<S>>& batch,
                  DnCnnGrads<S>& g) {
  if (batch.empty()) throw ConfigError("dncnn_loss_grad: empty batch");
  constexpr int kC = DnCnn<S>::kChannels;
  const int n = static_cast<int>(batch.size());
  const int h = static_cast<int>(batch[0].first.rows());
  const int w = static_cast<int>(batch[0].first.cols());
  const long hw = static_cast<long>(h) * w;

  std::vector<ForwardCache<S>> caches;
  VecS<S> mean, var;
  const S loss = batch_forward(net, batch, caches, mean, var);

  g = DnCnnGrads<S>::zero_like(net);
  g.batch_mean = mean;
  g.batch_var = var;

  // Pass 1: conv3 gradients and the batch-wide BN sums.
  VecS<S> s1 = VecS<S>::Zero(kC);  // sum of dy at the BN output
  VecS<S> s2 = VecS<S>::Zero(kC);  // sum of dy .* xhat
  MatS<S> patches;
  for (int i = 0; i < n; ++i) {
    auto& cc = caches[i];
    MatS<S> bn_out(hw, kC);
    for (int c = 0; c < kC; ++c)
      bn_out.col(c) = ((cc.xhat.col(c) * net.bn_gamma(c)).array() + net.bn_beta(c)).matrix();
    const MatS<S> a2 = bn_out.cwiseMax(S(0));
    const MatS<S> target =
        cc.x - Eigen::Map<const MatS<S>>(batch[i].second.data(), hw, 1);
    const MatS<S> dr = (cc.r - target) / static_cast<S>(n);

    im2col(a2, h, w, patches);
    g.w3.noalias() += dr.transpose() * patches;
    g.b3(0) += dr.sum();

    MatS<S> da2 = MatS<S>::Zero(hw, kC);
    col2im_add<S>(dr * net.w3, h, w, da2);
    cc.dbn = ((bn_out.array() > S(0)).template cast<S>() * da2.array()).matrix();
    s1 += cc.dbn.colwise().sum().transpose();
    s2 += (cc.dbn.array() * cc.xhat.array()).matrix().colwise().sum().transpose();
  }
  g.bn_beta = s1;
  g.bn_gamma = s2;

  // Pass 2: push through BN (batch-coupled), conv2, ReLU, conv1.
  const S count = static_cast<S>(static_cast<double>(n) * hw);
  for (int i = 0; i < n; ++i) {
    auto& cc = caches[i];
    MatS<S> dz2(hw, kC);
    for (int c = 0; c < kC; ++c) {
      const S inv_std = S(1) / std::sqrt(var(c) + S(kBnEps));
      dz2.col(c) = (net.bn_gamma(c) * inv_std) *
                   (cc.dbn.col(c).array() - s1(c) / count -
                    cc.xhat.col(c).array() * (s2(c) / count))
                       .matrix();
    }
    im2col(cc.a1, h, w, patches);
    g.w2.noalias() += dz2.transpose() * patches;
    g.b2 += dz2.colwise().sum().transpose();

    MatS<S> da1 = MatS<S>::Zero(hw, kC);
    col2im_add<S>(dz2 * net.w2, h, w, da1);
    const MatS<S> dz1 = ((cc.a1.array() > S(0)).template cast<S>() * da1.array()).matrix();
    im2col(cc.x, h, w, patches);
    g.w1.noalias() += dz1.transpose() * patches;
    g.b1 += dz1.colwise().sum().transpose();
  }
  return loss;
}

namespace {

// One Adam slot per parameter tensor.
template <typename S>
struct AdamState {
  MatS<S> m, v;
  explicit AdamState(const MatS<S>& like)
      : m(MatS<S>::Zero(like.rows(), like.cols())), v(MatS<S>::Zero(like.rows(), like.cols())) {}

  void step(MatS<S>& param, const MatS<S>& grad, const TrainHyper& hp, int t) {
    const S b1 = static_cast<S>(hp.adam_beta1), b2 = static_cast<S>(hp.adam_beta2);
    m = b1 * m + (S(1) - b1) * grad;
    v = b2 * v + (S(1) - b2) * grad.array().square().matrix();
    const S corr1 = S(1) - static_cast<S>(std::pow(hp.adam_beta1, t));
    const S corr2 = S(1) - static_cast<S>(std::pow(hp.adam_beta2, t));
    param.array() -= static_cast<S>(hp.lr) * (m.array() / corr1) /
                     ((v.array() / corr2).sqrt() + static_cast<S>(hp.adam_eps));
  }
};

float validation_loss(const DnCnn<float>& net, const std::vector<ImgPair<float>>& pairs) {
  double acc = 0.0;
  for (const auto& [x, gl] : pairs) {
    const Eigen::MatrixXf r = net.residual(x);
    acc += static_cast<double>((r - (x - gl)).squaredNorm());
  }
  return static_cast<float>(acc / (2.0 * static_cast<double>(pairs.size())));
}

}  // namespace

DnCnn<float> train_dncnn(const std::vector<TrainingPair>& dataset, const TrainHyper& hp,
                         Rng& rng) {
  if (dataset.empty()) throw ConfigError("train_dncnn: empty dataset");
  const int h = static_cast<int>(dataset[0].input.rows());
  const int w = static_cast<int>(dataset[0].input.cols());

  // Input scale: 99th-percentile amplitude over the dataset inputs.
  std::vector<float> amps;
  amps.reserve(dataset.size() * h * w);
  for (const auto& p : dataset)
    amps.insert(amps.end(), p.input.data(), p.input.data() + p.input.size());
  const size_t q = static_cast<size_t>(0.99 * (amps.size() - 1));
  std::nth_element(amps.begin(), amps.begin() + q, amps.end());
  const float norm = std::max(amps[q], 1e-12f);

  std::vector<ImgPair<float>> pairs(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i)
    pairs[i] = {dataset[i].input / norm, dataset[i].label / norm};

  // Random 70/30-style split.
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  const int n_train = std::max(1, static_cast<int>(hp.split * static_cast<double>(order.size())));
  if (n_train >= static_cast<int>(order.size()))
    throw ConfigError("train_dncnn: split leaves no validation data");
  if (hp.batch_size < 1) throw ConfigError("train_dncnn: batch size must be >= 1");
  std::vector<ImgPair<float>> train_pairs, val_pairs;
  train_pairs.reserve(n_train);
  for (int i = 0; i < n_train; ++i) train_pairs.push_back(pairs[order[i]]);
  val_pairs.reserve(order.size() - n_train);
  for (size_t i = static_cast<size_t>(n_train); i < order.size(); ++i)
    val_pairs.push_back(pairs[order[i]]);

  DnCnn<float> net = DnCnn<float>::init(h, w, rng);
  net.norm_const = norm;

  AdamState<float> aw1(net.w1), aw2(net.w2), aw3(net.w3);
  AdamState<float> ab1(net.b1), ab2(net.b2), ab3(net.b3), ag(net.bn_gamma), abt(net.bn_beta);

  DnCnn<float> best = net;
  float best_val = validation_loss(net, val_pairs);
  int stale = 0, adam_t = 0;
  const float mom = static_cast<float>(hp.bn_momentum);

  std::vector<int> idx(train_pairs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  std::vector<std::pair<float, float>> log;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t start = 0; start < idx.size(); start += hp.batch_size) {
      const size_t stop = std::min(idx.size(), start + hp.batch_size);
      std::vector<ImgPair<float>> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) batch.push_back(train_pairs[idx[i]]);

      DnCnnGrads<float> grads;
      const float loss = dncnn_loss_grad(net, batch, grads);
      epoch_loss += static_cast<double>(loss) * static_cast<double>(batch.size());
      seen += static_cast<long>(batch.size());

      ++adam_t;
      aw1.step(net.w1, grads.w1, hp, adam_t);
      aw2.step(net.w2, grads.w2, hp, adam_t);
      aw3.step(net.w3, grads.w3, hp, adam_t);
      auto vec_step = [&](AdamState<float>& st, Eigen::VectorXf& p, const Eigen::VectorXf& gr) {
        MatS<float> pm = p, gm = gr;
        st.step(pm, gm, hp, adam_t);
        p = pm;
      };
      vec_step(ab1, net.b1, grads.b1);
      vec_step(ab2, net.b2, grads.b2);
      vec_step(ab3, net.b3, grads.b3);
      vec_step(ag, net.bn_gamma, grads.bn_gamma);
      vec_step(abt, net.bn_beta, grads.bn_beta);

      net.bn_mean = (1.0f - mom) * net.bn_mean + mom * grads.batch_mean;
      net.bn_var = ((1.0f - mom) * net.bn_var + mom * grads.batch_var).cwiseMax(1e-12f);
    }
    const float train_loss = static_cast<float>(epoch_loss / static_cast<double>(seen));
    const float val_loss = validation_loss(net, val_pairs);
    log.emplace_back(train_loss, val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      best = net;
      stale = 0;
    } else {
      ++stale;
      if (stale >= std::max(hp.patience, 1)) break;
    }
  }
  best.train_log = log;
  return best;
}

// ---- serialization -------------------------------------------------------

namespace {

uint64_t fnv1a(const unsigned char* data, size_t n) {
  uint64_t hash = 1469598103934665603ULL;
  for (size_t i = 0; i < n; ++i) {
    hash ^= data[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

struct ByteWriter {
  std::vector<unsigned char> buf;
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
  }
  void floats(const float* p, size_t n) {
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n * sizeof(float));
  }
};

struct ByteReader {
  const unsigned char* p;
  size_t left;
  template <typename T>
  T pod() {
    if (left < sizeof(T)) throw ParseError("weights file: truncated");
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    left -= sizeof(T);
    return v;
  }
  void floats(float* dst, size_t n) {
    if (left < n * sizeof(float)) throw ParseError("weights file: truncated payload");
    std::memcpy(dst, p, n * sizeof(float));
    p += n * sizeof(float);
    left -= n * sizeof(float);
  }
};

constexpr char kWeightsMagic[4] = {'M', 'C', 'D', 'W'};
constexpr uint32_t kWeightsVersion = 1;

}  // namespace

void save_weights(const DnCnn<float>& net, const std::string& path) {
  ByteWriter wtr;
  wtr.buf.insert(wtr.buf.end(), kWeightsMagic, kWeightsMagic + 4);
  wtr.pod(kWeightsVersion);
  wtr.pod(static_cast<uint32_t>(net.img_rows));
  wtr.pod(static_cast<uint32_t>(net.img_cols));
  wtr.pod(net.norm_const);
  wtr.pod(static_cast<uint32_t>(3));
  auto layer = [&wtr](uint32_t out, uint32_t in, uint8_t bn) {
    wtr.pod(out);
    wtr.pod(in);
    wtr.pod(static_cast<uint32_t>(3));
    wtr.pod(static_cast<uint32_t>(3));
    wtr.pod(bn);
  };
  layer(DnCnn<float>::kChannels, 1, 0);
  layer(DnCnn<float>::kChannels, DnCnn<float>::kChannels, 1);
  layer(1, DnCnn<float>::kChannels, 0);

  auto mat = [&wtr](const auto& m) { wtr.floats(m.data(), static_cast<size_t>(m.size())); };
  mat(net.w1);
  mat(net.b1);
  mat(net.w2);
  mat(net.b2);
  mat(net.bn_gamma);
  mat(net.bn_beta);
  mat(net.bn_mean);
  mat(net.bn_var);
  mat(net.w3);
  mat(net.b3);

  wtr.pod(static_cast<uint32_t>(net.train_log.size()));
  for (const auto& [t, v] : net.train_log) {
    wtr.pod(t);
    wtr.pod(v);
  }
  wtr.pod(fnv1a(wtr.buf.data(), wtr.buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_weights: cannot open " + path);
  out.write(reinterpret_cast<const char*>(wtr.buf.data()),
            static_cast<std::streamsize>(wtr.buf.size()));
  if (!out) throw IoError("save_weights: write failed for " + path);
}

DnCnn<float> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_weights: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 8 + sizeof(uint64_t)) throw ParseError("weights file: truncated");

  const uint64_t stored = [&] {
    uint64_t v;
    std::memcpy(&v, buf.data() + buf.size() - sizeof(uint64_t), sizeof(uint64_t));
    return v;
  }();
  if (stored != fnv1a(buf.data(), buf.size() - sizeof(uint64_t)))
    throw ParseError("weights file: checksum mismatch");

  ByteReader rd{buf.data(), buf.size() - sizeof(uint64_t)};
  char magic[4];
  for (char& c : magic) c = static_cast<char>(rd.pod<unsigned char>());
  if (std::memcmp(magic, kWeightsMagic, 4) != 0) throw ParseError("weights file: bad magic");
  if (rd.pod<uint32_t>() != kWeightsVersion) throw ParseError("weights file: unsupported version");

  DnCnn<float> net;
  net.img_rows = static_cast<int>(rd.pod<uint32_t>());
  net.img_cols = static_cast<int>(rd.pod<uint32_t>());
  net.norm_const = rd.pod<float>();
  if (rd.pod<uint32_t>() != 3) throw ParseError("weights file: layer count must be 3");
  auto expect_layer = [&rd](uint32_t out, uint32_t in, uint8_t bn) {
    if (rd.pod<uint32_t>() != out || rd.pod<uint32_t>() != in || rd.pod<uint32_t>() != 3 ||
        rd.pod<uint32_t>() != 3 || rd.pod<uint8_t>() != bn)
      throw ParseError("weights file: layer descriptor does not match the architecture");
  };
  constexpr int kC = DnCnn<float>::kChannels;
  expect_layer(kC, 1, 0);
  expect_layer(kC, kC, 1);
  expect_layer(1, kC, 0);

  net.w1.resize(kC, 9);
  net.b1.resize(kC);
  net.w2.resize(kC, kC * 9);
  net.b2.resize(kC);
  net.bn_gamma.resize(kC);
  net.bn_beta.resize(kC);
  net.bn_mean.resize(kC);
  net.bn_var.resize(kC);
  net.w3.resize(1, kC * 9);
  net.b3.resize(1);
  auto mat = [&rd](auto& m) { rd.floats(m.data(), static_cast<size_t>(m.size())); };
  mat(net.w1);
  mat(net.b1);
  mat(net.w2);
  mat(net.b2);
  mat(net.bn_gamma);
  mat(net.bn_beta);
  mat(net.bn_mean);
  mat(net.bn_var);
  mat(net.w3);
  mat(net.b3);
  for (int c = 0; c < kC; ++c)
    if (!(net.bn_var(c) > 0.0f)) throw ParseError("weights file: running variance must be positive");

  const uint32_t log_len = rd.pod<uint32_t>();
  net.train_log.resize(log_len);
  for (auto& [t, v] : net.train_log) {
    t = rd.pod<float>();
    v = rd.pod<float>();
  }
  if (rd.left != 0) throw ParseError("weights file: payload length does not match the header");
  return net;
}

MatrixXd baseline_denoiser(BaselineKind kind, const MatrixXd& image, double lambda) {
  switch (kind) {
    case BaselineKind::identity:
      return image;
    case BaselineKind::soft_threshold:
      return (image.array() - lambda).cwiseMax(0.0).matrix();
  }
  throw ConfigError("baseline_denoiser: unknown kind");
}

DenoiserFn make_identity_denoiser() {
  return [](const MatrixXd& img) { return img; };
}

DenoiserFn make_soft_threshold_denoiser(double lambda) {
  return [lambda](const MatrixXd& img) {
    return baseline_denoiser(BaselineKind::soft_threshold, img, lambda);
  };
}

DenoiserFn make_dncnn_denoiser(std::shared_ptr<const DnCnn<float>> net) {
  return [net = std::move(net)](const MatrixXd& img) { return net->denoise(img); };
}

template struct DnCnn<float>;
template struct DnCnn<double>;
template struct DnCnnGrads<float>;
template struct DnCnnGrads<double>;
template float dncnn_loss<float>(const DnCnn<float>&, const std::vector<ImgPair<float>>&);
template double dncnn_loss<double>(const DnCnn<double>&, const std::vector<ImgPair<double>>&);
template float dncnn_loss_grad<float>(const DnCnn<float>&, const std::vector<ImgPair<float>>&,
                                      DnCnnGrads<float>&);
template double dncnn_loss_grad<double>(const DnCnn<double>&, const std::vector<ImgPair<double>>&,
                                        DnCnnGrads<double>&);

}  // namespace mmce
