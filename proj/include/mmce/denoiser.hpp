#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mmce/rng.hpp"
#include "mmce/types.hpp"

namespace mmce {

// Residual denoising CNN: conv(3x3, 1->64) -> ReLU -> conv(3x3, 64->64) ->
// BN -> ReLU -> conv(3x3, 64->1). The network predicts the residual (noise)
// image; denoised = input - residual. Zero padding, stride 1 throughout.
// Templated on the scalar so gradient checks can run in double while training
// and deployment use float.
template <typename S>
struct DnCnn {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  static constexpr int kChannels = 64;
  static constexpr int kKernel = 3;

  // Conv weights are stored as (out_ch) x (in_ch * 9) with patch-row order
  // ci*9 + (di+1)*3 + (dj+1) for offsets di, dj in {-1, 0, 1}.
  Mat w1, w2, w3;
  Vec b1, b2, b3;
  Vec bn_gamma, bn_beta, bn_mean, bn_var;

  int img_rows = 0, img_cols = 0;  // training image shape
  S norm_const = S(1);             // input scale (dataset 99th-percentile amplitude)
  std::vector<std::pair<float, float>> train_log;  // per-epoch (train, val) loss

  static DnCnn init(int img_rows, int img_cols, Rng& rng);

  template <typename T>
  DnCnn<T> cast() const;

  // Residual prediction in the normalized domain, inference-mode BN.
  Mat residual(const Mat& img) const;

  // input - residual, normalized domain.
  Mat denoise_normalized(const Mat& img) const { return img - residual(img); }

  // Amplitude-domain denoiser: scales by norm_const on the way in and out.
  // Throws ConfigError when the image shape differs from the training shape.
  MatrixXd denoise(const MatrixXd& image) const;
};

template <typename S>
struct DnCnnGrads {
  using Mat = typename DnCnn<S>::Mat;
  using Vec = typename DnCnn<S>::Vec;
  Mat w1, w2, w3;
  Vec b1, b2, b3, bn_gamma, bn_beta;
  // Batch statistics seen during the forward pass; the trainer folds these
  // into the running BN statistics.
  Vec batch_mean, batch_var;

  static DnCnnGrads zero_like(const DnCnn<S>& net);
};

template <typename S>
template <typename T>
DnCnn<T> DnCnn<S>::cast() const {
  DnCnn<T> out;
  out.w1 = w1.template cast<T>();
  out.w2 = w2.template cast<T>();
  out.w3 = w3.template cast<T>();
  out.b1 = b1.template cast<T>();
  out.b2 = b2.template cast<T>();
  out.b3 = b3.template cast<T>();
  out.bn_gamma = bn_gamma.template cast<T>();
  out.bn_beta = bn_beta.template cast<T>();
  out.bn_mean = bn_mean.template cast<T>();
  out.bn_var = bn_var.template cast<T>();
  out.img_rows = img_rows;
  out.img_cols = img_cols;
  out.norm_const = static_cast<T>(norm_const);
  out.train_log = train_log;
  return out;
}

// One (input, label) training image pair in the normalized domain.
template <typename S>
using ImgPair = std::pair<typename DnCnn<S>::Mat, typename DnCnn<S>::Mat>;

// Mean residual-prediction loss over a batch: (1/2N) sum ||R(x_i) - (x_i - g_i)||_F^2,
// with batch-statistics BN (training-mode forward).
template <typename S>
S dncnn_loss(const DnCnn<S>& net, const std::vector<ImgPair<S>>& batch);

// Loss plus analytic gradients of every parameter tensor.
template <typename S>
S dncnn_loss_grad(const DnCnn<S>& net, const std::vector<ImgPair<S>>& batch,
                  DnCnnGrads<S>& grads);

struct TrainHyper {
  double lr = 0.01;
  int epochs = 10;
  int batch_size = 256;
  double split = 0.7;     // training fraction; remainder is validation
  int patience = 10;      // consecutive non-improving validations before stopping
  double bn_momentum = 0.1;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainingPair {
  Eigen::MatrixXf input;  // C_alpha image, G_r x G_t
  Eigen::MatrixXf label;  // G image, G_r x G_t
};

// Adam training with early stopping; returns the best-validation weights.
DnCnn<float> train_dncnn(const std::vector<TrainingPair>& dataset, const TrainHyper& hp,
                         Rng& rng);

void save_weights(const DnCnn<float>& net, const std::string& path);
DnCnn<float> load_weights(const std::string& path);

enum class BaselineKind { identity, soft_threshold };

// identity: unchanged; soft_threshold: max(x - lambda, 0) elementwise.
MatrixXd baseline_denoiser(BaselineKind kind, const MatrixXd& image, double lambda = 0.0);

// Type-erased denoiser handed to the estimators.
using DenoiserFn = std::function<MatrixXd(const MatrixXd&)>;

DenoiserFn make_identity_denoiser();
DenoiserFn make_soft_threshold_denoiser(double lambda);
DenoiserFn make_dncnn_denoiser(std::shared_ptr<const DnCnn<float>> net);

extern template struct DnCnn<float>;
extern template struct DnCnn<double>;
extern template struct DnCnnGrads<float>;
extern template struct DnCnnGrads<double>;
extern template float dncnn_loss<float>(const DnCnn<float>&, const std::vector<ImgPair<float>>&);
extern template double dncnn_loss<double>(const DnCnn<double>&, const std::vector<ImgPair<double>>&);
extern template float dncnn_loss_grad<float>(const DnCnn<float>&, const std::vector<ImgPair<float>>&,
                                             DnCnnGrads<float>&);
extern template double dncnn_loss_grad<double>(const DnCnn<double>&,
                                               const std::vector<ImgPair<double>>&,
                                               DnCnnGrads<double>&);

}  // namespace mmce
