#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "hyperaug/types.hpp"

namespace hyperaug {

/// Hyper-parameters of the 1D spectral network
/// Conv(n x 5, stride 1) -> BN -> ReLU -> MaxPool(2, 2) -> FC(l1) -> ReLU
/// -> FC(l2) -> ReLU -> FC(C) -> softmax.
struct CNNConfig {
  std::size_t bands = 0;
  std::size_t classes = 0;
  std::size_t kernels = 200;
  std::size_t kernel_length = 5;
  std::size_t pool = 2;  // pool size and stride
  std::size_t dense1 = 512;
  std::size_t dense2 = 128;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  std::size_t batch_size = 64;
  std::size_t patience = 15;
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t conv_length() const noexcept { return bands - kernel_length + 1; }
  std::size_t pooled_length() const noexcept { return conv_length() / pool; }
  std::size_t flatten_size() const noexcept { return pooled_length() * kernels; }
};

/// Trainable tensors. Biases and per-channel BN parameters are 1 x n rows.
struct CNNParams {
  Eigen::MatrixXd conv_w;  // kernels x kernel_length
  Eigen::MatrixXd conv_b;
  Eigen::MatrixXd bn_gamma;
  Eigen::MatrixXd bn_beta;
  Eigen::MatrixXd fc1_w;  // flatten x dense1
  Eigen::MatrixXd fc1_b;
  Eigen::MatrixXd fc2_w;  // dense1 x dense2
  Eigen::MatrixXd fc2_b;
  Eigen::MatrixXd out_w;  // dense2 x classes
  Eigen::MatrixXd out_b;

  static constexpr std::array<std::string_view, 10> kNames = {
      "conv_w", "conv_b", "bn_gamma", "bn_beta", "fc1_w",
      "fc1_b",  "fc2_w",  "fc2_b",    "out_w",   "out_b"};

  /// Calls f(field_of(ps)...) for every tensor, in declaration order.
  template <class F, class... Ps>
  static void zip(F&& f, Ps&... ps) {
    f(ps.conv_w...);
    f(ps.conv_b...);
    f(ps.bn_gamma...);
    f(ps.bn_beta...);
    f(ps.fc1_w...);
    f(ps.fc1_b...);
    f(ps.fc2_w...);
    f(ps.fc2_b...);
    f(ps.out_w...);
    f(ps.out_b...);
  }

  CNNParams zeros_like() const;
  std::size_t parameter_count() const;
};

struct CNNModel {
  CNNConfig config;
  CNNParams params;
  Eigen::MatrixXd bn_running_mean;  // 1 x kernels
  Eigen::MatrixXd bn_running_var;   // 1 x kernels
  CNNParams adam_m;
  CNNParams adam_v;
  std::uint64_t step = 0;
};

enum class Mode { Training, Inference };

/// He-normal weights (1/fan_in for the output layer), zero biases, BN
/// scale 1 / shift 0, running variance 1.
CNNModel init_model(const CNNConfig& config);

/// One spectrum per row.
Eigen::MatrixXd to_batch(std::span<const Spectrum> spectra);

/// Class probabilities, one row per input row. Training mode normalizes with
/// batch statistics, inference mode with the running statistics.
Eigen::MatrixXd forward(const CNNModel& model, const Eigen::MatrixXd& batch, Mode mode);

struct LossGradients {
  double loss = 0.0;
  CNNParams grads;
  Eigen::RowVectorXd batch_mean;  // BN statistics of this batch
  Eigen::RowVectorXd batch_var;   // biased
};

/// Mean softmax cross-entropy (training mode) and its exact gradients.
/// Labels are class ids 1..C. Does not touch the model.
LossGradients loss_and_gradients(const CNNModel& model, const Eigen::MatrixXd& batch,
                                 std::span<const ClassId> labels);

/// Loss only, same definition as loss_and_gradients.
double batch_loss(const CNNModel& model, const Eigen::MatrixXd& batch,
                  std::span<const ClassId> labels);

/// Bias-corrected ADAM update of every trainable tensor.
void adam_step(CNNModel& model, const CNNParams& grads);

/// Exponential moving average of the BN statistics.
void update_running_stats(CNNModel& model, const LossGradients& step_result,
                          std::size_t rows_per_channel);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  CNNModel model;  // best-validation snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Mini-batch ADAM until validation accuracy fails to strictly improve for
/// `patience` consecutive epochs or max_epochs is reached.
TrainResult train(CNNModel model, std::span<const Spectrum> train_set,
                  std::span<const Spectrum> val_set);

double accuracy(const CNNModel& model, std::span<const Spectrum> samples);

/// Lowest class id wins exact ties.
ClassId argmax_class(std::span<const double> proba);

std::vector<double> predict_proba(const CNNModel& model, std::span<const double> spectrum);
ClassId predict(const CNNModel& model, std::span<const double> spectrum);

void save_checkpoint(const std::filesystem::path& path, const CNNModel& model);
CNNModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hyperaug
