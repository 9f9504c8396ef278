#pragma once

// Feed-forward match classifier shared by the recall and precision stages:
// input -> 128 ReLU -> dropout -> 64 ReLU -> dropout -> 1 sigmoid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "aler/features.hpp"

namespace aler {

struct MlpParameters {
  Eigen::MatrixXd w1;  // input_dim x 128
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // 128 x 64
  Eigen::VectorXd b2;
  Eigen::VectorXd w3;  // 64
  double b3 = 0.0;

  /// Same shapes as `like`, all zero.
  static MlpParameters zeros_like(const MlpParameters& like);

  std::size_t size() const;
  /// Flat view in layer order (w1 row-major, b1, w2 row-major, b2, w3, b3).
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
};

class MlpModel {
 public:
  static constexpr std::size_t kHidden1 = 128;
  static constexpr std::size_t kHidden2 = 64;

  MlpModel() = default;

  /// Uniform fan-in scaled initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in))
  /// for weights, zero biases.
  static MlpModel initialize(std::size_t input_dim, double dropout_rate, std::uint64_t seed);

  /// All weights zero; the output is sigmoid(output_bias) everywhere.
  static MlpModel constant(std::size_t input_dim, double output_bias);

  std::size_t input_dim() const { return static_cast<std::size_t>(params_.w1.rows()); }
  double dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(double rate) { dropout_rate_ = rate; }

  const MlpParameters& params() const { return params_; }
  MlpParameters& params() { return params_; }

  /// Inference-mode probabilities (dropout off) for every row, in order.
  /// Outputs are clamped into [1e-12, 1 - 1e-12]. Throws ValidationError on a
  /// column count other than input_dim().
  std::vector<double> predict(const FeatureMatrix& features) const;
  double predict_one(std::span<const double> feature) const;

  /// Pre-sigmoid scores.
  Eigen::VectorXd logits(const FeatureMatrix& features) const;

 private:
  MlpParameters params_;
  double dropout_rate_ = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 15;
  double learning_rate = 1e-3;
  double dropout_rate = 0.2;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Mean binary cross-entropy with dropout disabled.
double mean_loss(const MlpModel& model, const FeatureMatrix& features, std::span<const int> labels);

/// Mean binary cross-entropy (times `loss_scale`) and its gradient with
/// dropout disabled.
double loss_and_gradient(const MlpModel& model, const FeatureMatrix& features,
                         std::span<const int> labels, MlpParameters& gradient,
                         double loss_scale = 1.0);

/// Adaptive-moment optimizer state for one model.
class AdamOptimizer {
 public:
  AdamOptimizer(const MlpModel& model, const TrainConfig& config);
  void step(MlpModel& model, const MlpParameters& gradient);

 private:
  TrainConfig config_;
  MlpParameters m_;
  MlpParameters v_;
  std::size_t t_ = 0;
};

/// Trains a freshly initialized model by mini-batch Adam on binary
/// cross-entropy, with inverted dropout after each hidden layer. Deterministic
/// for a fixed config.seed. When `epoch_losses` is given, the full-set loss
/// (dropout off) after every epoch is appended to it.
///
/// Throws SingleClassError when all labels agree, ValidationError on
/// mismatched sizes or fewer than two examples.
MlpModel train(const FeatureMatrix& features, std::span<const int> labels,
               const TrainConfig& config, std::vector<double>* epoch_losses = nullptr);

/// Same as model.predict(features).
std::vector<double> predict_batch(const MlpModel& model, const FeatureMatrix& features);

struct ThresholdResult {
  double threshold = 0.5;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Scans every distinct probability as a threshold (predict a match when
/// prob >= threshold) and returns the F1 maximizer, preferring the larger
/// threshold on ties. Throws ValidationError when no label is positive or
/// the lengths differ.
ThresholdResult optimal_threshold(std::span<const double> probs, std::span<const int> labels);

/// Maximum relative error between the analytic loss gradient and central
/// finite differences with step `h`, over `sample_size` parameters drawn with
/// `seed` (all parameters when the model has fewer).
double gradient_check(const MlpModel& model, std::span<const double> feature, int label,
                      std::uint64_t seed = 0, std::size_t sample_size = 100, double h = 1e-5);

/// Versioned little-endian file: magic "ALERMLP1", u32 version, u32
/// input_dim, u32 hidden1, u32 hidden2, f32 dropout, then every parameter as
/// f32 in layer order.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace aler
