#include "aler/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "binary_io.hpp"

namespace aler {

namespace {

constexpr char kModelMagic[8] = {'A', 'L', 'E', 'R', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kProbFloor = 1e-12;

double sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy on a logit, numerically stable for large |z|.
double bce_with_logit(double z, int y) {
  return std::max(z, 0.0) - (y ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

template <typename F>
void for_each_block(MlpParameters& a, const MlpParameters& b, F&& f) {
  f(a.w1.array(), b.w1.array());
  f(a.b1.array(), b.b1.array());
  f(a.w2.array(), b.w2.array());
  f(a.b2.array(), b.b2.array());
  f(a.w3.array(), b.w3.array());
  Eigen::Array<double, 1, 1> sa;
  Eigen::Array<double, 1, 1> sb;
  sa(0) = a.b3;
  sb(0) = b.b3;
  f(sa, sb);
  a.b3 = sa(0);
}

// Dropout masks hold 0 or 1/(1-rate); empty masks mean inference mode.
struct DropoutMasks {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
};

// Forward and backward pass over a batch; returns the mean loss times
// `scale`. `grad` may be null for a loss-only evaluation.
double forward_backward(const MlpParameters& p, const FeatureMatrix& x, std::span<const int> y,
                        const DropoutMasks* masks, MlpParameters* grad, double scale) {
  const auto n = x.rows();
  Eigen::MatrixXd z1 = x * p.w1;
  z1.rowwise() += p.b1.transpose();
  Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  if (masks) a1.array() *= masks->first.array();
  Eigen::MatrixXd z2 = a1 * p.w2;
  z2.rowwise() += p.b2.transpose();
  Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
  if (masks) a2.array() *= masks->second.array();
  Eigen::VectorXd z3 = a2 * p.w3;
  z3.array() += p.b3;

  double loss = 0.0;
  Eigen::VectorXd dz3(n);
  const double inv_n = scale / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    loss += bce_with_logit(z3(i), label);
    dz3(i) = (sigmoid(z3(i)) - label) * inv_n;
  }
  loss *= inv_n;
  if (!grad) return loss;

  grad->w3.noalias() = a2.transpose() * dz3;
  grad->b3 = dz3.sum();
  Eigen::MatrixXd dz2 = dz3 * p.w3.transpose();
  dz2.array() *= (z2.array() > 0.0).cast<double>();
  if (masks) dz2.array() *= masks->second.array();
  grad->w2.noalias() = a1.transpose() * dz2;
  grad->b2 = dz2.colwise().sum().transpose();
  Eigen::MatrixXd dz1 = dz2 * p.w2.transpose();
  dz1.array() *= (z1.array() > 0.0).cast<double>();
  if (masks) dz1.array() *= masks->first.array();
  grad->w1.noalias() = x.transpose() * dz1;
  grad->b1 = dz1.colwise().sum().transpose();
  return loss;
}

void check_labels(const FeatureMatrix& features, std::span<const int> labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ValidationError("feature rows (" + std::to_string(features.rows()) + ") and labels (" +
                          std::to_string(labels.size()) + ") differ");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
  }
}

}  // namespace

MlpParameters MlpParameters::zeros_like(const MlpParameters& like) {
  MlpParameters z;
  z.w1 = Eigen::MatrixXd::Zero(like.w1.rows(), like.w1.cols());
  z.b1 = Eigen::VectorXd::Zero(like.b1.size());
  z.w2 = Eigen::MatrixXd::Zero(like.w2.rows(), like.w2.cols());
  z.b2 = Eigen::VectorXd::Zero(like.b2.size());
  z.w3 = Eigen::VectorXd::Zero(like.w3.size());
  z.b3 = 0.0;
  return z;
}

std::size_t MlpParameters::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1);
}

double& MlpParameters::at(std::size_t i) {
  auto take = [&i](Eigen::MatrixXd& m) -> double* {
    const auto count = static_cast<std::size_t>(m.size());
    if (i < count) {
      const auto cols = static_cast<std::size_t>(m.cols());
      return &m(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols));
    }
    i -= count;
    return nullptr;
  };
  auto take_vec = [&i](Eigen::VectorXd& v) -> double* {
    const auto count = static_cast<std::size_t>(v.size());
    if (i < count) return &v(static_cast<Eigen::Index>(i));
    i -= count;
    return nullptr;
  };
  if (double* p = take(w1)) return *p;
  if (double* p = take_vec(b1)) return *p;
  if (double* p = take(w2)) return *p;
  if (double* p = take_vec(b2)) return *p;
  if (double* p = take_vec(w3)) return *p;
  if (i == 0) return b3;
  throw std::out_of_range("MlpParameters::at");
}

double MlpParameters::at(std::size_t i) const { return const_cast<MlpParameters*>(this)->at(i); }

MlpModel MlpModel::initialize(std::size_t input_dim, double dropout_rate, std::uint64_t seed) {
  if (input_dim == 0) throw ValidationError("input_dim must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout rate must be in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    }
  };
  MlpModel model;
  model.dropout_rate_ = dropout_rate;
  auto& p = model.params_;
  p.w1.resize(static_cast<Eigen::Index>(input_dim), kHidden1);
  p.w2.resize(kHidden1, kHidden2);
  Eigen::MatrixXd w3(kHidden2, 1);
  fill(p.w1, input_dim);
  fill(p.w2, kHidden1);
  fill(w3, kHidden2);
  p.w3 = w3.col(0);
  p.b1 = Eigen::VectorXd::Zero(kHidden1);
  p.b2 = Eigen::VectorXd::Zero(kHidden2);
  p.b3 = 0.0;
  return model;
}

MlpModel MlpModel::constant(std::size_t input_dim, double output_bias) {
  MlpModel model = initialize(input_dim, 0.0, 0);
  model.params_ = MlpParameters::zeros_like(model.params_);
  model.params_.b3 = output_bias;
  return model;
}

Eigen::VectorXd MlpModel::logits(const FeatureMatrix& features) const {
  if (static_cast<std::size_t>(features.cols()) != input_dim()) {
    throw ValidationError("feature dim " + std::to_string(features.cols()) +
                          " does not match model input dim " + std::to_string(input_dim()));
  }
  const auto& p = params_;
  Eigen::MatrixXd h1 = features * p.w1;
  h1.rowwise() += p.b1.transpose();
  h1 = h1.cwiseMax(0.0);
  Eigen::MatrixXd h2 = h1 * p.w2;
  h2.rowwise() += p.b2.transpose();
  h2 = h2.cwiseMax(0.0);
  Eigen::VectorXd z = h2 * p.w3;
  z.array() += p.b3;
  return z;
}

std::vector<double> MlpModel::predict(const FeatureMatrix& features) const {
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  constexpr Eigen::Index kBlock = 4096;
  for (Eigen::Index start = 0; start < features.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, features.rows() - start);
    const Eigen::VectorXd z = logits(features.middleRows(start, rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
      out[static_cast<std::size_t>(start + i)] =
          std::clamp(sigmoid(z(i)), kProbFloor, 1.0 - kProbFloor);
    }
  }
  return out;
}

double MlpModel::predict_one(std::span<const double> feature) const {
  FeatureMatrix row(1, static_cast<Eigen::Index>(feature.size()));
  std::copy(feature.begin(), feature.end(), row.data());
  return predict(row).front();
}

std::vector<double> predict_batch(const MlpModel& model, const FeatureMatrix& features) {
  return model.predict(features);
}

double mean_loss(const MlpModel& model, const FeatureMatrix& features, std::span<const int> labels) {
  check_labels(features, labels);
  return forward_backward(model.params(), features, labels, nullptr, nullptr, 1.0);
}

double loss_and_gradient(const MlpModel& model, const FeatureMatrix& features,
                         std::span<const int> labels, MlpParameters& gradient, double loss_scale) {
  check_labels(features, labels);
  gradient = MlpParameters::zeros_like(model.params());
  return forward_backward(model.params(), features, labels, nullptr, &gradient, loss_scale);
}

AdamOptimizer::AdamOptimizer(const MlpModel& model, const TrainConfig& config)
    : config_(config),
      m_(MlpParameters::zeros_like(model.params())),
      v_(MlpParameters::zeros_like(model.params())) {}

void AdamOptimizer::step(MlpModel& model, const MlpParameters& gradient) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for_each_block(m_, gradient, [b1](auto m, auto g) { m = b1 * m + (1 - b1) * g; });
  for_each_block(v_, gradient, [b2](auto v, auto g) { v = b2 * v + (1 - b2) * g * g; });
  if (lr == 0.0) return;

  auto& p = model.params();
  auto update = [&](auto param, auto m, auto v) {
    param -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  };
  update(p.w1.array(), m_.w1.array(), v_.w1.array());
  update(p.b1.array(), m_.b1.array(), v_.b1.array());
  update(p.w2.array(), m_.w2.array(), v_.w2.array());
  update(p.b2.array(), m_.b2.array(), v_.b2.array());
  update(p.w3.array(), m_.w3.array(), v_.w3.array());
  p.b3 -= lr * (m_.b3 / c1) / (std::sqrt(v_.b3 / c2) + eps);
}

MlpModel train(const FeatureMatrix& features, std::span<const int> labels,
               const TrainConfig& config, std::vector<double>* epoch_losses) {
  check_labels(features, labels);
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < 2) throw ValidationError("training needs at least two examples");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == n) throw SingleClassError("single-class training set");
  if (config.batch_size == 0 || config.max_epochs == 0) {
    throw ValidationError("batch_size and max_epochs must be positive");
  }
  if (!(config.learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");

  MlpModel model = MlpModel::initialize(static_cast<std::size_t>(features.cols()),
                                        config.dropout_rate, mix_seed(config.seed, 1));
  AdamOptimizer optimizer(model, config);
  std::mt19937_64 rng(mix_seed(config.seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 - config.dropout_rate;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MlpParameters grad = MlpParameters::zeros_like(model.params());
  FeatureMatrix batch;
  std::vector<int> batch_labels;
  DropoutMasks masks;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t rows = std::min(config.batch_size, n - start);
      batch.resize(static_cast<Eigen::Index>(rows), features.cols());
      batch_labels.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        batch.row(static_cast<Eigen::Index>(r)) =
            features.row(static_cast<Eigen::Index>(order[start + r]));
        batch_labels[r] = labels[order[start + r]];
      }
      const DropoutMasks* active = nullptr;
      if (config.dropout_rate > 0.0) {
        auto draw = [&](Eigen::MatrixXd& m, Eigen::Index cols) {
          m.resize(static_cast<Eigen::Index>(rows), cols);
          for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = unit(rng) < keep ? 1.0 / keep : 0.0;
          }
        };
        draw(masks.first, MlpModel::kHidden1);
        draw(masks.second, MlpModel::kHidden2);
        active = &masks;
      }
      forward_backward(model.params(), batch, batch_labels, active, &grad, 1.0);
      optimizer.step(model, grad);
    }
    if (epoch_losses) epoch_losses->push_back(mean_loss(model, features, labels));
  }
  return model;
}

ThresholdResult optimal_threshold(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw ValidationError("probs and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw ValidationError("optimal_threshold needs at least one positive label");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  ThresholdResult best;
  best.f1 = -1.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  // Walk thresholds from high to low; at each distinct value every example
  // with prob >= threshold is predicted positive. Strict '>' on F1 keeps the
  // larger threshold on ties.
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = probs[order[i]];
    while (i < order.size() && probs[order[i]] == threshold) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const std::size_t fn = positives - tp;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    if (f1 > best.f1) best = {threshold, f1, tp, fp, fn};
  }
  return best;
}

double gradient_check(const MlpModel& model, std::span<const double> feature, int label,
                      std::uint64_t seed, std::size_t sample_size, double h) {
  FeatureMatrix x(1, static_cast<Eigen::Index>(feature.size()));
  std::copy(feature.begin(), feature.end(), x.data());
  const std::vector<int> y{label};

  MlpParameters analytic;
  loss_and_gradient(model, x, y, analytic);

  MlpModel probe = model;
  const std::size_t total = probe.params().size();
  std::vector<std::size_t> indices(total);
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min(sample_size, total));

  double worst = 0.0;
  for (std::size_t idx : indices) {
    double& param = probe.params().at(idx);
    const double original = param;
    param = original + h;
    const double up = mean_loss(probe, x, y);
    param = original - h;
    const double down = mean_loss(probe, x, y);
    param = original;
    const double numeric = (up - down) / (2.0 * h);
    const double exact = analytic.at(idx);
    const double denom = std::max(std::abs(numeric), std::abs(exact));
    const double err = denom < 1e-10 ? std::abs(numeric - exact) : std::abs(numeric - exact) / denom;
    worst = std::max(worst, err);
  }
  return worst;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  using detail::write_le;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kModelMagic, sizeof kModelMagic);
  write_le<std::uint32_t>(out, kModelVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim()));
  write_le<std::uint32_t>(out, MlpModel::kHidden1);
  write_le<std::uint32_t>(out, MlpModel::kHidden2);
  write_le<float>(out, static_cast<float>(model.dropout_rate()));
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) write_le<float>(out, static_cast<float>(p.at(i)));
  if (!out) throw Error("failed writing " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  using detail::read_le;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw ValidationError(path.string() + " is not an ALERMLP1 model file");
  }
  if (read_le<std::uint32_t>(in, "version") != kModelVersion) {
    throw ValidationError(path.string() + ": unsupported model version");
  }
  const auto input_dim = read_le<std::uint32_t>(in, "input dim");
  const auto h1 = read_le<std::uint32_t>(in, "hidden1");
  const auto h2 = read_le<std::uint32_t>(in, "hidden2");
  if (h1 != MlpModel::kHidden1 || h2 != MlpModel::kHidden2 || input_dim == 0) {
    throw ValidationError(path.string() + ": unexpected architecture");
  }
  const auto dropout = read_le<float>(in, "dropout");
  MlpModel model = MlpModel::constant(input_dim, 0.0);
  model.set_dropout_rate(dropout);
  auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const float v = read_le<float>(in, "parameter");
    if (!std::isfinite(v)) throw ValidationError(path.string() + ": non-finite parameter");
    p.at(i) = v;
  }
  return model;
}

}  // namespace aler
