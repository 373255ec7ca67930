// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "evsenet/core.hpp"
#include "evsenet/featurize.hpp"
#include "evsenet/random.hpp"

namespace evsenet {

enum class OutputTransform { Raw, Log };

inline std::string to_string(OutputTransform t) { return t == OutputTransform::Raw ? "raw" : "log"; }
inline OutputTransform output_transform_from_string(const std::string& s) {
  if (s == "raw") return OutputTransform::Raw;
  if (s == "log") return OutputTransform::Log;
  throw Error("unknown output transform '" + s + "'");
}

struct ModelConfig {
  int model_id = 3;
  std::vector<int> hidden_layers{256};
  FeatureConfig features{};
  OutputTransform output_transform = OutputTransform::Log;
  double log_epsilon = 1e-3;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 200;
  std::uint64_t seed = 0;

  std::size_t input_size() const { return features.length(); }
};

inline void validate(const ModelConfig& c) {
  validate(c.features);
  for (int w : c.hidden_layers)
    if (w <= 0) throw Error("model config: hidden widths must be positive");
  if (!(c.learning_rate > 0.0)) throw Error("model config: learning_rate must be positive");
  if (!(c.log_epsilon > 0.0)) throw Error("model config: log_epsilon must be positive");
  if (c.batch_size <= 0 || c.epochs < 0) throw Error("model config: batch_size must be positive, epochs nonnegative");
}

/// The five architecture/input/output combinations.
/// 1: [128] raw; 2: [128] log; 3: [256] log; 4: [128] log + door distance;
/// 5: [256, 256] log + door distance.
inline ModelConfig model_config(int model_id, int m = 9) {
  ModelConfig c;
  c.model_id = model_id;
  c.features.m = m;
  switch (model_id) {
    case 1: c.hidden_layers = {128}; c.output_transform = OutputTransform::Raw; break;
    case 2: c.hidden_layers = {128}; break;
    case 3: c.hidden_layers = {256}; break;
    case 4: c.hidden_layers = {128}; c.features.include_door_distance = true; break;
    case 5: c.hidden_layers = {256, 256}; c.features.include_door_distance = true; break;
    default: throw Error("model id must be 1-5, got " + std::to_string(model_id));
  }
  return c;
}

inline constexpr std::size_t kOutputs = 2;  // (tau, p_tot)

/// Target-space transform applied before training.
inline double transform_target(double y, const ModelConfig& c) {
  return c.output_transform == OutputTransform::Log ? std::log(std::max(y, c.log_epsilon)) : y;
}
inline double inverse_transform(double y, const ModelConfig& c) {
  return c.output_transform == OutputTransform::Log ? std::exp(y) : y;
}

struct Parameters {
  std::vector<Eigen::MatrixXd> weights;  // [out x in]
  std::vector<Eigen::VectorXd> biases;

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }
};

class MlpModel {
 public:
  MlpModel() = default;

  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights and zero biases.
  explicit MlpModel(ModelConfig config) : config_(std::move(config)) {
    validate(config_);
    Rng rng(derive_seed(config_.seed, "mlp-init", 0));
    std::vector<int> dims{static_cast<int>(config_.input_size())};
    dims.insert(dims.end(), config_.hidden_layers.begin(), config_.hidden_layers.end());
    dims.push_back(static_cast<int>(kOutputs));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
      Eigen::MatrixXd w(dims[l + 1], dims[l]);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform(rng, -limit, limit);
      params_.weights.push_back(std::move(w));
      params_.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
    }
  }

  MlpModel(ModelConfig config, Parameters params) : config_(std::move(config)), params_(std::move(params)) {
    validate(config_);
    check_shapes();
  }

  const ModelConfig& config() const { return config_; }
  const Parameters& params() const { return params_; }
  Parameters& params() { return params_; }
  std::size_t layers() const { return params_.weights.size(); }

  /// Columns are samples. Returns a kOutputs x n matrix in transformed space.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != config_.input_size())
      throw Error("forward: expected " + std::to_string(config_.input_size()) + " features, got " +
                  std::to_string(inputs.rows()));
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers(); ++l) {
      Eigen::MatrixXd z = params_.weights[l] * a;
      z.colwise() += params_.biases[l];
      a = l + 1 < layers() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return a;
  }

  std::array<double, kOutputs> forward(std::span<const double> features) const {
    Eigen::Map<const Eigen::VectorXd> x(features.data(), static_cast<Eigen::Index>(features.size()));
    const Eigen::MatrixXd y = forward(Eigen::MatrixXd(x));
    return {y(0, 0), y(1, 0)};
  }

 private:
  void check_shapes() const {
    auto in = static_cast<Eigen::Index>(config_.input_size());
    const auto& w = params_.weights;
    if (w.size() != config_.hidden_layers.size() + 1 || params_.biases.size() != w.size())
      throw Error("model: layer count does not match configuration");
    for (std::size_t l = 0; l < w.size(); ++l) {
      const Eigen::Index out = l < config_.hidden_layers.size() ? config_.hidden_layers[l] : kOutputs;
      if (w[l].cols() != in || w[l].rows() != out || params_.biases[l].size() != out)
        throw Error("model: dimension mismatch in layer " + std::to_string(l));
      in = out;
    }
  }

  ModelConfig config_;
  Parameters params_;
};

struct Batch {
  Eigen::MatrixXd inputs;   // features x n
  Eigen::MatrixXd targets;  // kOutputs x n, transformed space
};

/// Mean over samples and outputs of the squared error.
inline double batch_mse(const MlpModel& model, const Batch& batch) {
  const Eigen::MatrixXd diff = model.forward(batch.inputs) - batch.targets;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

/// Per-output mean squared error.
inline std::array<double, kOutputs> per_target_mse(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& targets) {
  std::array<double, kOutputs> out{};
  const Eigen::MatrixXd diff = predicted - targets;
  for (std::size_t k = 0; k < kOutputs; ++k)
    out[k] = diff.row(static_cast<Eigen::Index>(k)).squaredNorm() / static_cast<double>(diff.cols());
  return out;
}

/// Analytic gradient of batch_mse by backpropagation.
inline Parameters gradients(const MlpModel& model, const Batch& batch, double* loss = nullptr) {
  const auto& p = model.params();
  if (static_cast<std::size_t>(batch.inputs.rows()) != model.config().input_size() ||
      batch.targets.rows() != static_cast<Eigen::Index>(kOutputs) || batch.targets.cols() != batch.inputs.cols())
    throw Error("gradients: batch dimension mismatch");
  const std::size_t L = model.layers();
  std::vector<Eigen::MatrixXd> acts{batch.inputs};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = p.weights[l] * acts.back();
    z.colwise() += p.biases[l];
    pre.push_back(z);
    acts.push_back(l + 1 < L ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
  }
  const Eigen::MatrixXd diff = acts.back() - batch.targets;
  const double denom = static_cast<double>(diff.size());
  if (loss) *loss = diff.squaredNorm() / denom;

  Parameters g;
  g.weights.resize(L);
  g.biases.resize(L);
  Eigen::MatrixXd delta = (2.0 / denom) * diff;
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l].noalias() = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = p.weights[l].transpose() * delta;
    delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

/// Smallest |pre-activation| over all hidden units and samples.
inline double min_abs_preactivation(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l + 1 < model.layers(); ++l) {
    Eigen::MatrixXd z = model.params().weights[l] * a;
    z.colwise() += model.params().biases[l];
    best = std::min(best, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return best;
}

class Adam {
 public:
  explicit Adam(const ModelConfig& c, const Parameters& shape)
      : lr_(c.learning_rate), b1_(c.adam_beta1), b2_(c.adam_beta2), eps_(c.adam_epsilon), m_(shape), v_(shape) {
    m_.set_zero();
    v_.set_zero();
  }

  void step(Parameters& params, const Parameters& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
      m = b1_ * m + (1.0 - b1_) * g;
      v = b2_ * v + (1.0 - b2_) * g.cwiseProduct(g);
      param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      update(params.weights[l], grad.weights[l], m_.weights[l], v_.weights[l]);
      update(params.biases[l], grad.biases[l], m_.biases[l], v_.biases[l]);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  Parameters m_, v_;
  int t_ = 0;
};

/// Raw rows: features plus physical (tau, p_tot) targets.
struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<std::array<double, kOutputs>> targets;

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
};

/// Columns are samples; targets transformed per the model config.
inline Batch make_batch(const Dataset& data, const ModelConfig& config, std::span<const std::size_t> rows) {
  const auto in = static_cast<Eigen::Index>(config.input_size());
  Batch b{Eigen::MatrixXd(in, static_cast<Eigen::Index>(rows.size())),
          Eigen::MatrixXd(static_cast<Eigen::Index>(kOutputs), static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto& f = data.features[rows[c]];
    if (f.size() != config.input_size())
      throw Error("dataset row has " + std::to_string(f.size()) + " features, model expects " +
                  std::to_string(config.input_size()));
    for (Eigen::Index r = 0; r < in; ++r) b.inputs(r, static_cast<Eigen::Index>(c)) = f[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < kOutputs; ++k)
      b.targets(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = transform_target(data.targets[rows[c]][k], config);
  }
  return b;
}

inline Batch make_batch(const Dataset& data, const ModelConfig& config) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return make_batch(data, config, all);
}

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  std::array<double, kOutputs> train_per_target{};
  std::array<double, kOutputs> val_per_target{};
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
};

inline void check_finite(const Dataset& data, const char* what) {
  for (const auto& f : data.features)
    for (double v : f)
      if (!std::isfinite(v)) throw Error(std::string(what) + ": non-finite feature");
  for (const auto& t : data.targets)
    for (double v : t)
      if (!std::isfinite(v)) throw Error(std::string(what) + ": non-finite target");
}

/// Mini-batch Adam on MSE. The validation set may be empty. Deterministic
/// in config.seed.
inline TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& config) {
  validate(config);
  if (train_set.empty()) throw Error("train: empty dataset");
  check_finite(train_set, "train");
  check_finite(val_set, "validation");
  TrainResult result{MlpModel(config), {}};
  MlpModel& model = result.model;
  Adam adam(config, model.params());
  Rng rng(derive_seed(config.seed, "mlp-shuffle", 0));

  const Batch full_train = make_batch(train_set, config);
  const bool have_val = !val_set.empty();
  const Batch full_val = have_val ? make_batch(val_set, config) : Batch{};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      Batch batch{Eigen::MatrixXd(full_train.inputs.rows(), static_cast<Eigen::Index>(len)),
                  Eigen::MatrixXd(full_train.targets.rows(), static_cast<Eigen::Index>(len))};
      for (std::size_t c = 0; c < len; ++c) {
        batch.inputs.col(static_cast<Eigen::Index>(c)) = full_train.inputs.col(static_cast<Eigen::Index>(order[start + c]));
        batch.targets.col(static_cast<Eigen::Index>(c)) = full_train.targets.col(static_cast<Eigen::Index>(order[start + c]));
      }
      adam.step(model.params(), gradients(model, batch));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_per_target = per_target_mse(model.forward(full_train.inputs), full_train.targets);
    rec.train_mse = 0.5 * (rec.train_per_target[0] + rec.train_per_target[1]);
    if (have_val) {
      rec.val_per_target = per_target_mse(model.forward(full_val.inputs), full_val.targets);
      rec.val_mse = 0.5 * (rec.val_per_target[0] + rec.val_per_target[1]);
    }
    result.history.push_back(rec);
  }
  return result;
}

/// (tau kW, p_tot kWh) in physical units.
inline std::array<double, kOutputs> predict_stats(const MlpModel& model, std::span<const double> features) {
  const auto y = model.forward(features);
  return {inverse_transform(y[0], model.config()), inverse_transform(y[1], model.config())};
}

struct EvalReport {
  std::size_t rows = 0;
  std::array<double, kOutputs> transformed_mse{};
  std::array<double, kOutputs> physical_mse{};
};

inline EvalReport evaluate(const MlpModel& model, const Dataset& data) {
  if (data.empty()) throw Error("eval: empty dataset");
  const Batch b = make_batch(data, model.config());
  const Eigen::MatrixXd pred = model.forward(b.inputs);
  EvalReport r;
  r.rows = data.size();
  r.transformed_mse = per_target_mse(pred, b.targets);
  Eigen::MatrixXd phys_pred = pred;
  Eigen::MatrixXd phys_true(pred.rows(), pred.cols());
  for (Eigen::Index c = 0; c < pred.cols(); ++c)
    for (Eigen::Index k = 0; k < pred.rows(); ++k) {
      phys_pred(k, c) = inverse_transform(pred(k, c), model.config());
      phys_true(k, c) = data.targets[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
    }
  r.physical_mse = per_target_mse(phys_pred, phys_true);
  return r;
}

inline std::string serialize_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_mse,val_mse,train_mse_tau,train_mse_p_tot,val_mse_tau,val_mse_p_tot\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + format_double(h.train_mse) + "," + format_double(h.val_mse) + "," +
           format_double(h.train_per_target[0]) + "," + format_double(h.train_per_target[1]) + "," +
           format_double(h.val_per_target[0]) + "," + format_double(h.val_per_target[1]) + "\n";
  }
  return out;
}

}  // namespace evsenet
