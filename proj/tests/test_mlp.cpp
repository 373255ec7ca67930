// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "evsenet/mlp.hpp"
#include "evsenet/model_io.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace evsenet {
namespace {

Eigen::MatrixXd random_inputs(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) x(r, c) = uniform(rng, -1.0, 1.0);
  return x;
}

TEST(MlpConfig, FiveModels) {
  EXPECT_EQ(model_config(1).hidden_layers, std::vector<int>{128});
  EXPECT_EQ(model_config(1).output_transform, OutputTransform::Raw);
  EXPECT_EQ(model_config(2).hidden_layers, std::vector<int>{128});
  EXPECT_EQ(model_config(2).output_transform, OutputTransform::Log);
  EXPECT_EQ(model_config(3).hidden_layers, std::vector<int>{256});
  EXPECT_EQ(model_config(3).input_size(), 405u);
  EXPECT_EQ(model_config(4).input_size(), 406u);
  EXPECT_EQ(model_config(5).hidden_layers, (std::vector<int>{256, 256}));
  EXPECT_EQ(model_config(5).input_size(), 406u);
  EXPECT_THROW(model_config(6), Error);
  const MlpModel m1(model_config(1)), m2(model_config(2));
  EXPECT_EQ(m1.params().count(), m2.params().count());
  EXPECT_EQ(m1.params().count(), 405u * 128 + 128 + 128 * 2 + 2);
}

TEST(MlpForward, ZeroParametersGiveZero) {
  MlpModel m(model_config(5, 3));
  m.params().set_zero();
  Rng rng(1);
  const auto y = m.forward(random_inputs(rng, static_cast<Eigen::Index>(m.config().input_size()), 7));
  EXPECT_TRUE(y.isZero(0.0));
}

TEST(MlpForward, HandSetWeights) {
  ModelConfig c = model_config(2, 1);  // 5 inputs
  c.hidden_layers = {2};
  MlpModel m(c);
  auto& p = m.params();
  p.set_zero();
  p.weights[0](0, 0) = 1.0;
  p.weights[0](1, 0) = -1.0;
  p.weights[1](0, 0) = 1.0;
  p.weights[1](0, 1) = -1.0;
  p.weights[1](1, 0) = 2.0;
  p.biases[1](1) = 3.0;
  for (double x0 : {-1.5, 0.0, 2.25}) {
    const std::vector<double> x{x0, 0.3, -0.7, 1.0, 5.0};
    const auto y = m.forward(x);
    EXPECT_DOUBLE_EQ(y[0], x0);
    EXPECT_DOUBLE_EQ(y[1], 2.0 * std::max(x0, 0.0) + 3.0);
  }
}

TEST(MlpForward, MatchesNaiveArithmetic) {
  Rng rng(3);
  for (int id = 1; id <= 5; ++id) {
    ModelConfig c = model_config(id);
    c.seed = static_cast<std::uint64_t>(id);
    MlpModel m(c);
    for (auto& b : m.params().biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = uniform(rng, -0.5, 0.5);
    const auto x = random_inputs(rng, static_cast<Eigen::Index>(c.input_size()), 5);
    const auto y = m.forward(x);
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
      std::vector<double> xv(x.col(col).data(), x.col(col).data() + x.rows());
      const auto ref = oracle::naive_forward(m, xv);
      for (std::size_t k = 0; k < kOutputs; ++k)
        EXPECT_NEAR(y(static_cast<Eigen::Index>(k), col), ref[k], 1e-10);
    }
  }
}

TEST(MlpForward, RejectsWrongWidth) {
  const MlpModel m(model_config(2, 3));
  EXPECT_THROW(m.forward(Eigen::MatrixXd::Zero(44, 1)), Error);
}

TEST(MlpGradient, ZeroErrorGivesZeroGradient) {
  MlpModel m(model_config(5, 3));
  Rng rng(5);
  Batch b{random_inputs(rng, 46, 6), {}};
  b.targets = m.forward(b.inputs);
  double loss = -1.0;
  const auto g = gradients(m, b, &loss);
  EXPECT_EQ(loss, 0.0);
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    EXPECT_TRUE(g.weights[l].isZero(0.0));
    EXPECT_TRUE(g.biases[l].isZero(0.0));
  }
}

TEST(MlpGradient, LossMatchesNaiveMse) {
  MlpModel m(model_config(4, 3));
  Rng rng(6);
  Batch b{random_inputs(rng, 46, 9), random_inputs(rng, 2, 9)};
  double loss = 0.0;
  gradients(m, b, &loss);
  EXPECT_NEAR(loss, oracle::naive_mse(m, b), 1e-12);
  EXPECT_NEAR(batch_mse(m, b), loss, 1e-12);
}

TEST(MlpGradient, SingleLinearLayerClosedForm) {
  ModelConfig c = model_config(2, 1);
  c.hidden_layers = {};
  c.seed = 9;
  MlpModel m(c);
  Rng rng(10);
  const Eigen::Index n = 8;
  Batch b{random_inputs(rng, 5, n), random_inputs(rng, 2, n)};
  // L = |W X + b 1^T - Y|^2 / (2n)  =>  dW = (2 / 2n) R X^T,  db = (2 / 2n) R 1.
  const Eigen::MatrixXd r = (m.params().weights[0] * b.inputs).colwise() + m.params().biases[0] - b.targets;
  const Eigen::MatrixXd dw = r * b.inputs.transpose() / static_cast<double>(n);
  const Eigen::VectorXd db = r.rowwise().sum() / static_cast<double>(n);
  const auto g = gradients(m, b);
  EXPECT_TRUE(g.weights[0].isApprox(dw, 1e-12));
  EXPECT_TRUE(g.biases[0].isApprox(db, 1e-12));
}

TEST(MlpGradient, FiniteDifferencesSmallModels) {
  for (int id = 1; id <= 5; ++id)
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto r = testing::gradient_check(model_config(id, 3), s + 100 * static_cast<std::uint64_t>(id), 8);
      EXPECT_EQ(r.checked, 2 * 8 * static_cast<int>(model_config(id).hidden_layers.size() + 1));
      EXPECT_LE(r.worst, testing::kFdRelTol) << "model " << id << " " << r.worst_where;
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  MlpModel m(model_config(2, 3));
  const Parameters before = m.params();
  Parameters zero = m.params();
  zero.set_zero();
  Adam adam(m.config(), m.params());
  for (int i = 0; i < 5; ++i) adam.step(m.params(), zero);
  for (std::size_t l = 0; l < before.weights.size(); ++l) EXPECT_EQ(before.weights[l], m.params().weights[l]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  MlpModel m(model_config(2, 1));
  const Parameters before = m.params();
  Parameters g = m.params();
  g.set_zero();
  g.weights[0](0, 0) = 3.0;
  g.biases[1](1) = -0.01;
  Adam adam(m.config(), m.params());
  adam.step(m.params(), g);
  EXPECT_NEAR(m.params().weights[0](0, 0), before.weights[0](0, 0) - 0.001, 1e-10);
  EXPECT_NEAR(m.params().biases[1](1), before.biases[1](1) + 0.001, 1e-8);
}

TEST(MlpInit, DeterministicInSeed) {
  ModelConfig c = model_config(3, 3);
  c.seed = 42;
  const MlpModel a(c), b(c);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  c.seed = 43;
  EXPECT_NE(serialize_model(a), serialize_model(MlpModel(c)));
  const double limit = std::sqrt(6.0 / (45 + 256));
  EXPECT_LE(a.params().weights[0].cwiseAbs().maxCoeff(), limit);
}

Dataset linear_data(Rng& rng, std::size_t n, const Eigen::MatrixXd& w) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = uniform01(rng);
    const Eigen::VectorXd y = w * Eigen::Map<Eigen::VectorXd>(x.data(), 5);
    d.features.push_back(x);
    d.targets.push_back({y(0), y(1)});
  }
  return d;
}

TEST(MlpTrain, MemorizesSingleSample) {
  ModelConfig c = model_config(2, 3);
  c.epochs = 1500;
  c.batch_size = 1;
  Dataset d;
  std::vector<double> x(45, 0.0);
  for (std::size_t i = 0; i < 45; i += 5) x[i] = 1.0;
  d.features.push_back(x);
  d.targets.push_back({6.6, 40.0});
  const auto r = train(d, {}, c);
  EXPECT_LT(r.history.back().train_mse, 1e-4);
  const auto y = predict_stats(r.model, x);
  EXPECT_NEAR(y[0], 6.6, 0.1);
  EXPECT_NEAR(y[1], 40.0, 0.5);
}

TEST(MlpTrain, LearnsLinearFunction) {
  Rng rng(21);
  Eigen::MatrixXd w(2, 5);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -1.0, 1.0);
  const Dataset tr = linear_data(rng, 500, w), te = linear_data(rng, 200, w);
  ModelConfig c = model_config(1, 1);
  c.hidden_layers = {32};
  c.epochs = 200;
  c.seed = 4;
  const auto r = train(tr, te, c);
  EXPECT_LT(r.history.back().val_mse, 1e-2);
  EXPECT_LT(evaluate(r.model, te).physical_mse[0], 1e-2);
  EXPECT_LT(r.history.back().train_mse, r.history.front().train_mse);
}

TEST(MlpTrain, DeterministicAndHistoryShape) {
  Rng rng(22);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 5, 0.5);
  const Dataset tr = linear_data(rng, 50, w);
  ModelConfig c = model_config(2, 1);
  c.epochs = 7;
  c.seed = 5;
  const auto a = train(tr, tr, c), b = train(tr, tr, c);
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
  EXPECT_EQ(serialize_history(a.history), serialize_history(b.history));
  EXPECT_EQ(split_lines(serialize_history(a.history)).size(), 8u);
  EXPECT_EQ(a.history.back().epoch, 7);
}

TEST(MlpTrain, RejectsBadData) {
  Dataset d;
  d.features.push_back(std::vector<double>(5, std::nan("")));
  d.targets.push_back({1.0, 1.0});
  EXPECT_THROW(train(d, {}, model_config(2, 1)), Error);
  EXPECT_THROW(train({}, {}, model_config(2, 1)), Error);
  Dataset wrong;
  wrong.features.push_back(std::vector<double>(6, 0.0));
  wrong.targets.push_back({1.0, 1.0});
  EXPECT_THROW(train(wrong, {}, model_config(2, 1)), Error);
}

TEST(OutputTransform, LogAndRaw) {
  MlpModel log_model(model_config(2, 1));
  log_model.params().set_zero();
  const std::vector<double> x(5, 0.3);
  EXPECT_EQ(predict_stats(log_model, x), (std::array<double, 2>{1.0, 1.0}));
  MlpModel raw_model(model_config(1, 1));
  raw_model.params().set_zero();
  raw_model.params().biases.back() << 2.5, -1.0;
  EXPECT_EQ(predict_stats(raw_model, x), (std::array<double, 2>{2.5, -1.0}));

  const ModelConfig c = model_config(2);
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double y = c.log_epsilon + uniform(rng, 0.0, 500.0);
    EXPECT_NEAR(inverse_transform(transform_target(y, c), c), y, 1e-9 * std::max(1.0, y));
  }
  EXPECT_EQ(transform_target(0.0, c), std::log(c.log_epsilon));
}

TEST(ModelIo, SaveLoadRoundTrip) {
  Rng rng(30);
  const auto dir = std::filesystem::temp_directory_path() / "evsenet_model_io";
  std::filesystem::create_directories(dir);
  for (int id = 1; id <= 5; ++id) {
    ModelConfig c = model_config(id);
    c.seed = 100 + static_cast<std::uint64_t>(id);
    c.learning_rate = 0.003;
    c.features.normalize_distance = id == 5;
    MlpModel m(c);
    for (auto& b : m.params().biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(rng, 0.0, 1.0);
    const auto path = (dir / ("m" + std::to_string(id) + ".json")).string();
    save_model(m, path);
    const MlpModel back = load_model(path);
    EXPECT_EQ(back.config().model_id, id);
    EXPECT_EQ(back.config().hidden_layers, c.hidden_layers);
    EXPECT_EQ(back.config().output_transform, c.output_transform);
    EXPECT_EQ(back.config().features.normalize_distance, c.features.normalize_distance);
    EXPECT_EQ(back.config().learning_rate, 0.003);
    const auto x = random_inputs(rng, static_cast<Eigen::Index>(c.input_size()), 100);
    EXPECT_EQ(m.forward(x), back.forward(x));
  }
  std::filesystem::remove_all(dir);
}

TEST(ModelIo, CorruptFilesAreRejected) {
  const std::string text = serialize_model(MlpModel(model_config(2, 3)));
  EXPECT_THROW(parse_model(text.substr(0, text.size() / 2)), Error);
  EXPECT_THROW(parse_model("{}"), Error);
  auto doc = nlohmann::json::parse(text);
  doc["layers"][0]["rows"] = 7;
  EXPECT_THROW(parse_model(doc.dump()), Error);
  doc = nlohmann::json::parse(text);
  doc["format"] = "other";
  EXPECT_THROW(parse_model(doc.dump()), Error);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

}  // namespace
}  // namespace evsenet
