// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "evsenet/core.hpp"
#include "evsenet/mlp.hpp"

namespace evsenet {

inline constexpr std::string_view kModelFormat = "evsenet-mlp";
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const FeatureConfig& f) {
  return {{"m", f.m}, {"include_door_distance", f.include_door_distance}, {"normalize_distance", f.normalize_distance}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig f;
  f.m = j.value("m", f.m);
  f.include_door_distance = j.value("include_door_distance", f.include_door_distance);
  f.normalize_distance = j.value("normalize_distance", f.normalize_distance);
  return f;
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"model_id", c.model_id},
          {"hidden_layers", c.hidden_layers},
          {"features", to_json(c.features)},
          {"output_transform", to_string(c.output_transform)},
          {"log_epsilon", c.log_epsilon},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed}};
}

/// Missing keys fall back to the defaults of the given model id.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c = model_config(j.value("model_id", 3), j.contains("features") ? j["features"].value("m", 9) : 9);
  if (j.contains("hidden_layers")) c.hidden_layers = j["hidden_layers"].get<std::vector<int>>();
  if (j.contains("features")) c.features = feature_config_from_json(j["features"]);
  if (j.contains("output_transform")) c.output_transform = output_transform_from_string(j["output_transform"].get<std::string>());
  c.log_epsilon = j.value("log_epsilon", c.log_epsilon);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

inline std::string serialize_model(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  const auto& p = model.params();
  for (std::size_t l = 0; l < model.layers(); ++l) {
    const auto& w = p.weights[l];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    std::vector<double> bias(p.biases[l].data(), p.biases[l].data() + p.biases[l].size());
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights", flat}, {"bias", bias}});
  }
  nlohmann::json doc{{"format", kModelFormat},
                     {"version", kModelFormatVersion},
                     {"config", to_json(model.config())},
                     {"layers", layers}};
  return doc.dump() + "\n";
}

inline MlpModel parse_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw Error("not an evsenet model file");
    if (doc.at("version").get<int>() != kModelFormatVersion) throw Error("unsupported model file version");
    ModelConfig config = model_config_from_json(doc.at("config"));
    Parameters params;
    for (const auto& layer : doc.at("layers")) {
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const auto flat = layer.at("weights").get<std::vector<double>>();
      const auto bias = layer.at("bias").get<std::vector<double>>();
      if (rows <= 0 || cols <= 0 || flat.size() != static_cast<std::size_t>(rows * cols) ||
          bias.size() != static_cast<std::size_t>(rows))
        throw Error("model file: layer dimension mismatch");
      Eigen::MatrixXd w(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
      params.weights.push_back(std::move(w));
      params.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), rows));
    }
    return MlpModel(std::move(config), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const MlpModel& model, const std::string& path) { write_file(path, serialize_model(model)); }
inline MlpModel load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace evsenet
