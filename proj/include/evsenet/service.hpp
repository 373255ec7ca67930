// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <memory>
#include <mutex>
#include <string>

#include "evsenet/core.hpp"
#include "evsenet/featurize.hpp"
#include "evsenet/mlp.hpp"

namespace evsenet {

/// Per-EVSE predictions for a layout, in physical units. Shared by the
/// CLI `predict` command and the HTTP service.
inline nlohmann::json predict_layout(const MlpModel& model, const Layout& layout) {
  const auto reachable = reachable_evses(layout);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& f : extract_all(layout, model.config().features)) {
    const auto [tau, p_tot] = predict_stats(model, f.values);
    entries.push_back({{"row", f.evse.row},
                       {"col", f.evse.col},
                       {"tau_kw", tau},
                       {"p_tot_kwh", p_tot},
                       {"reachable", reachable.count(f.evse) > 0}});
  }
  return {{"model_id", model.config().model_id}, {"m", model.config().features.m}, {"predictions", entries}};
}

struct ServiceResponse {
  int status = 200;
  std::string body;
};

/// Transport-independent request handling. The model is immutable once
/// installed and shared by all callers.
class PredictService {
 public:
  PredictService() = default;
  explicit PredictService(std::shared_ptr<const MlpModel> model) : model_(std::move(model)) {}

  void set_model(std::shared_ptr<const MlpModel> model) {
    std::lock_guard lock(mutex_);
    model_ = std::move(model);
  }
  std::shared_ptr<const MlpModel> model() const {
    std::lock_guard lock(mutex_);
    return model_;
  }

  ServiceResponse handle_health() const {
    auto m = model();
    if (!m) return {503, nlohmann::json{{"status", "loading"}}.dump()};
    return {200, nlohmann::json{{"status", "ok"},
                                {"model_id", m->config().model_id},
                                {"m", m->config().features.m},
                                {"input_size", m->config().input_size()},
                                {"output_transform", to_string(m->config().output_transform)}}
                     .dump()};
  }

  ServiceResponse handle_predict(const std::string& body) const {
    auto m = model();
    if (!m) return error(503, "model not loaded");
    Layout layout;
    try {
      const auto req = nlohmann::json::parse(body);
      if (!req.is_object() || !req.contains("grid") || !req["grid"].is_array())
        return error(400, "request must be an object with a 'grid' array of row strings");
      std::vector<std::string> rows;
      for (const auto& r : req["grid"]) {
        if (!r.is_string()) return error(400, "grid rows must be strings");
        rows.push_back(r.get<std::string>());
      }
      layout = layout_from_rows(rows);
    } catch (const nlohmann::json::exception& e) {
      return error(400, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      return error(400, e.what());
    }
    try {
      return {200, predict_layout(*m, layout).dump()};
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

 private:
  static ServiceResponse error(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
  }

  mutable std::mutex mutex_;
  std::shared_ptr<const MlpModel> model_;
};

}  // namespace evsenet
