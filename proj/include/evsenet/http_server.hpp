// SPDX-License-Identifier: Apache-2.0
#pragma once

// Eigen must come first: httplib pulls in <resolv.h>, whose _res macro
// collides with Eigen parameter names.
#include "evsenet/service.hpp"

#include <httplib.h>

#include <string>

namespace evsenet {

/// Binds the prediction endpoints onto an httplib server.
inline void install_routes(httplib::Server& server, const PredictService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) {
    auto r = service.handle_health();
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  server.Post("/api/predict", [&service](const httplib::Request& req, httplib::Response& res) {
    auto r = service.handle_predict(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

}  // namespace evsenet
