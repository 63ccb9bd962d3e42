#include "cutstudio/studio_http.hpp"

namespace cutstudio::studio {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_json(res, http_status(e), error_body(e));
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", {{"code", "Internal"}, {"message", e.what()}}}});
  }
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const std::exception& e) {
    throw ServiceError(400, ErrorCode::ParseError, std::string("request body is not JSON: ") + e.what());
  }
}

std::string param(const httplib::Request& req, const std::string& key, const std::string& fallback) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

}  // namespace

void install_routes(httplib::Server& server, Studio& studio) {
  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.health()); });
  });
  server.Post("/session", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, studio.create_session(body_of(req))); });
  });
  server.Get(R"(/session/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.get_session(req.matches[1])); });
  });
  server.Post(R"(/session/([^/]+)/intent)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.set_intent(req.matches[1], body_of(req))); });
  });
  server.Post(R"(/session/([^/]+)/idea)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.set_idea(req.matches[1], body_of(req))); });
  });
  server.Get(R"(/session/([^/]+)/references)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      int n = gateway::GenerationRequest{}.count;
      if (req.has_param("n")) {
        try {
          n = std::stoi(req.get_param_value("n"));
        } catch (const std::exception&) {
          throw ServiceError(400, ErrorCode::InvalidArgument, "n must be an integer");
        }
      }
      send_json(res, 200, studio.references(req.matches[1], param(req, "mode", "both"), param(req, "suffix", ""), n));
    });
  });
  server.Post(R"(/session/([^/]+)/segment)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.segment(req.matches[1], body_of(req))); });
  });
  server.Get(R"(/works/([^/]+)/patterns)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.work_patterns(req.matches[1])); });
  });
  server.Get(R"(/session/([^/]+)/board)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.board(req.matches[1])); });
  });
  server.Post(R"(/session/([^/]+)/board/([a-z_]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.board_op(req.matches[1], req.matches[2], body_of(req))); });
  });
  server.Post(R"(/session/([^/]+)/undo)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, studio.undo(req.matches[1], body_of(req))); });
  });
  server.Get(R"(/session/([^/]+)/export\.svg)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      double scale = 1.0;
      if (req.has_param("scale")) {
        try {
          scale = std::stod(req.get_param_value("scale"));
        } catch (const std::exception&) {
          throw ServiceError(400, ErrorCode::InvalidArgument, "scale must be a number");
        }
      }
      res.status = 200;
      res.set_content(studio.export_svg(req.matches[1], scale), "image/svg+xml");
    });
  });
}

}  // namespace cutstudio::studio
