#include "adaptq/http_api.hpp"

#include <httplib.h>

#include <fmt/format.h>

namespace adaptq {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view detail) {
  ordered_json body;
  body["error"] = code;
  body["detail"] = detail;
  send_json(res, status, body);
}

int status_for(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::NotFound:
      return 404;
    case ServiceError::Kind::Conflict:
      return 409;
    case ServiceError::Kind::BadRequest:
      return 400;
  }
  return 400;
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", "request body must be a JSON object");
  }
  return body;
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ServiceError& e) {
      send_error(res, status_for(e.kind()), e.code(), e.what());
    } catch (const AnalyticsError& e) {
      send_error(res, 409, "insufficient_data", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

ordered_json profile_to_json(const Profile& profile) {
  ordered_json features = ordered_json::object();
  for (const auto& [topic, f] : profile.features) {
    features[topic] = {{"success", f.topic_success}, {"skip", f.topic_skip}, {"prior_encounters", f.prior_encounters}};
  }
  ordered_json j;
  j["features"] = features;
  j["topic_id"] = profile.topic_id;
  j["probability"] = profile.probability;
  j["assigned_level"] = to_string(profile.assigned_level);
  j["group"] = to_string(profile.group);
  return j;
}

void register_routes(httplib::Server& server, TutorService& service) {
  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    auto sid = body.find("student_id");
    if (sid == body.end() || !sid->is_string() || sid->get<std::string>().empty()) {
      throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", "student_id must be a non-empty string");
    }
    std::optional<ExperimentGroup> group;
    if (auto g = body.find("group"); g != body.end() && !g->is_null()) {
      try {
        group = parse_group(g->get<std::string>());
      } catch (const std::exception& e) {
        throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", e.what());
      }
    }
    const Session s = service.start_session(sid->get<std::string>(), group);
    send_json(res, 200, {{"session_id", s.session_id}, {"group", to_string(s.group)}});
  }));

  server.Get(R"(/sessions/([^/]+)/next)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto ex = service.next_exercise(req.matches[1]);
    send_json(res, 200, {{"exercise_id", ex.exercise_id}, {"shown_level", to_string(ex.shown_level)}, {"text", ex.text}});
  }));

  server.Post(R"(/sessions/([^/]+)/attempt)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    auto answer = body.find("answer");
    if (answer == body.end() || !answer->is_string()) {
      throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", "answer must be a string");
    }
    const auto r = service.submit_attempt(req.matches[1], answer->get<std::string>());
    send_json(res, 200, {{"outcome", to_string(r.outcome)},
                         {"attempts_remaining", r.attempts_remaining},
                         {"exercise_closed", r.exercise_closed}});
  }));

  server.Post(R"(/sessions/([^/]+)/skip)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    service.skip_exercise(req.matches[1]);
    send_json(res, 200, {{"closed", true}});
  }));

  server.Get(R"(/sessions/([^/]+)/profile)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, profile_to_json(service.get_profile(req.matches[1])));
  }));

  server.Get("/experiment/report", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    double alpha = 0.05;
    if (req.has_param("alpha")) {
      const std::string raw = req.get_param_value("alpha");
      try {
        std::size_t used = 0;
        alpha = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", fmt::format("alpha '{}' is not a number", raw));
      }
      if (!(alpha > 0 && alpha < 1)) {
        throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", "alpha must lie in (0,1)");
      }
    }
    send_json(res, 200, report_to_json(service.experiment_report(alpha)));
  }));
}

}  // namespace adaptq
