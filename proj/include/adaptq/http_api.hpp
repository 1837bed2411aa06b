#pragma once

#include <nlohmann/json.hpp>

#include "adaptq/service.hpp"

namespace httplib {
class Server;
}

namespace adaptq {

nlohmann::ordered_json profile_to_json(const Profile& profile);

/// Installs the session and report routes on `server`. Errors are returned as
/// {error, detail} with 404 for unknown ids, 409 for sequencing violations and
/// 400 for malformed bodies.
void register_routes(httplib::Server& server, TutorService& service);

}  // namespace adaptq
