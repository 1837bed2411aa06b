#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace adaptq {

/// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The fully configured command tree (no callbacks run). Exposed for help tests.
std::unique_ptr<CLI::App> make_cli_app();

}  // namespace adaptq
