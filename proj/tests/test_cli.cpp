#include <doctest.h>

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

#include "adaptq/cli.hpp"
#include "adaptq/simulator.hpp"
#include "support.hpp"

using namespace adaptq;
using namespace adaptq::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path small_config(const TempDir& dir) {
  SimConfig c = load_sim_config(data_dir() / "sim_default.json");
  c.n_students = 45;
  c.bootstrap_students = 150;
  c.threads = 2;
  const auto path = dir / "sim.json";
  std::ofstream(path) << config_to_json(c).dump(2);
  return path;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

TEST_CASE("every subcommand documents each of its flags") {
  const auto app = make_cli_app();
  const auto subs = app->get_subcommands([](CLI::App*) { return true; });
  std::set<std::string> names;
  for (const auto* sub : subs) names.insert(sub->get_name());
  CHECK(names == std::set<std::string>{"bank-validate", "simulate", "train", "report", "serve"});

  for (const auto* sub : subs) {
    const Run help = run({sub->get_name(), "--help"});
    CHECK(help.code == 0);
    for (const auto* opt : sub->get_options()) {
      for (const auto& flag : opt->get_lnames()) {
        CAPTURE(sub->get_name());
        CAPTURE(flag);
        CHECK(help.out.find("--" + flag) != std::string::npos);
        CHECK_FALSE(opt->get_description().empty());
      }
    }
  }
  const Run top = run({"--help"});
  CHECK(top.code == 0);
  for (const auto& name : names) CHECK(top.out.find(name) != std::string::npos);
}

TEST_CASE("serve exposes environment variables in its help") {
  const Run help = run({"serve", "--help"});
  for (const char* env : {"ADAPTQ_HOST", "ADAPTQ_PORT", "ADAPTQ_BANK", "ADAPTQ_MODEL", "ADAPTQ_TABLE", "ADAPTQ_LOG",
                          "ADAPTQ_MAX_ATTEMPTS", "ADAPTQ_SEED"}) {
    CHECK(help.out.find(env) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2 and runtime errors exit 1") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  const Run missing = run({"train"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--log") != std::string::npos);
  CHECK(run({"report", "--log", (data_dir() / "bank.json").string(), "--format", "xml"}).code == 2);
  CHECK(run({"bank-validate", "--bank", "/nonexistent/bank.json"}).code == 2);

  TempDir dir;
  std::ofstream(dir / "bad.json") << "{\"questions\": [{\"id\": 3}]}";
  const Run bad = run({"bank-validate", "--bank", (dir / "bad.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error:") != std::string::npos);

  std::ofstream(dir / "empty.jsonl") << "";
  CHECK(run({"report", "--log", (dir / "empty.jsonl").string()}).code == 1);
}

TEST_CASE("bank-validate accepts the fixture") {
  const Run r = run({"bank-validate", "--bank", (data_dir() / "bank.json").string(), "--ratings",
                     (data_dir() / "ratings.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("0 warning(s)") != std::string::npos);
  CHECK(r.out.find("beginner") != std::string::npos);
}

TEST_CASE("simulate, train and report are reproducible") {
  TempDir dir;
  const auto config = small_config(dir);
  const auto bank = (data_dir() / "bank.json").string();

  auto pipeline = [&](const std::string& tag) {
    const auto log = (dir / (tag + ".jsonl")).string();
    const Run sim = run({"simulate", "--config", config.string(), "--bank", bank, "--out", log, "--seed", "5",
                         "--engine-model-out", (dir / (tag + "-engine.json")).string()});
    REQUIRE(sim.code == 0);
    const Run tr = run({"train", "--log", log, "--split-seed", "5", "--out-model", (dir / (tag + "-model.json")).string(),
                        "--out-table", (dir / (tag + "-table.json")).string()});
    REQUIRE(tr.code == 0);
    CHECK(tr.out.find("test accuracy") != std::string::npos);
    const Run rep = run({"report", "--log", log, "--format", "csv", "--subgroup-level", "beginner", "--out",
                         (dir / (tag + ".csv")).string()});
    REQUIRE(rep.code == 0);
    return std::vector<std::string>{slurp(log), slurp(dir / (tag + "-engine.json")), slurp(dir / (tag + "-model.json")),
                                    slurp(dir / (tag + "-table.json")), slurp(dir / (tag + ".csv"))};
  };
  const auto first = pipeline("a");
  const auto second = pipeline("b");
  CHECK(first == second);
  for (const auto& artifact : first) CHECK_FALSE(artifact.empty());

  std::istringstream csv(first.back());
  std::string line;
  std::getline(csv, line);
  CHECK(split_csv(line) == std::vector<std::string>{"group", "metric", "value", "halfwidth", "n"});
  std::set<std::string> groups;
  while (std::getline(csv, line) && !line.empty()) {
    const auto cells = split_csv(line);
    REQUIRE(cells.size() == 5);
    groups.insert(cells[0]);
    const double v = std::stod(cells[2]);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(groups == std::set<std::string>{"expected", "non_expected", "control"});
  std::getline(csv, line);
  CHECK(split_csv(line) == std::vector<std::string>{"metric", "arm_a", "arm_b", "t", "df", "p", "significant"});
  int tests = 0;
  while (std::getline(csv, line) && !line.empty()) {
    CHECK(split_csv(line).size() == 7);
    ++tests;
  }
  CHECK(tests == 9);

  const Run json_report = run({"report", "--log", (dir / "a.jsonl").string(), "--format", "json"});
  CHECK(json_report.code == 0);
  const auto j = nlohmann::json::parse(json_report.out);
  CHECK(j["tests"].size() == 9);
  const Run table = run({"report", "--log", (dir / "a.jsonl").string()});
  CHECK(table.out.find("Expected") != std::string::npos);
}
