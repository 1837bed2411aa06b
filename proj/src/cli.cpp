#include "adaptq/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>

#include "adaptq/analytics.hpp"
#include "adaptq/assignment.hpp"
#include "adaptq/history.hpp"
#include "adaptq/http_api.hpp"
#include "adaptq/predictor.hpp"
#include "adaptq/question_bank.hpp"
#include "adaptq/service.hpp"
#include "adaptq/simulator.hpp"

namespace adaptq {

namespace {

struct Options {
  // bank-validate
  std::string bank;
  std::string ratings;
  // simulate
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> n_students;
  std::optional<double> match_bonus;
  std::optional<double> mismatch_skip_boost;
  std::optional<int> threads;
  std::string engine_model_out;
  std::string engine_table_out;
  // train
  std::string log;
  std::uint64_t split_seed = 7;
  double train_fraction = 0.8;
  std::string out_model;
  std::string out_table;
  double learning_rate = TrainConfig{}.learning_rate;
  int max_iterations = TrainConfig{}.max_iterations;
  double tolerance = TrainConfig{}.tolerance;
  double l2_penalty = TrainConfig{}.l2_penalty;
  // report
  double alpha = 0.05;
  std::string format = "table";
  std::string subgroup_level;
  std::string report_out;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model;
  std::string table;
  int max_attempts = 3;
  std::uint64_t service_seed = 7;
};

struct Commands {
  CLI::App* bank_validate;
  CLI::App* simulate;
  CLI::App* train;
  CLI::App* report;
  CLI::App* serve;
};

Commands configure(CLI::App& app, Options& o) {
  app.description("Adaptive question-variant engine: bank validation, simulation, training, reporting, serving.");
  app.require_subcommand(1);
  Commands c{};

  c.bank_validate = app.add_subcommand("bank-validate", "Validate a question bank and optional expert ratings");
  c.bank_validate->add_option("--bank", o.bank, "Question bank JSON file")->required()->check(CLI::ExistingFile);
  c.bank_validate->add_option("--ratings", o.ratings, "Expert ratings JSON file")->check(CLI::ExistingFile);

  c.simulate = app.add_subcommand("simulate", "Simulate the bootstrap and three-arm experiment phases");
  c.simulate->add_option("--config", o.config, "Simulation config JSON file")->required()->check(CLI::ExistingFile);
  c.simulate->add_option("--bank", o.bank, "Question bank JSON file")->required()->check(CLI::ExistingFile);
  c.simulate->add_option("--seed", o.seed, "Override the config seed");
  c.simulate->add_option("--out", o.out, "Output event log (JSON lines)")->required();
  c.simulate->add_option("--n-students", o.n_students, "Override the experiment population size");
  c.simulate->add_option("--match-bonus", o.match_bonus, "Override the matched-level success bonus");
  c.simulate->add_option("--mismatch-skip-boost", o.mismatch_skip_boost, "Override the mismatch skip boost");
  c.simulate->add_option("--threads", o.threads, "Worker threads (output does not depend on this)");
  c.simulate->add_option("--engine-model-out", o.engine_model_out, "Write the bootstrap-trained model here");
  c.simulate->add_option("--engine-table-out", o.engine_table_out, "Write the bootstrap percentile table here");

  c.train = app.add_subcommand("train", "Train the success predictor and percentile table from a log");
  c.train->add_option("--log", o.log, "Event log (JSON lines)")->required()->check(CLI::ExistingFile);
  c.train->add_option("--split-seed", o.split_seed, "Seed for the student-level train/test split");
  c.train->add_option("--seed", o.split_seed, "Alias of --split-seed");
  c.train->add_option("--train-fraction", o.train_fraction, "Fraction of students used for training")
      ->check(CLI::Range(0.0, 1.0));
  c.train->add_option("--out-model", o.out_model, "Output model JSON file")->required();
  c.train->add_option("--out-table", o.out_table, "Output percentile table JSON file")->required();
  c.train->add_option("--learning-rate", o.learning_rate, "Gradient descent step size");
  c.train->add_option("--max-iterations", o.max_iterations, "Iteration cap");
  c.train->add_option("--tolerance", o.tolerance, "Stop when the loss changes less than this");
  c.train->add_option("--l2", o.l2_penalty, "L2 penalty on the weights");

  c.report = app.add_subcommand("report", "Per-arm outcome metrics and pairwise t-tests");
  c.report->add_option("--log", o.log, "Event log (JSON lines)")->required()->check(CLI::ExistingFile);
  c.report->add_option("--alpha", o.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  c.report->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "json", "csv"}));
  c.report->add_option("--subgroup-level", o.subgroup_level, "Add an Expected-vs-Control subgroup analysis")
      ->check(CLI::IsMember({"beginner", "intermediate", "advanced"}));
  c.report->add_option("--out", o.report_out, "Write the report to this file instead of stdout");
  c.report->add_option("--seed", o.seed, "Accepted for uniformity; the report is not randomized");

  c.serve = app.add_subcommand("serve", "Run the HTTP tutoring session service");
  c.serve->add_option("--host", o.host, "Bind address")->envname("ADAPTQ_HOST");
  c.serve->add_option("--port", o.port, "Listen port")->envname("ADAPTQ_PORT");
  c.serve->add_option("--bank", o.bank, "Question bank JSON file")->envname("ADAPTQ_BANK")->required();
  c.serve->add_option("--model", o.model, "Model JSON file")->envname("ADAPTQ_MODEL")->required();
  c.serve->add_option("--table", o.table, "Percentile table JSON file")->envname("ADAPTQ_TABLE")->required();
  c.serve->add_option("--log", o.log, "Append-only event log path")->envname("ADAPTQ_LOG")->required();
  c.serve->add_option("--max-attempts", o.max_attempts, "Attempts allowed per exercise")
      ->envname("ADAPTQ_MAX_ATTEMPTS")
      ->check(CLI::PositiveNumber);
  c.serve->add_option("--seed", o.service_seed, "Seed for arm assignment and non-expected variants")
      ->envname("ADAPTQ_SEED");
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  f << text;
}

int cmd_bank_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const QuestionBank bank = load_bank(o.bank);
  std::vector<VariantRating> ratings;
  if (!o.ratings.empty()) ratings = load_ratings(o.ratings);
  out << fmt::format("{} questions across {} topics\n", bank.size(), bank.topics().size());
  if (!ratings.empty()) {
    for (const auto& s : rating_summary(ratings, bank)) {
      out << fmt::format("{:<13} difficulty {:.3f}  fluency {:.3f}  meaning {:.3f}  words {:.3f}  ({} ratings)\n",
                         to_string(s.level), s.difficulty, s.fluency, s.meaning_preservation, s.word_count,
                         s.n_ratings);
    }
  }
  const auto warnings = validate_bank_fixture(bank, ratings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << fmt::format("{} warning(s)\n", warnings.size());
  return warnings.empty() ? 0 : 1;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  SimConfig config = load_sim_config(o.config);
  if (o.seed) config.seed = *o.seed;
  if (o.n_students) config.n_students = *o.n_students;
  if (o.match_bonus) config.match_bonus = *o.match_bonus;
  if (o.mismatch_skip_boost) config.mismatch_skip_boost = *o.mismatch_skip_boost;
  if (o.threads) config.threads = *o.threads;
  config.validate();
  const QuestionBank bank = load_bank(o.bank);
  const auto result = run_experiment(config, bank);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  write_log(o.out, result.log);
  if (!o.engine_model_out.empty()) save_model(result.engine.model, o.engine_model_out);
  if (!o.engine_table_out.empty()) save_table(result.engine.table, o.engine_table_out);
  out << fmt::format("wrote {} events for {} students to {}\n", result.log.size(), result.log.students().size(),
                     o.out);
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const EventLog log = replay_log(o.log);
  const auto points = build_training_set(log);
  const auto split = split_by_student(points, o.split_seed, o.train_fraction);
  TrainConfig config{o.learning_rate, o.max_iterations, o.tolerance, o.l2_penalty};
  const LogisticModel model = train(split.train, config);
  std::vector<double> predictions;
  predictions.reserve(split.train.size());
  for (const auto& p : split.train) predictions.push_back(predict(model, p.features));
  PercentileTable table = build_percentile_table(predictions);
  table.source_model_hash = model_hash(model);
  save_model(model, o.out_model);
  save_table(table, o.out_table);
  out << fmt::format("points: {} train / {} test\n", split.train.size(), split.test.size());
  out << fmt::format("model: bias {:.6f}  w_success {:.6f}  w_skip {:.6f}  ({} iterations, loss {:.6f})\n",
                     model.bias, model.w_success, model.w_skip, model.iterations, model.final_loss);
  out << fmt::format("train accuracy {:.4f}\n", accuracy(model, split.train));
  if (!split.test.empty()) out << fmt::format("test accuracy {:.4f}\n", accuracy(model, split.test));
  out << fmt::format("percentiles: p33 {:.6f}  p66 {:.6f}\n", table.p33, table.p66);
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  const EventLog log = replay_log(o.log);
  const GroupReport report = group_report(log, o.alpha);
  std::optional<SubgroupReport> subgroup;
  if (!o.subgroup_level.empty()) {
    subgroup = subgroup_report(log, parse_level(o.subgroup_level),
                               {ExperimentGroup::Expected, ExperimentGroup::Control}, o.alpha);
  }
  std::string text;
  if (o.format == "json") {
    text = report_to_json(report, subgroup).dump(2) + "\n";
  } else if (o.format == "csv") {
    text = report_to_csv(report, subgroup);
  } else {
    text = report_to_table(report, subgroup);
  }
  if (o.report_out.empty()) {
    out << text;
  } else {
    write_text(o.report_out, text);
  }
  return 0;
}

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const Options& o, std::ostream& out) {
  TutorService service(load_bank(o.bank), load_model(o.model), load_table(o.table), o.log,
                       ServiceConfig{o.max_attempts, ArmSplit{}, o.service_seed});
  httplib::Server server;
  register_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << fmt::format("listening on {}:{}\n", o.host, o.port) << std::flush;
  const bool ok = server.listen(o.host, o.port);
  g_server = nullptr;
  return ok ? 0 : 1;
}

}  // namespace

std::unique_ptr<CLI::App> make_cli_app() {
  auto app = std::make_unique<CLI::App>();
  static Options scratch;
  configure(*app, scratch);
  return app;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"adaptq"};
  app.name("adaptq");
  Options o;
  const Commands c = configure(app, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const CLI::App* sub = nullptr;
    for (const auto* s : {c.bank_validate, c.simulate, c.train, c.report, c.serve}) {
      if (s->parsed()) sub = s;
    }
    err << "error: " << e.what() << "\n\n" << (sub != nullptr ? sub->help() : app.help());
    return 2;
  }

  try {
    if (c.bank_validate->parsed()) return cmd_bank_validate(o, out, err);
    if (c.simulate->parsed()) return cmd_simulate(o, out, err);
    if (c.train->parsed()) return cmd_train(o, out);
    if (c.report->parsed()) return cmd_report(o, out);
    if (c.serve->parsed()) return cmd_serve(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace adaptq
