#include <doctest.h>

#include <thread>

#include "adaptq/service.hpp"
#include "service_script.hpp"
#include "support.hpp"

using namespace adaptq;
using namespace adaptq::testing;

namespace {

TutorService make_service(const std::filesystem::path& log, QuestionBank bank = script_bank(), int max_attempts = 3) {
  return TutorService(std::move(bank), reference_model(), reference_table(), log,
                      ServiceConfig{max_attempts, ArmSplit{}, 7});
}

ServiceError::Kind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.kind();
  }
  FAIL("expected a ServiceError");
  return ServiceError::Kind::BadRequest;
}

}  // namespace

TEST_CASE("answers are normalized before comparison") {
  CHECK(normalize_answer("  The   Mean \t") == "the mean");
  CHECK(normalize_answer("") == "");
  const Question q = make_question("q", "t", Level::Intermediate, {"The Mean", "average"});
  CHECK(grade_answer(q, "  the mean "));
  CHECK(grade_answer(q, "AVERAGE"));
  CHECK_FALSE(grade_answer(q, "themean"));
  CHECK_FALSE(grade_answer(q, ""));
}

TEST_CASE("session lifecycle and sequencing errors") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl");
  const Session s = svc.start_session("alice");
  CHECK(s.session_id == "sess-000001");
  CHECK(s.group == assign_group("alice", ArmSplit{}, 7));
  CHECK(svc.start_session("bob").session_id == "sess-000002");

  CHECK(error_kind([&] { svc.submit_attempt(s.session_id, "x"); }) == ServiceError::Kind::Conflict);
  CHECK(error_kind([&] { svc.skip_exercise(s.session_id); }) == ServiceError::Kind::Conflict);
  CHECK(error_kind([&] { svc.next_exercise("sess-999999"); }) == ServiceError::Kind::NotFound);
  CHECK(error_kind([&] { svc.get_profile("nope"); }) == ServiceError::Kind::NotFound);
  CHECK(error_kind([&] { svc.start_session(""); }) == ServiceError::Kind::BadRequest);

  const auto ex = svc.next_exercise(s.session_id);
  CHECK(ex.text == svc.bank().at(ex.exercise_id).variant(ex.shown_level).text);
  CHECK(error_kind([&] { svc.next_exercise(s.session_id); }) == ServiceError::Kind::Conflict);

  const auto wrong = svc.submit_attempt(s.session_id, "nope");
  CHECK(wrong.outcome == AttemptOutcome::Rejected);
  CHECK(wrong.attempts_remaining == 2);
  CHECK_FALSE(wrong.exercise_closed);
  const auto right = svc.submit_attempt(s.session_id, " A-" + ex.exercise_id);
  CHECK(right.outcome == AttemptOutcome::Accepted);
  CHECK(right.exercise_closed);
  CHECK(error_kind([&] { svc.submit_attempt(s.session_id, "again"); }) == ServiceError::Kind::Conflict);

  svc.next_exercise(s.session_id);
  svc.skip_exercise(s.session_id);
  CHECK(error_kind([&] { svc.skip_exercise(s.session_id); }) == ServiceError::Kind::Conflict);
}

TEST_CASE("the last wrong attempt closes the exercise") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl", script_bank(), 2);
  const auto s = svc.start_session("carol");
  svc.next_exercise(s.session_id);
  CHECK(svc.submit_attempt(s.session_id, "x").attempts_remaining == 1);
  const auto last = svc.submit_attempt(s.session_id, "y");
  CHECK(last.outcome == AttemptOutcome::Rejected);
  CHECK(last.attempts_remaining == 0);
  CHECK(last.exercise_closed);
  CHECK_FALSE(svc.session(s.session_id).current_exercise.has_value());
}

TEST_CASE("a student runs out of questions") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl", script_bank(1));
  const auto s = svc.start_session("dave");
  std::set<std::string> seen;
  for (int i = 0; i < 2; ++i) {
    seen.insert(svc.next_exercise(s.session_id).exercise_id);
    svc.skip_exercise(s.session_id);
  }
  CHECK(seen.size() == 2);
  try {
    svc.next_exercise(s.session_id);
    FAIL("expected exhaustion");
  } catch (const ServiceError& e) {
    CHECK(e.code() == "bank_exhausted");
    CHECK(e.kind() == ServiceError::Kind::Conflict);
  }
  // A second session for the same student shares the history.
  const auto again = svc.start_session("dave");
  CHECK(error_kind([&] { svc.next_exercise(again.session_id); }) == ServiceError::Kind::Conflict);
}

TEST_CASE("topics alternate between presentations") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl");
  const auto s = svc.start_session("erin", ExperimentGroup::Control);
  std::vector<std::string> topics;
  for (int i = 0; i < 4; ++i) {
    const auto ex = svc.next_exercise(s.session_id);
    topics.push_back(svc.bank().at(ex.exercise_id).topic_id);
    CHECK(ex.shown_level == svc.bank().at(ex.exercise_id).original_level);
    svc.skip_exercise(s.session_id);
  }
  CHECK(topics == std::vector<std::string>{"algebra", "geometry", "algebra", "geometry"});
}

TEST_CASE("profiles follow the recorded history") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl");
  const auto s = svc.start_session("frank", ExperimentGroup::Expected);
  const auto fresh = svc.get_profile(s.session_id);
  CHECK(fresh.features.size() == 2);
  CHECK(fresh.features.at("algebra") == kColdStartFeatures);
  CHECK(fresh.topic_id == "algebra");
  CHECK(fresh.probability == predict(reference_model(), kColdStartFeatures));
  CHECK(fresh.assigned_level == assign_level(reference_table(), fresh.probability));

  const auto ex = svc.next_exercise(s.session_id);
  CHECK(ex.shown_level == fresh.assigned_level);
  svc.submit_attempt(s.session_id, "a-" + ex.exercise_id);
  const auto after = svc.get_profile(s.session_id);
  CHECK(after.features.at("algebra").topic_success == 1.0);
  CHECK(after.features.at("algebra").prior_encounters == 1);
  CHECK(after.features.at("geometry") == kColdStartFeatures);
  CHECK(after.topic_id == "geometry");

  // Two algebra successes push the next algebra presentation to Advanced.
  svc.next_exercise(s.session_id);
  svc.skip_exercise(s.session_id);
  const auto third = svc.next_exercise(s.session_id);
  CHECK(svc.bank().at(third.exercise_id).topic_id == "algebra");
  CHECK(third.shown_level == assign_level(reference_table(), predict(reference_model(), {1.0, 0.0, 1})));
  CHECK(third.shown_level == Level::Advanced);
}

TEST_CASE("restart replays sessions, open exercises and features") {
  TempDir dir;
  const auto log = dir / "log.jsonl";
  std::string sid;
  std::string open_id;
  Profile before;
  {
    auto svc = make_service(log);
    sid = svc.start_session("gina", ExperimentGroup::NonExpected).session_id;
    const auto ex = svc.next_exercise(sid);
    svc.submit_attempt(sid, "wrong");
    svc.submit_attempt(sid, "a-" + ex.exercise_id);
    open_id = svc.next_exercise(sid).exercise_id;
    svc.submit_attempt(sid, "wrong");
    before = svc.get_profile(sid);
  }
  auto svc = make_service(log);
  CHECK(svc.session(sid).current_exercise->exercise_id == open_id);
  CHECK(svc.session(sid).current_exercise->attempts_used == 1);
  CHECK(same_profile(svc.get_profile(sid), before));
  CHECK(svc.submit_attempt(sid, "wrong").attempts_remaining == 1);
  CHECK(svc.start_session("gina").session_id == "sess-000002");
  CHECK(audit_log(svc, log, {sid}).empty());
}

TEST_CASE("a log with an orphan attempt is rejected on replay") {
  TempDir dir;
  const auto log = dir / "log.jsonl";
  AttemptEvent e = attempt(1, "h", "algebra-0", "algebra", kA, ExperimentGroup::Expected);
  e.session_id = "sess-000001";
  {
    SessionOpened s{1, "sess-000001", "h", ExperimentGroup::Expected};
    e.seq = 2;
    const std::vector<LogRecord> records = {s, e};
    write_log_records(log, records);
  }
  CHECK_THROWS_AS(make_service(log), LogError);
}

TEST_CASE("randomized sessions survive restarts") {
  for (std::uint64_t seed : {1, 2, 3}) {
    CAPTURE(seed);
    CHECK(run_restart_script(seed, 25) == "");
  }
}

TEST_CASE("concurrent sessions leave a consistent log") {
  TempDir dir;
  const auto log = dir / "log.jsonl";
  auto svc = make_service(log, script_bank(10));
  std::vector<std::string> ids(8);
  std::vector<std::thread> workers;
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      Rng rng(100 + w);
      const auto s = svc.start_session(fmt::format("worker-{}", w));
      ids[w] = s.session_id;
      for (int k = 0; k < 12; ++k) {
        const auto ex = svc.next_exercise(s.session_id);
        bool open = true;
        while (open) {
          if (rng.uniform() < 0.2) {
            svc.skip_exercise(s.session_id);
            break;
          }
          open = !svc.submit_attempt(s.session_id, rng.uniform() < 0.5 ? "a-" + ex.exercise_id : "no")
                      .exercise_closed;
        }
        svc.get_profile(s.session_id);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(audit_log(svc, log, ids) == "");
  auto replayed = make_service(log, script_bank(10));
  CHECK(replayed.next_seq() == svc.next_seq());
  for (const auto& id : ids) CHECK(same_profile(replayed.get_profile(id), svc.get_profile(id)));
}

TEST_CASE("experiment report needs two populated arms") {
  TempDir dir;
  auto svc = make_service(dir / "log.jsonl");
  CHECK_THROWS_AS(svc.experiment_report(), AnalyticsError);
  for (auto g : {ExperimentGroup::Expected, ExperimentGroup::Control}) {
    for (int i = 0; i < 2; ++i) {
      const auto s = svc.start_session(fmt::format("{}-{}", to_string(g), i), g);
      const auto ex = svc.next_exercise(s.session_id);
      svc.submit_attempt(s.session_id, i == 0 ? "a-" + ex.exercise_id : "no");
    }
  }
  const auto report = svc.experiment_report();
  CHECK(report.group(ExperimentGroup::Expected).n == 2);
  CHECK(report.group(ExperimentGroup::NonExpected).n == 0);
  CHECK(report.find_test(Metric::SolutionAcceptance, ExperimentGroup::Expected, ExperimentGroup::Control) != nullptr);
}
