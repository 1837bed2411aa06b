#include <doctest.h>

#include <fstream>
#include <map>

#include "adaptq/history.hpp"
#include "adaptq/random.hpp"
#include "support.hpp"

using namespace adaptq;
using namespace adaptq::testing;

TEST_CASE("record_attempt enforces per-student seq order") {
  EventLog log;
  log.record_attempt(attempt(1, "s1", "q1", "t", kA));
  CHECK(log.size() == 1);
  CHECK_THROWS_AS(log.record_attempt(attempt(1, "s1", "q2", "t", kA)), LogError);
  CHECK_THROWS_AS(log.record_attempt(attempt(0, "s1", "q2", "t", kA)), LogError);
  log.record_attempt(attempt(1, "s2", "q1", "t", kR));  // seq is per student
  log.record_attempt(attempt(5, "s1", "q2", "t", kS));
  CHECK(log.students() == std::vector<std::string>{"s1", "s2"});
  CHECK(log.last_seq("s1") == 5u);
  CHECK_FALSE(log.last_seq("nobody").has_value());
  CHECK_THROWS_AS(log.record_attempt(attempt(9, "", "q1", "t", kA)), LogError);
}

TEST_CASE("record_attempt checks exercises against an attached bank") {
  const QuestionBank bank({make_question("q1", "t1"), make_question("q2", "t2")});
  EventLog log(&bank);
  log.record_attempt(attempt(1, "s", "q1", "t1", kA));
  CHECK_THROWS_AS(log.record_attempt(attempt(2, "s", "zz", "t1", kA)), LogError);
  CHECK_THROWS_AS(log.record_attempt(attempt(3, "s", "q2", "t1", kA)), LogError);
  CHECK(log.size() == 1);
}

TEST_CASE("encounters group attempts by exercise in first-seen order") {
  EventLog log;
  log.record_attempt(attempt(1, "s", "A", "t", kR));
  log.record_attempt(attempt(2, "s", "B", "t", kS));
  log.record_attempt(attempt(3, "s", "A", "t", kA));
  log.record_attempt(attempt(4, "s", "C", "t", kR));
  log.record_attempt(attempt(5, "s", "C", "t", kS));
  log.record_attempt(attempt(6, "s", "D", "t", kR));
  const auto encs = encounters(log, "s");
  REQUIRE(encs.size() == 4);
  CHECK(encs[0].exercise_id == "A");
  CHECK(encs[0].attempts.size() == 2);
  CHECK(encs[0].eventual_success);
  CHECK_FALSE(encs[0].skipped);
  CHECK(encs[0].first_seq == 1);
  CHECK(encs[1].exercise_id == "B");
  CHECK(encs[1].skipped);
  CHECK(encs[1].classification() == EncounterClass::Skipped);
  CHECK(encs[2].classification() == EncounterClass::Skipped);  // rejected then skipped
  CHECK(encs[3].classification() == EncounterClass::Failure);
  for (const auto& e : encs) CHECK_FALSE((e.eventual_success && e.skipped));
  CHECK(encounters(log, "missing").empty());
}

TEST_CASE("features_at computes per-topic ratios over prior encounters") {
  EventLog log;
  log.record_attempt(attempt(1, "s", "e1", "t", kA));
  log.record_attempt(attempt(2, "s", "e2", "t", kS));
  log.record_attempt(attempt(3, "s", "x1", "other", kR));
  log.record_attempt(attempt(4, "s", "e3", "t", kR));
  log.record_attempt(attempt(5, "s", "e3", "t", kA));
  log.record_attempt(attempt(6, "s", "e4", "t", kR));

  const auto f = features_at(log, "s", "t", 100);
  CHECK(f.topic_success == 0.5);
  CHECK(f.topic_skip == 0.25);
  CHECK(f.prior_encounters == 4);

  CHECK(features_at(log, "s", "t", 1) == kColdStartFeatures);
  CHECK(features_at(log, "s", "unseen", 100) == kColdStartFeatures);
  CHECK(features_at(log, "nobody", "t", 100) == kColdStartFeatures);

  const auto early = features_at(log, "s", "t", 3);
  CHECK(early.topic_success == 0.5);
  CHECK(early.topic_skip == 0.5);
  CHECK(early.prior_encounters == 2);

  // Only the rejected attempt on e3 precedes seq 5.
  const auto mid = features_at(log, "s", "t", 5);
  CHECK(mid.prior_encounters == 3);
  CHECK(mid.topic_success == doctest::Approx(1.0 / 3));
}

TEST_CASE("features obey the prefix property on random streams") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    EventLog log;
    std::uint64_t seq = 0;
    const int n = 1 + static_cast<int>(rng.below(25));
    for (int i = 0; i < n; ++i) {
      seq += 1 + rng.below(3);
      const auto outcome = static_cast<AttemptOutcome>(rng.below(3));
      log.record_attempt(attempt(seq, "s", fmt::format("e{}", rng.below(6)), rng.below(2) ? "a" : "b", outcome));
    }
    for (int probe = 0; probe < 5; ++probe) {
      const std::uint64_t k = rng.below(seq + 2);
      EventLog truncated;
      for (const auto& e : log.events()) {
        if (e.seq < k) truncated.record_attempt(e);
      }
      for (const char* topic : {"a", "b"}) {
        const auto full = features_at(log, "s", topic, k);
        CHECK(full == features_at(truncated, "s", topic, k));
        CHECK(full.topic_success >= 0.0);
        CHECK(full.topic_success <= 1.0);
        CHECK(full.topic_skip >= 0.0);
        CHECK(full.topic_skip + full.topic_success <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("success, failure and skip fractions partition prior encounters") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    EventLog log;
    for (std::uint64_t seq = 1; seq <= 20; ++seq) {
      log.record_attempt(attempt(seq, "s", fmt::format("e{}", rng.below(8)), "t", static_cast<AttemptOutcome>(rng.below(3))));
    }
    const auto f = features_at(log, "s", "t", 21);
    std::size_t failures = 0;
    const auto encs = encounters(log, "s");
    for (const auto& e : encs) failures += e.classification() == EncounterClass::Failure;
    const double failure = static_cast<double>(failures) / static_cast<double>(encs.size());
    CHECK(f.topic_success + failure + f.topic_skip == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log records round-trip through the file format") {
  TempDir dir;
  AttemptEvent boot = attempt(1, "b1", "q1", "t", kR);
  AttemptEvent exp = attempt(2, "s1", "q1", "t", kA, ExperimentGroup::NonExpected, Level::Beginner);
  exp.shown_level = Level::Advanced;
  exp.session_id = "sess-000001";
  SessionOpened open{3, "sess-000001", "s1", ExperimentGroup::Control};
  ExercisePresented present{4, "sess-000001", "s1", "q1", "t", ExperimentGroup::Control,
                            Level::Advanced, Level::Beginner, 0.1 + 0.2};
  const std::vector<LogRecord> records = {boot, exp, open, present};
  write_log_records(dir / "log.jsonl", records);
  const auto back = read_log_records(dir / "log.jsonl");
  CHECK(back == records);

  const auto line = record_to_json(boot);
  CHECK(line["group"].is_null());
  CHECK(line["shown_level"] == "original");
  CHECK_FALSE(line.contains("kind"));
  CHECK(record_to_json(open)["kind"] == "session");

  const EventLog log = replay_log(dir / "log.jsonl");
  CHECK(log.size() == 2);
  write_log(dir / "again.jsonl", log);
  const EventLog again = replay_log(dir / "again.jsonl");
  CHECK(again.events() == log.events());
}

TEST_CASE("read_log_records reports the failing line") {
  TempDir dir;
  {
    std::ofstream out(dir / "bad.jsonl");
    out << record_to_line(attempt(1, "s", "q", "t", kA)) << "\n";
    out << "{\"seq\": 2, \"student_id\": \"s\"}\n";
  }
  try {
    (void)read_log_records(dir / "bad.jsonl");
    FAIL("expected LogError");
  } catch (const LogError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  {
    std::ofstream out(dir / "kind.jsonl");
    out << "{\"kind\": \"mystery\", \"seq\": 1}\n";
  }
  CHECK_THROWS_AS(read_log_records(dir / "kind.jsonl"), LogError);
  CHECK_THROWS_AS(read_log_records(dir / "absent.jsonl"), LogError);
}

TEST_CASE("LogAppender appends to an existing file") {
  TempDir dir;
  write_log_records(dir / "log.jsonl", std::vector<LogRecord>{attempt(1, "s", "q", "t", kA)});
  {
    LogAppender appender(dir / "log.jsonl");
    appender.append(attempt(2, "s", "q2", "t", kS));
  }
  const auto records = read_log_records(dir / "log.jsonl");
  REQUIRE(records.size() == 2);
  CHECK(record_seq(records[1]) == 2);
}
