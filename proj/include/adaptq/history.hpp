#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/question_bank.hpp"
#include "adaptq/types.hpp"

namespace adaptq {

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Level a variant was shown at. An empty value is the "original" marker used
/// when the platform's original phrasing was shown outside the experiment.
using ShownLevel = std::optional<Level>;

struct AttemptEvent {
  std::uint64_t seq = 0;
  std::string student_id;
  std::string exercise_id;
  std::string topic_id;
  std::optional<ExperimentGroup> group;  // empty outside the experiment
  ShownLevel shown_level;
  std::optional<Level> assigned_level;  // what the assignment model chose
  AttemptOutcome outcome = AttemptOutcome::Rejected;
  std::optional<std::string> session_id;

  friend bool operator==(const AttemptEvent&, const AttemptEvent&) = default;
};

/// Service control record: a session was opened.
struct SessionOpened {
  std::uint64_t seq = 0;
  std::string session_id;
  std::string student_id;
  ExperimentGroup group = ExperimentGroup::Expected;

  friend bool operator==(const SessionOpened&, const SessionOpened&) = default;
};

/// Service control record: an exercise was presented to a session.
struct ExercisePresented {
  std::uint64_t seq = 0;
  std::string session_id;
  std::string student_id;
  std::string exercise_id;
  std::string topic_id;
  ExperimentGroup group = ExperimentGroup::Expected;
  Level shown_level = Level::Intermediate;
  Level assigned_level = Level::Intermediate;
  double probability = 0.5;

  friend bool operator==(const ExercisePresented&, const ExercisePresented&) = default;
};

using LogRecord = std::variant<AttemptEvent, SessionOpened, ExercisePresented>;

std::uint64_t record_seq(const LogRecord& record);

enum class EncounterClass { Success, Skipped, Failure };

/// All attempts of one student on one exercise.
struct Encounter {
  std::string student_id;
  std::string exercise_id;
  std::string topic_id;
  std::vector<AttemptEvent> attempts;
  bool eventual_success = false;
  bool skipped = false;
  std::uint64_t first_seq = 0;

  EncounterClass classification() const {
    if (eventual_success) return EncounterClass::Success;
    return skipped ? EncounterClass::Skipped : EncounterClass::Failure;
  }
};

struct StudentFeatures {
  double topic_success = 0.5;
  double topic_skip = 0.0;
  int prior_encounters = 0;

  friend bool operator==(const StudentFeatures&, const StudentFeatures&) = default;
};

inline constexpr StudentFeatures kColdStartFeatures{0.5, 0.0, 0};

/// Groups one student's attempts (in seq order) by exercise in first-seen order.
std::vector<Encounter> group_encounters(std::span<const AttemptEvent> student_events);

/// Features over encounters in `topic_id` built only from attempts with seq < before_seq.
StudentFeatures features_from_events(std::span<const AttemptEvent> student_events,
                                     std::string_view topic_id, std::uint64_t before_seq);

/// Append-only attempt log with per-student indexes. Not internally
/// synchronized; the service wraps it in its own lock.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const QuestionBank* bank) : bank_(bank) {}

  /// Appends after validating seq order and, if a bank is attached, the exercise.
  void record_attempt(AttemptEvent event);

  const std::vector<AttemptEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Student ids in order of first appearance.
  const std::vector<std::string>& students() const { return students_; }

  /// Copies of one student's events in seq order.
  std::vector<AttemptEvent> student_events(std::string_view student_id) const;

  std::optional<std::uint64_t> last_seq(std::string_view student_id) const;

 private:
  const QuestionBank* bank_ = nullptr;
  std::vector<AttemptEvent> events_;
  std::vector<std::string> students_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_student_;
};

std::vector<Encounter> encounters(const EventLog& log, std::string_view student_id);

StudentFeatures features_at(const EventLog& log, std::string_view student_id,
                            std::string_view topic_id, std::uint64_t before_seq);

// Log file: one JSON object per line. Attempt lines carry seq, student_id,
// exercise_id, topic_id, group, shown_level, outcome (plus optional
// assigned_level and session_id). Service control lines carry a "kind" field.

nlohmann::ordered_json record_to_json(const LogRecord& record);
LogRecord record_from_json(const nlohmann::json& obj);
std::string record_to_line(const LogRecord& record);

std::vector<LogRecord> read_log_records(const std::filesystem::path& path);
void write_log_records(const std::filesystem::path& path, std::span<const LogRecord> records);
void write_log(const std::filesystem::path& path, const EventLog& log);

/// Replays attempt lines into an EventLog; control records are skipped.
EventLog replay_log(const std::filesystem::path& path, const QuestionBank* bank = nullptr);
EventLog log_from_records(std::span<const LogRecord> records, const QuestionBank* bank = nullptr);

/// Serialized append-only writer. Each append is flushed before returning.
class LogAppender {
 public:
  explicit LogAppender(const std::filesystem::path& path);

  void append(const LogRecord& record);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace adaptq
