#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adaptq/analytics.hpp"
#include "adaptq/assignment.hpp"
#include "adaptq/history.hpp"
#include "adaptq/predictor.hpp"
#include "adaptq/question_bank.hpp"

namespace adaptq {

class ServiceError : public std::runtime_error {
 public:
  enum class Kind { NotFound, Conflict, BadRequest };

  ServiceError(Kind kind, std::string code, const std::string& detail)
      : std::runtime_error(detail), kind_(kind), code_(std::move(code)) {}

  Kind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  Kind kind_;
  std::string code_;
};

struct ServiceConfig {
  int max_attempts = 3;
  ArmSplit arm_split;
  std::uint64_t seed = 7;
};

struct OpenExercise {
  std::string exercise_id;
  std::string topic_id;
  Level shown_level = Level::Intermediate;
  Level assigned_level = Level::Intermediate;
  double probability = 0.5;
  int attempts_used = 0;
  std::uint64_t presented_seq = 0;
};

struct Session {
  std::string session_id;
  std::string student_id;
  ExperimentGroup group = ExperimentGroup::Expected;
  std::optional<OpenExercise> current_exercise;
  std::uint64_t created_seq = 0;
};

struct PresentedExercise {
  std::string exercise_id;
  Level shown_level;
  std::string text;
};

struct GradeResult {
  AttemptOutcome outcome = AttemptOutcome::Rejected;
  int attempts_remaining = 0;
  bool exercise_closed = false;
};

struct Profile {
  std::map<std::string, StudentFeatures> features;  // per topic
  std::string topic_id;  // topic the probability refers to
  double probability = 0.5;
  Level assigned_level = Level::Intermediate;
  ExperimentGroup group = ExperimentGroup::Expected;
};

/// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view answer);
bool grade_answer(const Question& question, std::string_view answer);

/// Live tutoring loop over an append-only log. Every state change is one
/// appended record; constructing a service over an existing log replays it.
/// All public operations are serialized by one lock.
class TutorService {
 public:
  TutorService(QuestionBank bank, LogisticModel model, PercentileTable table,
               std::filesystem::path log_path, ServiceConfig config = {});

  Session start_session(const std::string& student_id, std::optional<ExperimentGroup> forced_group = std::nullopt);
  PresentedExercise next_exercise(const std::string& session_id);
  GradeResult submit_attempt(const std::string& session_id, std::string_view answer);
  void skip_exercise(const std::string& session_id);
  Profile get_profile(const std::string& session_id) const;
  Session session(const std::string& session_id) const;

  /// group_report over the persisted log. Throws AnalyticsError unless at
  /// least two arms hold two or more students.
  GroupReport experiment_report(double alpha = 0.05) const;

  std::uint64_t next_seq() const;
  const QuestionBank& bank() const { return bank_; }
  const LogisticModel& model() const { return model_; }
  const PercentileTable& table() const { return table_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct StudentState {
    std::set<std::string> presented;
    std::optional<std::size_t> last_topic;
  };

  void apply(const LogRecord& record);
  void append(LogRecord record);
  Session& session_ref(const std::string& session_id);
  const Session& session_ref(const std::string& session_id) const;
  const Question* pick_next(const StudentState& state, std::size_t& topic_index) const;
  StudentFeatures features_locked(const std::string& student, const std::string& topic) const;

  QuestionBank bank_;
  LogisticModel model_;
  PercentileTable table_;
  ServiceConfig config_;

  mutable std::mutex mutex_;
  EventLog log_;
  std::unordered_map<std::string, Session> sessions_;
  std::unordered_map<std::string, StudentState> students_;
  std::uint64_t next_seq_ = 1;
  std::size_t session_count_ = 0;
  std::unique_ptr<LogAppender> appender_;
};

}  // namespace adaptq
