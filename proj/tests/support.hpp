#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <fmt/format.h>

#include "adaptq/history.hpp"
#include "adaptq/question_bank.hpp"

namespace adaptq::testing {

inline std::filesystem::path data_dir() { return ADAPTQ_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("adaptq-test-{}-{}-{}", ::getpid(), stamp, counter++);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Question make_question(const std::string& id, const std::string& topic,
                              Level original = Level::Intermediate,
                              std::vector<std::string> answers = {"yes"}) {
  Question q;
  q.id = id;
  q.topic_id = topic;
  q.accepted_answers = std::move(answers);
  q.original_level = original;
  const char* texts[] = {"a long and very detailed beginner phrasing of the question",
                         "a medium phrasing of the question", "terse question"};
  for (Level level : kAllLevels) {
    auto& v = q.variants[index_of(level)];
    v.level = level;
    v.text = fmt::format("{} {}", id, texts[index_of(level)]);
    v.word_count = word_count(v.text);
  }
  return q;
}

inline AttemptEvent attempt(std::uint64_t seq, const std::string& student, const std::string& exercise,
                            const std::string& topic, AttemptOutcome outcome,
                            std::optional<ExperimentGroup> group = std::nullopt,
                            std::optional<Level> assigned = std::nullopt) {
  AttemptEvent e;
  e.seq = seq;
  e.student_id = student;
  e.exercise_id = exercise;
  e.topic_id = topic;
  e.group = group;
  if (group) {
    e.shown_level = assigned.value_or(Level::Intermediate);
  }
  e.assigned_level = assigned;
  e.outcome = outcome;
  return e;
}

constexpr auto kA = AttemptOutcome::Accepted;
constexpr auto kR = AttemptOutcome::Rejected;
constexpr auto kS = AttemptOutcome::Skipped;

}  // namespace adaptq::testing
