#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/assignment.hpp"
#include "adaptq/history.hpp"
#include "adaptq/predictor.hpp"
#include "adaptq/question_bank.hpp"

namespace adaptq {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  // Experiment population.
  int n_students = 470;
  int exercises_per_student = 30;
  int max_attempts = 3;

  // Response model.
  double discrimination = 1.0;
  double match_bonus = 1.0;
  double skip_base = -2.0;
  double mismatch_skip_boost = 1.0;
  double engagement_mean = 0.0;
  double engagement_sd = 0.5;
  double topic_correlation = 0.9;  // between a student's per-topic abilities
  double default_difficulty = 0.0;
  std::map<std::string, double> question_difficulty;  // keyed by base question id

  // Bootstrap population used to train the engine before the experiment.
  int bootstrap_students = 2137;
  int bootstrap_min_exercises = 3;
  int bootstrap_max_exercises = 10;

  ArmSplit arm_split;
  TrainConfig train;
  std::uint64_t seed = 7;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

nlohmann::ordered_json config_to_json(const SimConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
SimConfig config_from_json(const nlohmann::json& doc);
SimConfig load_sim_config(const std::filesystem::path& path);

struct SimStudent {
  std::string student_id;
  std::vector<double> ability;  // per topic, aligned with the bank's topic order
  double engagement = 0.0;
  Level true_band = Level::Intermediate;  // tercile of mean ability
};

/// Students named `{prefix}{index:05}` with abilities drawn from per-student
/// streams. Throws SimulationError when fewer than three students are requested.
std::vector<SimStudent> generate_population(const SimConfig& config, int n_students,
                                            std::size_t n_topics, std::string_view prefix = "s");

/// |index(shown) - index(band)| / 2, one of {0, 0.5, 1}.
double level_mismatch(Level shown, Level band);

double attempt_success_probability(const SimConfig& config, const SimStudent& student,
                                   std::size_t topic_index, double difficulty, Level shown_level);
double skip_probability(const SimConfig& config, const SimStudent& student, Level shown_level);

/// Bank clone with extra copies of each question (ids suffixed "~2", "~3", ...)
/// so a student never meets the same exercise id twice.
QuestionBank expand_bank(const QuestionBank& bank, int copies);
std::string base_question_id(std::string_view exercise_id);

struct Engine {
  LogisticModel model;
  PercentileTable table;
};

struct SimulationResult {
  EventLog log;
  Engine engine;
  QuestionBank bank;  // expanded bank the log references
  std::vector<SimStudent> population;
  std::vector<std::string> warnings;
};

/// Runs the bootstrap phase (original variants, no arm) when `engine` is empty,
/// trains the engine on it, then runs the three-arm experiment phase.
/// Output is identical for any thread count.
SimulationResult run_experiment(const SimConfig& config, const QuestionBank& bank,
                                std::optional<Engine> engine = std::nullopt);

/// Builds the engine the way the bootstrap phase does: model trained on every
/// encounter, percentile table over that model's predictions.
Engine train_engine(const EventLog& log, const TrainConfig& config);

}  // namespace adaptq
