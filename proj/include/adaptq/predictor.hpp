#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/history.hpp"

namespace adaptq {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingPoint {
  StudentFeatures features;
  bool label = false;  // eventual success of the encounter
  std::string student_id;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int max_iterations = 5000;
  double tolerance = 1e-8;  // on absolute loss change between iterations
  double l2_penalty = 0.0;  // weights only, never the bias
};

struct LogisticModel {
  double bias = 0.0;
  double w_success = 0.0;
  double w_skip = 0.0;
  int iterations = 0;
  double final_loss = 0.0;
  TrainConfig config;
};

/// Gradient ordering used throughout: {bias, w_success, w_skip}.
using Gradient = std::array<double, 3>;

double logistic(double z);

/// One point per encounter of every student, features taken just before the
/// encounter's first attempt.
std::vector<TrainingPoint> build_training_set(const EventLog& log);

double predict(const LogisticModel& model, const StudentFeatures& features);

/// Regularized mean negative log-likelihood.
double loss(const LogisticModel& model, std::span<const TrainingPoint> points, double l2_penalty);
Gradient loss_gradient(const LogisticModel& model, std::span<const TrainingPoint> points,
                       double l2_penalty);

/// Called after every update with (iteration, loss).
using TrainObserver = std::function<void(int, double)>;

/// Full-batch gradient descent from the zero model. Throws TrainingError when
/// the input is empty or holds a single label class.
LogisticModel train(std::span<const TrainingPoint> points, const TrainConfig& config = {},
                    const TrainObserver& observer = {});

/// Fraction of points whose thresholded prediction (>= counts positive) equals the label.
double accuracy(const LogisticModel& model, std::span<const TrainingPoint> points,
                double threshold = 0.5);

struct StudentSplit {
  std::vector<TrainingPoint> train;
  std::vector<TrainingPoint> test;
};

/// Seeded split at student granularity: a student's points all land on one
/// side. The first round(train_fraction * students) shuffled students train.
StudentSplit split_by_student(std::span<const TrainingPoint> points, std::uint64_t seed,
                              double train_fraction = 0.8);

nlohmann::ordered_json model_to_json(const LogisticModel& model);
LogisticModel model_from_json(const nlohmann::json& doc);
void save_model(const LogisticModel& model, const std::filesystem::path& path);
LogisticModel load_model(const std::filesystem::path& path);

/// Hex FNV-1a digest of the model's canonical serialization.
std::string model_hash(const LogisticModel& model);

}  // namespace adaptq
