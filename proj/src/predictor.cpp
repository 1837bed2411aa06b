#include "adaptq/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "adaptq/random.hpp"

namespace adaptq {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double linear(const LogisticModel& m, const StudentFeatures& f) {
  return m.bias + m.w_success * f.topic_success + m.w_skip * f.topic_skip;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::vector<TrainingPoint> build_training_set(const EventLog& log) {
  std::vector<TrainingPoint> points;
  for (const auto& student : log.students()) {
    const auto events = log.student_events(student);
    for (const auto& enc : group_encounters(events)) {
      points.push_back(TrainingPoint{features_from_events(events, enc.topic_id, enc.first_seq),
                                     enc.eventual_success, student});
    }
  }
  return points;
}

double predict(const LogisticModel& model, const StudentFeatures& features) {
  if (!std::isfinite(features.topic_success) || !std::isfinite(features.topic_skip)) {
    throw std::invalid_argument("predict: non-finite features");
  }
  return logistic(linear(model, features));
}

double loss(const LogisticModel& model, std::span<const TrainingPoint> points, double l2_penalty) {
  double total = 0.0;
  for (const auto& p : points) {
    const double z = linear(model, p.features);
    total += softplus(z) - (p.label ? z : 0.0);
  }
  const double reg = 0.5 * l2_penalty * (model.w_success * model.w_success + model.w_skip * model.w_skip);
  return total / static_cast<double>(points.size()) + reg;
}

Gradient loss_gradient(const LogisticModel& model, std::span<const TrainingPoint> points,
                       double l2_penalty) {
  Gradient g{0.0, 0.0, 0.0};
  for (const auto& p : points) {
    const double r = logistic(linear(model, p.features)) - (p.label ? 1.0 : 0.0);
    g[0] += r;
    g[1] += r * p.features.topic_success;
    g[2] += r * p.features.topic_skip;
  }
  const auto n = static_cast<double>(points.size());
  for (auto& v : g) v /= n;
  g[1] += l2_penalty * model.w_success;
  g[2] += l2_penalty * model.w_skip;
  return g;
}

namespace {

// Points sharing a feature pair contribute identically up to their label, so
// training runs over (features, count, positives) groups.
struct FeatureGroup {
  double success;
  double skip;
  double count;
  double positives;
};

std::vector<FeatureGroup> group_points(std::span<const TrainingPoint> points) {
  std::map<std::pair<double, double>, std::pair<double, double>> acc;
  for (const auto& p : points) {
    auto& slot = acc[{p.features.topic_success, p.features.topic_skip}];
    slot.first += 1.0;
    slot.second += p.label ? 1.0 : 0.0;
  }
  std::vector<FeatureGroup> groups;
  groups.reserve(acc.size());
  for (const auto& [key, value] : acc) groups.push_back({key.first, key.second, value.first, value.second});
  return groups;
}

double grouped_loss(const LogisticModel& m, const std::vector<FeatureGroup>& groups, double n, double l2) {
  double total = 0.0;
  for (const auto& g : groups) {
    const double z = m.bias + m.w_success * g.success + m.w_skip * g.skip;
    total += g.count * softplus(z) - g.positives * z;
  }
  return total / n + 0.5 * l2 * (m.w_success * m.w_success + m.w_skip * m.w_skip);
}

Gradient grouped_gradient(const LogisticModel& m, const std::vector<FeatureGroup>& groups, double n, double l2) {
  Gradient grad{0.0, 0.0, 0.0};
  for (const auto& g : groups) {
    const double r = g.count * logistic(m.bias + m.w_success * g.success + m.w_skip * g.skip) - g.positives;
    grad[0] += r;
    grad[1] += r * g.success;
    grad[2] += r * g.skip;
  }
  for (auto& v : grad) v /= n;
  grad[1] += l2 * m.w_success;
  grad[2] += l2 * m.w_skip;
  return grad;
}

}  // namespace

LogisticModel train(std::span<const TrainingPoint> points, const TrainConfig& config,
                    const TrainObserver& observer) {
  if (points.empty()) throw TrainingError("train: no training points");
  const bool first = points.front().label;
  if (std::all_of(points.begin(), points.end(), [first](const auto& p) { return p.label == first; })) {
    throw TrainingError(fmt::format("train: every label is {}; the optimum is at infinity",
                                    first ? "true" : "false"));
  }
  if (!(config.learning_rate > 0) || config.max_iterations <= 0 || !(config.tolerance > 0) ||
      config.l2_penalty < 0) {
    throw TrainingError("train: invalid configuration");
  }

  const auto groups = group_points(points);
  const auto n = static_cast<double>(points.size());
  LogisticModel model;
  model.config = config;
  double current = grouped_loss(model, groups, n, config.l2_penalty);
  int it = 0;
  while (it < config.max_iterations) {
    const Gradient g = grouped_gradient(model, groups, n, config.l2_penalty);
    model.bias -= config.learning_rate * g[0];
    model.w_success -= config.learning_rate * g[1];
    model.w_skip -= config.learning_rate * g[2];
    ++it;
    const double next = grouped_loss(model, groups, n, config.l2_penalty);
    if (observer) observer(it, next);
    const double change = std::abs(current - next);
    current = next;
    if (change < config.tolerance) break;
  }
  model.iterations = it;
  model.final_loss = current;
  return model;
}

double accuracy(const LogisticModel& model, std::span<const TrainingPoint> points, double threshold) {
  if (points.empty()) throw std::invalid_argument("accuracy: no points");
  std::size_t correct = 0;
  for (const auto& p : points) {
    if ((predict(model, p.features) >= threshold) == p.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(points.size());
}

StudentSplit split_by_student(std::span<const TrainingPoint> points, std::uint64_t seed,
                              double train_fraction) {
  std::set<std::string> ids;
  for (const auto& p : points) ids.insert(p.student_id);
  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, "student-split"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  std::set<std::string> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));

  StudentSplit split;
  for (const auto& p : points) (train_ids.contains(p.student_id) ? split.train : split.test).push_back(p);
  return split;
}

nlohmann::ordered_json model_to_json(const LogisticModel& model) {
  nlohmann::ordered_json j;
  j["bias"] = model.bias;
  j["w_success"] = model.w_success;
  j["w_skip"] = model.w_skip;
  j["iterations"] = model.iterations;
  j["final_loss"] = model.final_loss;
  j["config"] = {{"learning_rate", model.config.learning_rate},
                 {"max_iterations", model.config.max_iterations},
                 {"tolerance", model.config.tolerance},
                 {"l2_penalty", model.config.l2_penalty}};
  return j;
}

LogisticModel model_from_json(const nlohmann::json& doc) {
  try {
    LogisticModel m;
    m.bias = doc.at("bias").get<double>();
    m.w_success = doc.at("w_success").get<double>();
    m.w_skip = doc.at("w_skip").get<double>();
    m.iterations = doc.value("iterations", 0);
    m.final_loss = doc.value("final_loss", 0.0);
    if (doc.contains("config")) {
      const auto& c = doc.at("config");
      m.config.learning_rate = c.value("learning_rate", m.config.learning_rate);
      m.config.max_iterations = c.value("max_iterations", m.config.max_iterations);
      m.config.tolerance = c.value("tolerance", m.config.tolerance);
      m.config.l2_penalty = c.value("l2_penalty", m.config.l2_penalty);
    }
    if (!std::isfinite(m.bias) || !std::isfinite(m.w_success) || !std::isfinite(m.w_skip)) {
      throw TrainingError("model parameters must be finite");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw TrainingError(fmt::format("malformed model: {}", e.what()));
  }
}

void save_model(const LogisticModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw TrainingError(fmt::format("cannot write '{}'", path.string()));
  out << model_to_json(model).dump(2) << '\n';
}

LogisticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError(fmt::format("cannot open model '{}'", path.string()));
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw TrainingError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string model_hash(const LogisticModel& model) {
  return fmt::format("{:016x}", fnv1a64(model_to_json(model).dump()));
}

}  // namespace adaptq
