#include "adaptq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "adaptq/random.hpp"

namespace adaptq {

using nlohmann::json;
using nlohmann::ordered_json;

void SimConfig::validate() const {
  const auto fail = [](const std::string& what) { throw SimulationError("invalid simulation config: " + what); };
  if (n_students < 3) fail("n_students must be at least 3");
  if (exercises_per_student < 1) fail("exercises_per_student must be positive");
  if (max_attempts < 1) fail("max_attempts must be at least 1");
  if (bootstrap_students < 0) fail("bootstrap_students must be non-negative");
  if (bootstrap_students > 0 && bootstrap_students < 3) fail("bootstrap_students must be 0 or at least 3");
  if (bootstrap_min_exercises < 1 || bootstrap_max_exercises < bootstrap_min_exercises) {
    fail("bootstrap exercise range must satisfy 1 <= min <= max");
  }
  if (!(discrimination >= 0)) fail("discrimination must be non-negative");
  if (!(engagement_sd >= 0)) fail("engagement_sd must be non-negative");
  if (!(topic_correlation >= 0 && topic_correlation <= 1)) fail("topic_correlation must lie in [0,1]");
  if (threads < 0) fail("threads must be non-negative");
  try {
    validate_split(arm_split);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

ordered_json config_to_json(const SimConfig& c) {
  ordered_json j;
  j["n_students"] = c.n_students;
  j["exercises_per_student"] = c.exercises_per_student;
  j["max_attempts"] = c.max_attempts;
  j["discrimination"] = c.discrimination;
  j["match_bonus"] = c.match_bonus;
  j["skip_base"] = c.skip_base;
  j["mismatch_skip_boost"] = c.mismatch_skip_boost;
  j["engagement_mean"] = c.engagement_mean;
  j["engagement_sd"] = c.engagement_sd;
  j["topic_correlation"] = c.topic_correlation;
  j["default_difficulty"] = c.default_difficulty;
  j["question_difficulty"] = c.question_difficulty;
  j["bootstrap_students"] = c.bootstrap_students;
  j["bootstrap_min_exercises"] = c.bootstrap_min_exercises;
  j["bootstrap_max_exercises"] = c.bootstrap_max_exercises;
  j["arm_split"] = {c.arm_split.expected, c.arm_split.non_expected, c.arm_split.control};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"max_iterations", c.train.max_iterations},
                {"tolerance", c.train.tolerance},
                {"l2_penalty", c.train.l2_penalty}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

SimConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw SimulationError("simulation config must be an object");
  SimConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "n_students") c.n_students = value.get<int>();
      else if (key == "exercises_per_student") c.exercises_per_student = value.get<int>();
      else if (key == "max_attempts") c.max_attempts = value.get<int>();
      else if (key == "discrimination") c.discrimination = value.get<double>();
      else if (key == "match_bonus") c.match_bonus = value.get<double>();
      else if (key == "skip_base") c.skip_base = value.get<double>();
      else if (key == "mismatch_skip_boost") c.mismatch_skip_boost = value.get<double>();
      else if (key == "engagement_mean") c.engagement_mean = value.get<double>();
      else if (key == "engagement_sd") c.engagement_sd = value.get<double>();
      else if (key == "topic_correlation") c.topic_correlation = value.get<double>();
      else if (key == "default_difficulty") c.default_difficulty = value.get<double>();
      else if (key == "question_difficulty") c.question_difficulty = value.get<std::map<std::string, double>>();
      else if (key == "bootstrap_students") c.bootstrap_students = value.get<int>();
      else if (key == "bootstrap_min_exercises") c.bootstrap_min_exercises = value.get<int>();
      else if (key == "bootstrap_max_exercises") c.bootstrap_max_exercises = value.get<int>();
      else if (key == "arm_split") {
        const auto v = value.get<std::vector<double>>();
        if (v.size() != 3) throw SimulationError("arm_split must have three entries");
        c.arm_split = {v[0], v[1], v[2]};
      } else if (key == "train") {
        c.train.learning_rate = value.value("learning_rate", c.train.learning_rate);
        c.train.max_iterations = value.value("max_iterations", c.train.max_iterations);
        c.train.tolerance = value.value("tolerance", c.train.tolerance);
        c.train.l2_penalty = value.value("l2_penalty", c.train.l2_penalty);
      } else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "comment") continue;
      else throw SimulationError(fmt::format("unknown config field '{}'", key));
    }
  } catch (const json::exception& e) {
    throw SimulationError(fmt::format("malformed simulation config: {}", e.what()));
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimulationError(fmt::format("cannot open config '{}'", path.string()));
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw SimulationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<SimStudent> generate_population(const SimConfig& config, int n_students, std::size_t n_topics,
                                            std::string_view prefix) {
  if (n_students < 3) throw SimulationError("population needs at least 3 students for terciles");
  if (n_topics == 0) throw SimulationError("population needs at least one topic");
  const double rho = config.topic_correlation;
  const double spread = std::sqrt(1.0 - rho * rho);
  std::vector<SimStudent> students(static_cast<std::size_t>(n_students));
  std::vector<double> general(students.size());
  for (std::size_t i = 0; i < students.size(); ++i) {
    auto& s = students[i];
    s.student_id = fmt::format("{}{:05}", prefix, i);
    Rng rng(mix_seed(mix_seed(config.seed, "ability"), s.student_id));
    const double g = rng.normal();
    s.ability.resize(n_topics);
    double total = 0.0;
    for (auto& a : s.ability) {
      a = rho * g + spread * rng.normal();
      total += a;
    }
    general[i] = total / static_cast<double>(n_topics);
    s.engagement = config.engagement_mean + config.engagement_sd * rng.normal();
  }
  std::vector<std::size_t> order(students.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return general[a] < general[b]; });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    students[order[rank]].true_band = kAllLevels[rank * 3 / order.size()];
  }
  return students;
}

double level_mismatch(Level shown, Level band) {
  const auto a = static_cast<int>(index_of(shown));
  const auto b = static_cast<int>(index_of(band));
  return std::abs(a - b) / 2.0;
}

double attempt_success_probability(const SimConfig& config, const SimStudent& student, std::size_t topic_index,
                                   double difficulty, Level shown_level) {
  const double mismatch = level_mismatch(shown_level, student.true_band);
  return logistic(config.discrimination * (student.ability.at(topic_index) - difficulty) +
                  config.match_bonus * (1.0 - mismatch));
}

double skip_probability(const SimConfig& config, const SimStudent& student, Level shown_level) {
  const double mismatch = level_mismatch(shown_level, student.true_band);
  return logistic(config.skip_base + config.mismatch_skip_boost * mismatch - student.engagement);
}

std::string base_question_id(std::string_view exercise_id) {
  const auto pos = exercise_id.rfind('~');
  return std::string(pos == std::string_view::npos ? exercise_id : exercise_id.substr(0, pos));
}

QuestionBank expand_bank(const QuestionBank& bank, int copies) {
  std::vector<Question> out;
  for (int copy = 1; copy <= copies; ++copy) {
    for (const auto& q : bank.questions()) {
      Question c = q;
      if (copy > 1) c.id = fmt::format("{}~{}", q.id, copy);
      out.push_back(std::move(c));
    }
  }
  return QuestionBank(std::move(out));
}

Engine train_engine(const EventLog& log, const TrainConfig& config) {
  const auto points = build_training_set(log);
  Engine engine;
  engine.model = train(points, config);
  std::vector<double> predictions;
  predictions.reserve(points.size());
  for (const auto& p : points) predictions.push_back(predict(engine.model, p.features));
  engine.table = build_percentile_table(predictions);
  engine.table.source_model_hash = model_hash(engine.model);
  return engine;
}

namespace {

struct Schedule {
  std::vector<std::string> topics;
  std::vector<std::vector<const Question*>> by_topic;  // base questions
};

Schedule make_schedule(const QuestionBank& bank) {
  Schedule s;
  s.topics = bank.topics();
  s.by_topic.resize(s.topics.size());
  for (const auto& q : bank.questions()) {
    const auto t = static_cast<std::size_t>(
        std::find(s.topics.begin(), s.topics.end(), q.topic_id) - s.topics.begin());
    s.by_topic[t].push_back(&q);
  }
  return s;
}

int copies_needed(const Schedule& s, int max_exercises) {
  int copies = 1;
  const auto n_topics = static_cast<int>(s.topics.size());
  for (int t = 0; t < n_topics; ++t) {
    int per_topic = max_exercises / n_topics + (t < max_exercises % n_topics ? 1 : 0);
    const auto size = static_cast<int>(s.by_topic[static_cast<std::size_t>(t)].size());
    copies = std::max(copies, (per_topic + size - 1) / size);
  }
  return copies;
}

struct StudentRun {
  const SimStudent* student = nullptr;
  std::optional<ExperimentGroup> group;
  int exercises = 0;
};

struct TaggedEvent {
  int exercise_index;
  AttemptEvent event;
};

std::vector<TaggedEvent> simulate_student(const SimConfig& config, const Schedule& schedule,
                                          const QuestionBank& expanded, const StudentRun& run,
                                          const Engine* engine) {
  const SimStudent& student = *run.student;
  Rng order_rng(mix_seed(mix_seed(config.seed, "order"), student.student_id));
  auto shuffled = schedule.by_topic;
  for (auto& list : shuffled) {
    for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[order_rng.below(i)]);
  }
  Rng rng(mix_seed(mix_seed(config.seed, "attempts"), student.student_id));

  std::vector<TaggedEvent> out;
  std::vector<AttemptEvent> history;
  std::uint64_t next_seq = 1;
  const std::size_t n_topics = schedule.topics.size();
  for (int k = 0; k < run.exercises; ++k) {
    const std::size_t topic = static_cast<std::size_t>(k) % n_topics;
    const std::size_t j = static_cast<std::size_t>(k) / n_topics;
    const auto& pool = shuffled[topic];
    const Question& base = *pool[j % pool.size()];
    const std::size_t copy = j / pool.size() + 1;
    const Question& q = copy == 1 ? base : expanded.at(fmt::format("{}~{}", base.id, copy));

    Level shown = q.original_level;
    ShownLevel recorded_shown;  // original marker during bootstrap
    std::optional<Level> assigned;
    if (run.group) {
      const auto features = features_from_events(history, q.topic_id, next_seq);
      const double p = predict(engine->model, features);
      assigned = assign_level(engine->table, p);
      shown = select_variant(q, *assigned, *run.group, config.seed, student.student_id).shown_level;
      recorded_shown = shown;
    }

    auto diff_it = config.question_difficulty.find(base.id);
    const double difficulty = diff_it == config.question_difficulty.end() ? config.default_difficulty : diff_it->second;
    const double p_skip = skip_probability(config, student, shown);
    const double p_success = attempt_success_probability(config, student, topic, difficulty, shown);

    const auto emit = [&](AttemptOutcome outcome) {
      AttemptEvent e;
      e.seq = next_seq++;
      e.student_id = student.student_id;
      e.exercise_id = q.id;
      e.topic_id = q.topic_id;
      e.group = run.group;
      e.shown_level = recorded_shown;
      e.assigned_level = assigned;
      e.outcome = outcome;
      history.push_back(e);
      out.push_back({k, std::move(e)});
    };

    const double u_skip = rng.uniform();
    if (u_skip < p_skip) {
      emit(AttemptOutcome::Skipped);
      continue;
    }
    for (int a = 0; a < config.max_attempts; ++a) {
      const bool ok = rng.uniform() < p_success;
      emit(ok ? AttemptOutcome::Accepted : AttemptOutcome::Rejected);
      if (ok) break;
    }
  }
  return out;
}

std::vector<std::vector<TaggedEvent>> simulate_all(const SimConfig& config, const Schedule& schedule,
                                                   const QuestionBank& expanded, const std::vector<StudentRun>& runs,
                                                   const Engine* engine) {
  std::vector<std::vector<TaggedEvent>> results(runs.size());
  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, 64);
  if (threads == 1 || runs.size() < 64) {
    for (std::size_t i = 0; i < runs.size(); ++i) results[i] = simulate_student(config, schedule, expanded, runs[i], engine);
    return results;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < runs.size(); i += threads) {
        results[i] = simulate_student(config, schedule, expanded, runs[i], engine);
      }
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

// Interleaves students exercise by exercise and renumbers seq globally. The
// relative order of each student's events is preserved.
void merge_into(EventLog& log, std::vector<std::vector<TaggedEvent>>& per_student, std::uint64_t& next_seq) {
  struct Key {
    int exercise_index;
    std::size_t student;
    std::size_t position;
  };
  std::vector<Key> keys;
  for (std::size_t s = 0; s < per_student.size(); ++s) {
    for (std::size_t i = 0; i < per_student[s].size(); ++i) keys.push_back({per_student[s][i].exercise_index, s, i});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.exercise_index, a.student, a.position) < std::tie(b.exercise_index, b.student, b.position);
  });
  for (const auto& k : keys) {
    AttemptEvent e = std::move(per_student[k.student][k.position].event);
    e.seq = next_seq++;
    log.record_attempt(std::move(e));
  }
}

}  // namespace

SimulationResult run_experiment(const SimConfig& config, const QuestionBank& bank, std::optional<Engine> engine) {
  config.validate();
  if (bank.empty()) throw SimulationError("cannot simulate with an empty bank");
  const Schedule schedule = make_schedule(bank);

  SimulationResult result;
  const bool bootstrap = !engine.has_value();
  if (bootstrap && config.bootstrap_students == 0) {
    throw SimulationError("no engine supplied and bootstrap_students is 0");
  }
  const int max_ex = std::max(config.exercises_per_student, bootstrap ? config.bootstrap_max_exercises : 0);
  const int copies = copies_needed(schedule, max_ex);
  if (copies > 1) {
    result.warnings.push_back(fmt::format(
        "bank of {} questions is too small for {} exercises per student; questions reused as {} copies", bank.size(),
        max_ex, copies));
  }
  result.bank = expand_bank(bank, copies);
  std::uint64_t next_seq = 1;

  if (bootstrap) {
    SimConfig boot = config;
    boot.seed = mix_seed(config.seed, "bootstrap");
    const auto prior = generate_population(boot, config.bootstrap_students, schedule.topics.size(), "b");
    Rng count_rng(mix_seed(config.seed, "bootstrap-counts"));
    std::vector<StudentRun> runs;
    const auto span = static_cast<std::uint64_t>(config.bootstrap_max_exercises - config.bootstrap_min_exercises + 1);
    for (const auto& s : prior) {
      runs.push_back({&s, std::nullopt, config.bootstrap_min_exercises + static_cast<int>(count_rng.below(span))});
    }
    auto events = simulate_all(boot, schedule, result.bank, runs, nullptr);
    merge_into(result.log, events, next_seq);
    engine = train_engine(result.log, config.train);
  }
  result.engine = *engine;

  result.population = generate_population(config, config.n_students, schedule.topics.size(), "s");
  std::vector<StudentRun> runs;
  for (const auto& s : result.population) {
    runs.push_back({&s, assign_group(s.student_id, config.arm_split, config.seed), config.exercises_per_student});
  }
  auto events = simulate_all(config, schedule, result.bank, runs, &result.engine);
  merge_into(result.log, events, next_seq);
  return result;
}

}  // namespace adaptq
