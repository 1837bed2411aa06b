#include "adaptq/service.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

namespace adaptq {

std::string normalize_answer(std::string_view answer) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : answer) {
    if (std::isspace(c) != 0) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool grade_answer(const Question& question, std::string_view answer) {
  const std::string given = normalize_answer(answer);
  return std::any_of(question.accepted_answers.begin(), question.accepted_answers.end(),
                     [&](const std::string& a) { return normalize_answer(a) == given; });
}

namespace {

ServiceError not_found(const std::string& session_id) {
  return ServiceError(ServiceError::Kind::NotFound, "unknown_session", fmt::format("no session '{}'", session_id));
}

ServiceError no_open_exercise(const std::string& session_id) {
  return ServiceError(ServiceError::Kind::Conflict, "no_open_exercise",
                      fmt::format("session '{}' has no open exercise", session_id));
}

}  // namespace

TutorService::TutorService(QuestionBank bank, LogisticModel model, PercentileTable table,
                           std::filesystem::path log_path, ServiceConfig config)
    : bank_(std::move(bank)),
      model_(model),
      table_(std::move(table)),
      config_(config),
      log_(&bank_) {
  if (bank_.empty()) throw ServiceError(ServiceError::Kind::BadRequest, "empty_bank", "question bank is empty");
  if (config_.max_attempts < 1) {
    throw ServiceError(ServiceError::Kind::BadRequest, "bad_config", "max_attempts must be at least 1");
  }
  validate_split(config_.arm_split);
  if (std::filesystem::exists(log_path)) {
    for (const auto& record : read_log_records(log_path)) {
      if (record_seq(record) < next_seq_) {
        throw LogError(fmt::format("{}: seq {} is not increasing", log_path.string(), record_seq(record)));
      }
      apply(record);
      next_seq_ = record_seq(record) + 1;
    }
  }
  appender_ = std::make_unique<LogAppender>(log_path);
}

void TutorService::apply(const LogRecord& record) {
  if (const auto* s = std::get_if<SessionOpened>(&record)) {
    Session session;
    session.session_id = s->session_id;
    session.student_id = s->student_id;
    session.group = s->group;
    session.created_seq = s->seq;
    sessions_[s->session_id] = std::move(session);
    students_.try_emplace(s->student_id);
    ++session_count_;
    return;
  }
  if (const auto* p = std::get_if<ExercisePresented>(&record)) {
    Session& session = session_ref(p->session_id);
    const Question& q = bank_.at(p->exercise_id);
    session.current_exercise =
        OpenExercise{p->exercise_id, p->topic_id, p->shown_level, p->assigned_level, p->probability, 0, p->seq};
    auto& state = students_[p->student_id];
    state.presented.insert(p->exercise_id);
    const auto& topics = bank_.topics();
    state.last_topic = static_cast<std::size_t>(std::find(topics.begin(), topics.end(), q.topic_id) - topics.begin());
    return;
  }
  const auto& e = std::get<AttemptEvent>(record);
  log_.record_attempt(e);
  if (e.session_id) {
    Session& session = session_ref(*e.session_id);
    auto& open = session.current_exercise;
    if (!open || open->exercise_id != e.exercise_id) {
      throw LogError(fmt::format("seq {}: attempt on '{}' without a matching open exercise", e.seq, e.exercise_id));
    }
    ++open->attempts_used;
    if (e.outcome != AttemptOutcome::Rejected || open->attempts_used >= config_.max_attempts) open.reset();
  }
}

void TutorService::append(LogRecord record) {
  appender_->append(record);
  apply(record);
  ++next_seq_;
}

Session& TutorService::session_ref(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found(session_id);
  return it->second;
}

const Session& TutorService::session_ref(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found(session_id);
  return it->second;
}

std::uint64_t TutorService::next_seq() const {
  std::lock_guard lock(mutex_);
  return next_seq_;
}

Session TutorService::start_session(const std::string& student_id, std::optional<ExperimentGroup> forced_group) {
  if (student_id.empty()) throw ServiceError(ServiceError::Kind::BadRequest, "bad_request", "student_id is empty");
  std::lock_guard lock(mutex_);
  SessionOpened s;
  s.seq = next_seq_;
  s.session_id = fmt::format("sess-{:06}", session_count_ + 1);
  s.student_id = student_id;
  s.group = forced_group.value_or(assign_group(student_id, config_.arm_split, config_.seed));
  append(s);
  return sessions_.at(s.session_id);
}

const Question* TutorService::pick_next(const StudentState& state, std::size_t& topic_index) const {
  const auto& topics = bank_.topics();
  const std::size_t start = state.last_topic ? (*state.last_topic + 1) % topics.size() : 0;
  for (std::size_t step = 0; step < topics.size(); ++step) {
    const std::size_t t = (start + step) % topics.size();
    for (const auto& q : bank_.questions()) {
      if (q.topic_id == topics[t] && !state.presented.contains(q.id)) {
        topic_index = t;
        return &q;
      }
    }
  }
  return nullptr;
}

StudentFeatures TutorService::features_locked(const std::string& student, const std::string& topic) const {
  return features_at(log_, student, topic, next_seq_);
}

PresentedExercise TutorService::next_exercise(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  const Session& session = session_ref(session_id);
  if (session.current_exercise) {
    throw ServiceError(ServiceError::Kind::Conflict, "exercise_open",
                       fmt::format("session '{}' already has open exercise '{}'", session_id,
                                   session.current_exercise->exercise_id));
  }
  std::size_t topic_index = 0;
  const Question* q = pick_next(students_[session.student_id], topic_index);
  if (q == nullptr) {
    throw ServiceError(ServiceError::Kind::Conflict, "bank_exhausted",
                       fmt::format("student '{}' has seen every question", session.student_id));
  }
  const StudentFeatures features = features_locked(session.student_id, q->topic_id);
  const double probability = predict(model_, features);
  const Level assigned = assign_level(table_, probability);
  const auto selected = select_variant(*q, assigned, session.group, config_.seed, session.student_id);

  ExercisePresented p;
  p.seq = next_seq_;
  p.session_id = session_id;
  p.student_id = session.student_id;
  p.exercise_id = q->id;
  p.topic_id = q->topic_id;
  p.group = session.group;
  p.shown_level = selected.shown_level;
  p.assigned_level = assigned;
  p.probability = probability;
  append(p);
  return {q->id, selected.shown_level, selected.text};
}

GradeResult TutorService::submit_attempt(const std::string& session_id, std::string_view answer) {
  std::lock_guard lock(mutex_);
  const Session& session = session_ref(session_id);
  if (!session.current_exercise) throw no_open_exercise(session_id);
  const OpenExercise open = *session.current_exercise;
  const bool accepted = grade_answer(bank_.at(open.exercise_id), answer);

  AttemptEvent e;
  e.seq = next_seq_;
  e.student_id = session.student_id;
  e.exercise_id = open.exercise_id;
  e.topic_id = open.topic_id;
  e.group = session.group;
  e.shown_level = open.shown_level;
  e.assigned_level = open.assigned_level;
  e.outcome = accepted ? AttemptOutcome::Accepted : AttemptOutcome::Rejected;
  e.session_id = session_id;
  append(e);

  GradeResult r;
  r.outcome = e.outcome;
  r.attempts_remaining = std::max(0, config_.max_attempts - (open.attempts_used + 1));
  r.exercise_closed = !sessions_.at(session_id).current_exercise.has_value();
  return r;
}

void TutorService::skip_exercise(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  const Session& session = session_ref(session_id);
  if (!session.current_exercise) throw no_open_exercise(session_id);
  const OpenExercise& open = *session.current_exercise;
  AttemptEvent e;
  e.seq = next_seq_;
  e.student_id = session.student_id;
  e.exercise_id = open.exercise_id;
  e.topic_id = open.topic_id;
  e.group = session.group;
  e.shown_level = open.shown_level;
  e.assigned_level = open.assigned_level;
  e.outcome = AttemptOutcome::Skipped;
  e.session_id = session_id;
  append(e);
}

Profile TutorService::get_profile(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const Session& session = session_ref(session_id);
  Profile profile;
  profile.group = session.group;
  for (const auto& topic : bank_.topics()) profile.features[topic] = features_locked(session.student_id, topic);

  if (session.current_exercise) {
    profile.topic_id = session.current_exercise->topic_id;
  } else {
    auto it = students_.find(session.student_id);
    const StudentState empty;
    const StudentState& state = it == students_.end() ? empty : it->second;
    std::size_t topic_index = 0;
    if (pick_next(state, topic_index) != nullptr) {
      profile.topic_id = bank_.topics()[topic_index];
    } else {
      profile.topic_id = bank_.topics()[state.last_topic.value_or(0)];
    }
  }
  profile.probability = predict(model_, profile.features.at(profile.topic_id));
  profile.assigned_level = assign_level(table_, profile.probability);
  return profile;
}

Session TutorService::session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return session_ref(session_id);
}

GroupReport TutorService::experiment_report(double alpha) const {
  std::lock_guard lock(mutex_);
  const auto students = student_metrics(log_);
  std::size_t populated = 0;
  for (ExperimentGroup g : kAllGroups) {
    const auto n = std::count_if(students.begin(), students.end(), [g](const auto& s) { return s.group == g; });
    populated += n >= 2 ? 1 : 0;
  }
  if (populated < 2) {
    throw AnalyticsError("insufficient data: the report needs at least two arms with two or more students each");
  }
  return group_report(students, alpha, GroupReportOptions{false});
}

}  // namespace adaptq
