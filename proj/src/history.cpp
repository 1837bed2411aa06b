#include "adaptq/history.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace adaptq {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t record_seq(const LogRecord& record) {
  return std::visit([](const auto& r) { return r.seq; }, record);
}

std::vector<Encounter> group_encounters(std::span<const AttemptEvent> student_events) {
  std::vector<Encounter> out;
  std::unordered_map<std::string_view, std::size_t> slot;
  for (const auto& e : student_events) {
    auto [it, inserted] = slot.try_emplace(e.exercise_id, out.size());
    if (inserted) {
      Encounter enc;
      enc.student_id = e.student_id;
      enc.exercise_id = e.exercise_id;
      enc.topic_id = e.topic_id;
      enc.first_seq = e.seq;
      out.push_back(std::move(enc));
    }
    out[it->second].attempts.push_back(e);
  }
  for (auto& enc : out) {
    const auto has = [&](AttemptOutcome o) {
      return std::any_of(enc.attempts.begin(), enc.attempts.end(),
                         [o](const AttemptEvent& a) { return a.outcome == o; });
    };
    enc.eventual_success = has(AttemptOutcome::Accepted);
    enc.skipped = !enc.eventual_success && has(AttemptOutcome::Skipped);
  }
  return out;
}

StudentFeatures features_from_events(std::span<const AttemptEvent> student_events,
                                     std::string_view topic_id, std::uint64_t before_seq) {
  std::vector<AttemptEvent> prior;
  for (const auto& e : student_events) {
    if (e.seq < before_seq && e.topic_id == topic_id) prior.push_back(e);
  }
  if (prior.empty()) return kColdStartFeatures;
  const auto encs = group_encounters(prior);
  std::size_t success = 0;
  std::size_t skipped = 0;
  for (const auto& enc : encs) {
    success += enc.eventual_success ? 1 : 0;
    skipped += enc.skipped ? 1 : 0;
  }
  const auto n = static_cast<double>(encs.size());
  return StudentFeatures{static_cast<double>(success) / n, static_cast<double>(skipped) / n,
                         static_cast<int>(encs.size())};
}

void EventLog::record_attempt(AttemptEvent event) {
  if (event.student_id.empty()) throw LogError(fmt::format("event seq {}: empty student_id", event.seq));
  if (auto last = last_seq(event.student_id); last && event.seq <= *last) {
    throw LogError(fmt::format("student '{}': seq {} does not follow last recorded seq {}",
                               event.student_id, event.seq, *last));
  }
  if (bank_ != nullptr) {
    const Question* q = bank_->find(event.exercise_id);
    if (q == nullptr) {
      throw LogError(fmt::format("event seq {}: unknown exercise '{}'", event.seq, event.exercise_id));
    }
    if (q->topic_id != event.topic_id) {
      throw LogError(fmt::format("event seq {}: exercise '{}' belongs to topic '{}', not '{}'",
                                 event.seq, event.exercise_id, q->topic_id, event.topic_id));
    }
  }
  auto [it, inserted] = by_student_.try_emplace(event.student_id);
  if (inserted) students_.push_back(event.student_id);
  it->second.push_back(events_.size());
  events_.push_back(std::move(event));
}

std::vector<AttemptEvent> EventLog::student_events(std::string_view student_id) const {
  std::vector<AttemptEvent> out;
  auto it = by_student_.find(std::string(student_id));
  if (it == by_student_.end()) return out;
  out.reserve(it->second.size());
  for (auto i : it->second) out.push_back(events_[i]);
  return out;
}

std::optional<std::uint64_t> EventLog::last_seq(std::string_view student_id) const {
  auto it = by_student_.find(std::string(student_id));
  if (it == by_student_.end() || it->second.empty()) return std::nullopt;
  return events_[it->second.back()].seq;
}

std::vector<Encounter> encounters(const EventLog& log, std::string_view student_id) {
  const auto events = log.student_events(student_id);
  return group_encounters(events);
}

StudentFeatures features_at(const EventLog& log, std::string_view student_id,
                            std::string_view topic_id, std::uint64_t before_seq) {
  const auto events = log.student_events(student_id);
  return features_from_events(events, topic_id, before_seq);
}

namespace {

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw LogError(fmt::format("missing field '{}'", name));
  return *it;
}

std::string string_field(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_string()) throw LogError(fmt::format("field '{}' must be a string", name));
  return v.get<std::string>();
}

std::uint64_t seq_field(const json& obj) {
  const json& v = field(obj, "seq");
  if (!v.is_number_unsigned()) throw LogError("field 'seq' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

ordered_json attempt_json(const AttemptEvent& e) {
  ordered_json j;
  j["seq"] = e.seq;
  j["student_id"] = e.student_id;
  j["exercise_id"] = e.exercise_id;
  j["topic_id"] = e.topic_id;
  j["group"] = e.group ? ordered_json(to_string(*e.group)) : ordered_json(nullptr);
  j["shown_level"] = e.shown_level ? to_string(*e.shown_level) : std::string_view("original");
  j["outcome"] = to_string(e.outcome);
  if (e.assigned_level) j["assigned_level"] = to_string(*e.assigned_level);
  if (e.session_id) j["session_id"] = *e.session_id;
  return j;
}

}  // namespace

ordered_json record_to_json(const LogRecord& record) {
  struct Visitor {
    ordered_json operator()(const AttemptEvent& e) const { return attempt_json(e); }
    ordered_json operator()(const SessionOpened& s) const {
      ordered_json j;
      j["kind"] = "session";
      j["seq"] = s.seq;
      j["session_id"] = s.session_id;
      j["student_id"] = s.student_id;
      j["group"] = to_string(s.group);
      return j;
    }
    ordered_json operator()(const ExercisePresented& p) const {
      ordered_json j;
      j["kind"] = "present";
      j["seq"] = p.seq;
      j["session_id"] = p.session_id;
      j["student_id"] = p.student_id;
      j["exercise_id"] = p.exercise_id;
      j["topic_id"] = p.topic_id;
      j["group"] = to_string(p.group);
      j["shown_level"] = to_string(p.shown_level);
      j["assigned_level"] = to_string(p.assigned_level);
      j["probability"] = p.probability;
      return j;
    }
  };
  return std::visit(Visitor{}, record);
}

LogRecord record_from_json(const json& obj) {
  if (!obj.is_object()) throw LogError("record is not an object");
  try {
    const auto kind = obj.find("kind");
    const std::string k = kind == obj.end() ? "attempt" : kind->get<std::string>();
    if (k == "attempt") {
      AttemptEvent e;
      e.seq = seq_field(obj);
      e.student_id = string_field(obj, "student_id");
      e.exercise_id = string_field(obj, "exercise_id");
      e.topic_id = string_field(obj, "topic_id");
      const json& g = field(obj, "group");
      if (!g.is_null()) e.group = parse_group(g.get<std::string>());
      const std::string shown = string_field(obj, "shown_level");
      if (shown != "original") e.shown_level = parse_level(shown);
      e.outcome = parse_outcome(string_field(obj, "outcome"));
      if (obj.contains("assigned_level")) e.assigned_level = parse_level(string_field(obj, "assigned_level"));
      if (obj.contains("session_id")) e.session_id = string_field(obj, "session_id");
      return e;
    }
    if (k == "session") {
      SessionOpened s;
      s.seq = seq_field(obj);
      s.session_id = string_field(obj, "session_id");
      s.student_id = string_field(obj, "student_id");
      s.group = parse_group(string_field(obj, "group"));
      return s;
    }
    if (k == "present") {
      ExercisePresented p;
      p.seq = seq_field(obj);
      p.session_id = string_field(obj, "session_id");
      p.student_id = string_field(obj, "student_id");
      p.exercise_id = string_field(obj, "exercise_id");
      p.topic_id = string_field(obj, "topic_id");
      p.group = parse_group(string_field(obj, "group"));
      p.shown_level = parse_level(string_field(obj, "shown_level"));
      p.assigned_level = parse_level(string_field(obj, "assigned_level"));
      const json& prob = field(obj, "probability");
      if (!prob.is_number()) throw LogError("field 'probability' must be a number");
      p.probability = prob.get<double>();
      return p;
    }
    throw LogError(fmt::format("unknown record kind '{}'", k));
  } catch (const ParseError& e) {
    throw LogError(e.what());
  } catch (const json::exception& e) {
    throw LogError(e.what());
  }
}

std::string record_to_line(const LogRecord& record) { return record_to_json(record).dump(); }

std::vector<LogRecord> read_log_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LogError(fmt::format("cannot open log '{}'", path.string()));
  std::vector<LogRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw LogError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return records;
}

void write_log_records(const std::filesystem::path& path, std::span<const LogRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LogError(fmt::format("cannot write log '{}'", path.string()));
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

void write_log(const std::filesystem::path& path, const EventLog& log) {
  std::vector<LogRecord> records(log.events().begin(), log.events().end());
  write_log_records(path, records);
}

EventLog log_from_records(std::span<const LogRecord> records, const QuestionBank* bank) {
  EventLog log(bank);
  for (const auto& r : records) {
    if (const auto* e = std::get_if<AttemptEvent>(&r)) log.record_attempt(*e);
  }
  return log;
}

EventLog replay_log(const std::filesystem::path& path, const QuestionBank* bank) {
  const auto records = read_log_records(path);
  return log_from_records(records, bank);
}

LogAppender::LogAppender(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw LogError(fmt::format("cannot open log '{}' for append", path.string()));
}

void LogAppender::append(const LogRecord& record) {
  const std::string line = record_to_line(record);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw LogError("log append failed");
}

}  // namespace adaptq
