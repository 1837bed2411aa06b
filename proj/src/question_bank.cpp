#include "adaptq/question_bank.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace adaptq {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BankError("", "", fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw BankError("", "", fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string require_string(const json& obj, const char* field, const std::string& qid) {
  auto it = obj.find(field);
  if (it == obj.end()) throw BankError(qid, field, "missing field");
  if (!it->is_string()) throw BankError(qid, field, "expected a string");
  return it->get<std::string>();
}

double require_score(const json& obj, const char* field, const std::string& qid) {
  auto it = obj.find(field);
  if (it == obj.end()) throw BankError(qid, field, "missing field");
  if (!it->is_number()) throw BankError(qid, field, "expected a number");
  const double v = it->get<double>();
  if (!(v >= 0.0 && v <= 5.0)) throw BankError(qid, field, fmt::format("score {} outside [0,5]", v));
  return v;
}

Question parse_question(const json& obj, std::size_t position) {
  if (!obj.is_object()) {
    throw BankError("", "questions", fmt::format("entry {} is not an object", position));
  }
  Question q;
  q.id = require_string(obj, "id", fmt::format("#{}", position));
  if (q.id.empty()) throw BankError(fmt::format("#{}", position), "id", "empty id");
  q.topic_id = require_string(obj, "topic_id", q.id);
  if (q.topic_id.empty()) throw BankError(q.id, "topic_id", "empty topic id");

  auto answers = obj.find("accepted_answers");
  if (answers == obj.end()) throw BankError(q.id, "accepted_answers", "missing field");
  if (!answers->is_array()) throw BankError(q.id, "accepted_answers", "expected an array");
  for (const auto& a : *answers) {
    if (!a.is_string() || is_blank(a.get<std::string>())) {
      throw BankError(q.id, "accepted_answers", "answers must be non-empty strings");
    }
    q.accepted_answers.push_back(a.get<std::string>());
  }
  if (q.accepted_answers.empty()) throw BankError(q.id, "accepted_answers", "no accepted answers");

  const std::string original = require_string(obj, "original_level", q.id);
  try {
    q.original_level = parse_level(original);
  } catch (const ParseError& e) {
    throw BankError(q.id, "original_level", e.what());
  }
  if (q.original_level == Level::Beginner) {
    throw BankError(q.id, "original_level", "original variant must be intermediate or advanced");
  }

  auto variants = obj.find("variants");
  if (variants == obj.end()) throw BankError(q.id, "variants", "missing field");
  if (!variants->is_object()) throw BankError(q.id, "variants", "expected an object");
  for (const auto& [key, value] : variants->items()) {
    try {
      (void)parse_level(key);
    } catch (const ParseError&) {
      throw BankError(q.id, "variants." + key, "unknown level");
    }
  }
  for (Level level : kAllLevels) {
    const std::string field = fmt::format("variants.{}", to_string(level));
    auto it = variants->find(std::string(to_string(level)));
    if (it == variants->end()) throw BankError(q.id, field, "missing variant level");
    if (!it->is_string()) throw BankError(q.id, field, "expected a string");
    auto& v = q.variants[index_of(level)];
    v.level = level;
    v.text = it->get<std::string>();
    if (is_blank(v.text)) throw BankError(q.id, field, "variant text is empty");
    v.word_count = word_count(v.text);
  }
  return q;
}

}  // namespace

BankError::BankError(std::string question_id, std::string field, const std::string& detail)
    : std::runtime_error(question_id.empty() && field.empty()
                             ? detail
                             : fmt::format("question '{}' field '{}': {}", question_id, field, detail)),
      question_id_(std::move(question_id)),
      field_(std::move(field)) {}

int word_count(std::string_view text) {
  int count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  if (count == 0) throw std::invalid_argument("word_count: text is empty or whitespace-only");
  return count;
}

QuestionBank::QuestionBank(std::vector<Question> questions) : questions_(std::move(questions)) {
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& q = questions_[i];
    if (!index_.emplace(q.id, i).second) throw BankError(q.id, "id", "duplicate question id");
    if (std::find(topics_.begin(), topics_.end(), q.topic_id) == topics_.end()) {
      topics_.push_back(q.topic_id);
    }
  }
}

const Question* QuestionBank::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &questions_[it->second];
}

const Question& QuestionBank::at(std::string_view id) const {
  const Question* q = find(id);
  if (q == nullptr) throw BankError(std::string(id), "id", "unknown question");
  return *q;
}

QuestionBank parse_bank(const json& doc) {
  if (!doc.is_object()) throw BankError("", "", "bank document must be an object");
  auto it = doc.find("questions");
  if (it == doc.end() || !it->is_array()) {
    throw BankError("", "questions", "bank must have a 'questions' array");
  }
  std::vector<Question> questions;
  questions.reserve(it->size());
  for (std::size_t i = 0; i < it->size(); ++i) questions.push_back(parse_question((*it)[i], i));
  return QuestionBank(std::move(questions));
}

QuestionBank load_bank(const std::filesystem::path& path) { return parse_bank(read_json_file(path)); }

json bank_to_json(const QuestionBank& bank) {
  json questions = json::array();
  for (const auto& q : bank.questions()) {
    json variants = json::object();
    for (const auto& v : q.variants) variants[std::string(to_string(v.level))] = v.text;
    questions.push_back({{"id", q.id},
                         {"topic_id", q.topic_id},
                         {"accepted_answers", q.accepted_answers},
                         {"original_level", to_string(q.original_level)},
                         {"variants", variants}});
  }
  return json{{"questions", questions}};
}

void save_bank(const QuestionBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw BankError("", "", fmt::format("cannot write '{}'", path.string()));
  out << bank_to_json(bank).dump(2) << '\n';
}

std::vector<VariantRating> parse_ratings(const json& doc) {
  if (!doc.is_array()) throw BankError("", "", "ratings document must be an array");
  std::vector<VariantRating> ratings;
  for (const auto& obj : doc) {
    if (!obj.is_object()) throw BankError("", "", "rating entry is not an object");
    VariantRating r;
    r.question_id = require_string(obj, "question_id", "");
    try {
      r.level = parse_level(require_string(obj, "level", r.question_id));
    } catch (const ParseError& e) {
      throw BankError(r.question_id, "level", e.what());
    }
    r.rater_id = require_string(obj, "rater_id", r.question_id);
    r.difficulty = require_score(obj, "difficulty", r.question_id);
    r.fluency = require_score(obj, "fluency", r.question_id);
    r.meaning_preservation = require_score(obj, "meaning_preservation", r.question_id);
    ratings.push_back(std::move(r));
  }
  return ratings;
}

std::vector<VariantRating> load_ratings(const std::filesystem::path& path) {
  return parse_ratings(read_json_file(path));
}

std::array<LevelRatingSummary, 3> rating_summary(const std::vector<VariantRating>& ratings,
                                                 const QuestionBank& bank) {
  std::array<LevelRatingSummary, 3> out{};
  std::array<std::set<std::string>, 3> rated;
  for (const auto& r : ratings) {
    (void)bank.at(r.question_id);
    auto& s = out[index_of(r.level)];
    ++s.n_ratings;
    s.difficulty += r.difficulty;
    s.fluency += r.fluency;
    s.meaning_preservation += r.meaning_preservation;
    rated[index_of(r.level)].insert(r.question_id);
  }
  for (Level level : kAllLevels) {
    auto& s = out[index_of(level)];
    s.level = level;
    if (s.n_ratings == 0) {
      throw BankError("", "level", fmt::format("no ratings for level {}", to_string(level)));
    }
    const auto n = static_cast<double>(s.n_ratings);
    s.difficulty /= n;
    s.fluency /= n;
    s.meaning_preservation /= n;
    double words = 0.0;
    for (const auto& id : rated[index_of(level)]) words += bank.at(id).variant(level).word_count;
    s.word_count = words / static_cast<double>(rated[index_of(level)].size());
  }
  return out;
}

std::vector<std::string> validate_bank_fixture(const QuestionBank& bank,
                                               const std::vector<VariantRating>& ratings) {
  std::vector<std::string> warnings;
  for (const auto& q : bank.questions()) {
    const int beginner = q.variant(Level::Beginner).word_count;
    const int advanced = q.variant(Level::Advanced).word_count;
    if (beginner <= advanced) {
      warnings.push_back(fmt::format(
          "question '{}': beginner variant ({} words) is not longer than advanced variant ({} words)",
          q.id, beginner, advanced));
    }
  }
  if (ratings.empty()) return warnings;

  std::array<double, 3> sum{};
  std::array<std::size_t, 3> count{};
  for (const auto& r : ratings) {
    if (bank.find(r.question_id) == nullptr) {
      warnings.push_back(fmt::format("rating by '{}' references unknown question '{}'", r.rater_id,
                                     r.question_id));
      continue;
    }
    sum[index_of(r.level)] += r.difficulty;
    ++count[index_of(r.level)];
  }
  std::array<std::optional<double>, 3> mean;
  for (Level level : kAllLevels) {
    const auto i = index_of(level);
    if (count[i] == 0) {
      warnings.push_back(fmt::format("no difficulty ratings for level {}", to_string(level)));
    } else {
      mean[i] = sum[i] / static_cast<double>(count[i]);
    }
  }
  for (std::size_t i = 0; i + 1 < mean.size(); ++i) {
    if (mean[i] && mean[i + 1] && !(*mean[i] < *mean[i + 1])) {
      warnings.push_back(fmt::format("mean difficulty does not increase from {} ({:.3f}) to {} ({:.3f})",
                                     to_string(kAllLevels[i]), *mean[i], to_string(kAllLevels[i + 1]),
                                     *mean[i + 1]));
    }
  }
  return warnings;
}

}  // namespace adaptq
