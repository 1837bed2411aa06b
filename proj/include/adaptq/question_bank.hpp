#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/types.hpp"

namespace adaptq {

/// Raised for any invalid bank or ratings content. `question_id` and `field`
/// locate the offending record; either may be empty for file-level problems.
class BankError : public std::runtime_error {
 public:
  BankError(std::string question_id, std::string field, const std::string& detail);

  const std::string& question_id() const { return question_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string question_id_;
  std::string field_;
};

/// Number of maximal runs of non-whitespace characters. Throws
/// std::invalid_argument on empty or whitespace-only text.
int word_count(std::string_view text);

struct QuestionVariant {
  Level level = Level::Intermediate;
  std::string text;
  int word_count = 0;
};

struct Question {
  std::string id;
  std::string topic_id;
  std::vector<std::string> accepted_answers;
  std::array<QuestionVariant, 3> variants;  // indexed by Level
  Level original_level = Level::Intermediate;

  const QuestionVariant& variant(Level level) const { return variants[index_of(level)]; }
};

/// Immutable, id-keyed collection of questions. Iteration follows file order.
class QuestionBank {
 public:
  QuestionBank() = default;
  explicit QuestionBank(std::vector<Question> questions);

  const std::vector<Question>& questions() const { return questions_; }
  std::size_t size() const { return questions_.size(); }
  bool empty() const { return questions_.empty(); }

  const Question* find(std::string_view id) const;
  const Question& at(std::string_view id) const;

  /// Distinct topic ids in order of first appearance.
  const std::vector<std::string>& topics() const { return topics_; }

 private:
  std::vector<Question> questions_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> topics_;
};

QuestionBank parse_bank(const nlohmann::json& doc);
QuestionBank load_bank(const std::filesystem::path& path);
nlohmann::json bank_to_json(const QuestionBank& bank);
void save_bank(const QuestionBank& bank, const std::filesystem::path& path);

struct VariantRating {
  std::string question_id;
  Level level = Level::Beginner;
  std::string rater_id;
  double difficulty = 0.0;
  double fluency = 0.0;
  double meaning_preservation = 0.0;
};

std::vector<VariantRating> parse_ratings(const nlohmann::json& doc);
std::vector<VariantRating> load_ratings(const std::filesystem::path& path);

struct LevelRatingSummary {
  Level level = Level::Beginner;
  std::size_t n_ratings = 0;
  double difficulty = 0.0;
  double fluency = 0.0;
  double meaning_preservation = 0.0;
  double word_count = 0.0;  // over distinct rated questions at this level
};

/// Per-level means. Throws BankError when a level has no ratings or a rating
/// references a question missing from `bank`.
std::array<LevelRatingSummary, 3> rating_summary(const std::vector<VariantRating>& ratings,
                                                 const QuestionBank& bank);

/// Expert means and word counts reported for the original authored variants.
/// Used only as an ordering reference, never as a target to reproduce.
struct ReportedLevelMeans {
  double difficulty;
  double fluency;
  double meaning_preservation;
  double word_count;
};
inline constexpr std::array<ReportedLevelMeans, 3> kReportedLevelMeans = {{
    {1.689, 4.600, 4.789, 39.800},
    {2.667, 4.683, 4.839, 33.533},
    {3.939, 4.544, 4.717, 27.433},
}};

/// Checks that beginner phrasings are longer than advanced ones per question
/// and that mean rated difficulty strictly increases with level.
std::vector<std::string> validate_bank_fixture(const QuestionBank& bank,
                                               const std::vector<VariantRating>& ratings);

}  // namespace adaptq
