#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adaptq {

/// Difficulty level of a question phrasing. Ordered Beginner < Intermediate < Advanced.
enum class Level { Beginner = 0, Intermediate = 1, Advanced = 2 };

inline constexpr std::array<Level, 3> kAllLevels = {Level::Beginner, Level::Intermediate,
                                                    Level::Advanced};

enum class ExperimentGroup { Expected = 0, NonExpected = 1, Control = 2 };

inline constexpr std::array<ExperimentGroup, 3> kAllGroups = {
    ExperimentGroup::Expected, ExperimentGroup::NonExpected, ExperimentGroup::Control};

enum class AttemptOutcome { Accepted, Rejected, Skipped };

/// Raised when a textual enum value cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::size_t index_of(Level level) { return static_cast<std::size_t>(level); }
constexpr std::size_t index_of(ExperimentGroup group) { return static_cast<std::size_t>(group); }

std::string_view to_string(Level level);
std::string_view to_string(ExperimentGroup group);
std::string_view to_string(AttemptOutcome outcome);

Level parse_level(std::string_view text);
ExperimentGroup parse_group(std::string_view text);
AttemptOutcome parse_outcome(std::string_view text);

}  // namespace adaptq
