#include "adaptq/types.hpp"

#include <fmt/format.h>

namespace adaptq {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Beginner:
      return "beginner";
    case Level::Intermediate:
      return "intermediate";
    case Level::Advanced:
      return "advanced";
  }
  return "beginner";
}

std::string_view to_string(ExperimentGroup group) {
  switch (group) {
    case ExperimentGroup::Expected:
      return "expected";
    case ExperimentGroup::NonExpected:
      return "non_expected";
    case ExperimentGroup::Control:
      return "control";
  }
  return "expected";
}

std::string_view to_string(AttemptOutcome outcome) {
  switch (outcome) {
    case AttemptOutcome::Accepted:
      return "accepted";
    case AttemptOutcome::Rejected:
      return "rejected";
    case AttemptOutcome::Skipped:
      return "skipped";
  }
  return "rejected";
}

Level parse_level(std::string_view text) {
  for (Level level : kAllLevels) {
    if (text == to_string(level)) return level;
  }
  throw ParseError(fmt::format("unknown level '{}'", text));
}

ExperimentGroup parse_group(std::string_view text) {
  for (ExperimentGroup group : kAllGroups) {
    if (text == to_string(group)) return group;
  }
  throw ParseError(fmt::format("unknown experiment group '{}'", text));
}

AttemptOutcome parse_outcome(std::string_view text) {
  for (auto outcome : {AttemptOutcome::Accepted, AttemptOutcome::Rejected, AttemptOutcome::Skipped}) {
    if (text == to_string(outcome)) return outcome;
  }
  throw ParseError(fmt::format("unknown attempt outcome '{}'", text));
}

}  // namespace adaptq
