#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/question_bank.hpp"
#include "adaptq/types.hpp"

namespace adaptq {

/// Population distribution of predicted success probabilities. Tables read
/// back from disk carry only the thresholds; sorted_predictions is empty.
struct PercentileTable {
  std::vector<double> sorted_predictions;
  double p33 = 0.0;
  double p66 = 0.0;
  std::size_t n = 0;
  std::string source_model_hash;
};

/// 1-indexed nearest rank ceil(percent * n / 100), computed in integers.
std::size_t nearest_rank(std::size_t percent, std::size_t n);

/// Throws std::invalid_argument on an empty list or values outside [0,1].
PercentileTable build_percentile_table(std::span<const double> predictions);

/// Half-open buckets: [0, p33) beginner, [p33, p66) intermediate, [p66, 1] advanced.
Level assign_level(const PercentileTable& table, double probability);

struct SelectedVariant {
  Level shown_level;
  std::string text;
};

/// Expected shows the assigned level, NonExpected one of the other two levels
/// (uniform, seeded by rng_seed/student/exercise), Control the original level.
SelectedVariant select_variant(const Question& question, Level assigned, ExperimentGroup group,
                               std::uint64_t rng_seed, std::string_view student_id);

struct ArmSplit {
  double expected = 0.40;
  double non_expected = 0.30;
  double control = 0.30;
};

void validate_split(const ArmSplit& split);

/// Stable hash of (seed, student_id) mapped onto the split proportions.
ExperimentGroup assign_group(std::string_view student_id, const ArmSplit& split, std::uint64_t seed);

nlohmann::ordered_json table_to_json(const PercentileTable& table);
PercentileTable table_from_json(const nlohmann::json& doc);
void save_table(const PercentileTable& table, const std::filesystem::path& path);
PercentileTable load_table(const std::filesystem::path& path);

}  // namespace adaptq
