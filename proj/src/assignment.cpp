#include "adaptq/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "adaptq/random.hpp"

namespace adaptq {

std::size_t nearest_rank(std::size_t percent, std::size_t n) {
  return std::max<std::size_t>(1, (percent * n + 99) / 100);
}

PercentileTable build_percentile_table(std::span<const double> predictions) {
  if (predictions.empty()) throw std::invalid_argument("percentile table: no predictions");
  for (double p : predictions) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(fmt::format("percentile table: prediction {} outside [0,1]", p));
    }
  }
  PercentileTable t;
  t.sorted_predictions.assign(predictions.begin(), predictions.end());
  std::sort(t.sorted_predictions.begin(), t.sorted_predictions.end());
  t.n = t.sorted_predictions.size();
  t.p33 = t.sorted_predictions[nearest_rank(33, t.n) - 1];
  t.p66 = t.sorted_predictions[nearest_rank(66, t.n) - 1];
  return t;
}

Level assign_level(const PercentileTable& table, double probability) {
  if (probability < table.p33) return Level::Beginner;
  if (probability < table.p66) return Level::Intermediate;
  return Level::Advanced;
}

SelectedVariant select_variant(const Question& question, Level assigned, ExperimentGroup group,
                               std::uint64_t rng_seed, std::string_view student_id) {
  Level shown = assigned;
  switch (group) {
    case ExperimentGroup::Expected:
      break;
    case ExperimentGroup::NonExpected: {
      Rng rng(mix_seed(mix_seed(rng_seed, student_id), question.id));
      std::array<Level, 2> others{};
      std::size_t k = 0;
      for (Level l : kAllLevels) {
        if (l != assigned) others[k++] = l;
      }
      shown = others[rng.below(2)];
      break;
    }
    case ExperimentGroup::Control:
      shown = question.original_level;
      break;
  }
  return {shown, question.variant(shown).text};
}

void validate_split(const ArmSplit& split) {
  const bool nonneg = split.expected >= 0 && split.non_expected >= 0 && split.control >= 0;
  const double total = split.expected + split.non_expected + split.control;
  if (!nonneg || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(fmt::format("arm split ({}, {}, {}) must be non-negative and sum to 1",
                                            split.expected, split.non_expected, split.control));
  }
}

ExperimentGroup assign_group(std::string_view student_id, const ArmSplit& split, std::uint64_t seed) {
  validate_split(split);
  const double u = static_cast<double>(mix_seed(mix_seed(seed, "arm"), student_id) >> 11) * 0x1.0p-53;
  if (u < split.expected) return ExperimentGroup::Expected;
  if (u < split.expected + split.non_expected) return ExperimentGroup::NonExpected;
  if (split.control == 0.0) {
    return split.non_expected > 0 ? ExperimentGroup::NonExpected : ExperimentGroup::Expected;
  }
  return ExperimentGroup::Control;
}

nlohmann::ordered_json table_to_json(const PercentileTable& table) {
  nlohmann::ordered_json j;
  j["p33"] = table.p33;
  j["p66"] = table.p66;
  j["n"] = table.n;
  j["source_model_hash"] = table.source_model_hash;
  return j;
}

PercentileTable table_from_json(const nlohmann::json& doc) {
  try {
    PercentileTable t;
    t.p33 = doc.at("p33").get<double>();
    t.p66 = doc.at("p66").get<double>();
    t.n = doc.at("n").get<std::size_t>();
    t.source_model_hash = doc.value("source_model_hash", std::string{});
    if (!(t.p33 <= t.p66) || t.p33 < 0 || t.p66 > 1) {
      throw std::invalid_argument("percentile table thresholds must satisfy 0 <= p33 <= p66 <= 1");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed percentile table: {}", e.what()));
  }
}

void save_table(const PercentileTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << table_to_json(table).dump(2) << '\n';
}

PercentileTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open percentile table '{}'", path.string()));
  try {
    return table_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace adaptq
