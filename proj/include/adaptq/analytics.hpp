#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptq/history.hpp"
#include "adaptq/stats.hpp"

namespace adaptq {

class AnalyticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Metric { SolutionAcceptance = 0, UltimateFailure = 1, SkipRate = 2 };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::SolutionAcceptance,
                                                      Metric::UltimateFailure, Metric::SkipRate};

std::string_view to_string(Metric metric);

/// Accepted attempts over non-skip attempts; empty when every attempt was a skip.
std::optional<double> solution_acceptance(std::span<const AttemptEvent> student_events);
/// Encounters whose attempts were all rejected, over all encounters.
double ultimate_failure_rate(std::span<const Encounter> student_encounters);
double skip_rate(std::span<const Encounter> student_encounters);
double success_fraction(std::span<const Encounter> student_encounters);

struct EncounterCounts {
  std::size_t success = 0;
  std::size_t failure = 0;
  std::size_t skipped = 0;
  std::size_t total() const { return success + failure + skipped; }
};

EncounterCounts count_encounters(std::span<const Encounter> student_encounters);

/// Per-student outcome values. A student that appears under several arms is
/// one unit per arm.
struct StudentMetrics {
  std::string student_id;
  ExperimentGroup group = ExperimentGroup::Expected;
  std::optional<double> solution_acceptance;
  double ultimate_failure_rate = 0.0;
  double skip_rate = 0.0;
  double success_fraction = 0.0;
  EncounterCounts counts;
};

/// Metrics over experiment events only (events with a group). When
/// `restrict_to` is set, only encounters assigned that level count.
std::vector<StudentMetrics> student_metrics(const EventLog& log,
                                            std::optional<Level> restrict_to = std::nullopt);

struct MetricSummary {
  double value = 0.0;      // arm mean of per-student values (NaN when n == 0)
  double halfwidth = 0.0;  // 1.96 * sample stdev / sqrt(n) (NaN when n < 2)
  std::size_t n = 0;
};

struct GroupMetrics {
  ExperimentGroup group = ExperimentGroup::Expected;
  std::size_t n = 0;  // students in arm
  MetricSummary solution_acceptance;
  MetricSummary ultimate_failure_rate;
  MetricSummary skip_rate;

  const MetricSummary& metric(Metric m) const;
};

struct PairwiseTest {
  Metric metric;
  ExperimentGroup arm_a;
  ExperimentGroup arm_b;
  TTestResult result;
};

struct GroupReport {
  double alpha = 0.05;
  std::array<GroupMetrics, 3> groups;  // indexed by ExperimentGroup
  std::vector<PairwiseTest> tests;

  const GroupMetrics& group(ExperimentGroup g) const { return groups[index_of(g)]; }
  const PairwiseTest* find_test(Metric metric, ExperimentGroup a, ExperimentGroup b) const;
};

inline constexpr std::array<std::pair<ExperimentGroup, ExperimentGroup>, 3> kArmPairs = {{
    {ExperimentGroup::Expected, ExperimentGroup::NonExpected},
    {ExperimentGroup::Expected, ExperimentGroup::Control},
    {ExperimentGroup::NonExpected, ExperimentGroup::Control},
}};

struct GroupReportOptions {
  /// When false, arms with fewer than two students are summarized but left out
  /// of pairwise tests instead of raising an error.
  bool require_all_arms = true;
};

GroupReport group_report(const EventLog& log, double alpha = 0.05, GroupReportOptions options = {});
GroupReport group_report(std::span<const StudentMetrics> students, double alpha,
                         GroupReportOptions options = {});

struct SubgroupMetric {
  Metric metric;
  double value_a = 0.0;
  double value_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  /// (value_b - value_a) / value_b; empty when value_b is zero.
  std::optional<double> relative_reduction;
  std::optional<TTestResult> test;
};

struct SubgroupReport {
  Level level = Level::Beginner;
  ExperimentGroup arm_a = ExperimentGroup::Expected;
  ExperimentGroup arm_b = ExperimentGroup::Control;
  std::array<SubgroupMetric, 3> metrics;

  const SubgroupMetric& metric(Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

double relative_reduction(double value_a, double value_b);

/// Compares two arms over encounters whose assigned level equals `level`.
/// Throws AnalyticsError when either arm has no such students.
SubgroupReport subgroup_report(const EventLog& log, Level level,
                               std::pair<ExperimentGroup, ExperimentGroup> arms = {ExperimentGroup::Expected,
                                                                                   ExperimentGroup::Control},
                               double alpha = 0.05);

// Report rendering.
nlohmann::ordered_json report_to_json(const GroupReport& report,
                                      const std::optional<SubgroupReport>& subgroup = std::nullopt);
std::string report_to_csv(const GroupReport& report,
                          const std::optional<SubgroupReport>& subgroup = std::nullopt);
std::string report_to_table(const GroupReport& report,
                            const std::optional<SubgroupReport>& subgroup = std::nullopt);

}  // namespace adaptq
