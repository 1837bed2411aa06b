#include "adaptq/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include <fmt/format.h>

namespace adaptq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ95 = 1.96;

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.n = values.size();
  s.value = values.empty() ? kNaN : mean(values);
  s.halfwidth = values.size() < 2 ? kNaN
                                  : kZ95 * sample_stddev(values) / std::sqrt(static_cast<double>(values.size()));
  return s;
}

std::vector<double> metric_values(std::span<const StudentMetrics> students, ExperimentGroup group,
                                  Metric metric) {
  std::vector<double> out;
  for (const auto& s : students) {
    if (s.group != group) continue;
    switch (metric) {
      case Metric::SolutionAcceptance:
        if (s.solution_acceptance) out.push_back(*s.solution_acceptance);
        break;
      case Metric::UltimateFailure:
        out.push_back(s.ultimate_failure_rate);
        break;
      case Metric::SkipRate:
        out.push_back(s.skip_rate);
        break;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::SolutionAcceptance:
      return "solution_acceptance";
    case Metric::UltimateFailure:
      return "ultimate_failure_rate";
    case Metric::SkipRate:
      return "skip_rate";
  }
  return "solution_acceptance";
}

std::optional<double> solution_acceptance(std::span<const AttemptEvent> student_events) {
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  for (const auto& e : student_events) {
    if (e.outcome == AttemptOutcome::Skipped) continue;
    ++attempts;
    accepted += e.outcome == AttemptOutcome::Accepted ? 1 : 0;
  }
  if (attempts == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(attempts);
}

EncounterCounts count_encounters(std::span<const Encounter> student_encounters) {
  EncounterCounts c;
  for (const auto& enc : student_encounters) {
    switch (enc.classification()) {
      case EncounterClass::Success:
        ++c.success;
        break;
      case EncounterClass::Failure:
        ++c.failure;
        break;
      case EncounterClass::Skipped:
        ++c.skipped;
        break;
    }
  }
  return c;
}

namespace {

EncounterCounts require_counts(std::span<const Encounter> encs) {
  if (encs.empty()) throw AnalyticsError("rate over zero encounters");
  return count_encounters(encs);
}

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double ultimate_failure_rate(std::span<const Encounter> encs) {
  const auto c = require_counts(encs);
  return ratio(c.failure, c.total());
}

double skip_rate(std::span<const Encounter> encs) {
  const auto c = require_counts(encs);
  return ratio(c.skipped, c.total());
}

double success_fraction(std::span<const Encounter> encs) {
  const auto c = require_counts(encs);
  return ratio(c.success, c.total());
}

std::vector<StudentMetrics> student_metrics(const EventLog& log, std::optional<Level> restrict_to) {
  std::vector<StudentMetrics> out;
  for (const auto& student : log.students()) {
    const auto events = log.student_events(student);
    std::map<ExperimentGroup, std::vector<AttemptEvent>> by_group;
    for (const auto& e : events) {
      if (e.group) by_group[*e.group].push_back(e);
    }
    for (auto& [group, group_events] : by_group) {
      auto encs = group_encounters(group_events);
      if (restrict_to) {
        std::erase_if(encs, [&](const Encounter& enc) { return enc.attempts.front().assigned_level != restrict_to; });
      }
      if (encs.empty()) continue;
      std::vector<AttemptEvent> attempts;
      for (const auto& enc : encs) attempts.insert(attempts.end(), enc.attempts.begin(), enc.attempts.end());

      StudentMetrics m;
      m.student_id = student;
      m.group = group;
      m.counts = count_encounters(encs);
      m.solution_acceptance = solution_acceptance(attempts);
      m.ultimate_failure_rate = ratio(m.counts.failure, m.counts.total());
      m.skip_rate = ratio(m.counts.skipped, m.counts.total());
      m.success_fraction = ratio(m.counts.success, m.counts.total());
      out.push_back(std::move(m));
    }
  }
  std::sort(out.begin(), out.end(), [](const StudentMetrics& a, const StudentMetrics& b) {
    return std::tie(a.student_id, a.group) < std::tie(b.student_id, b.group);
  });
  return out;
}

const MetricSummary& GroupMetrics::metric(Metric m) const {
  switch (m) {
    case Metric::SolutionAcceptance:
      return solution_acceptance;
    case Metric::UltimateFailure:
      return ultimate_failure_rate;
    case Metric::SkipRate:
      return skip_rate;
  }
  return solution_acceptance;
}

const PairwiseTest* GroupReport::find_test(Metric metric, ExperimentGroup a, ExperimentGroup b) const {
  for (const auto& t : tests) {
    if (t.metric == metric && t.arm_a == a && t.arm_b == b) return &t;
  }
  return nullptr;
}

GroupReport group_report(std::span<const StudentMetrics> students, double alpha,
                         GroupReportOptions options) {
  if (!(alpha > 0 && alpha < 1)) throw AnalyticsError(fmt::format("alpha {} outside (0,1)", alpha));
  GroupReport report;
  report.alpha = alpha;
  for (ExperimentGroup g : kAllGroups) {
    auto& gm = report.groups[index_of(g)];
    gm.group = g;
    gm.n = static_cast<std::size_t>(
        std::count_if(students.begin(), students.end(), [g](const StudentMetrics& s) { return s.group == g; }));
    if (options.require_all_arms && gm.n < 2) {
      throw AnalyticsError(fmt::format("arm '{}' has {} student(s); at least 2 are required", to_string(g), gm.n));
    }
    gm.solution_acceptance = summarize(metric_values(students, g, Metric::SolutionAcceptance));
    gm.ultimate_failure_rate = summarize(metric_values(students, g, Metric::UltimateFailure));
    gm.skip_rate = summarize(metric_values(students, g, Metric::SkipRate));
  }
  for (Metric metric : kAllMetrics) {
    for (const auto& [a, b] : kArmPairs) {
      const auto va = metric_values(students, a, metric);
      const auto vb = metric_values(students, b, metric);
      if (va.size() < 2 || vb.size() < 2) {
        if (options.require_all_arms) {
          throw AnalyticsError(fmt::format("metric '{}': too few values to compare '{}' and '{}'",
                                           to_string(metric), to_string(a), to_string(b)));
        }
        continue;
      }
      report.tests.push_back(PairwiseTest{metric, a, b, two_sample_t_test(va, vb, alpha)});
    }
  }
  return report;
}

GroupReport group_report(const EventLog& log, double alpha, GroupReportOptions options) {
  const auto students = student_metrics(log);
  return group_report(students, alpha, options);
}

double relative_reduction(double value_a, double value_b) {
  if (value_b == 0.0) throw AnalyticsError("relative reduction: reference metric is zero");
  return (value_b - value_a) / value_b;
}

SubgroupReport subgroup_report(const EventLog& log, Level level,
                               std::pair<ExperimentGroup, ExperimentGroup> arms, double alpha) {
  const auto students = student_metrics(log, level);
  SubgroupReport out;
  out.level = level;
  out.arm_a = arms.first;
  out.arm_b = arms.second;
  for (ExperimentGroup g : {arms.first, arms.second}) {
    const bool any = std::any_of(students.begin(), students.end(), [g](const auto& s) { return s.group == g; });
    if (!any) {
      throw AnalyticsError(fmt::format("no '{}' students in the {} subgroup", to_string(g), to_string(level)));
    }
  }
  for (Metric metric : kAllMetrics) {
    auto& sm = out.metrics[static_cast<std::size_t>(metric)];
    sm.metric = metric;
    const auto va = metric_values(students, arms.first, metric);
    const auto vb = metric_values(students, arms.second, metric);
    sm.n_a = va.size();
    sm.n_b = vb.size();
    sm.value_a = va.empty() ? kNaN : mean(va);
    sm.value_b = vb.empty() ? kNaN : mean(vb);
    if (!va.empty() && !vb.empty() && sm.value_b != 0.0) sm.relative_reduction = relative_reduction(sm.value_a, sm.value_b);
    if (va.size() >= 2 && vb.size() >= 2) sm.test = two_sample_t_test(va, vb, alpha);
  }
  return out;
}

}  // namespace adaptq
