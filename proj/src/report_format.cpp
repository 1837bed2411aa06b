#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "adaptq/analytics.hpp"

namespace adaptq {

using nlohmann::ordered_json;

namespace {

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string csv_number(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

std::string label(ExperimentGroup g) {
  switch (g) {
    case ExperimentGroup::Expected:
      return "Expected";
    case ExperimentGroup::NonExpected:
      return "Non-Expected";
    case ExperimentGroup::Control:
      return "Control";
  }
  return "";
}

std::string cell(const MetricSummary& s) {
  if (std::isnan(s.value)) return "n/a";
  if (std::isnan(s.halfwidth)) return fmt::format("{:.3f}", s.value);
  return fmt::format("{:.3f} ± {:.3f}", s.value, s.halfwidth);
}

}  // namespace

ordered_json report_to_json(const GroupReport& report, const std::optional<SubgroupReport>& subgroup) {
  ordered_json j;
  j["alpha"] = report.alpha;
  ordered_json groups = ordered_json::array();
  for (const auto& g : report.groups) {
    ordered_json row;
    row["group"] = to_string(g.group);
    row["n"] = g.n;
    for (Metric m : kAllMetrics) {
      const auto& s = g.metric(m);
      row[std::string(to_string(m))] = {{"value", number(s.value)}, {"halfwidth", number(s.halfwidth)}, {"n", s.n}};
    }
    groups.push_back(row);
  }
  j["groups"] = groups;
  ordered_json tests = ordered_json::array();
  for (const auto& t : report.tests) {
    ordered_json row;
    row["metric"] = to_string(t.metric);
    row["arm_a"] = to_string(t.arm_a);
    row["arm_b"] = to_string(t.arm_b);
    row["t"] = number(t.result.t_statistic);
    row["df"] = t.result.degrees_of_freedom;
    row["p"] = t.result.p_value;
    row["significant"] = t.result.significant;
    row["degenerate"] = t.result.degenerate;
    tests.push_back(row);
  }
  j["tests"] = tests;
  if (subgroup) {
    ordered_json sg;
    sg["level"] = to_string(subgroup->level);
    sg["arm_a"] = to_string(subgroup->arm_a);
    sg["arm_b"] = to_string(subgroup->arm_b);
    ordered_json metrics = ordered_json::array();
    for (const auto& m : subgroup->metrics) {
      ordered_json row;
      row["metric"] = to_string(m.metric);
      row["value_a"] = number(m.value_a);
      row["value_b"] = number(m.value_b);
      row["n_a"] = m.n_a;
      row["n_b"] = m.n_b;
      row["relative_reduction"] = m.relative_reduction ? number(*m.relative_reduction) : ordered_json(nullptr);
      row["p"] = m.test ? ordered_json(m.test->p_value) : ordered_json(nullptr);
      row["significant"] = m.test ? m.test->significant : false;
      metrics.push_back(row);
    }
    sg["metrics"] = metrics;
    j["subgroup"] = sg;
  }
  return j;
}

std::string report_to_csv(const GroupReport& report, const std::optional<SubgroupReport>& subgroup) {
  std::ostringstream out;
  out << "group,metric,value,halfwidth,n\n";
  for (const auto& g : report.groups) {
    for (Metric m : kAllMetrics) {
      const auto& s = g.metric(m);
      out << fmt::format("{},{},{},{},{}\n", to_string(g.group), to_string(m), csv_number(s.value),
                         csv_number(s.halfwidth), s.n);
    }
  }
  out << "\nmetric,arm_a,arm_b,t,df,p,significant\n";
  for (const auto& t : report.tests) {
    out << fmt::format("{},{},{},{},{},{},{}\n", to_string(t.metric), to_string(t.arm_a), to_string(t.arm_b),
                       csv_number(t.result.t_statistic), t.result.degrees_of_freedom, t.result.p_value,
                       t.result.significant ? "true" : "false");
  }
  if (subgroup) {
    out << "\nsubgroup_level,metric,arm_a,arm_b,value_a,value_b,n_a,n_b,relative_reduction\n";
    for (const auto& m : subgroup->metrics) {
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(subgroup->level), to_string(m.metric),
                         to_string(subgroup->arm_a), to_string(subgroup->arm_b), csv_number(m.value_a),
                         csv_number(m.value_b), m.n_a, m.n_b,
                         m.relative_reduction ? csv_number(*m.relative_reduction) : std::string());
    }
  }
  return out.str();
}

std::string report_to_table(const GroupReport& report, const std::optional<SubgroupReport>& subgroup) {
  std::ostringstream out;
  const auto star = [&](Metric m) {
    const auto* t = report.find_test(m, ExperimentGroup::Expected, ExperimentGroup::NonExpected);
    return t != nullptr && t->result.significant ? "*" : "";
  };
  out << fmt::format("{:<16} | {:<22} | {:<22} | {:<22} | {}\n", "Experiment Group",
                     fmt::format("Solution Acceptance{}", star(Metric::SolutionAcceptance)),
                     fmt::format("Ultimate Failure Rate{}", star(Metric::UltimateFailure)),
                     fmt::format("Skip Rate{}", star(Metric::SkipRate)), "n");
  out << std::string(100, '-') << '\n';
  for (const auto& g : report.groups) {
    out << fmt::format("{:<16} | {:<22} | {:<22} | {:<22} | {}\n", label(g.group), cell(g.solution_acceptance),
                       cell(g.ultimate_failure_rate), cell(g.skip_rate), g.n);
  }
  out << fmt::format("\n* Expected vs Non-Expected significant at alpha = {}\n\nPairwise Student's t-tests\n",
                     report.alpha);
  for (const auto& t : report.tests) {
    out << fmt::format("  {:<22} {:>12} vs {:<12} t = {:>9.4f}  df = {:>5}  p = {:.6f}{}\n", to_string(t.metric),
                       to_string(t.arm_a), to_string(t.arm_b), t.result.t_statistic, t.result.degrees_of_freedom,
                       t.result.p_value, t.result.significant ? "  *" : "");
  }
  if (subgroup) {
    out << fmt::format("\nSubgroup: {}-assigned encounters, {} vs {}\n", to_string(subgroup->level),
                       to_string(subgroup->arm_a), to_string(subgroup->arm_b));
    for (const auto& m : subgroup->metrics) {
      out << fmt::format("  {:<22} {:.3f} vs {:.3f}  (n = {} / {})  relative reduction {}\n", to_string(m.metric),
                         m.value_a, m.value_b, m.n_a, m.n_b,
                         m.relative_reduction ? fmt::format("{:.1f}%", 100.0 * *m.relative_reduction)
                                              : std::string("undefined"));
    }
  }
  return out.str();
}

}  // namespace adaptq
