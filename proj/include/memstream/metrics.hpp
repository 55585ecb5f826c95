#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "memstream/harness.hpp"

namespace memstream {

struct PruningStats {
  long long pruned = 0;
  long long retained = 0;  // retrieved entries that survived the step
  double rate = 0.0;       // pruned / max(1, pruned + retained)
};

struct RobustnessReport {
  std::vector<std::pair<std::string, double>> orderings;  // name, metric value
  double spread = 0.0;                                    // max - min
};

struct RunReport {
  std::string run_id;
  std::size_t n_tasks = 0;
  std::size_t graded = 0;
  double accuracy = 0.0;       // graded single-turn tasks only
  double success_rate = 0.0;   // S over graded tasks
  double progress_rate = 0.0;  // P, mean per-task progress over graded tasks
  double avg_steps = 0.0;      // over multi-turn attempts (steps_taken > 0)
  // (t, running mean of the success indicator over graded tasks through t);
  // t is the 1-based stream position of each graded task.
  std::vector<std::pair<int, double>> cumulative_curve;
  std::vector<std::pair<int, double>> rolling_curve;  // same t axis, windowed
  PruningStats pruning;
  double similarity_profile = 0.0;  // 0 when no query embeddings were given
  RobustnessReport robustness;      // filled by robustness_spread
};

/// Aggregates one run. S and P average over graded tasks; accuracy averages
/// over graded single-turn tasks; avg_steps averages steps_taken over every
/// task that took environment steps, graded or not. The curves track the
/// success indicator over graded tasks: a running mean and a rolling mean
/// (window clamped to at least 1). Throws EmptyReport when no task is graded.
RunReport compute_report(const std::string& run_id,
                         const std::vector<TaskResult>& results,
                         const std::vector<std::vector<double>>& query_embeddings = {},
                         int rolling_window = 10);

enum class ReportMetric { SuccessRate, ProgressRate, Accuracy, AvgSteps };

std::string report_metric_name(ReportMetric m);
ReportMetric report_metric_from_name(std::string_view name);
double report_metric_value(const RunReport& r, ReportMetric m);

/// Spread (max - min) of one metric across runs of the same tasks under
/// different orderings. Needs at least two reports (InvalidInput).
RobustnessReport robustness_spread(
    const std::vector<std::pair<std::string, RunReport>>& reports, ReportMetric m);

/// Pearson correlation coefficient. Lengths must match and be at least 2
/// (InvalidInput); zero variance on either side → UndefinedCorrelation.
double correlate(const std::vector<double>& x, const std::vector<double>& y);

/// report.json: the full RunReport. report.csv: `type,t,value` rows, curve
/// points first, then `summary,<metric>,<value>` rows.
void write_report_json(const RunReport& r, const std::filesystem::path& path);
void write_report_csv(const RunReport& r, const std::filesystem::path& path);

}  // namespace memstream
