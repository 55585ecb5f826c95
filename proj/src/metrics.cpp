#include "memstream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "memstream/errors.hpp"
#include "memstream/retrieval.hpp"

namespace memstream {

RunReport compute_report(const std::string& run_id,
                         const std::vector<TaskResult>& results,
                         const std::vector<std::vector<double>>& query_embeddings,
                         int rolling_window) {
  RunReport r;
  r.run_id = run_id;
  r.n_tasks = results.size();

  std::vector<std::pair<int, double>> graded_indicators;  // (t, success 0/1)
  std::size_t successes = 0;
  double progress_sum = 0.0;
  std::size_t st_graded = 0, st_correct = 0;
  long long steps_sum = 0;
  std::size_t steps_n = 0;

  for (std::size_t i = 0; i < results.size(); ++i) {
    const TaskResult& t = results[i];
    if (t.steps_taken > 0) {
      steps_sum += t.steps_taken;
      ++steps_n;
    }
    r.pruning.pruned += static_cast<long long>(t.pruned_ids.size());
    r.pruning.retained += static_cast<long long>(t.retrieved_ids.size()) -
                          static_cast<long long>(t.pruned_ids.size());
    if (!t.feedback.graded()) continue;
    const bool ok = t.feedback.outcome == Outcome::Success;
    graded_indicators.emplace_back(static_cast<int>(i) + 1, ok ? 1.0 : 0.0);
    successes += ok ? 1 : 0;
    progress_sum += t.feedback.progress;
    if (t.steps_taken == 0) {
      ++st_graded;
      st_correct += ok ? 1 : 0;
    }
  }

  r.graded = graded_indicators.size();
  if (r.graded == 0) throw EmptyReport("no graded tasks in run " + run_id);

  r.success_rate = static_cast<double>(successes) / static_cast<double>(r.graded);
  r.progress_rate = progress_sum / static_cast<double>(r.graded);
  r.accuracy = st_graded == 0
                   ? 0.0
                   : static_cast<double>(st_correct) / static_cast<double>(st_graded);
  r.avg_steps =
      steps_n == 0 ? 0.0 : static_cast<double>(steps_sum) / static_cast<double>(steps_n);

  const std::size_t window =
      static_cast<std::size_t>(std::max(1, rolling_window));
  double running = 0.0;
  for (std::size_t j = 0; j < graded_indicators.size(); ++j) {
    running += graded_indicators[j].second;
    r.cumulative_curve.emplace_back(graded_indicators[j].first,
                                    running / static_cast<double>(j + 1));
    const std::size_t lo = j + 1 > window ? j + 1 - window : 0;
    double acc = 0.0;
    for (std::size_t k = lo; k <= j; ++k) acc += graded_indicators[k].second;
    r.rolling_curve.emplace_back(graded_indicators[j].first,
                                 acc / static_cast<double>(j + 1 - lo));
  }

  r.pruning.rate = static_cast<double>(r.pruning.pruned) /
                   static_cast<double>(std::max(1LL, r.pruning.pruned + r.pruning.retained));

  if (!query_embeddings.empty()) {
    r.similarity_profile = task_similarity_profile(query_embeddings);
  }
  return r;
}

std::string report_metric_name(ReportMetric m) {
  switch (m) {
    case ReportMetric::SuccessRate: return "success_rate";
    case ReportMetric::ProgressRate: return "progress_rate";
    case ReportMetric::Accuracy: return "accuracy";
    case ReportMetric::AvgSteps: return "avg_steps";
  }
  return "success_rate";
}

ReportMetric report_metric_from_name(std::string_view name) {
  if (name == "success_rate") return ReportMetric::SuccessRate;
  if (name == "progress_rate") return ReportMetric::ProgressRate;
  if (name == "accuracy") return ReportMetric::Accuracy;
  if (name == "avg_steps") return ReportMetric::AvgSteps;
  throw InvalidInput("unknown report metric: " + std::string(name));
}

double report_metric_value(const RunReport& r, ReportMetric m) {
  switch (m) {
    case ReportMetric::SuccessRate: return r.success_rate;
    case ReportMetric::ProgressRate: return r.progress_rate;
    case ReportMetric::Accuracy: return r.accuracy;
    case ReportMetric::AvgSteps: return r.avg_steps;
  }
  return r.success_rate;
}

RobustnessReport robustness_spread(
    const std::vector<std::pair<std::string, RunReport>>& reports, ReportMetric m) {
  if (reports.size() < 2) {
    throw InvalidInput("robustness_spread needs at least two reports");
  }
  RobustnessReport out;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double v = report_metric_value(reports[i].second, m);
    out.orderings.emplace_back(reports[i].first, v);
    lo = i == 0 ? v : std::min(lo, v);
    hi = i == 0 ? v : std::max(hi, v);
  }
  out.spread = hi - lo;
  return out;
}

double correlate(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("correlate needs two equally sized lists of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelation("zero variance in correlate input");
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

nlohmann::ordered_json curve_json(const std::vector<std::pair<int, double>>& curve) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [t, v] : curve) arr.push_back(nlohmann::ordered_json::array({t, v}));
  return arr;
}

}  // namespace

void write_report_json(const RunReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["n_tasks"] = r.n_tasks;
  j["graded"] = r.graded;
  j["accuracy"] = r.accuracy;
  j["success_rate"] = r.success_rate;
  j["progress_rate"] = r.progress_rate;
  j["avg_steps"] = r.avg_steps;
  j["pruning"] = {{"pruned", r.pruning.pruned},
                  {"retained", r.pruning.retained},
                  {"rate", r.pruning.rate}};
  j["similarity_profile"] = r.similarity_profile;
  j["cumulative_curve"] = curve_json(r.cumulative_curve);
  j["rolling_curve"] = curve_json(r.rolling_curve);
  nlohmann::ordered_json orderings = nlohmann::ordered_json::array();
  for (const auto& [name, v] : r.robustness.orderings) {
    orderings.push_back(nlohmann::ordered_json::array({name, v}));
  }
  j["robustness"] = {{"orderings", orderings}, {"spread", r.robustness.spread}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StreamAbort("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_report_csv(const RunReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StreamAbort("cannot write " + path.string());
  out << "type,t,value\n";
  auto num = [](double v) {
    nlohmann::json j = v;
    return j.dump();
  };
  for (const auto& [t, v] : r.cumulative_curve) {
    out << "cumulative," << t << "," << num(v) << "\n";
  }
  for (const auto& [t, v] : r.rolling_curve) {
    out << "rolling," << t << "," << num(v) << "\n";
  }
  out << "summary,n_tasks," << r.n_tasks << "\n";
  out << "summary,graded," << r.graded << "\n";
  out << "summary,accuracy," << num(r.accuracy) << "\n";
  out << "summary,success_rate," << num(r.success_rate) << "\n";
  out << "summary,progress_rate," << num(r.progress_rate) << "\n";
  out << "summary,avg_steps," << num(r.avg_steps) << "\n";
  out << "summary,pruning_rate," << num(r.pruning.rate) << "\n";
  out << "summary,similarity_profile," << num(r.similarity_profile) << "\n";
  if (!out) throw StreamAbort("failed writing " + path.string());
}

}  // namespace memstream
