// Operator CLI: run task streams, compare runs, recompute reports, and poke
// at memory snapshots. Exit codes: 0 done, 2 validation problem, 3 aborted
// stream. The summary line format is load-bearing for scripts; see README.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "memstream/config.hpp"
#include "memstream/errors.hpp"
#include "memstream/metrics.hpp"
#include "memstream/util.hpp"

namespace fs = std::filesystem;
using namespace memstream;

namespace {

std::string summary_line(const std::string& run_id, double s, double p, double steps) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s S=%.4f P=%.4f steps=%.2f", run_id.c_str(), s, p,
                steps);
  return buf;
}

int code_for(const Error& e) {
  if (dynamic_cast<const StreamAbort*>(&e)) return 3;
  return 2;
}

struct RunFlags {
  std::vector<std::string> sets;
  std::string output_dir;
  std::string ordering;
  std::string policy;
  std::string log_level;
  long long seed = -1;
  long long stop_after = -1;
  bool resume = false;
};

std::vector<std::string> flag_overrides(const RunFlags& f) {
  std::vector<std::string> o = f.sets;
  if (!f.output_dir.empty()) o.push_back("output_dir=" + f.output_dir);
  if (!f.ordering.empty()) o.push_back("ordering=" + f.ordering);
  if (!f.policy.empty()) o.push_back("policy=" + f.policy);
  if (!f.log_level.empty()) o.push_back("log_level=" + f.log_level);
  if (f.seed >= 0) o.push_back("shuffle_seed=" + std::to_string(f.seed));
  if (f.stop_after >= 0) o.push_back("stop_after=" + std::to_string(f.stop_after));
  if (f.resume) o.push_back("resume=true");
  return o;
}

/// Runs one config end to end; returns the exit code and fills `line`.
int run_one(const std::string& config_path, const std::vector<std::string>& overrides,
            std::string& line) {
  try {
    CliConfig cfg = load_config(config_path, overrides);
    util::set_log_level(util::log_level_from_name(cfg.log_level));
    StreamSpec& spec = cfg.spec;

    // Load tasks before touching the output directory, so a bad tasks file
    // leaves no run directory behind.
    spec.tasks = load_tasks_jsonl(spec.tasks_path);

    if (!spec.output_dir.empty()) {
      if (!spec.resume && fs::exists(spec.output_dir / "results.jsonl")) {
        throw ConfigError("run directory already has results (use --resume): " +
                          spec.output_dir.string());
      }
      std::error_code ec;
      fs::create_directories(spec.output_dir, ec);
      if (ec) throw ConfigError("cannot create output_dir: " + spec.output_dir.string());
      std::ofstream out(spec.output_dir / "config.resolved.json",
                        std::ios::binary | std::ios::trunc);
      if (!out) throw ConfigError("cannot write config.resolved.json");
      out << config_to_json(cfg).dump(2) << "\n";
    }

    StreamRun run = run_stream(spec);

    double s = 0.0, p = 0.0, steps = 0.0;
    try {
      RunReport report =
          compute_report(spec.run_id, run.results, run.query_embeddings);
      s = report.success_rate;
      p = report.progress_rate;
      steps = report.avg_steps;
      if (!spec.output_dir.empty()) {
        write_report_json(report, spec.output_dir / "report.json");
        write_report_csv(report, spec.output_dir / "report.csv");
      }
    } catch (const EmptyReport&) {
      // Nothing graded (empty stream or a dead backend); the run itself
      // still completed.
    }
    line = summary_line(spec.run_id, s, p, steps);
    return 0;
  } catch (const Error& e) {
    line = std::string("error: ") + e.what();
    return code_for(e);
  }
}

int cmd_run(const std::vector<std::string>& configs, const RunFlags& flags,
            int parallel) {
  const auto overrides = flag_overrides(flags);
  std::vector<std::string> lines(configs.size());
  std::vector<int> codes(configs.size(), 0);

  if (parallel <= 1 || configs.size() <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      codes[i] = run_one(configs[i], overrides, lines[i]);
    }
  } else {
    std::vector<std::thread> pool;
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= configs.size()) return;
          i = next++;
        }
        codes[i] = run_one(configs[i], overrides, lines[i]);
      }
    };
    const int n = std::min<int>(parallel, static_cast<int>(configs.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int code = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::FILE* out = codes[i] == 0 ? stdout : stderr;
    std::fprintf(out, "%s\n", lines[i].c_str());
    code = std::max(code, codes[i]);
  }
  return code;
}

RunReport report_for_dir(const fs::path& dir) {
  std::string run_id = dir.filename().string();
  if (run_id.empty()) run_id = dir.parent_path().filename().string();
  const fs::path resolved = dir / "config.resolved.json";
  if (fs::exists(resolved)) {
    std::ifstream in(resolved, std::ios::binary);
    nlohmann::json j;
    try {
      in >> j;
      if (j.contains("run_id")) run_id = j.at("run_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      // keep the directory name
    }
  }
  return compute_report(run_id, load_results_jsonl(dir / "results.jsonl"));
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
  if (dirs.size() < 2) {
    std::fprintf(stderr, "error: compare needs at least two run directories\n");
    return 2;
  }
  std::vector<RunReport> reports;
  try {
    for (const auto& d : dirs) reports.push_back(report_for_dir(d));
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  std::sort(reports.begin(), reports.end(),
            [](const RunReport& a, const RunReport& b) { return a.run_id < b.run_id; });

  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.run_id.size());
  std::printf("%-*s  %8s  %8s  %8s  %9s  %7s\n", static_cast<int>(width), "run_id", "S",
              "P", "acc", "avg_steps", "tasks");
  std::ofstream csv(out_path, std::ios::binary | std::ios::trunc);
  if (!csv) {
    std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
    return 2;
  }
  csv << "run_id,success_rate,progress_rate,accuracy,avg_steps,n_tasks\n";
  for (const auto& r : reports) {
    std::printf("%-*s  %8.4f  %8.4f  %8.4f  %9.2f  %7zu\n", static_cast<int>(width),
                r.run_id.c_str(), r.success_rate, r.progress_rate, r.accuracy,
                r.avg_steps, r.n_tasks);
    char row[256];
    std::snprintf(row, sizeof(row), "%s,%.6f,%.6f,%.6f,%.6f,%zu\n", r.run_id.c_str(),
                  r.success_rate, r.progress_rate, r.accuracy, r.avg_steps, r.n_tasks);
    csv << row;
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  try {
    RunReport r = report_for_dir(dir);
    write_report_json(r, fs::path(dir) / "report.json");
    write_report_csv(r, fs::path(dir) / "report.csv");
    std::printf("%s\n",
                summary_line(r.run_id, r.success_rate, r.progress_rate, r.avg_steps)
                    .c_str());
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return code_for(e);
  }
}

int cmd_snapshot_inspect(const std::string& path, const std::string& query, int k,
                         std::size_t dimension, double min_score, bool has_min,
                         bool exclude_failures) {
  try {
    MemoryState state = load_snapshot(path);
    HashEmbedder embedder(dimension);
    RetrievalConfig cfg;
    cfg.k = k;
    cfg.exclude_failures = exclude_failures;
    if (has_min) cfg.min_score = min_score;
    const auto scored = top_k(state, embedder.embed(query), cfg);
    std::printf("%zu entries, %zu active; top %zu for \"%s\"\n", state.total_count(),
                state.active_count(), scored.size(), query.c_str());
    for (const auto& s : scored) {
      const MemoryEntry* e = state.find(s.entry_id);
      const auto first_line = util::split_lines(e->rendered);
      std::printf("id=%lld score=%.6f utility=%d %s\n",
                  static_cast<long long>(s.entry_id), s.score, e->utility,
                  first_line.empty() ? "" : first_line.front().c_str());
    }
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memstream: streaming-task experience memory harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute one or more stream configs");
  std::vector<std::string> run_configs;
  RunFlags flags;
  int parallel = 1;
  run->add_option("configs", run_configs, "JSON config file(s)")->required();
  run->add_option("--set", flags.sets, "override a config key (dotted path, key=value)");
  run->add_option("--output-dir", flags.output_dir, "override output_dir");
  run->add_option("--ordering", flags.ordering,
                  "override ordering (given|easy_to_hard|hard_to_easy|shuffled)");
  run->add_option("--policy", flags.policy,
                  "override policy (baseline|history|exprecent|exprag|remem)");
  run->add_option("--seed", flags.seed, "override shuffle_seed");
  run->add_option("--stop-after", flags.stop_after, "stop after N tasks");
  run->add_option("--log-level", flags.log_level, "debug|info|warn|error");
  run->add_flag("--resume", flags.resume, "continue from the last checkpoint");
  run->add_option("--parallel", parallel, "worker threads across configs")
      ->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand("compare", "tabulate two or more finished runs");
  std::vector<std::string> compare_dirs;
  std::string compare_out = "compare.csv";
  compare->add_option("dirs", compare_dirs, "run directories");
  compare->add_option("--out", compare_out, "CSV destination");

  auto* report = app.add_subcommand("report", "recompute report.json/csv for a run");
  std::string report_dir;
  report->add_option("dir", report_dir, "run directory")->required();

  auto* inspect = app.add_subcommand("snapshot-inspect",
                                     "query a memory snapshot with the hash embedder");
  std::string snap_path, snap_query;
  int snap_k = 4;
  std::size_t snap_dim = 64;
  double snap_min = 0.0;
  bool snap_exclude = false;
  inspect->add_option("snapshot", snap_path, "memory.snapshot.jsonl path")->required();
  inspect->add_option("--query", snap_query, "query text")->required();
  inspect->add_option("--k", snap_k, "results to show");
  inspect->add_option("--dimension", snap_dim, "hash embedder dimension");
  auto* min_opt = inspect->add_option("--min-score", snap_min, "score floor");
  inspect->add_flag("--exclude-failures", snap_exclude, "skip Failure entries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run->parsed()) return cmd_run(run_configs, flags, parallel);
  if (compare->parsed()) return cmd_compare(compare_dirs, compare_out);
  if (report->parsed()) return cmd_report(report_dir);
  return cmd_snapshot_inspect(snap_path, snap_query, snap_k, snap_dim, snap_min,
                              min_opt->count() > 0, snap_exclude);
}
