#include "memstream/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "memstream/errors.hpp"
#include "memstream/prompts.hpp"
#include "memstream/util.hpp"

namespace memstream {

// Ordering

std::string ordering_name(Ordering o) {
  switch (o) {
    case Ordering::Given: return "given";
    case Ordering::EasyToHard: return "easy_to_hard";
    case Ordering::HardToEasy: return "hard_to_easy";
    case Ordering::Shuffled: return "shuffled";
  }
  return "given";
}

Ordering ordering_from_name(std::string_view name) {
  if (name == "given") return Ordering::Given;
  if (name == "easy_to_hard") return Ordering::EasyToHard;
  if (name == "hard_to_easy") return Ordering::HardToEasy;
  if (name == "shuffled") return Ordering::Shuffled;
  throw InvalidInput("unknown ordering: " + std::string(name));
}

std::vector<TaskRecord> build_stream(std::vector<TaskRecord> tasks, Ordering ordering,
                                     std::uint64_t seed) {
  switch (ordering) {
    case Ordering::Given:
      return tasks;
    case Ordering::EasyToHard:
    case Ordering::HardToEasy: {
      for (const auto& t : tasks) {
        if (!t.difficulty) {
          throw InvalidStream("task '" + t.id + "' has no difficulty; sorted orderings need one");
        }
      }
      const bool asc = (ordering == Ordering::EasyToHard);
      std::stable_sort(tasks.begin(), tasks.end(),
                       [asc](const TaskRecord& a, const TaskRecord& b) {
                         return asc ? *a.difficulty < *b.difficulty
                                    : *a.difficulty > *b.difficulty;
                       });
      return tasks;
    }
    case Ordering::Shuffled: {
      // Fisher-Yates with the standard-defined mt19937_64 stream, so the
      // permutation is reproducible across platforms.
      std::mt19937_64 rng(seed);
      for (std::size_t i = tasks.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(tasks[i - 1], tasks[j]);
      }
      return tasks;
    }
  }
  return tasks;
}

std::string agent_mode_name(AgentMode m) {
  switch (m) {
    case AgentMode::Auto: return "auto";
    case AgentMode::MultiTurn: return "multi_turn";
    case AgentMode::SingleTurn: return "single_turn";
  }
  return "auto";
}

AgentMode agent_mode_from_name(std::string_view name) {
  if (name == "auto") return AgentMode::Auto;
  if (name == "multi_turn") return AgentMode::MultiTurn;
  if (name == "single_turn") return AgentMode::SingleTurn;
  throw InvalidInput("unknown agent mode: " + std::string(name));
}

// Result serialization

std::string result_to_line(const TaskResult& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["prediction"] = r.prediction;
  nlohmann::ordered_json fb;
  fb["outcome"] = outcome_word(r.feedback.outcome);
  fb["progress"] = r.feedback.progress;
  if (r.feedback.detail) {
    fb["detail"] = *r.feedback.detail;
  } else {
    fb["detail"] = nullptr;
  }
  j["feedback"] = fb;
  j["steps_taken"] = r.steps_taken;
  j["backend_calls"] = r.backend_calls;
  j["retrieved_ids"] = r.retrieved_ids;
  j["pruned_ids"] = r.pruned_ids;
  j["memory_size_after"] = r.memory_size_after;
  j["wall_time"] = r.wall_time;
  return j.dump();
}

TaskResult result_from_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw InvalidStream(std::string("results line is not valid JSON: ") + e.what());
  }
  TaskResult r;
  try {
    r.task_id = j.at("task_id").get<std::string>();
    r.prediction = j.at("prediction").get<std::string>();
    const auto& fb = j.at("feedback");
    r.feedback.outcome = outcome_from_word(fb.at("outcome").get<std::string>());
    r.feedback.progress = fb.at("progress").get<double>();
    if (!fb.at("detail").is_null()) r.feedback.detail = fb.at("detail").get<std::string>();
    r.steps_taken = j.at("steps_taken").get<int>();
    r.backend_calls = j.at("backend_calls").get<int>();
    r.retrieved_ids = j.at("retrieved_ids").get<std::vector<std::int64_t>>();
    r.pruned_ids = j.at("pruned_ids").get<std::vector<std::int64_t>>();
    r.memory_size_after = j.at("memory_size_after").get<std::size_t>();
    r.wall_time = j.at("wall_time").get<double>();
  } catch (const std::exception& e) {
    throw InvalidStream(std::string("results line is missing fields: ") + e.what());
  }
  return r;
}

std::vector<TaskResult> load_results_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidStream("cannot open results file: " + path.string());
  std::vector<TaskResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    out.push_back(result_from_line(line));
  }
  return out;
}

// run_stream

namespace {

class CountingBackend final : public ModelBackend {
 public:
  explicit CountingBackend(ModelBackend& inner) : inner_(inner) {}
  std::string complete(const std::string& prompt) override {
    ++calls_;
    return inner_.complete(prompt);
  }
  std::string kind() const override { return inner_.kind(); }
  int calls() const { return calls_; }
  void reset() { calls_ = 0; }

 private:
  ModelBackend& inner_;
  int calls_ = 0;
};

PromptMode resolve_mode(AgentMode mode, PolicyTag policy, EnvKind env) {
  if (mode == AgentMode::MultiTurn) return PromptMode::MultiTurn;
  if (mode == AgentMode::SingleTurn) return PromptMode::SingleTurn;
  if (policy == PolicyTag::ReMem) return PromptMode::MultiTurn;
  return env == EnvKind::KeyDoor ? PromptMode::MultiTurn : PromptMode::SingleTurn;
}

std::vector<ScoredEntry> gather_experiences(const StreamSpec& spec,
                                            const MemoryState& state,
                                            std::span<const double> query) {
  std::vector<ScoredEntry> out;
  switch (spec.policy) {
    case PolicyTag::Baseline:
      break;
    case PolicyTag::History:
    case PolicyTag::ExpRecent: {
      std::size_t window = spec.policy == PolicyTag::History
                               ? spec.history_window
                               : static_cast<std::size_t>(spec.retrieval.k);
      for (const auto& e : state.recent_window(window)) {
        out.push_back({e.id, cosine(query, e.embedding)});
      }
      break;
    }
    case PolicyTag::ExpRAG:
    case PolicyTag::ReMem:
      out = top_k(state, query, spec.retrieval);
      break;
  }
  return out;
}

std::vector<std::string> history_lines(
    const std::string& initial,
    const std::vector<std::pair<std::string, std::string>>& transcript) {
  std::vector<std::string> lines;
  lines.reserve(1 + 2 * transcript.size());
  lines.push_back("Observation: " + initial);
  for (const auto& [action, obs] : transcript) {
    lines.push_back("Action: " + action);
    lines.push_back("Observation: " + obs);
  }
  return lines;
}

struct RunDir {
  std::filesystem::path root;
  std::ofstream results;

  explicit operator bool() const { return !root.empty(); }

  void open(const std::filesystem::path& dir, bool append) {
    root = dir;
    std::error_code ec;
    std::filesystem::create_directories(root / "prompts", ec);
    if (ec) throw StreamAbort("cannot create run directory: " + root.string());
    results.open(root / "results.jsonl",
                 std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!results) throw StreamAbort("cannot open results.jsonl for writing");
  }

  void write_result(const TaskResult& r) {
    results << result_to_line(r) << "\n";
    results.flush();
    if (!results) throw StreamAbort("failed writing results.jsonl");
  }

  void write_prompt(std::size_t task_index, std::size_t call_index,
                    const std::string& text) {
    char name[48];
    std::snprintf(name, sizeof(name), "task_%04zu_call_%02zu.txt", task_index, call_index);
    std::ofstream out(root / "prompts" / name, std::ios::binary | std::ios::trunc);
    if (!out) throw StreamAbort("cannot write prompt file");
    out << text;
  }

  void checkpoint(const MemoryState& state, std::size_t tasks_completed,
                  const std::string& backend_state) {
    try {
      save_snapshot(state, root / "memory.snapshot.jsonl");
    } catch (const SnapshotError& e) {
      throw StreamAbort(e.what());
    }
    nlohmann::ordered_json j;
    j["schema"] = "checkpoint.v1";
    j["tasks_completed"] = tasks_completed;
    j["backend_state"] = backend_state;
    std::ofstream out(root / "checkpoint.json", std::ios::binary | std::ios::trunc);
    if (!out) throw StreamAbort("cannot write checkpoint.json");
    out << j.dump(2) << "\n";
  }
};

std::size_t load_checkpoint(const std::filesystem::path& dir, std::string& backend_state) {
  std::ifstream in(dir / "checkpoint.json", std::ios::binary);
  if (!in) throw SnapshotError("no checkpoint to resume from in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
    backend_state = j.at("backend_state").get<std::string>();
    return j.at("tasks_completed").get<std::size_t>();
  } catch (const std::exception& e) {
    throw SnapshotError(std::string("checkpoint.json is corrupt: ") + e.what());
  }
}

/// Keeps the first `count` result lines; used when resuming past a checkpoint.
std::vector<TaskResult> truncate_results(const std::filesystem::path& path,
                                         std::size_t count) {
  std::vector<std::string> lines;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("resume: cannot open results.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (!util::trim(line).empty()) lines.push_back(line);
    }
  }
  if (lines.size() < count) {
    throw SnapshotError("resume: results.jsonl is shorter than the checkpoint");
  }
  lines.resize(count);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    if (!out) throw StreamAbort("resume: failed rewriting results.jsonl");
  }
  std::vector<TaskResult> parsed;
  parsed.reserve(lines.size());
  for (const auto& l : lines) parsed.push_back(result_from_line(l));
  return parsed;
}

}  // namespace

StreamRun run_stream(const StreamSpec& spec) {
  if (!spec.backend) throw InvalidInput("run_stream: no backend");
  if (!spec.embedder) throw InvalidInput("run_stream: no embedder");

  std::vector<TaskRecord> tasks = spec.tasks;
  if (tasks.empty() && !spec.tasks_path.empty()) {
    tasks = load_tasks_jsonl(spec.tasks_path);
  }
  for (const auto& t : tasks) {
    if (t.env == EnvKind::SingleTurnQA && !t.expected) {
      throw InvalidStream("task '" + t.id + "' has no expected answer");
    }
  }
  std::vector<TaskRecord> stream = build_stream(std::move(tasks), spec.ordering,
                                                spec.shuffle_seed);

  StreamRun run;
  run.memory = MemoryState(spec.policy, spec.memory_capacity, spec.ingest_failures);
  CountingBackend backend(*spec.backend);
  const bool deterministic_output = spec.backend->kind() == "scripted";

  std::size_t start = 0;
  RunDir dir;
  if (!spec.output_dir.empty()) {
    if (spec.resume) {
      std::string backend_state;
      start = load_checkpoint(spec.output_dir, backend_state);
      if (start > stream.size()) {
        throw SnapshotError("checkpoint is ahead of the task stream");
      }
      run.memory = load_snapshot(spec.output_dir / "memory.snapshot.jsonl");
      spec.backend->restore_checkpoint_state(backend_state);
      run.results = truncate_results(spec.output_dir / "results.jsonl", start);
      for (std::size_t i = 0; i < start; ++i) {
        run.query_embeddings.push_back(spec.embedder->embed(stream[i].input));
      }
    }
    dir.open(spec.output_dir, /*append=*/spec.resume);
    if (!spec.resume) dir.checkpoint(run.memory, 0, spec.backend->checkpoint_state());
  }

  util::log(util::LogLevel::Info,
            "run " + spec.run_id + ": " + std::to_string(stream.size()) + " tasks, policy " +
                policy_name(spec.policy) + ", ordering " + ordering_name(spec.ordering));

  for (std::size_t t = start; t < stream.size(); ++t) {
    if (spec.stop_after > 0 && t >= spec.stop_after) break;
    const TaskRecord& task = stream[t];
    const std::vector<double> query = spec.embedder->embed(task.input);
    const PromptMode mode = resolve_mode(spec.agent_mode, spec.policy, task.env);

    AgentConfig agent_cfg = spec.agent;
    agent_cfg.mode = mode;
    if (agent_cfg.instructions.empty() && mode == PromptMode::MultiTurn) {
      agent_cfg.instructions =
          task.env == EnvKind::KeyDoor ? keydoor_instructions() : qa_instructions();
    }

    std::vector<ScoredEntry> retrieved = gather_experiences(spec, run.memory, query);

    TaskResult result;
    result.task_id = task.id;
    for (const auto& s : retrieved) result.retrieved_ids.push_back(s.entry_id);

    backend.reset();
    std::vector<std::string> prompts;
    auto started = std::chrono::steady_clock::now();

    try {
      if (task.env == EnvKind::SingleTurnQA) {
        if (spec.policy == PolicyTag::ReMem) {
          StepResult step = run_step(task.input, run.memory, backend, agent_cfg,
                                     retrieved, {});
          result.prediction = step.act_payload;
          result.pruned_ids = step.pruned_entry_ids;
          prompts = std::move(step.prompts);
        } else {
          SynthesisResult syn =
              synthesize_exprag(task.input, retrieved, run.memory, backend, agent_cfg);
          result.prediction = syn.answer;
          prompts.push_back(std::move(syn.prompt));
        }
        result.feedback = grade_single_turn(result.prediction, *task.expected);
      } else {
        std::vector<std::string> actions;
        AgentStepFn agent_fn;
        if (spec.policy == PolicyTag::ReMem) {
          agent_fn = [&](const TaskRecord& tk, const std::string& initial,
                         const std::vector<std::pair<std::string, std::string>>& tr) {
            StepResult step = run_step(tk.input, run.memory, backend, agent_cfg,
                                       retrieved, history_lines(initial, tr));
            for (auto& p : step.prompts) prompts.push_back(std::move(p));
            for (std::int64_t id : step.pruned_entry_ids) result.pruned_ids.push_back(id);
            return step.act_payload;
          };
        } else {
          std::vector<std::pair<int, std::string>> blocks;
          int idx = 1;
          for (const auto& s : retrieved) {
            if (const MemoryEntry* e = run.memory.find(s.entry_id)) {
              blocks.emplace_back(idx++, e->rendered);
            }
          }
          PromptOptions opts{agent_cfg.prompt_budget, agent_cfg.instructions,
                             agent_cfg.demonstrations};
          agent_fn = [&, blocks, opts](const TaskRecord& tk, const std::string& initial,
                                       const std::vector<std::pair<std::string, std::string>>& tr) {
            PromptContext ctx = build_prompt(tk.input, blocks, history_lines(initial, tr),
                                             PromptMode::MultiTurn, opts);
            std::string raw = backend.complete(ctx.rendered);
            prompts.push_back(std::move(ctx.rendered));
            auto op = parse_operation(raw);
            if (op && op->kind == AgentOperation::Kind::Act) return op->text;
            return util::trim(raw);
          };
        }
        EnvOutcome outcome = run_episode(task, agent_fn, spec.env_step_cap);
        for (const auto& [action, _] : outcome.transcript) actions.push_back(action);
        result.prediction = util::join(actions, "; ");
        result.feedback = outcome.feedback;
        result.steps_taken = outcome.steps_taken;
      }
    } catch (const BackendError& e) {
      result.prediction.clear();
      result.feedback = Feedback::ungraded(std::string(e.what()));
    }

    result.backend_calls = backend.calls();
    result.wall_time =
        deterministic_output
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                  .count();

    if (result.feedback.outcome == Outcome::Success) {
      for (std::int64_t id : result.retrieved_ids) {
        if (MemoryEntry* e = run.memory.find(id)) e->utility += 1;
      }
    }
    if (result.feedback.graded()) {
      run.memory.evolve(task.input, result.prediction, result.feedback, query,
                        static_cast<std::int64_t>(t) + 1);
    }
    result.memory_size_after = run.memory.total_count();

    run.results.push_back(result);
    run.query_embeddings.push_back(query);

    if (dir) {
      dir.write_result(result);
      for (std::size_t c = 0; c < prompts.size(); ++c) {
        dir.write_prompt(t + 1, c + 1, prompts[c]);
      }
      if (spec.checkpoint_every > 0 &&
          (t + 1) % static_cast<std::size_t>(spec.checkpoint_every) == 0) {
        dir.checkpoint(run.memory, t + 1, spec.backend->checkpoint_state());
      }
    }
  }

  if (dir) {
    dir.checkpoint(run.memory, run.results.size(), spec.backend->checkpoint_state());
  }
  util::log(util::LogLevel::Info,
            "run " + spec.run_id + ": finished " + std::to_string(run.results.size()) +
                " tasks");
  return run;
}

MemoryState snapshot_roundtrip(const MemoryState& state,
                               const std::filesystem::path& path) {
  save_snapshot(state, path);
  return load_snapshot(path);
}

}  // namespace memstream
