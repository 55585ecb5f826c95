#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memstream/agent.hpp"
#include "memstream/backend.hpp"
#include "memstream/embedder.hpp"
#include "memstream/environments.hpp"
#include "memstream/memory.hpp"
#include "memstream/retrieval.hpp"
#include "memstream/snapshot.hpp"

namespace memstream {

enum class Ordering { Given, EasyToHard, HardToEasy, Shuffled };

std::string ordering_name(Ordering o);
Ordering ordering_from_name(std::string_view name);

/// Reorders a task list. EasyToHard/HardToEasy are stable sorts on difficulty
/// (ties keep file order) and require every task to carry a difficulty
/// (InvalidStream otherwise). Shuffled applies a seeded Fisher-Yates pass and
/// is reproducible for a fixed seed.
std::vector<TaskRecord> build_stream(std::vector<TaskRecord> tasks, Ordering ordering,
                                     std::uint64_t seed = 0);

/// "auto" resolves per task: ReMem always runs the operation-grammar
/// (multi-turn) template; other policies use SingleTurn for QA tasks and
/// MultiTurn for KeyDoor episodes.
enum class AgentMode { Auto, MultiTurn, SingleTurn };

std::string agent_mode_name(AgentMode m);
AgentMode agent_mode_from_name(std::string_view name);

struct StreamSpec {
  std::string run_id = "run";
  std::filesystem::path tasks_path;   // used when tasks is empty
  std::vector<TaskRecord> tasks;
  Ordering ordering = Ordering::Given;
  std::uint64_t shuffle_seed = 0;
  PolicyTag policy = PolicyTag::Baseline;
  RetrievalConfig retrieval;
  AgentConfig agent;
  AgentMode agent_mode = AgentMode::Auto;
  std::optional<std::size_t> memory_capacity;
  bool ingest_failures = false;
  std::size_t history_window = 5;     // History policy's recency window
  int env_step_cap = 30;
  int checkpoint_every = 10;
  std::size_t stop_after = 0;         // 0 = run the whole stream
  bool resume = false;
  std::filesystem::path output_dir;   // empty = keep everything in memory
  std::shared_ptr<ModelBackend> backend;
  std::shared_ptr<const Embedder> embedder;
};

struct TaskResult {
  std::string task_id;
  std::string prediction;
  Feedback feedback;
  int steps_taken = 0;       // environment steps; 0 for single-turn tasks
  int backend_calls = 0;
  std::vector<std::int64_t> retrieved_ids;
  std::vector<std::int64_t> pruned_ids;
  std::size_t memory_size_after = 0;  // total stored entries (active + inactive)
  double wall_time = 0.0;             // 0.0 under scripted backends
};

std::string result_to_line(const TaskResult& r);
TaskResult result_from_line(const std::string& line);
std::vector<TaskResult> load_results_jsonl(const std::filesystem::path& path);

struct StreamRun {
  std::vector<TaskResult> results;
  MemoryState memory;
  std::vector<std::vector<double>> query_embeddings;  // one per result
};

/// Runs the stream: for each task, embed the input, read memory per policy
/// (Baseline none, History/ExpRecent a recency window, ExpRAG/ReMem top-k),
/// synthesize (one-shot or the ReMem operation loop / episode), grade, then
/// evolve memory with the graded attempt. Expected answers never reach any
/// prompt. With an output_dir set, results.jsonl is appended per task,
/// rendered prompts land under prompts/, and a memory snapshot plus
/// checkpoint metadata are flushed every checkpoint_every tasks (and at the
/// end). A task-level BackendError records Ungraded and the stream continues.
/// spec.resume continues from the last checkpoint; with a scripted backend
/// the resumed results.jsonl is byte-identical to an uninterrupted run.
StreamRun run_stream(const StreamSpec& spec);

/// Saves then reloads a state; the reloaded state serializes byte-identically.
MemoryState snapshot_roundtrip(const MemoryState& state,
                               const std::filesystem::path& path);

}  // namespace memstream
