#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memstream/backend.hpp"
#include "memstream/memory.hpp"
#include "memstream/prompts.hpp"
#include "memstream/retrieval.hpp"

namespace memstream {

// Operations

struct AgentOperation {
  enum class Kind { Think, Prune, Act };
  Kind kind = Kind::Think;
  std::string text;                // Think reasoning / Act payload
  std::vector<int> prune_indices;  // ascending, unique, 1-based display indices
};

/// Canonical single-line rendering ("Think: ...", "Think-Prune: 1,3",
/// "Action: ...") used when operations are appended to the history section.
std::string operation_line(const AgentOperation& op);

/// Parses one model output. The first matching prefix on the first non-empty
/// line wins, case-insensitively: "Think-Prune:" (IDs as comma lists and dash
/// ranges), then "Think:", then "Action:". The payload is the remainder of
/// that line, trimmed. Returns nullopt for malformed output (no prefix, or an
/// unparsable/empty/zero index list); the caller re-prompts once and then
/// forces an Act.
std::optional<AgentOperation> parse_operation(std::string_view raw);

// Step state

/// Working state for one task step. Display index i refers to
/// working_set[i-1]; renumbering after prunes is positional, so indices are
/// always contiguous 1..m.
struct AgentStepState {
  std::string task_input;
  std::vector<std::int64_t> working_set;
  std::vector<AgentOperation> trace;
  int ops_used = 0;
  int max_ops = 6;
};

struct AgentConfig {
  int max_ops = 6;
  std::size_t prompt_budget = 8000;
  PromptMode mode = PromptMode::MultiTurn;
  int prune_deactivate_threshold = -2;
  std::string instructions;
  std::string demonstrations;
};

/// Removes the given display indices from the working set, renumbers the
/// survivors contiguously, and charges one utility point per pruned entry;
/// entries at or below the deactivation threshold are deactivated in `state`.
/// Out-of-range or empty indices return false and change nothing.
bool apply_prune(AgentStepState& step, MemoryState& state,
                 const std::vector<int>& indices, int deactivate_threshold);

// Step loop

struct StepResult {
  std::string act_payload;
  std::vector<AgentOperation> trace;    // every operation, ending in one Act
  std::vector<std::string> prompts;     // one rendered prompt per backend call
  int backend_calls = 0;
  int malformed_count = 0;
  std::vector<std::int64_t> pruned_entry_ids;
};

/// Runs the operation loop for one step: build prompt (working set plus the
/// step trace appended to the history section), call the backend, parse,
/// apply; repeats until an Act or until cfg.max_ops operations, at which
/// point the final raw output is coerced to an Act. One malformed output per
/// step earns a re-prompt with the same prompt; the next malformed output is
/// coerced to an Act carrying the raw text. Backend calls never exceed
/// max_ops + 1. Deterministic for a deterministic backend. BackendError
/// propagates.
StepResult run_step(const std::string& task_input, MemoryState& state,
                    ModelBackend& backend, const AgentConfig& cfg,
                    const std::vector<ScoredEntry>& retrieved,
                    const std::vector<std::string>& history);

// One-shot synthesis

struct SynthesisResult {
  std::string answer;      // text after "Final Answer:", or the whole output
  std::string prompt;
  std::string completion;
};

/// Single-call synthesis over retrieved experiences (the ExpRAG path; also
/// used for recency policies and the no-memory baseline, which pass their own
/// entry lists). Exactly one backend call; memory is not modified.
SynthesisResult synthesize_exprag(const std::string& task_input,
                                  const std::vector<ScoredEntry>& retrieved,
                                  const MemoryState& state, ModelBackend& backend,
                                  const AgentConfig& cfg);

}  // namespace memstream
