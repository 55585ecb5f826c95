#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace memstream {

enum class PromptMode { MultiTurn, SingleTurn };

struct PromptOptions {
  std::size_t budget = 8000;    // max rendered characters
  std::string instructions;     // ENVIRONMENT INSTRUCTIONS body (multi-turn)
  std::string demonstrations;   // EXAMPLE DEMONSTRATIONS body (multi-turn)
};

struct PromptContext {
  std::vector<std::pair<std::string, std::string>> sections;  // name, body
  std::string rendered;
};

/// Renders the fixed prompt template for the given mode.
///
/// MultiTurn sections, in order: ENVIRONMENT INSTRUCTIONS, EXAMPLE
/// DEMONSTRATIONS, RELEVANT EXPERIENCE FROM SIMILAR TASKS, YOUR CURRENT TASK,
/// RECENT HISTORY, OUTPUT FORMAT (the Think-Prune / Think / Action grammar).
/// SingleTurn renders the memory-augmented QA template ending in the
/// Rationale / Final Answer format block.
///
/// `experiences` are (display index, rendered experience) pairs shown as
/// "[Experience #i]" blocks; an empty list renders "(none)". When the
/// rendered text exceeds opts.budget, section bodies are cut in the order
/// demonstrations, experiences (from the end, so later blocks go first),
/// history, instructions; the task and output-format sections are never cut.
PromptContext build_prompt(const std::string& task_input,
                           const std::vector<std::pair<int, std::string>>& experiences,
                           const std::vector<std::string>& history,
                           PromptMode mode, const PromptOptions& opts);

/// Default ENVIRONMENT INSTRUCTIONS bodies used by the harness.
std::string keydoor_instructions();
std::string qa_instructions();

}  // namespace memstream
