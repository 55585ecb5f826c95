#include "memstream/prompts.hpp"

#include <algorithm>
#include <span>

#include "memstream/errors.hpp"

namespace memstream {

namespace {

constexpr const char* kSeparator = "==================================================";

constexpr const char* kOutputFormat =
    "You MUST respond in EXACTLY ONE of these formats:\n"
    "\n"
    "Format 1 - Prune experiences:\n"
    "Think-Prune: <IDs>\n"
    "Remove unhelpful experiences from 'RELEVANT EXPERIENCE' section (e.g., \"1,3\" or \"2-4\")\n"
    "\n"
    "Format 2 - Internal reasoning:\n"
    "Think: <your reasoning>\n"
    "Free-form explanation of your next step\n"
    "\n"
    "Format 3 - Execute action:\n"
    "Action: <exact command>\n"
    "Must be valid command from ENVIRONMENT INSTRUCTIONS with exact names from RECENT HISTORY";

constexpr const char* kSingleTurnPreamble =
    "You are a helpful assistant with access to LOCAL EXPERIENCE MEMORY. "
    "Each memory may contain past experience, rationales, domains, and skills. "
    "Below are some retrieved LOCAL EXPERIENCE MEMORIES:";

constexpr const char* kSingleTurnFormat =
    "Provide your output in the following format:\n"
    "- Rationale: your short reasoning, may cite memory if useful\n"
    "- Final Answer: your final answer";

std::string experiences_body(
    const std::vector<std::pair<int, std::string>>& experiences) {
  if (experiences.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < experiences.size(); ++i) {
    if (i) out += "\n\n";
    out += "[Experience #" + std::to_string(experiences[i].first) + "]\n";
    out += experiences[i].second;
  }
  return out;
}

std::string or_none(const std::string& body) { return body.empty() ? "(none)" : body; }

std::string render_multi_turn(const std::vector<std::pair<std::string, std::string>>& sections) {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) out += "\n\n";
    out += kSeparator;
    out += "\n";
    out += sections[i].first;
    out += "\n";
    out += kSeparator;
    out += "\n";
    out += sections[i].second;
  }
  return out;
}

std::string render_single_turn(const std::vector<std::pair<std::string, std::string>>& sections) {
  // sections: preamble, experiences, task, output-format
  std::string out;
  out += sections[0].second;
  out += "\n\n";
  out += sections[1].second;
  out += "\n\nNow solve the following problem.\n\n";
  out += sections[2].second;
  out += "\n\n";
  out += sections[3].second;
  return out;
}

std::string render(PromptMode mode,
                   const std::vector<std::pair<std::string, std::string>>& sections) {
  return mode == PromptMode::MultiTurn ? render_multi_turn(sections)
                                       : render_single_turn(sections);
}

}  // namespace

PromptContext build_prompt(const std::string& task_input,
                           const std::vector<std::pair<int, std::string>>& experiences,
                           const std::vector<std::string>& history,
                           PromptMode mode, const PromptOptions& opts) {
  if (task_input.empty()) throw InvalidInput("build_prompt: empty task_input");
  if (opts.budget == 0) throw InvalidInput("build_prompt: budget must be positive");

  PromptContext ctx;
  if (mode == PromptMode::MultiTurn) {
    std::string history_body = "(none)";
    if (!history.empty()) {
      history_body.clear();
      for (std::size_t i = 0; i < history.size(); ++i) {
        if (i) history_body += "\n";
        history_body += history[i];
      }
    }
    std::string task_body = "Goal: " + task_input +
                            "\nHelp: type 'check valid actions' if action fails"
                            "\nHelp: type 'inventory' to check items";
    ctx.sections = {
        {"ENVIRONMENT INSTRUCTIONS", or_none(opts.instructions)},
        {"EXAMPLE DEMONSTRATIONS", or_none(opts.demonstrations)},
        {"RELEVANT EXPERIENCE FROM SIMILAR TASKS", experiences_body(experiences)},
        {"YOUR CURRENT TASK", task_body},
        {"RECENT HISTORY", history_body},
        {"OUTPUT FORMAT", kOutputFormat},
    };
  } else {
    ctx.sections = {
        {"preamble", kSingleTurnPreamble},
        {"experiences", experiences_body(experiences)},
        {"task", "Question: " + task_input},
        {"output-format", kSingleTurnFormat},
    };
  }

  ctx.rendered = render(mode, ctx.sections);

  // Budget enforcement: cut section bodies from the end, cheapest-to-lose
  // first; the task and output-format sections are left intact.
  static const char* kMultiShrink[] = {"EXAMPLE DEMONSTRATIONS",
                                       "RELEVANT EXPERIENCE FROM SIMILAR TASKS",
                                       "RECENT HISTORY", "ENVIRONMENT INSTRUCTIONS"};
  static const char* kSingleShrink[] = {"experiences"};
  const auto shrinkable = (mode == PromptMode::MultiTurn)
                              ? std::span<const char* const>(kMultiShrink)
                              : std::span<const char* const>(kSingleShrink);
  for (const char* name : shrinkable) {
    if (ctx.rendered.size() <= opts.budget) break;
    auto it = std::find_if(ctx.sections.begin(), ctx.sections.end(),
                           [&](const auto& s) { return s.first == name; });
    if (it == ctx.sections.end()) continue;
    std::size_t excess = ctx.rendered.size() - opts.budget;
    std::size_t keep = it->second.size() > excess ? it->second.size() - excess : 0;
    it->second = it->second.substr(0, keep);
    ctx.rendered = render(mode, ctx.sections);
  }
  return ctx;
}

std::string keydoor_instructions() {
  return "You are in a small house of connected rooms. Available commands: "
         "go <room>, take key, unlock door, open chest, check valid actions, "
         "inventory. Reach the key, unlock the door with it, then open the chest.";
}

std::string qa_instructions() {
  return "Answer the question stated in the goal. When you know the final "
         "answer, reply with 'Action: <final answer>'.";
}

}  // namespace memstream
