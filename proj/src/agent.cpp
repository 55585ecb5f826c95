#include "memstream/agent.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

namespace {

constexpr std::string_view kPrunePrefix = "Think-Prune:";
constexpr std::string_view kThinkPrefix = "Think:";
constexpr std::string_view kActPrefix = "Action:";

std::optional<int> parse_index(std::string_view token) {
  std::string t = util::trim(token);
  if (t.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  if (value < 1) return std::nullopt;  // display indices are 1-based
  return value;
}

std::optional<std::vector<int>> parse_indices(std::string_view payload) {
  std::set<int> ids;
  for (const auto& part : util::split(payload, ',')) {
    std::string p = util::trim(part);
    if (p.empty()) return std::nullopt;
    auto dash = p.find('-');
    if (dash != std::string::npos) {
      auto lo = parse_index(p.substr(0, dash));
      auto hi = parse_index(p.substr(dash + 1));
      if (!lo || !hi || *lo > *hi) return std::nullopt;
      for (int v = *lo; v <= *hi; ++v) ids.insert(v);
    } else {
      auto v = parse_index(p);
      if (!v) return std::nullopt;
      ids.insert(*v);
    }
  }
  if (ids.empty()) return std::nullopt;
  return std::vector<int>(ids.begin(), ids.end());
}

std::string first_nonempty_line(std::string_view raw) {
  for (const auto& line : util::split_lines(raw)) {
    if (!util::trim(line).empty()) return line;
  }
  return "";
}

std::vector<std::pair<int, std::string>> working_set_blocks(
    const AgentStepState& step, const MemoryState& state) {
  std::vector<std::pair<int, std::string>> blocks;
  blocks.reserve(step.working_set.size());
  for (std::size_t i = 0; i < step.working_set.size(); ++i) {
    const MemoryEntry* e = state.find(step.working_set[i]);
    if (!e) continue;
    blocks.emplace_back(static_cast<int>(i) + 1, e->rendered);
  }
  return blocks;
}

AgentOperation coerce_act(std::string_view raw) {
  AgentOperation op;
  op.kind = AgentOperation::Kind::Act;
  op.text = util::trim(raw);
  return op;
}

}  // namespace

std::string operation_line(const AgentOperation& op) {
  switch (op.kind) {
    case AgentOperation::Kind::Think:
      return "Think: " + op.text;
    case AgentOperation::Kind::Prune: {
      std::vector<std::string> parts;
      parts.reserve(op.prune_indices.size());
      for (int i : op.prune_indices) parts.push_back(std::to_string(i));
      return "Think-Prune: " + util::join(parts, ",");
    }
    case AgentOperation::Kind::Act:
      return "Action: " + op.text;
  }
  return "";
}

std::optional<AgentOperation> parse_operation(std::string_view raw) {
  std::string line = first_nonempty_line(raw);
  std::string lead = util::trim(line);
  if (lead.empty()) return std::nullopt;

  AgentOperation op;
  if (util::starts_with_icase(lead, kPrunePrefix)) {
    auto ids = parse_indices(lead.substr(kPrunePrefix.size()));
    if (!ids) return std::nullopt;
    op.kind = AgentOperation::Kind::Prune;
    op.prune_indices = std::move(*ids);
    op.text = util::trim(lead.substr(kPrunePrefix.size()));
    return op;
  }
  if (util::starts_with_icase(lead, kThinkPrefix)) {
    op.kind = AgentOperation::Kind::Think;
    op.text = util::trim(lead.substr(kThinkPrefix.size()));
    return op;
  }
  if (util::starts_with_icase(lead, kActPrefix)) {
    op.kind = AgentOperation::Kind::Act;
    op.text = util::trim(lead.substr(kActPrefix.size()));
    return op;
  }
  return std::nullopt;
}

bool apply_prune(AgentStepState& step, MemoryState& state,
                 const std::vector<int>& indices, int deactivate_threshold) {
  if (indices.empty()) return false;
  const int m = static_cast<int>(step.working_set.size());
  for (int i : indices) {
    if (i < 1 || i > m) return false;
  }

  std::vector<std::int64_t> keep;
  keep.reserve(step.working_set.size());
  for (int pos = 1; pos <= m; ++pos) {
    std::int64_t id = step.working_set[pos - 1];
    if (std::find(indices.begin(), indices.end(), pos) == indices.end()) {
      keep.push_back(id);
      continue;
    }
    if (MemoryEntry* e = state.find(id)) {
      e->utility -= 1;
      if (e->utility <= deactivate_threshold) e->active = false;
    }
  }
  step.working_set = std::move(keep);
  return true;
}

StepResult run_step(const std::string& task_input, MemoryState& state,
                    ModelBackend& backend, const AgentConfig& cfg,
                    const std::vector<ScoredEntry>& retrieved,
                    const std::vector<std::string>& history) {
  if (cfg.max_ops < 1) throw InvalidInput("run_step: max_ops must be positive");

  AgentStepState step;
  step.task_input = task_input;
  step.max_ops = cfg.max_ops;
  for (const auto& s : retrieved) {
    if (const MemoryEntry* e = state.find(s.entry_id); e && e->active) {
      step.working_set.push_back(s.entry_id);
    }
  }

  PromptOptions opts{cfg.prompt_budget, cfg.instructions, cfg.demonstrations};
  StepResult out;
  bool reprompt_used = false;

  while (true) {
    std::vector<std::string> lines = history;
    for (const auto& op : step.trace) lines.push_back(operation_line(op));
    PromptContext ctx =
        build_prompt(task_input, working_set_blocks(step, state), lines, cfg.mode, opts);
    std::string raw = backend.complete(ctx.rendered);
    out.prompts.push_back(std::move(ctx.rendered));
    ++out.backend_calls;

    auto parsed = parse_operation(raw);
    AgentOperation op;
    if (!parsed) {
      ++out.malformed_count;
      if (!reprompt_used) {
        reprompt_used = true;
        continue;
      }
      op = coerce_act(raw);
    } else {
      op = std::move(*parsed);
    }

    // The last permitted operation must terminate the step; coercion happens
    // before the operation is applied, so a dropped prune has no side effects.
    if (op.kind != AgentOperation::Kind::Act && step.ops_used + 1 >= step.max_ops) {
      op = coerce_act(raw);
    }

    if (op.kind == AgentOperation::Kind::Prune) {
      std::vector<std::int64_t> before = step.working_set;
      if (!apply_prune(step, state, op.prune_indices, cfg.prune_deactivate_threshold)) {
        ++out.malformed_count;
        if (!reprompt_used) {
          reprompt_used = true;
          continue;
        }
        op = coerce_act(raw);
      } else {
        for (std::int64_t id : before) {
          if (std::find(step.working_set.begin(), step.working_set.end(), id) ==
              step.working_set.end()) {
            out.pruned_entry_ids.push_back(id);
          }
        }
      }
    }

    step.trace.push_back(op);
    ++step.ops_used;
    if (op.kind == AgentOperation::Kind::Act) {
      out.act_payload = op.text;
      out.trace = std::move(step.trace);
      return out;
    }
  }
}

SynthesisResult synthesize_exprag(const std::string& task_input,
                                  const std::vector<ScoredEntry>& retrieved,
                                  const MemoryState& state, ModelBackend& backend,
                                  const AgentConfig& cfg) {
  std::vector<std::pair<int, std::string>> blocks;
  blocks.reserve(retrieved.size());
  int idx = 1;
  for (const auto& s : retrieved) {
    if (const MemoryEntry* e = state.find(s.entry_id)) {
      blocks.emplace_back(idx++, e->rendered);
    }
  }

  PromptOptions opts{cfg.prompt_budget, "", ""};
  PromptContext ctx = build_prompt(task_input, blocks, {}, PromptMode::SingleTurn, opts);

  SynthesisResult out;
  out.prompt = ctx.rendered;
  out.completion = backend.complete(ctx.rendered);

  constexpr std::string_view kMarker = "Final Answer:";
  std::size_t pos = util::find_icase(out.completion, kMarker);
  if (pos != std::string::npos) {
    out.answer = util::trim(std::string_view(out.completion).substr(pos + kMarker.size()));
  } else {
    out.answer = util::trim(out.completion);
  }
  return out;
}

}  // namespace memstream
