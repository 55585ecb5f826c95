#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "memstream/agent.hpp"
#include "memstream/backend.hpp"
#include "memstream/errors.hpp"
#include "memstream/memory.hpp"

using namespace memstream;

namespace {

std::vector<double> axis(std::size_t dim, std::size_t i) {
  std::vector<double> v(dim, 0.0);
  v[i % dim] = 1.0;
  return v;
}

MemoryState three_entry_state() {
  MemoryState state(PolicyTag::ReMem, std::nullopt, true);
  state.evolve("goal one", "walk", Feedback::success(), axis(8, 0), 1);
  state.evolve("goal two", "run", Feedback::failure(0.5), axis(8, 1), 2);
  state.evolve("goal three", "jump", Feedback::success(), axis(8, 2), 3);
  return state;
}

std::vector<ScoredEntry> retrieved_all() {
  return {{1, 0.9}, {2, 0.8}, {3, 0.7}};
}

}  // namespace

TEST_CASE("parse_operation grammar table") {
  auto prune = parse_operation("Think-Prune: 2-4");
  REQUIRE(prune);
  CHECK(prune->kind == AgentOperation::Kind::Prune);
  CHECK(prune->prune_indices == std::vector<int>{2, 3, 4});

  auto list = parse_operation("Think-Prune: 1,3");
  REQUIRE(list);
  CHECK(list->prune_indices == std::vector<int>{1, 3});

  auto mixed = parse_operation("think-prune: 1,3-5");
  REQUIRE(mixed);
  CHECK(mixed->prune_indices == std::vector<int>{1, 3, 4, 5});

  auto act = parse_operation("Action: go north");
  REQUIRE(act);
  CHECK(act->kind == AgentOperation::Kind::Act);
  CHECK(act->text == "go north");

  auto padded = parse_operation("\n\n  ACTION:   open chest   \nmore text");
  REQUIRE(padded);
  CHECK(padded->kind == AgentOperation::Kind::Act);
  CHECK(padded->text == "open chest");

  auto think = parse_operation("Think: the key must be in the attic");
  REQUIRE(think);
  CHECK(think->kind == AgentOperation::Kind::Think);
  CHECK(think->text == "the key must be in the attic");

  // Think-Prune wins over the shorter Think prefix
  auto not_think = parse_operation("Think-Prune: 1");
  REQUIRE(not_think);
  CHECK(not_think->kind == AgentOperation::Kind::Prune);
  auto plain_think = parse_operation("Think: Prune: 1");
  REQUIRE(plain_think);
  CHECK(plain_think->kind == AgentOperation::Kind::Think);
}

TEST_CASE("parse_operation rejects malformed output") {
  CHECK_FALSE(parse_operation("I think we should..."));
  CHECK_FALSE(parse_operation(""));
  CHECK_FALSE(parse_operation("   \n\n  "));
  CHECK_FALSE(parse_operation("Think-Prune:"));
  CHECK_FALSE(parse_operation("Think-Prune: 0"));
  CHECK_FALSE(parse_operation("Think-Prune: abc"));
  CHECK_FALSE(parse_operation("Think-Prune: 5-2"));
  CHECK_FALSE(parse_operation("Think-Prune: 1,,2"));
  CHECK_FALSE(parse_operation("Think-Prune: -3"));
  CHECK_FALSE(parse_operation("Prune: 1"));
}

TEST_CASE("operation_line round trip") {
  AgentOperation prune;
  prune.kind = AgentOperation::Kind::Prune;
  prune.prune_indices = {1, 3};
  CHECK(operation_line(prune) == "Think-Prune: 1,3");
  auto back = parse_operation(operation_line(prune));
  REQUIRE(back);
  CHECK(back->prune_indices == prune.prune_indices);
}

TEST_CASE("apply_prune renumbers and charges utility") {
  MemoryState state = three_entry_state();
  AgentStepState step;
  step.working_set = {1, 2, 3};
  CHECK(apply_prune(step, state, {2}, -2));
  CHECK(step.working_set == std::vector<std::int64_t>{1, 3});
  CHECK(state.find(2)->utility == -1);
  CHECK(state.find(2)->active);
  CHECK(state.find(1)->utility == 0);

  CHECK(apply_prune(step, state, {1, 2}, -2));
  CHECK(step.working_set.empty());
}

TEST_CASE("apply_prune rejects out-of-range indices without side effects") {
  MemoryState state = three_entry_state();
  AgentStepState step;
  step.working_set = {1, 2, 3};
  CHECK_FALSE(apply_prune(step, state, {5}, -2));
  CHECK_FALSE(apply_prune(step, state, {}, -2));
  CHECK(step.working_set == std::vector<std::int64_t>{1, 2, 3});
  CHECK(state.find(1)->utility == 0);
  CHECK(state.find(2)->utility == 0);
}

TEST_CASE("repeated prunes deactivate at the threshold") {
  MemoryState state = three_entry_state();
  AgentStepState step;
  step.working_set = {2};
  CHECK(apply_prune(step, state, {1}, -2));
  CHECK(state.find(2)->active);
  step.working_set = {2};
  CHECK(apply_prune(step, state, {1}, -2));
  CHECK(state.find(2)->utility == -2);
  CHECK_FALSE(state.find(2)->active);
}

TEST_CASE("run_step ends immediately on Act") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"Action: answer 42"}}});
  AgentConfig cfg;
  StepResult r = run_step("what is six times seven", state, backend, cfg,
                          retrieved_all(), {});
  CHECK(r.act_payload == "answer 42");
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].kind == AgentOperation::Kind::Act);
  CHECK(r.backend_calls == 1);
  CHECK(r.malformed_count == 0);
  CHECK(r.pruned_entry_ids.empty());
}

TEST_CASE("run_step applies think and prune before acting") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always,
                            "",
                            {"Think: look at experience 1", "Think-Prune: 1",
                             "Action: jump"}}});
  AgentConfig cfg;
  StepResult r = run_step("goal", state, backend, cfg, retrieved_all(), {});
  REQUIRE(r.trace.size() == 3);
  CHECK(r.trace[0].kind == AgentOperation::Kind::Think);
  CHECK(r.trace[1].kind == AgentOperation::Kind::Prune);
  CHECK(r.trace[2].kind == AgentOperation::Kind::Act);
  CHECK(r.act_payload == "jump");
  CHECK(r.pruned_entry_ids == std::vector<std::int64_t>{1});
  CHECK(state.find(1)->utility == -1);

  // prompt shape: first call shows three blocks, the call after the prune
  // shows two, renumbered from 1
  REQUIRE(r.prompts.size() == 3);
  CHECK(r.prompts[0].find("[Experience #3]") != std::string::npos);
  CHECK(r.prompts[2].find("[Experience #2]") != std::string::npos);
  CHECK(r.prompts[2].find("[Experience #3]") == std::string::npos);
  // trace operations feed back into the history section
  CHECK(r.prompts[1].find("Think: look at experience 1") != std::string::npos);
  CHECK(r.prompts[2].find("Think-Prune: 1") != std::string::npos);
}

TEST_CASE("run_step coerces the final operation to Act at the cap") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"Think: loop forever"}}});
  AgentConfig cfg;
  cfg.max_ops = 4;
  StepResult r = run_step("goal", state, backend, cfg, {}, {});
  REQUIRE(r.trace.size() == 4);
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    CHECK(r.trace[i].kind == AgentOperation::Kind::Think);
  }
  CHECK(r.trace.back().kind == AgentOperation::Kind::Act);
  CHECK(r.act_payload == "Think: loop forever");
  CHECK(r.backend_calls == 4);
}

TEST_CASE("a prune arriving on the final slot is coerced without side effects") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"Think-Prune: 1"}}});
  AgentConfig cfg;
  cfg.max_ops = 1;
  StepResult r = run_step("goal", state, backend, cfg, retrieved_all(), {});
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].kind == AgentOperation::Kind::Act);
  CHECK(r.act_payload == "Think-Prune: 1");
  CHECK(r.pruned_entry_ids.empty());
  CHECK(state.find(1)->utility == 0);  // the dropped prune never applied
}

TEST_CASE("one malformed output earns a re-prompt, the second coerces") {
  MemoryState state = three_entry_state();
  ScriptedBackend once({{ScriptedRule::Match::Always, "", {"garbage", "Action: ok"}}});
  AgentConfig cfg;
  StepResult r1 = run_step("goal", state, once, cfg, {}, {});
  CHECK(r1.act_payload == "ok");
  CHECK(r1.malformed_count == 1);
  CHECK(r1.backend_calls == 2);
  REQUIRE(r1.trace.size() == 1);

  ScriptedBackend twice({{ScriptedRule::Match::Always, "", {"garbage", "worse junk"}}});
  StepResult r2 = run_step("goal", state, twice, cfg, {}, {});
  CHECK(r2.act_payload == "worse junk");
  CHECK(r2.malformed_count == 2);
  CHECK(r2.backend_calls == 2);
}

TEST_CASE("an invalid prune counts as malformed and earns one re-prompt") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend(
      {{ScriptedRule::Match::Always, "", {"Think-Prune: 9", "Action: done"}}});
  AgentConfig cfg;
  StepResult r = run_step("goal", state, backend, cfg, retrieved_all(), {});
  CHECK(r.act_payload == "done");
  CHECK(r.malformed_count == 1);
  CHECK(r.pruned_entry_ids.empty());
  CHECK(state.find(1)->utility == 0);
}

TEST_CASE("run_step skips inactive retrieved entries") {
  MemoryState state = three_entry_state();
  state.find(2)->active = false;
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"Action: x"}}});
  AgentConfig cfg;
  StepResult r = run_step("goal", state, backend, cfg, retrieved_all(), {});
  CHECK(r.prompts[0].find("[Experience #2]") != std::string::npos);
  CHECK(r.prompts[0].find("[Experience #3]") == std::string::npos);
  CHECK(r.prompts[0].find("goal two") == std::string::npos);
}

TEST_CASE("run_step is deterministic under a scripted backend") {
  AgentConfig cfg;
  auto run_once = [&] {
    MemoryState state = three_entry_state();
    ScriptedBackend backend({{ScriptedRule::Match::Always,
                              "",
                              {"Think: a", "Think-Prune: 2", "Action: final"}}});
    return run_step("goal", state, backend, cfg, retrieved_all(), {});
  };
  StepResult a = run_once();
  StepResult b = run_once();
  CHECK(a.act_payload == b.act_payload);
  CHECK(a.prompts == b.prompts);
  CHECK(a.pruned_entry_ids == b.pruned_entry_ids);
}

namespace {

// Emits a pseudo-random mix of valid and junk operations; deliberately
// adversarial for the loop contract.
class ChaoticBackend final : public ModelBackend {
 public:
  explicit ChaoticBackend(std::uint64_t seed) : rng_(seed) {}
  std::string complete(const std::string&) override {
    switch (rng_() % 6) {
      case 0: return "Think: considering";
      case 1: return "Think-Prune: " + std::to_string(1 + rng_() % 5);
      case 2: return "Action: act now";
      case 3: return "unparseable noise";
      case 4: return "Think-Prune: 1-" + std::to_string(1 + rng_() % 4);
      default: return "";
    }
  }
  std::string kind() const override { return "chaotic"; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

TEST_CASE("loop contract holds under 200 randomized traces") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    MemoryState state = three_entry_state();
    ChaoticBackend backend(seed);
    AgentConfig cfg;
    cfg.max_ops = 1 + static_cast<int>(seed % 6);
    StepResult r = run_step("goal", state, backend, cfg, retrieved_all(), {});

    int acts = 0;
    for (const auto& op : r.trace) {
      acts += op.kind == AgentOperation::Kind::Act ? 1 : 0;
    }
    CHECK(acts == 1);
    CHECK(r.trace.back().kind == AgentOperation::Kind::Act);
    CHECK(static_cast<int>(r.trace.size()) <= cfg.max_ops);
    CHECK(r.backend_calls <= cfg.max_ops + 1);

    // every prompt labels experiences contiguously from 1
    for (const auto& p : r.prompts) {
      int expect = 1;
      std::size_t pos = 0;
      while ((pos = p.find("[Experience #", pos)) != std::string::npos) {
        pos += 13;
        CHECK(p[pos] == static_cast<char>('0' + expect));
        ++expect;
                    }
    }
  }
}

TEST_CASE("synthesize_exprag extracts the final answer") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always,
                            "",
                            {"Rationale: recalled quadratic formula\nFinal Answer: x=1"}}});
  AgentConfig cfg;
  SynthesisResult r = synthesize_exprag("solve x", retrieved_all(), state, backend, cfg);
  CHECK(r.answer == "x=1");
  CHECK(backend.calls() == 1);
  CHECK(r.prompt.find("[Experience #1]") != std::string::npos);
  CHECK(r.prompt.find("Question: solve x") != std::string::npos);
}

TEST_CASE("synthesize_exprag falls back to the whole completion") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"  just an answer  "}}});
  AgentConfig cfg;
  SynthesisResult r = synthesize_exprag("q", {}, state, backend, cfg);
  CHECK(r.answer == "just an answer");
  CHECK(r.prompt.find("(none)") != std::string::npos);
  CHECK(backend.calls() == 1);
}

TEST_CASE("synthesize_exprag matches the marker case-insensitively") {
  MemoryState state = three_entry_state();
  ScriptedBackend backend({{ScriptedRule::Match::Always, "", {"FINAL ANSWER:  42"}}});
  AgentConfig cfg;
  SynthesisResult r = synthesize_exprag("q", {}, state, backend, cfg);
  CHECK(r.answer == "42");
}
