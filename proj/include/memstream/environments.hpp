#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "memstream/memory.hpp"

namespace memstream {

enum class EnvKind { SingleTurnQA, KeyDoor };

std::string env_name(EnvKind env);
EnvKind env_from_name(std::string_view name);

struct TaskRecord {
  std::string id;
  std::string input;
  std::optional<std::string> expected;   // required for SingleTurnQA
  std::optional<double> difficulty;      // higher = harder
  std::string domain_tag;
  EnvKind env = EnvKind::SingleTurnQA;
  nlohmann::json env_params = nlohmann::json::object();
};

/// Strict JSONL task loader: one task per line, unknown keys rejected;
/// SingleTurnQA tasks need `expected`, KeyDoor tasks need env_params.seed.
/// Throws InvalidStream with the offending line number.
std::vector<TaskRecord> load_tasks_jsonl(const std::filesystem::path& path);
void save_tasks_jsonl(const std::vector<TaskRecord>& tasks,
                      const std::filesystem::path& path);

// Single-turn grading

/// Lowercase, collapse internal whitespace, trim, strip one trailing period.
std::string normalize_answer(std::string_view s);

/// Success (progress 1.0) iff the normalized strings are equal, else Failure
/// (progress 0.0). Symmetric in normalization.
Feedback grade_single_turn(const std::string& prediction, const std::string& expected);

// KeyDoor

struct KeyDoorParams {
  std::uint64_t seed = 0;
  int rooms = 4;      // clamped to [2, 8]
  int step_cap = 30;
};

/// Deterministic multi-turn world. The seed places the start room and the
/// key / door / chest rooms; movement is direct ("go <room>"). Subgoals, in
/// order: reach the key room, hold the key, unlock the door, open the chest.
/// Every call to step() counts as a step, including unknown actions, which
/// observe "Nothing happens.".
class KeyDoorWorld {
 public:
  explicit KeyDoorWorld(const KeyDoorParams& params);

  /// Applies one action; returns (observation, done). done turns true when
  /// the chest opens or the step cap is reached.
  std::pair<std::string, bool> step(const std::string& action);

  std::string initial_observation() const;
  const std::string& goal() const { return goal_; }

  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  int subgoals_done() const;
  static constexpr int subgoals_total() { return 4; }

  const std::vector<std::string>& room_names() const { return rooms_; }
  const std::string& start_room() const { return start_; }
  const std::string& key_room() const { return key_room_; }
  const std::string& door_room() const { return door_room_; }
  const std::string& chest_room() const { return chest_room_; }

 private:
  std::string room_contents(const std::string& room) const;
  std::vector<std::string> valid_actions() const;

  std::vector<std::string> rooms_;
  std::string start_, key_room_, door_room_, chest_room_;
  std::string goal_;
  std::string current_;
  int step_cap_ = 30;
  int steps_ = 0;
  bool reached_key_room_ = false;
  bool has_key_ = false;
  bool door_unlocked_ = false;
  bool chest_open_ = false;
  bool done_ = false;
};

/// Builds a TaskRecord whose input describes the seeded layout, so equal
/// seeds produce identical inputs (and similar layouts similar inputs).
TaskRecord make_keydoor_task(std::string id, std::uint64_t seed, int rooms = 4,
                             std::optional<double> difficulty = std::nullopt);

// Episodes

struct EnvOutcome {
  Feedback feedback;
  int steps_taken = 0;
  int subgoals_total = 1;
  int subgoals_done = 0;
  std::vector<std::pair<std::string, std::string>> transcript;  // action, observation
};

/// Supplies the next action given the initial observation and the episode
/// transcript so far.
using AgentStepFn = std::function<std::string(
    const TaskRecord& task, const std::string& initial_observation,
    const std::vector<std::pair<std::string, std::string>>& transcript)>;

/// Runs one KeyDoor episode under a step cap. feedback.progress equals
/// subgoals_done / subgoals_total; all four subgoals mean Success. A
/// BackendError thrown by the agent yields Ungraded with the partial
/// transcript preserved.
EnvOutcome run_episode(const TaskRecord& task, const AgentStepFn& agent, int cap);

}  // namespace memstream
