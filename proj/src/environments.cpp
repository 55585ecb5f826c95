#include "memstream/environments.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

std::string env_name(EnvKind env) {
  return env == EnvKind::SingleTurnQA ? "single_turn_qa" : "keydoor";
}

EnvKind env_from_name(std::string_view name) {
  if (name == "single_turn_qa") return EnvKind::SingleTurnQA;
  if (name == "keydoor") return EnvKind::KeyDoor;
  throw InvalidInput("unknown env: " + std::string(name));
}

// Task JSONL

namespace {

const std::set<std::string> kTaskKeys = {"id",         "input",      "expected",
                                         "difficulty", "domain_tag", "env",
                                         "env_params"};

TaskRecord task_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto fail = [line_no](const std::string& msg) -> TaskRecord {
    throw InvalidStream("tasks line " + std::to_string(line_no) + ": " + msg);
  };
  if (!j.is_object()) return fail("not a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kTaskKeys.count(key)) return fail("unknown key '" + key + "'");
  }
  TaskRecord t;
  t.id = j.value("id", "");
  t.input = j.value("input", "");
  if (t.id.empty()) return fail("missing id");
  if (t.input.empty()) return fail("missing input");
  if (j.contains("expected") && !j["expected"].is_null()) {
    t.expected = j["expected"].get<std::string>();
  }
  if (j.contains("difficulty") && !j["difficulty"].is_null()) {
    t.difficulty = j["difficulty"].get<double>();
  }
  t.domain_tag = j.value("domain_tag", "");
  t.env = env_from_name(j.value("env", "single_turn_qa"));
  if (j.contains("env_params")) t.env_params = j["env_params"];
  if (t.env == EnvKind::SingleTurnQA && !t.expected) {
    return fail("single_turn_qa task needs 'expected'");
  }
  if (t.env == EnvKind::KeyDoor &&
      (!t.env_params.is_object() || !t.env_params.contains("seed"))) {
    return fail("keydoor task needs env_params.seed");
  }
  return t;
}

}  // namespace

std::vector<TaskRecord> load_tasks_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidStream("cannot open tasks file: " + path.string());
  std::vector<TaskRecord> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw InvalidStream("tasks line " + std::to_string(line_no) +
                          ": invalid JSON: " + e.what());
    }
    tasks.push_back(task_from_json(j, line_no));
  }
  return tasks;
}

void save_tasks_jsonl(const std::vector<TaskRecord>& tasks,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidStream("cannot write tasks file: " + path.string());
  for (const auto& t : tasks) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["input"] = t.input;
    if (t.expected) j["expected"] = *t.expected;
    if (t.difficulty) j["difficulty"] = *t.difficulty;
    if (!t.domain_tag.empty()) j["domain_tag"] = t.domain_tag;
    j["env"] = env_name(t.env);
    if (!t.env_params.empty()) j["env_params"] = t.env_params;
    out << j.dump() << "\n";
  }
}

// Single-turn grading

std::string normalize_answer(std::string_view s) {
  std::string n = util::collapse_whitespace(util::to_lower(s));
  n = util::trim(n);
  if (!n.empty() && n.back() == '.') n.pop_back();
  return util::rtrim(n);
}

Feedback grade_single_turn(const std::string& prediction, const std::string& expected) {
  if (normalize_answer(prediction) == normalize_answer(expected)) {
    return Feedback::success();
  }
  return Feedback::failure(0.0);
}

// KeyDoor

namespace {

const std::vector<std::string> kRoomPool = {"hall",  "study",    "kitchen", "cellar",
                                            "attic", "workshop", "library", "vault"};

}  // namespace

KeyDoorWorld::KeyDoorWorld(const KeyDoorParams& params) : step_cap_(params.step_cap) {
  if (step_cap_ < 1) throw InvalidInput("keydoor step cap must be positive");
  int n = std::clamp(params.rooms, 2, static_cast<int>(kRoomPool.size()));
  rooms_.assign(kRoomPool.begin(), kRoomPool.begin() + n);

  std::uint64_t s = params.seed;
  auto pick = [&] { return rooms_[util::splitmix64(s) % rooms_.size()]; };
  start_ = pick();
  key_room_ = pick();
  door_room_ = pick();
  chest_room_ = pick();

  current_ = start_;
  reached_key_room_ = (current_ == key_room_);
  goal_ = "Open the chest in the " + chest_room_ + ". The key is in the " + key_room_ +
          ", and the locked door is in the " + door_room_ + ". You start in the " +
          start_ + ".";
}

std::string KeyDoorWorld::room_contents(const std::string& room) const {
  std::string out;
  if (room == key_room_ && !has_key_) out += " You see a key.";
  if (room == door_room_) {
    out += door_unlocked_ ? " You see an unlocked door." : " You see a locked door.";
  }
  if (room == chest_room_) {
    out += chest_open_ ? " You see an open chest." : " You see a chest.";
  }
  return out;
}

std::vector<std::string> KeyDoorWorld::valid_actions() const {
  std::vector<std::string> v;
  for (const auto& r : rooms_) v.push_back("go " + r);
  if (current_ == key_room_ && !has_key_) v.push_back("take key");
  if (current_ == door_room_ && has_key_ && !door_unlocked_) v.push_back("unlock door");
  if (current_ == chest_room_ && door_unlocked_ && !chest_open_) v.push_back("open chest");
  v.push_back("check valid actions");
  v.push_back("inventory");
  return v;
}

std::string KeyDoorWorld::initial_observation() const {
  return "You are in the " + start_ + "." + room_contents(start_);
}

std::pair<std::string, bool> KeyDoorWorld::step(const std::string& action) {
  ++steps_;
  std::string a = util::to_lower(util::trim(action));
  std::string obs = "Nothing happens.";

  if (a == "inventory") {
    obs = has_key_ ? "You carry a key." : "You carry nothing.";
  } else if (a == "check valid actions") {
    obs = "Valid actions: " + util::join(valid_actions(), ", ") + ".";
  } else if (a.rfind("go ", 0) == 0) {
    std::string room = util::trim(a.substr(3));
    if (std::find(rooms_.begin(), rooms_.end(), room) != rooms_.end()) {
      current_ = room;
      if (current_ == key_room_) reached_key_room_ = true;
      obs = "You are in the " + room + "." + room_contents(room);
    }
  } else if (a == "take key") {
    if (current_ == key_room_ && !has_key_) {
      has_key_ = true;
      obs = "You take the key.";
    }
  } else if (a == "unlock door") {
    if (current_ == door_room_ && has_key_ && !door_unlocked_) {
      door_unlocked_ = true;
      obs = "You unlock the door.";
    }
  } else if (a == "open chest") {
    if (current_ == chest_room_ && door_unlocked_ && !chest_open_) {
      chest_open_ = true;
      obs = "You open the chest. The task is complete.";
    }
  }

  done_ = chest_open_ || steps_ >= step_cap_;
  return {obs, done_};
}

int KeyDoorWorld::subgoals_done() const {
  return (reached_key_room_ ? 1 : 0) + (has_key_ ? 1 : 0) + (door_unlocked_ ? 1 : 0) +
         (chest_open_ ? 1 : 0);
}

TaskRecord make_keydoor_task(std::string id, std::uint64_t seed, int rooms,
                             std::optional<double> difficulty) {
  KeyDoorWorld world(KeyDoorParams{seed, rooms, 30});
  TaskRecord t;
  t.id = std::move(id);
  t.input = world.goal();
  t.difficulty = difficulty;
  t.env = EnvKind::KeyDoor;
  t.env_params = nlohmann::json{{"seed", seed}, {"rooms", rooms}};
  return t;
}

// Episodes

EnvOutcome run_episode(const TaskRecord& task, const AgentStepFn& agent, int cap) {
  if (task.env != EnvKind::KeyDoor) {
    throw InvalidInput("run_episode: task env is not keydoor");
  }
  if (cap < 1) throw InvalidInput("run_episode: cap must be positive");

  KeyDoorParams params;
  params.seed = task.env_params.at("seed").get<std::uint64_t>();
  params.rooms = task.env_params.value("rooms", 4);
  params.step_cap = cap;
  KeyDoorWorld world(params);

  EnvOutcome out;
  out.subgoals_total = KeyDoorWorld::subgoals_total();
  const std::string initial = world.initial_observation();

  try {
    while (!world.done()) {
      std::string action = agent(task, initial, out.transcript);
      auto [obs, done] = world.step(action);
      out.transcript.emplace_back(std::move(action), std::move(obs));
      if (done) break;
    }
    out.subgoals_done = world.subgoals_done();
    out.steps_taken = static_cast<int>(out.transcript.size());
    if (out.subgoals_done == out.subgoals_total) {
      out.feedback = Feedback::success();
    } else {
      out.feedback = Feedback::failure(static_cast<double>(out.subgoals_done) /
                                       static_cast<double>(out.subgoals_total));
    }
  } catch (const BackendError& e) {
    out.subgoals_done = world.subgoals_done();
    out.steps_taken = static_cast<int>(out.transcript.size());
    out.feedback = Feedback::ungraded(std::string(e.what()));
  }
  return out;
}

}  // namespace memstream
