#include "memstream/snapshot.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kSchema = "memory.snapshot.v1";

ordered_json feedback_to_json(const Feedback& f) {
  ordered_json j;
  j["outcome"] = outcome_word(f.outcome);
  j["progress"] = f.progress;
  if (f.detail) {
    j["detail"] = *f.detail;
  } else {
    j["detail"] = nullptr;
  }
  return j;
}

Feedback feedback_from_json(const ordered_json& j) {
  Feedback f;
  f.outcome = outcome_from_word(j.at("outcome").get<std::string>());
  f.progress = j.at("progress").get<double>();
  if (!j.at("detail").is_null()) f.detail = j.at("detail").get<std::string>();
  return f;
}

}  // namespace

std::string snapshot_to_string(const MemoryState& state) {
  std::ostringstream out;
  ordered_json header;
  header["schema"] = kSchema;
  header["policy"] = policy_name(state.policy());
  if (state.capacity()) {
    header["capacity"] = *state.capacity();
  } else {
    header["capacity"] = nullptr;
  }
  header["ingest_failures"] = state.ingest_failures();
  header["next_id"] = state.next_id();
  header["entries"] = state.entries().size();
  out << header.dump() << "\n";

  for (const auto& e : state.entries()) {
    ordered_json j;
    j["id"] = e.id;
    j["task_input"] = e.task_input;
    j["prediction"] = e.prediction;
    j["feedback"] = feedback_to_json(e.feedback);
    j["rendered"] = e.rendered;
    j["embedding"] = e.embedding;
    j["created_step"] = e.created_step;
    j["utility"] = e.utility;
    j["active"] = e.active;
    out << j.dump() << "\n";
  }
  return out.str();
}

MemoryState snapshot_from_string(std::string_view text) {
  auto lines = util::split_lines(text);
  // split_lines yields a trailing empty element for newline-terminated text.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SnapshotError("snapshot is empty (missing header)");

  ordered_json header;
  try {
    header = ordered_json::parse(lines[0]);
  } catch (const std::exception& e) {
    throw SnapshotError(std::string("snapshot header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("schema", "") != kSchema) {
    throw SnapshotError("snapshot header has wrong schema");
  }

  MemoryState state;
  try {
    PolicyTag policy = policy_from_name(header.at("policy").get<std::string>());
    std::optional<std::size_t> capacity;
    if (!header.at("capacity").is_null()) capacity = header.at("capacity").get<std::size_t>();
    bool ingest_failures = header.at("ingest_failures").get<bool>();
    state = MemoryState(policy, capacity, ingest_failures);

    std::size_t expected = header.at("entries").get<std::size_t>();
    if (lines.size() - 1 != expected) {
      throw SnapshotError("snapshot is truncated or padded: header says " +
                          std::to_string(expected) + " entries, file has " +
                          std::to_string(lines.size() - 1));
    }

    for (std::size_t i = 1; i < lines.size(); ++i) {
      ordered_json j = ordered_json::parse(lines[i]);
      MemoryEntry e;
      e.id = j.at("id").get<std::int64_t>();
      e.task_input = j.at("task_input").get<std::string>();
      e.prediction = j.at("prediction").get<std::string>();
      e.feedback = feedback_from_json(j.at("feedback"));
      e.rendered = j.at("rendered").get<std::string>();
      e.embedding = j.at("embedding").get<std::vector<double>>();
      e.created_step = j.at("created_step").get<std::int64_t>();
      e.utility = j.at("utility").get<int>();
      e.active = j.at("active").get<bool>();
      state.restore_entry(std::move(e));
    }
    state.set_next_id(header.at("next_id").get<std::int64_t>());
  } catch (const SnapshotError&) {
    throw;
  } catch (const std::exception& e) {
    throw SnapshotError(std::string("snapshot entry is corrupt: ") + e.what());
  }
  return state;
}

void save_snapshot(const MemoryState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError("cannot open snapshot for writing: " + path.string());
  out << snapshot_to_string(state);
  out.flush();
  if (!out) throw SnapshotError("failed writing snapshot: " + path.string());
}

MemoryState load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open snapshot: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return snapshot_from_string(buf.str());
}

}  // namespace memstream
