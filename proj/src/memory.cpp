#include "memstream/memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

std::string outcome_word(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::Ungraded: return "ungraded";
  }
  return "ungraded";
}

Outcome outcome_from_word(std::string_view word) {
  if (word == "success") return Outcome::Success;
  if (word == "failure") return Outcome::Failure;
  if (word == "ungraded") return Outcome::Ungraded;
  throw InvalidInput("unknown outcome: " + std::string(word));
}

Feedback Feedback::success(std::optional<std::string> detail) {
  return Feedback{Outcome::Success, 1.0, std::move(detail)};
}

Feedback Feedback::failure(double progress, std::optional<std::string> detail) {
  if (progress < 0.0 || progress > 1.0) throw InvalidInput("progress out of [0,1]");
  return Feedback{Outcome::Failure, progress, std::move(detail)};
}

Feedback Feedback::ungraded(std::optional<std::string> detail) {
  return Feedback{Outcome::Ungraded, 0.0, std::move(detail)};
}

std::string policy_name(PolicyTag tag) {
  switch (tag) {
    case PolicyTag::Baseline: return "Baseline";
    case PolicyTag::History: return "History";
    case PolicyTag::ExpRecent: return "ExpRecent";
    case PolicyTag::ExpRAG: return "ExpRAG";
    case PolicyTag::ReMem: return "ReMem";
  }
  return "Baseline";
}

PolicyTag policy_from_name(std::string_view name) {
  // case-insensitive so config files can spell policies in lowercase
  const std::string n = util::to_lower(name);
  if (n == "baseline") return PolicyTag::Baseline;
  if (n == "history") return PolicyTag::History;
  if (n == "exprecent") return PolicyTag::ExpRecent;
  if (n == "exprag") return PolicyTag::ExpRAG;
  if (n == "remem") return PolicyTag::ReMem;
  throw InvalidInput("unknown policy: " + std::string(name));
}

bool policy_uses_recency(PolicyTag tag) {
  return tag == PolicyTag::History || tag == PolicyTag::ExpRecent;
}

bool policy_uses_retrieval(PolicyTag tag) {
  return tag == PolicyTag::ExpRAG || tag == PolicyTag::ReMem;
}

std::string render_experience(const std::string& task_input,
                              const std::string& prediction,
                              const Feedback& feedback) {
  if (task_input.empty()) throw InvalidInput("render_experience: empty task_input");
  std::string out;
  out.reserve(task_input.size() + prediction.size() + 48);
  out.append("Goal: ").append(task_input);
  out.append("\nTrajectory: ").append(prediction);
  out.append("\nCorrectness: ").append(outcome_word(feedback.outcome));
  return out;
}

bool is_unit_vector(std::span<const double> v, double tol) {
  if (v.empty()) return false;
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::fabs(std::sqrt(sq) - 1.0) <= tol;
}

MemoryState::MemoryState(PolicyTag policy, std::optional<std::size_t> capacity,
                         bool ingest_failures)
    : policy_(policy), capacity_(capacity), ingest_failures_(ingest_failures) {
  if (capacity_ && *capacity_ == 0) throw InvalidInput("capacity must be positive");
}

void MemoryState::evolve(const std::string& task_input, const std::string& prediction,
                         const Feedback& feedback, std::span<const double> embedding,
                         std::int64_t created_step) {
  if (!is_unit_vector(embedding)) {
    throw InvalidEmbedding("evolve: embedding is not unit-norm");
  }
  if (policy_ == PolicyTag::Baseline) return;
  if (!ingest_failures_ && feedback.outcome == Outcome::Failure) return;

  MemoryEntry entry;
  entry.rendered = render_experience(task_input, prediction, feedback);
  entry.id = next_id_++;
  entry.task_input = task_input;
  entry.prediction = prediction;
  entry.feedback = feedback;
  entry.embedding.assign(embedding.begin(), embedding.end());
  entry.created_step = created_step;
  entries_.push_back(std::move(entry));
  enforce_capacity();
}

void MemoryState::enforce_capacity() {
  if (!capacity_) return;
  while (active_count() > *capacity_) {
    MemoryEntry* victim = nullptr;
    if (policy_uses_recency(policy_)) {
      // FIFO: oldest active entry.
      for (auto& e : entries_) {
        if (e.active) { victim = &e; break; }
      }
    } else {
      // Lowest utility, ties broken by oldest id.
      int best = std::numeric_limits<int>::max();
      for (auto& e : entries_) {
        if (!e.active) continue;
        if (e.utility < best) { best = e.utility; victim = &e; }
      }
    }
    if (!victim) break;
    victim->active = false;
  }
}

std::vector<MemoryEntry> MemoryState::recent_window(std::size_t n) const {
  std::vector<const MemoryEntry*> active;
  for (const auto& e : entries_) {
    if (e.active) active.push_back(&e);
  }
  std::size_t take = std::min(n, active.size());
  std::vector<MemoryEntry> out;
  out.reserve(take);
  for (std::size_t i = active.size() - take; i < active.size(); ++i) {
    out.push_back(*active[i]);
  }
  return out;
}

MemoryEntry* MemoryState::find(std::int64_t id) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const MemoryEntry& e, std::int64_t v) { return e.id < v; });
  if (it == entries_.end() || it->id != id) return nullptr;
  return &*it;
}

const MemoryEntry* MemoryState::find(std::int64_t id) const {
  return const_cast<MemoryState*>(this)->find(id);
}

std::size_t MemoryState::active_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.active ? 1 : 0;
  return n;
}

void MemoryState::restore_entry(MemoryEntry entry) {
  if (!entries_.empty() && entry.id <= entries_.back().id) {
    throw SnapshotError("snapshot entries out of id order");
  }
  entries_.push_back(std::move(entry));
}

}  // namespace memstream
