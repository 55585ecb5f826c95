#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace memstream {

// Feedback

enum class Outcome { Success, Failure, Ungraded };

std::string outcome_word(Outcome o);
Outcome outcome_from_word(std::string_view word);

/// Graded result of one task attempt. Success always carries progress 1.0.
struct Feedback {
  Outcome outcome = Outcome::Ungraded;
  double progress = 0.0;
  std::optional<std::string> detail;

  static Feedback success(std::optional<std::string> detail = std::nullopt);
  static Feedback failure(double progress = 0.0,
                          std::optional<std::string> detail = std::nullopt);
  static Feedback ungraded(std::optional<std::string> detail = std::nullopt);

  bool graded() const { return outcome != Outcome::Ungraded; }
};

// Policies

enum class PolicyTag { Baseline, History, ExpRecent, ExpRAG, ReMem };

std::string policy_name(PolicyTag tag);
PolicyTag policy_from_name(std::string_view name);

/// True for policies that read memory by recency (History, ExpRecent).
bool policy_uses_recency(PolicyTag tag);
/// True for policies that read memory by similarity (ExpRAG, ReMem).
bool policy_uses_retrieval(PolicyTag tag);

// Entries and state

/// One stored experience: task input, the attempt, graded feedback, the
/// rendered experience text, and retrieval bookkeeping.
struct MemoryEntry {
  std::int64_t id = 0;           // unique, strictly increasing per state
  std::string task_input;
  std::string prediction;
  Feedback feedback;
  std::string rendered;
  std::vector<double> embedding;  // unit L2 norm
  std::int64_t created_step = 0;  // stream index of the ingesting task
  int utility = 0;                // +1 per retrieval into a success, -1 per prune
  bool active = true;             // eviction and pruning deactivate, never delete
};

/// Fixed experience template: "Goal/Trajectory/Correctness".
/// Throws InvalidInput when task_input is empty.
std::string render_experience(const std::string& task_input,
                              const std::string& prediction,
                              const Feedback& feedback);

class MemoryState {
 public:
  MemoryState() = default;
  explicit MemoryState(PolicyTag policy,
                       std::optional<std::size_t> capacity = std::nullopt,
                       bool ingest_failures = false);

  PolicyTag policy() const { return policy_; }
  std::optional<std::size_t> capacity() const { return capacity_; }
  bool ingest_failures() const { return ingest_failures_; }

  /// Append one experience per the state's policy. Baseline stores nothing;
  /// Failure feedback is dropped unless ingest_failures is set. When a
  /// capacity bound is exceeded, one active entry is deactivated: the oldest
  /// for History/ExpRecent, the lowest-utility (ties to oldest id) for
  /// ExpRAG/ReMem. Deterministic: equal input states and arguments produce
  /// byte-identical serialized states.
  /// Throws InvalidEmbedding for non-unit embeddings, InvalidInput for an
  /// empty task_input on an ingesting policy.
  void evolve(const std::string& task_input, const std::string& prediction,
              const Feedback& feedback, std::span<const double> embedding,
              std::int64_t created_step = 0);

  /// Last min(n, active) active entries in insertion order.
  std::vector<MemoryEntry> recent_window(std::size_t n) const;

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  MemoryEntry* find(std::int64_t id);
  const MemoryEntry* find(std::int64_t id) const;

  std::size_t total_count() const { return entries_.size(); }
  std::size_t active_count() const;
  std::int64_t next_id() const { return next_id_; }

  // Snapshot support; not part of the evolution API.
  void set_next_id(std::int64_t id) { next_id_ = id; }
  void restore_entry(MemoryEntry entry);

 private:
  void enforce_capacity();

  std::vector<MemoryEntry> entries_;
  PolicyTag policy_ = PolicyTag::Baseline;
  std::optional<std::size_t> capacity_;
  bool ingest_failures_ = false;
  std::int64_t next_id_ = 1;
};

/// True when the vector has L2 norm within tol of 1.
bool is_unit_vector(std::span<const double> v, double tol = 1e-6);

}  // namespace memstream
