#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memstream/memory.hpp"

namespace memstream {

struct RetrievalConfig {
  int k = 4;
  std::optional<double> min_score;
  bool exclude_failures = false;
};

struct ScoredEntry {
  std::int64_t entry_id = 0;
  double score = 0.0;
};

/// Dot product; both vectors must be the same length (unit vectors make this
/// the cosine).
double cosine(std::span<const double> a, std::span<const double> b);

/// Exact top-k by cosine over the active entries (Failure entries are skipped
/// when cfg.exclude_failures is set). Results are sorted by score descending;
/// exact score ties go to the larger entry id (more recent wins), which makes
/// the order a strict total order. cfg.min_score filters before selection.
/// The query must be unit-norm (InvalidEmbedding otherwise); cfg.k must be
/// positive (InvalidInput).
///
/// top_k scores entries with an OpenMP-parallel kernel; top_k_serial is the
/// plain serial reference kept for testing and benchmarking. Both return
/// identical results.
std::vector<ScoredEntry> top_k(const MemoryState& state,
                               std::span<const double> query,
                               const RetrievalConfig& cfg);
std::vector<ScoredEntry> top_k_serial(const MemoryState& state,
                                      std::span<const double> query,
                                      const RetrievalConfig& cfg);

/// Mean cosine distance from each vector to the normalized centroid of the
/// set. 0 for identical vectors; higher means a more heterogeneous task
/// stream. All vectors must be unit-norm and equally sized; the list must be
/// non-empty (InvalidInput).
double task_similarity_profile(const std::vector<std::vector<double>>& embeddings);

}  // namespace memstream
