#include "memstream/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "memstream/errors.hpp"

namespace memstream {

namespace {

bool eligible(const MemoryEntry& e, const RetrievalConfig& cfg) {
  if (!e.active) return false;
  if (cfg.exclude_failures && e.feedback.outcome == Outcome::Failure) return false;
  return true;
}

void validate_query(std::span<const double> query, const RetrievalConfig& cfg) {
  if (cfg.k < 1) throw InvalidInput("retrieval k must be positive");
  if (!is_unit_vector(query)) throw InvalidEmbedding("top_k: query is not unit-norm");
}

bool better(const ScoredEntry& a, const ScoredEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.entry_id > b.entry_id;  // tie: more recent wins
}

std::vector<ScoredEntry> select_top(std::vector<ScoredEntry> scored, std::size_t k) {
  if (scored.size() > k) {
    std::nth_element(scored.begin(), scored.begin() + k, scored.end(), better);
    scored.resize(k);
  }
  std::sort(scored.begin(), scored.end(), better);
  return scored;
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<ScoredEntry> top_k(const MemoryState& state,
                               std::span<const double> query,
                               const RetrievalConfig& cfg) {
  validate_query(query, cfg);
  const auto& entries = state.entries();

  std::vector<std::size_t> idx;
  idx.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (eligible(entries[i], cfg)) {
      if (entries[i].embedding.size() != query.size()) {
        throw InvalidInput("top_k: entry embedding dimension mismatch");
      }
      idx.push_back(i);
    }
  }

  std::vector<double> scores(idx.size());
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    scores[i] = cosine(query, entries[idx[i]].embedding);
  }

  std::vector<ScoredEntry> scored;
  scored.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (cfg.min_score && scores[i] < *cfg.min_score) continue;
    scored.push_back({entries[idx[i]].id, scores[i]});
  }
  return select_top(std::move(scored), static_cast<std::size_t>(cfg.k));
}

std::vector<ScoredEntry> top_k_serial(const MemoryState& state,
                                      std::span<const double> query,
                                      const RetrievalConfig& cfg) {
  validate_query(query, cfg);
  std::vector<ScoredEntry> scored;
  for (const auto& e : state.entries()) {
    if (!eligible(e, cfg)) continue;
    if (e.embedding.size() != query.size()) {
      throw InvalidInput("top_k: entry embedding dimension mismatch");
    }
    double s = cosine(query, e.embedding);
    if (cfg.min_score && s < *cfg.min_score) continue;
    scored.push_back({e.id, s});
  }
  std::sort(scored.begin(), scored.end(), better);
  if (scored.size() > static_cast<std::size_t>(cfg.k)) {
    scored.resize(static_cast<std::size_t>(cfg.k));
  }
  return scored;
}

double task_similarity_profile(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.empty()) throw InvalidInput("task_similarity_profile: empty input");
  const std::size_t dim = embeddings[0].size();
  for (const auto& v : embeddings) {
    if (v.size() != dim) throw InvalidInput("task_similarity_profile: mixed dimensions");
    if (!is_unit_vector(v)) throw InvalidEmbedding("task_similarity_profile: non-unit vector");
  }

  std::vector<double> centroid(dim, 0.0);
  for (const auto& v : embeddings) {
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += v[d];
  }
  double sq = 0.0;
  for (double x : centroid) sq += x * x;
  double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    // Degenerate set (vectors cancel); same guard direction the embedder uses.
    centroid.assign(dim, 0.0);
    centroid[0] = 1.0;
  } else {
    for (double& x : centroid) x /= norm;
  }

  std::vector<double> cosines(embeddings.size());
  const std::int64_t n = static_cast<std::int64_t>(embeddings.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    cosines[i] = cosine(centroid, embeddings[i]);
  }
  double acc = 0.0;
  for (double c : cosines) acc += 1.0 - c;
  return acc / static_cast<double>(embeddings.size());
}

}  // namespace memstream
