#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace memstream {

/// Maps text to a unit-norm vector. Implementations must be deterministic
/// for a fixed input.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) const;
};

/// Default embedder: lowercase, split on non-alphanumerics, hash each token
/// into a bucket with FNV-1a 64, count, L2-normalize. Text with no tokens
/// maps to the guard vector (1, 0, 0, ...).
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 64);
  std::string name() const override { return "hash"; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

/// Remote encoder hook: POST {"texts": [...]} to an HTTP endpoint that
/// replies {"vectors": [[...], ...]}. Vectors are re-normalized on receipt.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::size_t dimension,
               double timeout_seconds = 30.0);
  std::string name() const override { return "http"; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) const override;

 private:
  std::string endpoint_;
  std::size_t dimension_;
  double timeout_seconds_;
};

/// name is "hash" or "http"; endpoint is required for "http".
std::shared_ptr<const Embedder> make_embedder(const std::string& name,
                                              std::size_t dimension,
                                              const std::string& endpoint = "");

}  // namespace memstream
