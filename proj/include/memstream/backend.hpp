#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace memstream {

/// A completion backend. complete() is synchronous and throws BackendError
/// on unrecoverable failures; prompts must be non-empty (InvalidInput).
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string kind() const = 0;

  /// Opaque state for checkpoint/resume; stateless backends return "".
  virtual std::string checkpoint_state() const { return ""; }
  virtual void restore_checkpoint_state(const std::string&) {}
};

struct ScriptedRule {
  enum class Match { Exact, Contains, Always };
  Match match = Match::Always;
  std::string text;                    // unused for Always
  std::vector<std::string> responses;  // consumed round-robin
};

/// Deterministic backend for tests and offline runs. Rules are evaluated in
/// declaration order; the first match wins and serves its responses
/// round-robin. No match returns the literal string "UNMATCHED".
class ScriptedBackend final : public ModelBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedRule> rules);

  /// Loads {"rules": [{"match": {"kind": ..., "text": ...},
  ///                   "responses": [...]}, ...]}.
  static std::vector<ScriptedRule> rules_from_json_file(
      const std::filesystem::path& path);
  static std::vector<ScriptedRule> rules_from_json_string(const std::string& text);

  std::string complete(const std::string& prompt) override;
  std::string kind() const override { return "scripted"; }

  std::string checkpoint_state() const override;
  void restore_checkpoint_state(const std::string& state) override;

  std::size_t calls() const;

 private:
  std::vector<ScriptedRule> rules_;
  std::vector<std::size_t> cursors_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

struct HttpBackendConfig {
  std::string endpoint;   // full URL, e.g. http://host:1234/v1/chat/completions
  std::string model;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double temperature = 0.0;
  double backoff_base_seconds = 0.5;  // doubled per retry
  std::string api_key_env = "MEMSTREAM_API_KEY";
};

/// Chat-completions client. POSTs {model, messages, temperature}; retries
/// timeouts and 5xx responses with exponential backoff (base 0.5s, factor 2)
/// up to max_retries; 4xx responses are never retried. The API key is read
/// from the configured environment variable and is never logged.
class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  std::string complete(const std::string& prompt) override;
  std::string kind() const override { return "http"; }

 private:
  HttpBackendConfig cfg_;
};

}  // namespace memstream
