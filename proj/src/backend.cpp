#include "memstream/backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

// ScriptedBackend

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules)
    : rules_(std::move(rules)), cursors_(rules_.size(), 0) {
  for (const auto& r : rules_) {
    if (r.responses.empty()) {
      throw InvalidInput("scripted rule has no responses");
    }
    if (r.match != ScriptedRule::Match::Always && r.text.empty()) {
      throw InvalidInput("scripted rule needs match text");
    }
  }
}

std::vector<ScriptedRule> ScriptedBackend::rules_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scripted rules are not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
    throw ConfigError("scripted rules file must be {\"rules\": [...]}");
  }
  std::vector<ScriptedRule> rules;
  for (const auto& rj : j["rules"]) {
    ScriptedRule r;
    const auto& m = rj.at("match");
    std::string kind = m.at("kind").get<std::string>();
    if (kind == "exact") {
      r.match = ScriptedRule::Match::Exact;
      r.text = m.at("text").get<std::string>();
    } else if (kind == "contains") {
      r.match = ScriptedRule::Match::Contains;
      r.text = m.at("text").get<std::string>();
    } else if (kind == "always") {
      r.match = ScriptedRule::Match::Always;
    } else {
      throw ConfigError("unknown scripted match kind: " + kind);
    }
    r.responses = rj.at("responses").get<std::vector<std::string>>();
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<ScriptedRule> ScriptedBackend::rules_from_json_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scripted rules: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return rules_from_json_string(buf.str());
}

std::string ScriptedBackend::complete(const std::string& prompt) {
  if (prompt.empty()) throw InvalidInput("complete: empty prompt");
  std::lock_guard<std::mutex> lk(mu_);
  ++calls_;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    bool hit = false;
    switch (r.match) {
      case ScriptedRule::Match::Exact: hit = (prompt == r.text); break;
      case ScriptedRule::Match::Contains: hit = (prompt.find(r.text) != std::string::npos); break;
      case ScriptedRule::Match::Always: hit = true; break;
    }
    if (hit) {
      const std::string& resp = r.responses[cursors_[i] % r.responses.size()];
      ++cursors_[i];
      return resp;
    }
  }
  return "UNMATCHED";
}

std::string ScriptedBackend::checkpoint_state() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<std::string> parts;
  parts.reserve(cursors_.size());
  for (std::size_t c : cursors_) parts.push_back(std::to_string(c));
  return util::join(parts, ",");
}

void ScriptedBackend::restore_checkpoint_state(const std::string& state) {
  std::lock_guard<std::mutex> lk(mu_);
  if (state.empty()) {
    std::fill(cursors_.begin(), cursors_.end(), 0);
    return;
  }
  auto parts = util::split(state, ',');
  if (parts.size() != cursors_.size()) {
    throw SnapshotError("scripted backend checkpoint does not match rule count");
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    cursors_[i] = static_cast<std::size_t>(std::stoull(parts[i]));
  }
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard<std::mutex> lk(mu_);
  return calls_;
}

// HttpBackend

namespace {

std::pair<std::string, std::string> split_url(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("backend endpoint must be a full URL: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("http backend requires an endpoint");
  if (cfg_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string HttpBackend::complete(const std::string& prompt) {
  if (prompt.empty()) throw InvalidInput("complete: empty prompt");

  auto [base, path] = split_url(cfg_.endpoint);
  nlohmann::json body;
  body["model"] = cfg_.model;
  body["messages"] = nlohmann::json::array({
      nlohmann::json{{"role", "user"}, {"content", prompt}},
  });
  body["temperature"] = cfg_.temperature;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = cfg_.backoff_base_seconds * std::pow(2.0, attempt - 1);
      util::log(util::LogLevel::Warn,
                "backend retry " + std::to_string(attempt) + "/" +
                    std::to_string(cfg_.max_retries) + " after " + last_error);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }

    httplib::Client client(base);
    client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(cfg_.timeout_seconds), 0);
    client.set_write_timeout(static_cast<time_t>(cfg_.timeout_seconds), 0);

    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error (" + httplib::to_string(res.error()) + ")";
      continue;  // timeouts and connection failures are retryable
    }
    if (res->status >= 500 && res->status < 600) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("backend returned status " + std::to_string(res->status));
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw BackendError(std::string("backend response is malformed: ") + e.what());
    }
  }
  throw BackendError("backend retries exhausted: " + last_error);
}

}  // namespace memstream
