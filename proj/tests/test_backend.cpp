#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "memstream/backend.hpp"
#include "memstream/errors.hpp"

using namespace memstream;

TEST_CASE("scripted rules match in declaration order, first match wins") {
  ScriptedBackend backend({
      {ScriptedRule::Match::Contains, "alpha", {"A"}},
      {ScriptedRule::Match::Contains, "beta", {"B"}},
      {ScriptedRule::Match::Always, "", {"Z"}},
  });
  CHECK(backend.complete("has alpha and beta") == "A");
  CHECK(backend.complete("only beta") == "B");
  CHECK(backend.complete("neither") == "Z");
  CHECK(backend.calls() == 3);
}

TEST_CASE("scripted responses rotate round-robin per rule") {
  ScriptedBackend backend({
      {ScriptedRule::Match::Always, "", {"one", "two", "three"}},
  });
  CHECK(backend.complete("x") == "one");
  CHECK(backend.complete("x") == "two");
  CHECK(backend.complete("x") == "three");
  CHECK(backend.complete("x") == "one");
}

TEST_CASE("no matching rule yields UNMATCHED") {
  ScriptedBackend backend({
      {ScriptedRule::Match::Exact, "exact text", {"hit"}},
  });
  CHECK(backend.complete("something else") == "UNMATCHED");
  CHECK(backend.complete("exact text") == "hit");
}

TEST_CASE("scripted backend validates construction and input") {
  CHECK_THROWS_AS(ScriptedBackend({{ScriptedRule::Match::Always, "", {}}}),
                  InvalidInput);
  CHECK_THROWS_AS(ScriptedBackend({{ScriptedRule::Match::Contains, "", {"r"}}}),
                  InvalidInput);
  ScriptedBackend ok({});
  CHECK_THROWS_AS(ok.complete(""), InvalidInput);
}

TEST_CASE("scripted rules load from JSON") {
  const std::string text = R"({"rules": [
    {"match": {"kind": "contains", "text": "goal"}, "responses": ["yes"]},
    {"match": {"kind": "always"}, "responses": ["no", "maybe"]}
  ]})";
  ScriptedBackend backend(ScriptedBackend::rules_from_json_string(text));
  CHECK(backend.complete("the goal here") == "yes");
  CHECK(backend.complete("other") == "no");
  CHECK(backend.complete("other") == "maybe");

  CHECK_THROWS_AS(ScriptedBackend::rules_from_json_string("not json"), ConfigError);
  CHECK_THROWS_AS(ScriptedBackend::rules_from_json_string(R"({"no_rules": 1})"),
                  ConfigError);
  CHECK_THROWS_AS(ScriptedBackend::rules_from_json_string(
                      R"({"rules": [{"match": {"kind": "bogus"}, "responses": ["x"]}]})"),
                  ConfigError);
}

TEST_CASE("scripted cursors checkpoint and restore") {
  ScriptedBackend backend({
      {ScriptedRule::Match::Contains, "a", {"1", "2", "3"}},
      {ScriptedRule::Match::Always, "", {"x", "y"}},
  });
  backend.complete("a");
  backend.complete("a");
  backend.complete("other");
  const std::string state = backend.checkpoint_state();
  CHECK(state == "2,1");

  ScriptedBackend fresh({
      {ScriptedRule::Match::Contains, "a", {"1", "2", "3"}},
      {ScriptedRule::Match::Always, "", {"x", "y"}},
  });
  fresh.restore_checkpoint_state(state);
  CHECK(fresh.complete("a") == "3");
  CHECK(fresh.complete("other") == "y");

  CHECK_THROWS_AS(fresh.restore_checkpoint_state("1,2,3"), SnapshotError);
}

namespace {

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit StubServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    thread.join();
  }

  HttpBackendConfig config() const {
    HttpBackendConfig cfg;
    cfg.endpoint =
        "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "stub-model";
    cfg.timeout_seconds = 5;
    cfg.backoff_base_seconds = 0.01;  // keep test wall time negligible
    return cfg;
  }
};

std::string completion_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array(
      {nlohmann::json{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

}  // namespace

TEST_CASE("http backend posts a chat completion and reads the reply") {
  std::string seen_body, seen_auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(completion_body("hello back"), "application/json");
  });
  setenv("MEMSTREAM_API_KEY", "sk-test-123", 1);
  HttpBackend backend(stub.config());
  CHECK(backend.complete("hello there") == "hello back");
  unsetenv("MEMSTREAM_API_KEY");

  const auto body = nlohmann::json::parse(seen_body);
  CHECK(body.at("model") == "stub-model");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").at(0).at("role") == "user");
  CHECK(body.at("messages").at(0).at("content") == "hello there");
  CHECK(seen_auth == "Bearer sk-test-123");
}

TEST_CASE("http backend retries 5xx with backoff and then succeeds") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++hits;
    if (n <= 2) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
    } else {
      res.set_content(completion_body("third time lucky"), "application/json");
    }
  });
  auto cfg = stub.config();
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  CHECK(backend.complete("q") == "third time lucky");
  CHECK(hits.load() == 3);
}

TEST_CASE("http backend gives up after max_retries") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  auto cfg = stub.config();
  cfg.max_retries = 1;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.complete("q"), BackendError);
  CHECK(hits.load() == 2);  // first try + one retry
}

TEST_CASE("http backend never retries 4xx") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 404;
  });
  auto cfg = stub.config();
  cfg.max_retries = 3;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.complete("q"), BackendError);
  CHECK(hits.load() == 1);
}

TEST_CASE("http backend rejects malformed response bodies without retrying") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  auto cfg = stub.config();
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.complete("q"), BackendError);
  CHECK(hits.load() == 1);
}

TEST_CASE("http backend surfaces connection failures as BackendError") {
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";  // nothing listens
  cfg.model = "m";
  cfg.max_retries = 1;
  cfg.backoff_base_seconds = 0.01;
  cfg.timeout_seconds = 1;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.complete("q"), BackendError);
}
