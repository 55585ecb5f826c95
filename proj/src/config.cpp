#include "memstream/config.hpp"

#include <fstream>
#include <map>
#include <set>

#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"", {"run_id", "tasks", "output_dir", "ordering", "shuffle_seed", "policy",
          "log_level", "stop_after", "resume", "checkpoint_every", "memory",
          "retrieval", "embedder", "agent", "backend", "env"}},
    {"memory", {"capacity", "ingest_failures", "history_window"}},
    {"retrieval", {"k", "min_score", "exclude_failures"}},
    {"embedder", {"name", "dimension", "endpoint"}},
    {"agent", {"max_ops", "prompt_budget", "mode", "instructions", "demonstrations"}},
    {"backend", {"kind", "rules", "endpoint", "model", "timeout_seconds",
                 "max_retries", "temperature", "backoff_base_seconds", "api_key_env"}},
    {"env", {"step_cap"}},
};

void check_keys(const nlohmann::json& obj, const std::string& scope) {
  if (!obj.is_object()) {
    throw ConfigError("config section '" + (scope.empty() ? "<top>" : scope) +
                      "' must be an object");
  }
  const auto it = kSchema.find(scope);
  for (const auto& [key, value] : obj.items()) {
    if (!it->second.count(key)) {
      throw ConfigError("unknown config key: " +
                        (scope.empty() ? key : scope + "." + key));
    }
    if (kSchema.count(key) && scope.empty()) check_keys(value, key);
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // bare words stay strings
  }
  nlohmann::json* node = &doc;
  const auto parts = util::split(path, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError("bad override path: " + path);
    node = &(*node)[parts[i]];
  }
  if (parts.back().empty()) throw ConfigError("bad override path: " + path);
  (*node)[parts.back()] = value;
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
  }
}

nlohmann::json section(const nlohmann::json& doc, const std::string& name) {
  return doc.contains(name) ? doc.at(name) : nlohmann::json::object();
}

}  // namespace

CliConfig config_from_json(nlohmann::json doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "");
  CliConfig cfg;
  StreamSpec& spec = cfg.spec;

  try {
    spec.run_id = get_or<std::string>(doc, "run_id", "run");
    const std::string tasks = get_or<std::string>(doc, "tasks", "");
    if (tasks.empty()) throw ConfigError("config needs a 'tasks' file path");
    std::filesystem::path tp(tasks);
    spec.tasks_path = tp.is_absolute() ? tp : base_dir / tp;
    spec.output_dir = get_or<std::string>(doc, "output_dir", "");
    spec.ordering = ordering_from_name(get_or<std::string>(doc, "ordering", "given"));
    spec.shuffle_seed = get_or<std::uint64_t>(doc, "shuffle_seed", 0);
    spec.policy = policy_from_name(get_or<std::string>(doc, "policy", "baseline"));
    cfg.log_level = get_or<std::string>(doc, "log_level", "info");
    util::log_level_from_name(cfg.log_level);  // validate early
    spec.stop_after = get_or<std::size_t>(doc, "stop_after", 0);
    spec.resume = get_or<bool>(doc, "resume", false);
    spec.checkpoint_every = get_or<int>(doc, "checkpoint_every", 10);

    const auto mem = section(doc, "memory");
    if (mem.contains("capacity") && !mem.at("capacity").is_null()) {
      spec.memory_capacity = mem.at("capacity").get<std::size_t>();
    }
    spec.ingest_failures = get_or<bool>(mem, "ingest_failures", false);
    spec.history_window = get_or<std::size_t>(mem, "history_window", 5);

    const auto ret = section(doc, "retrieval");
    spec.retrieval.k = get_or<int>(ret, "k", 4);
    if (ret.contains("min_score") && !ret.at("min_score").is_null()) {
      spec.retrieval.min_score = ret.at("min_score").get<double>();
    }
    spec.retrieval.exclude_failures = get_or<bool>(ret, "exclude_failures", false);
    if (spec.retrieval.k < 1) throw ConfigError("retrieval.k must be positive");

    const auto emb = section(doc, "embedder");
    cfg.embedder_name = get_or<std::string>(emb, "name", "hash");
    cfg.embedder_dimension = get_or<std::size_t>(emb, "dimension", 64);
    cfg.embedder_endpoint = get_or<std::string>(emb, "endpoint", "");

    const auto agent = section(doc, "agent");
    spec.agent.max_ops = get_or<int>(agent, "max_ops", 6);
    spec.agent.prompt_budget = get_or<std::size_t>(agent, "prompt_budget", 8000);
    spec.agent_mode = agent_mode_from_name(get_or<std::string>(agent, "mode", "auto"));
    spec.agent.instructions = get_or<std::string>(agent, "instructions", "");
    spec.agent.demonstrations = get_or<std::string>(agent, "demonstrations", "");
    if (spec.agent.max_ops < 1) throw ConfigError("agent.max_ops must be positive");

    const auto back = section(doc, "backend");
    cfg.backend_kind = get_or<std::string>(back, "kind", "scripted");
    if (cfg.backend_kind == "scripted") {
      const bool rules_path = back.contains("rules") && back.at("rules").is_string() &&
                              !back.at("rules").get<std::string>().empty();
      if (rules_path) {
        std::filesystem::path rp(back.at("rules").get<std::string>());
        cfg.backend_rules = (rp.is_absolute() ? rp : base_dir / rp).string();
        cfg.spec.backend = std::make_shared<ScriptedBackend>(
            ScriptedBackend::rules_from_json_file(cfg.backend_rules));
      } else if (back.contains("rules") && !back.at("rules").is_string()) {
        nlohmann::json wrapped;
        wrapped["rules"] = back.at("rules");
        cfg.spec.backend = std::make_shared<ScriptedBackend>(
            ScriptedBackend::rules_from_json_string(wrapped.dump()));
      } else {
        cfg.spec.backend =
            std::make_shared<ScriptedBackend>(std::vector<ScriptedRule>{});
      }
    } else if (cfg.backend_kind == "http") {
      cfg.http.endpoint = get_or<std::string>(back, "endpoint", "");
      cfg.http.model = get_or<std::string>(back, "model", "");
      if (cfg.http.endpoint.empty() || cfg.http.model.empty()) {
        throw ConfigError("http backend needs endpoint and model");
      }
      cfg.http.timeout_seconds = get_or<double>(back, "timeout_seconds", 30.0);
      cfg.http.max_retries = get_or<int>(back, "max_retries", 2);
      cfg.http.temperature = get_or<double>(back, "temperature", 0.0);
      cfg.http.backoff_base_seconds = get_or<double>(back, "backoff_base_seconds", 0.5);
      cfg.http.api_key_env =
          get_or<std::string>(back, "api_key_env", "MEMSTREAM_API_KEY");
      cfg.spec.backend = std::make_shared<HttpBackend>(cfg.http);
    } else {
      throw ConfigError("backend.kind must be 'scripted' or 'http'");
    }

    const auto env = section(doc, "env");
    spec.env_step_cap = get_or<int>(env, "step_cap", 30);
    if (spec.env_step_cap < 1) throw ConfigError("env.step_cap must be positive");

    cfg.spec.embedder =
        make_embedder(cfg.embedder_name, cfg.embedder_dimension, cfg.embedder_endpoint);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config has a wrongly typed value: ") + e.what());
  }
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(std::move(doc), path.parent_path());
}

nlohmann::ordered_json config_to_json(const CliConfig& cfg) {
  const StreamSpec& spec = cfg.spec;
  nlohmann::ordered_json j;
  j["run_id"] = spec.run_id;
  j["tasks"] = spec.tasks_path.string();
  j["output_dir"] = spec.output_dir.string();
  j["ordering"] = ordering_name(spec.ordering);
  j["shuffle_seed"] = spec.shuffle_seed;
  j["policy"] = policy_name(spec.policy);
  j["log_level"] = cfg.log_level;
  j["stop_after"] = spec.stop_after;
  j["resume"] = spec.resume;
  j["checkpoint_every"] = spec.checkpoint_every;
  j["memory"] = {{"capacity", spec.memory_capacity
                                  ? nlohmann::ordered_json(*spec.memory_capacity)
                                  : nlohmann::ordered_json(nullptr)},
                 {"ingest_failures", spec.ingest_failures},
                 {"history_window", spec.history_window}};
  j["retrieval"] = {{"k", spec.retrieval.k},
                    {"min_score", spec.retrieval.min_score
                                      ? nlohmann::ordered_json(*spec.retrieval.min_score)
                                      : nlohmann::ordered_json(nullptr)},
                    {"exclude_failures", spec.retrieval.exclude_failures}};
  j["embedder"] = {{"name", cfg.embedder_name},
                   {"dimension", cfg.embedder_dimension},
                   {"endpoint", cfg.embedder_endpoint}};
  j["agent"] = {{"max_ops", spec.agent.max_ops},
                {"prompt_budget", spec.agent.prompt_budget},
                {"mode", agent_mode_name(spec.agent_mode)},
                {"instructions", spec.agent.instructions},
                {"demonstrations", spec.agent.demonstrations}};
  if (cfg.backend_kind == "http") {
    j["backend"] = {{"kind", "http"},
                    {"endpoint", cfg.http.endpoint},
                    {"model", cfg.http.model},
                    {"timeout_seconds", cfg.http.timeout_seconds},
                    {"max_retries", cfg.http.max_retries},
                    {"temperature", cfg.http.temperature},
                    {"backoff_base_seconds", cfg.http.backoff_base_seconds},
                    {"api_key_env", cfg.http.api_key_env}};
  } else {
    j["backend"] = {{"kind", "scripted"}, {"rules", cfg.backend_rules}};
  }
  j["env"] = {{"step_cap", spec.env_step_cap}};
  return j;
}

}  // namespace memstream
