#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "memstream/harness.hpp"

namespace memstream {

/// Everything cmd_run needs: a fully constructed StreamSpec (backend and
/// embedder included) plus operator settings that sit outside the stream.
struct CliConfig {
  StreamSpec spec;
  std::string log_level = "info";
  std::string embedder_name = "hash";
  std::size_t embedder_dimension = 64;
  std::string embedder_endpoint;
  std::string backend_kind = "scripted";
  std::string backend_rules;  // path, resolved against the config directory
  HttpBackendConfig http;
};

/// Loads a JSON config file and applies dotted-path overrides
/// ("retrieval.k=8", "ordering=shuffled") before validation. Override values
/// parse as JSON when possible, else as strings. Unknown keys anywhere are
/// ConfigError. Relative tasks/rules paths resolve against the config file's
/// directory; output_dir is taken as given.
CliConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Same, from an already-parsed document (base_dir resolves relative paths).
CliConfig config_from_json(nlohmann::json doc, const std::filesystem::path& base_dir);

/// The fully defaulted config, as written to config.resolved.json. Never
/// contains the API key, only the name of the environment variable.
nlohmann::ordered_json config_to_json(const CliConfig& cfg);

}  // namespace memstream
