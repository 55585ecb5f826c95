#include "memstream/embedder.hpp"

#include <cctype>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "memstream/errors.hpp"
#include "memstream/util.hpp"

namespace memstream {

namespace {

std::vector<double> guard_vector(std::size_t dimension) {
  std::vector<double> v(dimension, 0.0);
  v[0] = 1.0;
  return v;
}

void l2_normalize_or_guard(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    v = guard_vector(v.size());
    return;
  }
  for (double& x : v) x /= norm;
}

/// Splits endpoint "http://host:port/path" into (base, path).
std::pair<std::string, std::string> split_url(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidInput("endpoint must start with http://: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

std::vector<std::vector<double>> Embedder::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw InvalidInput("embedder dimension must be positive");
}

std::vector<double> HashEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  std::string token;
  bool any = false;
  auto flush = [&] {
    if (token.empty()) return;
    v[util::fnv1a64(token) % dimension_] += 1.0;
    any = true;
    token.clear();
  };
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      token.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  if (!any) return guard_vector(dimension_);
  l2_normalize_or_guard(v);
  return v;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, std::size_t dimension,
                           double timeout_seconds)
    : endpoint_(std::move(endpoint)),
      dimension_(dimension),
      timeout_seconds_(timeout_seconds) {
  if (dimension_ == 0) throw InvalidInput("embedder dimension must be positive");
  if (endpoint_.empty()) throw InvalidInput("http embedder requires an endpoint");
}

std::vector<double> HttpEmbedder::embed(std::string_view text) const {
  return embed_batch({std::string(text)})[0];
}

std::vector<std::vector<double>> HttpEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
  auto [base, path] = split_url(endpoint_);
  httplib::Client client(base);
  client.set_connection_timeout(static_cast<time_t>(timeout_seconds_),
                                static_cast<time_t>((timeout_seconds_ - static_cast<time_t>(timeout_seconds_)) * 1e6));
  client.set_read_timeout(static_cast<time_t>(timeout_seconds_), 0);

  nlohmann::json body;
  body["texts"] = texts;
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw BackendError("embedder endpoint unreachable: " + endpoint_);
  if (res->status != 200) {
    throw BackendError("embedder endpoint returned status " + std::to_string(res->status));
  }

  std::vector<std::vector<double>> vectors;
  try {
    auto j = nlohmann::json::parse(res->body);
    vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const std::exception& e) {
    throw BackendError(std::string("embedder response is malformed: ") + e.what());
  }
  if (vectors.size() != texts.size()) {
    throw BackendError("embedder returned wrong vector count");
  }
  for (auto& v : vectors) {
    if (v.size() != dimension_) {
      throw InvalidEmbedding("embedder returned wrong dimension: " +
                             std::to_string(v.size()));
    }
    l2_normalize_or_guard(v);
  }
  return vectors;
}

std::shared_ptr<const Embedder> make_embedder(const std::string& name,
                                              std::size_t dimension,
                                              const std::string& endpoint) {
  if (name == "hash") return std::make_shared<HashEmbedder>(dimension);
  if (name == "http") return std::make_shared<HttpEmbedder>(endpoint, dimension);
  throw ConfigError("unknown embedder: " + name);
}

}  // namespace memstream
