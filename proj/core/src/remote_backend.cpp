#include <algorithm>
#include <cmath>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tomsim/backend.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.origin = base_url;
  } else {
    ep.origin = base_url.substr(0, path_start);
    ep.prefix = base_url.substr(path_start);
  }
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

std::string api_path(const Endpoint& ep, std::string_view resource) {
  std::string path = ep.prefix;
  if (!(path.size() >= 3 && path.compare(path.size() - 3, 3, "/v1") == 0)) path += "/v1";
  path += resource;
  return path;
}

// POST with retry on transport failures, 429 and 5xx. Returns the body of
// the first 2xx response and the number of attempts used.
std::pair<std::string, std::size_t> post_json(const RemoteConfig& config, std::string_view resource,
                                              const std::string& body) {
  const auto ep = split_base_url(config.base_url);
  const auto path = api_path(ep, resource);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

  const std::size_t attempts = std::max<std::size_t>(1, config.retry.max_attempts);
  auto backoff = config.retry.initial_backoff;
  Error last(ErrorCode::TransportError, "no attempt made");
  for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last = Error(ErrorCode::TransportError,
                   "POST " + ep.origin + path + " failed: " + httplib::to_string(res.error()));
    } else if (res->status == 429) {
      last = Error(ErrorCode::RateLimited, "POST " + ep.origin + path + " rate limited (429)");
    } else if (res->status >= 500) {
      last = Error(ErrorCode::TransportError,
                   "POST " + ep.origin + path + " returned " + std::to_string(res->status));
    } else if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::TransportError, "POST " + ep.origin + path + " returned " +
                                                 std::to_string(res->status) + ": " + res->body);
    } else {
      return {res->body, attempt};
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * config.retry.multiplier)));
    }
  }
  throw last;
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(RemoteConfig config, std::shared_ptr<CallLog> log)
    : config_(std::move(config)), log_(std::move(log)) {}

RemoteChatBackend::~RemoteChatBackend() = default;

std::string RemoteChatBackend::complete(const GenerationRequest& request) {
  if (text::is_blank(request.prompt))
    throw Error(ErrorCode::PreconditionViolation, "generation prompt is empty");
  auto [body, attempts] = post_json(config_, "/chat/completions", chat_request_body(config_, request));
  std::string content;
  try {
    auto json = nlohmann::json::parse(body);
    const auto& message = json.at("choices").at(0).at("message");
    if (message.contains("content") && message["content"].is_string())
      content = message["content"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("malformed chat completion: ") + e.what());
  }
  if (text::is_blank(content))
    throw Error(ErrorCode::EmptyCompletion, "empty completion for tag '" + request.tag + "'");
  log_->append(CallRecord{request.tag, request.prompt, content, request.temperature, attempts});
  return content;
}

RemoteEmbeddingScorer::RemoteEmbeddingScorer(RemoteConfig config) : config_(std::move(config)) {}

std::vector<std::vector<double>> RemoteEmbeddingScorer::embed(const std::vector<std::string>& inputs) {
  nlohmann::json request = {{"model", config_.embedding_model}, {"input", inputs}};
  auto [body, attempts] = post_json(config_, "/embeddings", request.dump());
  (void)attempts;
  std::vector<std::vector<double>> out(inputs.size());
  try {
    auto json = nlohmann::json::parse(body);
    const auto& data = json.at("data");
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto index = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (index >= out.size()) throw Error(ErrorCode::TransportError, "embedding index out of range");
      out[index] = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("malformed embeddings response: ") + e.what());
  }
  return out;
}

double RemoteEmbeddingScorer::score(const SimilarityQuery& query) {
  if (query.a == query.b) return 1.0;
  auto vectors = embed({std::string(query.a), std::string(query.b)});
  return clamped_cosine(vectors[0], vectors[1]);
}

}  // namespace tomsim
