#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tomsim/backend.hpp"

namespace tomsim {
namespace {

// Local OpenAI-compatible server whose first `failures` chat requests answer
// with `failure_status`.
class FixtureServer {
 public:
  FixtureServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++chat_requests;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (failures > 0) {
        --failures;
        res.status = failure_status;
        res.set_content("{\"error\": \"boom\"}", "application/json");
        return;
      }
      nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      const auto& input = body.at("input");
      for (std::size_t i = 0; i < input.size(); ++i) {
        // Deterministic toy embedding: [len, count of 'a'].
        const auto s = input[i].get<std::string>();
        data.push_back({{"index", i},
                        {"embedding", {static_cast<double>(s.size()),
                                       static_cast<double>(std::count(s.begin(), s.end(), 'a'))}}});
      }
      res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureServer() {
    server_.stop();
    thread_.join();
  }

  [[nodiscard]] RemoteConfig config() const {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.api_key = "test-key";
    c.model = "fixture-model";
    c.timeout = std::chrono::seconds(5);
    c.retry.initial_backoff = std::chrono::milliseconds(1);
    return c;
  }

  std::atomic<int> chat_requests{0};
  std::atomic<int> failures{0};
  int failure_status = 500;
  std::string content = "hello there";
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(RemoteChat, RequestShapeAndLog) {
  FixtureServer server;
  RemoteChatBackend chat(server.config());
  EXPECT_EQ(chat.complete({"the prompt", 0.0, 64, "judgment"}), "hello there");
  const auto body = nlohmann::json::parse(server.last_body);
  EXPECT_EQ(body["model"], "fixture-model");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "the prompt");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_EQ(server.last_auth, "Bearer test-key");
  const auto log = chat.call_log()->snapshot();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].tag, "judgment");
  EXPECT_EQ(log[0].attempts, 1u);
}

TEST(RemoteChat, RetriesServerErrorsWithoutDuplicatingLog) {
  FixtureServer server;
  server.failures = 2;
  RemoteChatBackend chat(server.config());
  EXPECT_EQ(chat.complete({"p", 0.7, 16, "t"}), "hello there");
  EXPECT_EQ(server.chat_requests, 3);
  const auto log = chat.call_log()->snapshot();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].attempts, 3u);
}

TEST(RemoteChat, RateLimitExhaustsRetries) {
  FixtureServer server;
  server.failures = 10;
  server.failure_status = 429;
  RemoteChatBackend chat(server.config());
  EXPECT_TOMSIM_ERROR(chat.complete({"p", 0.7, 16, "t"}), RateLimited);
  EXPECT_EQ(server.chat_requests, 3);
  EXPECT_EQ(chat.call_log()->size(), 0u);
}

TEST(RemoteChat, ClientErrorIsNotRetried) {
  FixtureServer server;
  server.failures = 1;
  server.failure_status = 400;
  RemoteChatBackend chat(server.config());
  EXPECT_TOMSIM_ERROR(chat.complete({"p", 0.7, 16, "t"}), TransportError);
  EXPECT_EQ(server.chat_requests, 1);
}

TEST(RemoteChat, EmptyCompletion) {
  FixtureServer server;
  server.content = "  ";
  RemoteChatBackend chat(server.config());
  EXPECT_TOMSIM_ERROR(chat.complete({"p", 0.7, 16, "t"}), EmptyCompletion);
}

TEST(RemoteChat, UnreachableHost) {
  RemoteConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.timeout = std::chrono::seconds(1);
  c.retry.max_attempts = 1;
  RemoteChatBackend chat(c);
  EXPECT_TOMSIM_ERROR(chat.complete({"p", 0.7, 16, "t"}), TransportError);
}

TEST(RemoteEmbedding, ClampedCosineOfReturnedVectors) {
  FixtureServer server;
  RemoteEmbeddingScorer scorer(server.config());
  // "aa" -> [2, 2], "ab" -> [2, 1]; cosine = 6 / (sqrt(8) * sqrt(5)).
  EXPECT_NEAR(scorer.score("aa", "ab"), 6.0 / (std::sqrt(8.0) * std::sqrt(5.0)), 1e-12);
  EXPECT_DOUBLE_EQ(scorer.score("same", "same"), 1.0);
}

}  // namespace
}  // namespace tomsim
