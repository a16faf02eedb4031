#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tomsim {

enum class BackendKind { RemoteChat, RemoteEmbedding, Scripted };

std::string_view backend_kind_name(BackendKind kind) noexcept;

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 512;
  std::string tag;  // template id (or a routing tag such as "virtual_response")
};

struct CallRecord {
  std::string tag;
  std::string prompt;
  std::string response;
  double temperature = 0.0;
  std::size_t attempts = 1;
};

// Append-only, thread-safe record of successful completions.
class CallLog {
 public:
  void append(CallRecord record);
  [[nodiscard]] std::vector<CallRecord> snapshot() const;
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::vector<CallRecord> with_tag(std::string_view tag) const;

 private:
  mutable std::mutex mutex_;
  std::vector<CallRecord> records_;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  // Returns a non-empty completion and appends it to the call log.
  virtual std::string complete(const GenerationRequest& request) = 0;
  [[nodiscard]] virtual BackendKind kind() const noexcept = 0;
  [[nodiscard]] virtual std::shared_ptr<CallLog> call_log() const = 0;
};

// Why a similarity score is requested. Scripted overrides can pin foresight
// (S) and virtual (S_v) scores per round; truth scores never use overrides.
enum class SimilarityKind { Foresight, Virtual, Truth };

struct SimilarityQuery {
  std::string_view a;
  std::string_view b;
  int round = 0;
  SimilarityKind kind = SimilarityKind::Foresight;
};

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  // Symmetric score in [0, 1].
  virtual double score(const SimilarityQuery& query) = 0;
  double score(std::string_view a, std::string_view b) {
    return score(SimilarityQuery{a, b, 0, SimilarityKind::Truth});
  }
};

// Token-set Jaccard over lowercase whitespace tokens; 1.0 for two empty sets.
double jaccard_similarity(std::string_view a, std::string_view b);

// Cosine similarity clamped to [0, 1]. Throws EmbeddingDimensionMismatch.
double clamped_cosine(const std::vector<double>& a, const std::vector<double>& b);

class JaccardScorer final : public SimilarityScorer {
 public:
  using SimilarityScorer::score;
  double score(const SimilarityQuery& query) override;
};

struct SimilarityOverride {
  int round = 0;
  SimilarityKind kind = SimilarityKind::Foresight;
  double value = 0.0;
};

// Canned responses grouped into per-tag FIFO queues, plus pinned similarity
// values. One instance belongs to exactly one episode.
class ScriptedBackend final : public TextGenerator, public SimilarityScorer {
 public:
  ScriptedBackend();
  explicit ScriptedBackend(std::shared_ptr<CallLog> log);

  void push(std::string tag, std::string response);
  void pin_similarity(int round, SimilarityKind kind, double value);

  std::string complete(const GenerationRequest& request) override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Scripted; }
  [[nodiscard]] std::shared_ptr<CallLog> call_log() const override { return log_; }

  using SimilarityScorer::score;
  double score(const SimilarityQuery& query) override;

  [[nodiscard]] std::size_t remaining(std::string_view tag) const;
  [[nodiscard]] std::size_t total_remaining() const;
  [[nodiscard]] std::vector<std::string> tags() const;

  // Fresh instance with the same queues and overrides and an empty log.
  [[nodiscard]] std::unique_ptr<ScriptedBackend> clone() const;

 private:
  std::shared_ptr<CallLog> log_;
  std::map<std::string, std::deque<std::string>, std::less<>> queues_;
  std::vector<SimilarityOverride> overrides_;
};

inline constexpr std::string_view kSimilarityTag = "__similarity__";

// Parses the JSON Lines script format:
//   {"tag": str, "response": str}
//   {"tag": "__similarity__", "round": int, "value": float, "which": "s" | "s_v"}
// Blank lines and lines starting with '#' are skipped.
// Throws ScriptParseError naming the 1-based line.
ScriptedBackend parse_script(std::string_view text);
ScriptedBackend load_script(const std::filesystem::path& path);

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct RemoteConfig {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  std::string model = "gpt-4-0125-preview";
  std::string embedding_model = "text-similarity-davinci-001";
  std::chrono::seconds timeout{120};
  RetryPolicy retry;

  // Reads TOMSIM_BASE_URL and TOMSIM_API_KEY when set.
  static RemoteConfig from_environment();
};

// OpenAI-compatible POST /v1/chat/completions.
class RemoteChatBackend final : public TextGenerator {
 public:
  explicit RemoteChatBackend(RemoteConfig config,
                             std::shared_ptr<CallLog> log = std::make_shared<CallLog>());
  ~RemoteChatBackend() override;

  std::string complete(const GenerationRequest& request) override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::RemoteChat; }
  [[nodiscard]] std::shared_ptr<CallLog> call_log() const override { return log_; }

 private:
  RemoteConfig config_;
  std::shared_ptr<CallLog> log_;
};

// OpenAI-compatible POST /v1/embeddings; score = clamped cosine.
class RemoteEmbeddingScorer final : public SimilarityScorer {
 public:
  explicit RemoteEmbeddingScorer(RemoteConfig config);

  using SimilarityScorer::score;
  double score(const SimilarityQuery& query) override;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs);

 private:
  RemoteConfig config_;
};

// Request body for chat completions; exposed for fixture-server tests.
std::string chat_request_body(const RemoteConfig& config, const GenerationRequest& request);

}  // namespace tomsim
