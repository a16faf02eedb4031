#include "tomsim/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

std::string_view backend_kind_name(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::RemoteChat: return "remote_chat";
    case BackendKind::RemoteEmbedding: return "remote_embedding";
    case BackendKind::Scripted: return "scripted";
  }
  return "scripted";
}

void CallLog::append(CallRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<CallRecord> CallLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<CallRecord> CallLog::with_tag(std::string_view tag) const {
  std::lock_guard lock(mutex_);
  std::vector<CallRecord> out;
  for (const auto& r : records_)
    if (r.tag == tag) out.push_back(r);
  return out;
}

double jaccard_similarity(std::string_view a, std::string_view b) {
  std::set<std::string> sa, sb;
  for (auto& t : text::split_whitespace(a)) sa.insert(text::to_lower(t));
  for (auto& t : text::split_whitespace(b)) sb.insert(text::to_lower(t));
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

double clamped_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw Error(ErrorCode::EmbeddingDimensionMismatch,
                "embedding sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double JaccardScorer::score(const SimilarityQuery& query) {
  return jaccard_similarity(query.a, query.b);
}

ScriptedBackend::ScriptedBackend() : ScriptedBackend(std::make_shared<CallLog>()) {}

ScriptedBackend::ScriptedBackend(std::shared_ptr<CallLog> log) : log_(std::move(log)) {}

void ScriptedBackend::push(std::string tag, std::string response) {
  queues_[std::move(tag)].push_back(std::move(response));
}

void ScriptedBackend::pin_similarity(int round, SimilarityKind kind, double value) {
  overrides_.push_back(SimilarityOverride{round, kind, std::clamp(value, 0.0, 1.0)});
}

std::string ScriptedBackend::complete(const GenerationRequest& request) {
  auto it = queues_.find(request.tag);
  if (it == queues_.end() || it->second.empty())
    throw Error(ErrorCode::ScriptExhausted, "no scripted response left for tag '" + request.tag + "'");
  std::string response = std::move(it->second.front());
  it->second.pop_front();
  if (text::is_blank(response))
    throw Error(ErrorCode::EmptyCompletion, "scripted response for tag '" + request.tag + "' is empty");
  log_->append(CallRecord{request.tag, request.prompt, response, request.temperature, 1});
  return response;
}

double ScriptedBackend::score(const SimilarityQuery& query) {
  if (query.kind != SimilarityKind::Truth) {
    for (auto it = overrides_.rbegin(); it != overrides_.rend(); ++it)
      if (it->round == query.round && it->kind == query.kind) return it->value;
  }
  return jaccard_similarity(query.a, query.b);
}

std::size_t ScriptedBackend::remaining(std::string_view tag) const {
  auto it = queues_.find(tag);
  return it == queues_.end() ? 0 : it->second.size();
}

std::size_t ScriptedBackend::total_remaining() const {
  std::size_t n = 0;
  for (const auto& [tag, q] : queues_) n += q.size();
  return n;
}

std::vector<std::string> ScriptedBackend::tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, q] : queues_) out.push_back(tag);
  return out;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::clone() const {
  auto copy = std::make_unique<ScriptedBackend>();
  copy->queues_ = queues_;
  copy->overrides_ = overrides_;
  return copy;
}

ScriptedBackend parse_script(std::string_view text) {
  ScriptedBackend backend;
  auto lines = text::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto line = text::trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::ScriptParseError, "script line " + std::to_string(n + 1) + ": " + why);
    };
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("invalid JSON (") + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("tag") || !obj["tag"].is_string())
      throw fail("expected an object with a string \"tag\"");
    auto tag = obj["tag"].get<std::string>();
    if (tag == kSimilarityTag) {
      if (!obj.contains("round") || !obj["round"].is_number_integer())
        throw fail("similarity override needs an integer \"round\"");
      if (!obj.contains("value") || !obj["value"].is_number())
        throw fail("similarity override needs a numeric \"value\"");
      double value = obj["value"].get<double>();
      if (value < 0.0 || value > 1.0) throw fail("similarity value must be in [0,1]");
      auto kind = SimilarityKind::Foresight;
      if (obj.contains("which")) {
        if (!obj["which"].is_string()) throw fail("\"which\" must be \"s\" or \"s_v\"");
        auto which = obj["which"].get<std::string>();
        if (which == "s_v") kind = SimilarityKind::Virtual;
        else if (which != "s") throw fail("\"which\" must be \"s\" or \"s_v\"");
      }
      backend.pin_similarity(obj["round"].get<int>(), kind, value);
      continue;
    }
    if (!obj.contains("response") || !obj["response"].is_string())
      throw fail("expected a string \"response\"");
    backend.push(std::move(tag), obj["response"].get<std::string>());
  }
  return backend;
}

ScriptedBackend load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read script " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str());
}

RemoteConfig RemoteConfig::from_environment() {
  RemoteConfig config;
  if (const char* url = std::getenv("TOMSIM_BASE_URL"); url && *url) config.base_url = url;
  if (const char* key = std::getenv("TOMSIM_API_KEY"); key && *key) config.api_key = key;
  return config;
}

std::string chat_request_body(const RemoteConfig& config, const GenerationRequest& request) {
  nlohmann::json body = {
      {"model", config.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  return body.dump();
}

}  // namespace tomsim
