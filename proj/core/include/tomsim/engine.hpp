#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tomsim/agents.hpp"
#include "tomsim/backend.hpp"
#include "tomsim/core.hpp"
#include "tomsim/data.hpp"
#include "tomsim/ledger.hpp"
#include "tomsim/prompts.hpp"
#include "tomsim/tracker.hpp"

namespace tomsim {

// Random streams derived from an episode's rng_seed with derive_seed.
inline constexpr std::uint64_t kInitStream = 0;     // choice among BDI candidates
inline constexpr std::uint64_t kReverseStream = 1;  // reverse-BDI coin

struct EpisodeConfig {
  std::string episode_id;  // empty: "ep-<rng_seed>"
  Scenario scenario = Scenario::Empathetic;
  TrackerVariant variant = TrackerVariant::CR;
  std::size_t top_k = 3;
  std::size_t max_rounds = 10;  // t
  TurnUnit turn_unit = TurnUnit::Round;
  std::uint64_t rng_seed = 0;
  TriggerPolicy cf_trigger_policy = TriggerPolicy::OnIncrease;
  CompareTo cf_compare_to = CompareTo::Current;
  double reverse_probability = 0.0;
  bool strict_capacity = true;
  bool count_aborted_as_failure = false;
  bool compute_truth_similarity = true;
  Temperatures temperatures{};
  int max_tokens = 512;
  std::optional<BDITriple> true_bdi;  // skips zero-shot initialization
  std::optional<ScenarioProfile> profile;

  // Throws InvalidConfig.
  void validate() const;
  // Rounds allowed by t under the configured turn unit.
  [[nodiscard]] std::size_t round_limit() const noexcept;
  [[nodiscard]] ScenarioProfile resolved_profile() const;
};

nlohmann::json config_to_json(const EpisodeConfig& config);
// Fields absent from `json` keep the values already in `base`.
EpisodeConfig config_from_json(const nlohmann::json& json, EpisodeConfig base = {});

struct TurnTrace {
  std::size_t round = 0;
  std::string a_utt;
  std::string b_utt;
  std::optional<std::string> pred_utt;  // prediction scored against a_utt
  std::optional<double> s;
  std::optional<BranchRecord> branch;
  LedgerSet ledgers;  // after this round's update; empty for NoTom
  std::optional<std::map<Facet, std::string>> plan;
  std::optional<Judgment> judgment;
  bool judgment_fallback = false;
  std::optional<std::map<Facet, double>> truth_sim;
  std::vector<std::string> flags;

  bool operator==(const TurnTrace&) const = default;
};

struct EpisodeResult {
  std::string episode_id;
  Scenario scenario = Scenario::Empathetic;
  TrackerVariant variant = TrackerVariant::CR;
  std::size_t top_k = 3;
  std::size_t max_rounds = 10;
  std::uint64_t rng_seed = 0;
  bool strict_capacity = true;
  bool success = false;
  bool aborted = false;
  std::string abort_reason;
  std::size_t rounds_used = 0;
  std::optional<Judgment> final_judgment;
  std::vector<TurnTrace> traces;
  BDITriple true_bdi;
  std::optional<BDITriple> original_bdi;  // set when the BDI was reversed
  std::size_t init_choice = 0;
  LedgerSet final_ledgers;
  std::optional<std::string> closing_utt;
  std::optional<std::string> closing_pred_utt;
  std::optional<double> closing_s;

  [[nodiscard]] std::size_t similarity_count() const noexcept;
  [[nodiscard]] bool has_fallback_flags() const noexcept;

  bool operator==(const EpisodeResult&) const = default;
};

struct EpisodeBackends {
  std::shared_ptr<TextGenerator> llm;
  std::shared_ptr<SimilarityScorer> scorer;
};

// Round loop: A utters, B scores its foresight, B updates its ledgers, B
// utters, B predicts, A judges. A GOODBYE ends the episode after A's closing
// utterance; t rounds without one is a failure. Backend failures abort the
// episode and keep the completed rounds.
EpisodeResult run_episode(const EpisodeConfig& config, const NormalizedEpisode& seed_episode,
                          const EpisodeBackends& backends,
                          const TemplateRegistry& templates = TemplateRegistry::builtin());

using BackendFactory = std::function<EpisodeBackends(std::size_t index)>;

std::string batch_episode_id(std::uint64_t batch_seed, std::size_t index);

// n episodes with ids and seeds derived from (batch_seed, index); results in
// input order. jobs > 1 runs episodes on a bounded thread pool.
std::vector<EpisodeResult> run_batch(const EpisodeConfig& config, std::size_t n,
                                     const std::vector<NormalizedEpisode>& seeds,
                                     const BackendFactory& backends, std::uint64_t batch_seed,
                                     std::size_t jobs = 1,
                                     const TemplateRegistry& templates = TemplateRegistry::builtin());

// Similarity between each round's top-1 inferred statement and the true
// field. Rounds without a snapshot are omitted.
std::vector<std::pair<std::size_t, double>> truth_similarity_curve(const EpisodeResult& result,
                                                                   Facet facet,
                                                                   SimilarityScorer& scorer);

nlohmann::json trace_to_json(const std::string& episode_id, const TurnTrace& trace);
nlohmann::json summary_to_json(const EpisodeResult& result);

// JSON Lines: one {"kind":"turn"} object per trace, then one
// {"kind":"summary"} object per episode. Throws IoError naming the path.
void write_traces(const std::vector<EpisodeResult>& results, const std::filesystem::path& path);
std::string traces_to_jsonl(const std::vector<EpisodeResult>& results);
std::vector<EpisodeResult> read_traces(const std::filesystem::path& path);
std::vector<EpisodeResult> parse_traces(std::string_view jsonl);

// Schema and consistency problems; empty when the file is valid.
std::vector<std::string> validate_traces(std::string_view jsonl);

}  // namespace tomsim
