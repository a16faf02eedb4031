#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tomsim/backend.hpp"
#include "tomsim/core.hpp"
#include "tomsim/ledger.hpp"
#include "tomsim/prompts.hpp"
#include "tomsim/self_agent.hpp"

namespace tomsim {

enum class TrackerVariant { NoTom, Vanilla, Reflection, CR };

std::string_view variant_name(TrackerVariant variant) noexcept;
TrackerVariant parse_variant(std::string_view text);  // throws InvalidConfig

// When the counterfactual branch is considered, comparing S_{i+1} with S_i.
enum class TriggerPolicy { OnIncrease, OnNonIncrease };

std::string_view trigger_policy_name(TriggerPolicy policy) noexcept;
TriggerPolicy parse_trigger_policy(std::string_view text);

// Which foresight score S_v must beat to adopt the counterfactual update.
enum class CompareTo { Current, Previous };

std::string_view compare_to_name(CompareTo compare) noexcept;
CompareTo parse_compare_to(std::string_view text);

enum class UpdatePath { None, Standard, Counterfactual };

std::string_view update_path_name(UpdatePath path) noexcept;
UpdatePath parse_update_path(std::string_view text);

struct BranchRecord {
  TriggerPolicy policy = TriggerPolicy::OnIncrease;
  double s_prev = 0.0;  // S_i (S_0 = 0)
  double s_curr = 0.0;  // S_{i+1}
  bool triggered = false;
  std::optional<double> s_v;
  std::optional<std::string> virtual_utt;
  UpdatePath path = UpdatePath::None;

  bool operator==(const BranchRecord&) const = default;
};

bool should_trigger(TriggerPolicy policy, double s_prev, double s_curr) noexcept;

using LedgerSet = std::map<Facet, ConfidenceLedger>;

struct TrackerOptions {
  TrackerVariant variant = TrackerVariant::CR;
  std::size_t top_k = 3;
  bool strict_capacity = true;
  TriggerPolicy policy = TriggerPolicy::OnIncrease;
  CompareTo compare_to = CompareTo::Current;
};

struct TrackerState {
  TrackerVariant variant = TrackerVariant::CR;
  LedgerSet ledgers;
  std::optional<std::string> predicted_next;
  std::optional<std::string> last_prediction;  // prediction consumed by the last score
  std::vector<double> similarity_history;      // S_1, S_2, ...
  std::vector<std::string> reflection_history;
  TriggerPolicy cf_trigger_policy = TriggerPolicy::OnIncrease;

  [[nodiscard]] bool initialized() const noexcept { return ledgers.size() == kAllFacets.size(); }
};

// Agent B. Holds the tracker state for one episode; every step appends
// fallback flags and raw plan text that the engine drains into the trace.
class Tracker {
 public:
  Tracker(AgentContext ctx, SimilarityScorer& scorer, TrackerOptions options);

  [[nodiscard]] const TrackerState& state() const noexcept { return state_; }
  TrackerState& mutable_state() noexcept { return state_; }
  [[nodiscard]] const TrackerOptions& options() const noexcept { return options_; }

  // InferTopK for one facet; one temperature-0 retry on ParseFailure.
  ConfidenceLedger infer_topk(const DialogueHistory& history, Facet facet, std::size_t k);

  // B's reply from its top-1 inferred BDI (the no-ToM baseline prompt for NoTom).
  Utterance generate_tracked_utterance(const DialogueHistory& history);

  // Foresight: predicts A's next utterance from the top-1 inferred BDIs.
  std::string predict_response(const DialogueHistory& history);

  // S = similarity(prediction, real); appended to similarity_history.
  double observe_and_score(const Utterance& real, int round);

  // Reflect on one facet and update its ledger. Updated section wins over plan ops; a failed update
  // leaves the ledger unchanged and flags the round.
  ConfidenceLedger reflect_and_update(const DialogueHistory& history, Facet facet);

  // CR step for the round whose foresight score was just appended.
  BranchRecord counterfactual_step(const DialogueHistory& history, const Utterance& real,
                                   int round);

  // Variant-specific ledger maintenance after A's utterance in `round`.
  std::optional<BranchRecord> update(const DialogueHistory& history, const Utterance& real,
                                     int round);

  std::vector<std::string> take_flags();
  std::map<Facet, std::string> take_plans();

 private:
  struct Candidate {
    ConfidenceLedger ledger;
    std::string reflection;
  };

  std::string render_ledger_list(const ConfidenceLedger& ledger) const;
  std::string reflection_history_text() const;
  // Turns a ReflectionOutput into a new ledger for `facet` or nullopt when no
  // update could be derived (flags say why).
  std::optional<ConfidenceLedger> derive_update(const ConfidenceLedger& old,
                                                const ReflectionOutput& out);
  std::string virtual_response(const DialogueHistory& history, const LedgerSet& ledgers);
  void flag(std::string flag);

  AgentContext ctx_;
  SimilarityScorer& scorer_;
  TrackerOptions options_;
  TrackerState state_;
  std::vector<std::string> flags_;
  std::map<Facet, std::string> plans_;
};

}  // namespace tomsim
