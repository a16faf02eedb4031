#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomsim/agents.hpp"
#include "tomsim/backend.hpp"
#include "tomsim/core.hpp"
#include "tomsim/data.hpp"
#include "tomsim/prompts.hpp"

namespace tomsim {

// Everything an agent needs to issue prompts for one episode.
struct AgentContext {
  TextGenerator& llm;
  const TemplateRegistry& templates;
  ScenarioProfile profile;
  Temperatures temperatures{};
  int max_tokens = 512;
  std::string episode_id;
};

struct SelfAgentState {
  BDITriple true_bdi;  // T_R, fixed for the episode
  Scenario scenario = Scenario::Empathetic;
  std::string display_name;
  std::optional<Judgment> last_judgment;
};

struct BdiInitResult {
  BDITriple chosen;
  std::vector<BDITriple> candidates;
  std::size_t choice_index = 0;
  bool retried = false;
};

// Zero-shot BDI initialization from one corpus episode: asks for k triples
// and picks one with uniform_index(mt19937_64(rng_seed), #parsed). A parse
// failure is retried once at temperature 0.
BdiInitResult init_bdi(const AgentContext& ctx, const NormalizedEpisode& seed_episode,
                       std::size_t k, std::uint64_t rng_seed);

// Asks for the opposite / counterfactual triple. Throws InvalidTriple for a
// blank input before any call, NoTriplesFound when the answer has no triple.
BDITriple reverse_bdi(const AgentContext& ctx, const BDITriple& bdi);

// Round-0 stand-in for the judgment slots of the SelfUtterance template.
Judgment bootstrap_judgment();

// A's next utterance from T_R and the history. Requires A to be the next speaker.
Utterance generate_self_utterance(const AgentContext& ctx, const SelfAgentState& state,
                                  const DialogueHistory& history);

// Second-order ToM: has B understood T_R? Requires at least one B turn.
// Stores the judgment in state.last_judgment.
ParsedJudgment judge_second_order(const AgentContext& ctx, SelfAgentState& state,
                                  const DialogueHistory& history);

}  // namespace tomsim
