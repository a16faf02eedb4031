#include "tomsim/self_agent.hpp"

#include "text_util.hpp"
#include "tomsim/error.hpp"
#include "tomsim/rng.hpp"

namespace tomsim {

namespace {

std::string render_seed(const NormalizedEpisode& seed, const ScenarioProfile& profile) {
  const auto self_role = seed.self_role();
  std::string out;
  for (const auto& turn : seed.turns) {
    if (!out.empty()) out += '\n';
    out += turn.speaker_role == self_role ? profile.self_name : profile.tracker_name;
    out += ": ";
    out += turn.text;
  }
  return out;
}

std::string call(const AgentContext& ctx, TemplateId id, const Bindings& bindings, double temperature) {
  GenerationRequest request{ctx.templates.render(id, bindings), temperature, ctx.max_tokens,
                            std::string(template_name(id))};
  try {
    return ctx.llm.complete(request);
  } catch (const Error& e) {
    if (ctx.episode_id.empty()) throw;
    throw Error(e.code(), "episode " + ctx.episode_id + ": " + e.what());
  }
}

}  // namespace

BdiInitResult init_bdi(const AgentContext& ctx, const NormalizedEpisode& seed_episode, std::size_t k,
                       std::uint64_t rng_seed) {
  if (seed_episode.turns.empty())
    throw Error(ErrorCode::PreconditionViolation, "seed episode has no turns");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be positive");
  const Bindings bindings{
      {"agent_name", ctx.profile.self_name},
      {"recipient_name", ctx.profile.tracker_name},
      {"corpus_dialogue_episode", render_seed(seed_episode, ctx.profile)},
      {"top_k", std::to_string(k)},
  };

  BdiInitResult result;
  try {
    result.candidates = parse_bdi_sets(call(ctx, TemplateId::BdiInit, bindings, ctx.temperatures.utterance), k);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoTriplesFound) throw;
    result.retried = true;
    result.candidates = parse_bdi_sets(call(ctx, TemplateId::BdiInit, bindings, 0.0), k);
  }
  Rng rng(rng_seed);
  result.choice_index = uniform_index(rng, result.candidates.size());
  result.chosen = result.candidates[result.choice_index];
  return result;
}

BDITriple reverse_bdi(const AgentContext& ctx, const BDITriple& bdi) {
  if (!bdi.valid()) throw Error(ErrorCode::InvalidTriple, "cannot reverse a triple with a blank field");
  const Bindings bindings{
      {"agent_name", ctx.profile.self_name},
      {"belief", bdi.belief},
      {"desire", bdi.desire},
      {"intention", bdi.intention},
  };
  return parse_bdi_sets(call(ctx, TemplateId::ReverseBdi, bindings, ctx.temperatures.utterance), 1).front();
}

Judgment bootstrap_judgment() { return Judgment{Decision::Say, "conversation just started"}; }

Utterance generate_self_utterance(const AgentContext& ctx, const SelfAgentState& state,
                                  const DialogueHistory& history) {
  if (history.next_speaker() != kAgentA)
    throw Error(ErrorCode::PreconditionViolation, "it is not agent A's turn");
  if (!state.true_bdi.valid()) throw Error(ErrorCode::InvalidTriple, "agent A has no valid BDI");
  const bool has_b_turn = history.size() >= 2;
  if (has_b_turn && !state.last_judgment)
    throw Error(ErrorCode::PreconditionViolation, "agent A needs a judgment after round 0");
  const Judgment judgment = state.last_judgment.value_or(bootstrap_judgment());

  const Bindings bindings{
      {"agent_name", ctx.profile.self_name},
      {"recipient_name", ctx.profile.tracker_name},
      {"conversation_history", render_history(history, ctx.profile.names())},
      {"self_belief", state.true_bdi.belief},
      {"self_desire", state.true_bdi.desire},
      {"self_intention", state.true_bdi.intention},
      {"judgment", std::string(decision_name(judgment.decision))},
      {"judgement_reason", judgment.reason},
      {"seek_goal", ctx.profile.seek_goal},
  };
  auto text = call(ctx, TemplateId::SelfUtterance, bindings, ctx.temperatures.utterance);
  return Utterance{std::string(kAgentA), std::move(text), history.size()};
}

ParsedJudgment judge_second_order(const AgentContext& ctx, SelfAgentState& state,
                                  const DialogueHistory& history) {
  bool has_b_turn = false;
  for (const auto& t : history.turns()) has_b_turn = has_b_turn || t.speaker == kAgentB;
  if (!has_b_turn)
    throw Error(ErrorCode::PreconditionViolation, "second-order judgment needs a completed round");
  const Bindings bindings{
      {"agent_name", ctx.profile.self_name},
      {"recipient_name", ctx.profile.tracker_name},
      {"conversation_history", render_history(history, ctx.profile.names())},
      {"belief", state.true_bdi.belief},
      {"desire", state.true_bdi.desire},
      {"intention", state.true_bdi.intention},
  };
  auto parsed = parse_judgment(call(ctx, TemplateId::SecondOrderJudgment, bindings, ctx.temperatures.structured));
  state.last_judgment = parsed.judgment;
  return parsed;
}

}  // namespace tomsim
