#include "tomsim/tracker.hpp"

#include <algorithm>
#include <utility>

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

std::string_view variant_name(TrackerVariant variant) noexcept {
  switch (variant) {
    case TrackerVariant::NoTom: return "notom";
    case TrackerVariant::Vanilla: return "vanilla";
    case TrackerVariant::Reflection: return "reflection";
    case TrackerVariant::CR: return "cr";
  }
  return "cr";
}

TrackerVariant parse_variant(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  for (auto v : {TrackerVariant::NoTom, TrackerVariant::Vanilla, TrackerVariant::Reflection, TrackerVariant::CR})
    if (t == variant_name(v)) return v;
  if (t == "no-tom" || t == "no_tom" || t == "baseline") return TrackerVariant::NoTom;
  throw Error(ErrorCode::InvalidConfig, "unknown tracker variant: " + std::string(text));
}

std::string_view trigger_policy_name(TriggerPolicy policy) noexcept {
  return policy == TriggerPolicy::OnNonIncrease ? "on_non_increase" : "on_increase";
}

TriggerPolicy parse_trigger_policy(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "on_increase") return TriggerPolicy::OnIncrease;
  if (t == "on_non_increase") return TriggerPolicy::OnNonIncrease;
  throw Error(ErrorCode::InvalidConfig, "unknown trigger policy: " + std::string(text));
}

std::string_view compare_to_name(CompareTo compare) noexcept {
  return compare == CompareTo::Previous ? "previous" : "current";
}

CompareTo parse_compare_to(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  if (t == "current") return CompareTo::Current;
  if (t == "previous") return CompareTo::Previous;
  throw Error(ErrorCode::InvalidConfig, "unknown S_v comparison: " + std::string(text));
}

std::string_view update_path_name(UpdatePath path) noexcept {
  switch (path) {
    case UpdatePath::None: return "none";
    case UpdatePath::Standard: return "standard";
    case UpdatePath::Counterfactual: return "counterfactual";
  }
  return "none";
}

UpdatePath parse_update_path(std::string_view text) {
  for (auto p : {UpdatePath::None, UpdatePath::Standard, UpdatePath::Counterfactual})
    if (text == update_path_name(p)) return p;
  throw Error(ErrorCode::InvalidTrace, "unknown update path: " + std::string(text));
}

bool should_trigger(TriggerPolicy policy, double s_prev, double s_curr) noexcept {
  return policy == TriggerPolicy::OnIncrease ? s_curr > s_prev : s_curr <= s_prev;
}

Tracker::Tracker(AgentContext ctx, SimilarityScorer& scorer, TrackerOptions options)
    : ctx_(std::move(ctx)), scorer_(scorer), options_(options) {
  if (options_.top_k == 0) throw Error(ErrorCode::InvalidConfig, "top_k must be positive");
  state_.variant = options_.variant;
  state_.cf_trigger_policy = options_.policy;
}

void Tracker::flag(std::string f) { flags_.push_back(std::move(f)); }

std::vector<std::string> Tracker::take_flags() { return std::exchange(flags_, {}); }

std::map<Facet, std::string> Tracker::take_plans() { return std::exchange(plans_, {}); }

std::string Tracker::render_ledger_list(const ConfidenceLedger& ledger) const {
  return "\n" + serialize(ledger);
}

std::string Tracker::reflection_history_text() const {
  if (state_.reflection_history.empty()) return "None";
  return text::join(state_.reflection_history, "\n");
}

ConfidenceLedger Tracker::infer_topk(const DialogueHistory& history, Facet facet, std::size_t k) {
  bool has_a = false;
  for (const auto& t : history.turns()) has_a = has_a || t.speaker == kAgentA;
  if (!has_a) throw Error(ErrorCode::PreconditionViolation, "inference needs at least one A utterance");

  const auto& persona = ctx_.profile.tracker_persona;
  const Bindings bindings{
      {"agent_name", ctx_.profile.tracker_name},
      {"recipient_name", ctx_.profile.self_name},
      {"conversation_history", render_history(history, ctx_.profile.names())},
      {"self_belief", persona.belief},
      {"self_desire", persona.desire},
      {"self_intention", persona.intention},
      {"top_k", std::to_string(k)},
      {"picked_type", std::string(facet_name(facet))},
  };
  const auto prompt = ctx_.templates.render(TemplateId::InferTopK, bindings);
  const std::string tag(template_name(TemplateId::InferTopK));

  std::vector<ParseWarning> warnings;
  ConfidenceLedger ledger;
  try {
    ledger = parse_ranked_list(ctx_.llm.complete({prompt, ctx_.temperatures.structured, ctx_.max_tokens, tag}),
                               facet, k, options_.strict_capacity, &warnings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseFailure) throw;
    flag("infer_retry:" + std::string(facet_name(facet)));
    warnings.clear();
    ledger = parse_ranked_list(ctx_.llm.complete({prompt, 0.0, ctx_.max_tokens, tag}), facet, k,
                               options_.strict_capacity, &warnings);
  }
  if (!warnings.empty()) flag("nonnumeric_confidence:" + std::string(facet_name(facet)));
  return ledger;
}

Utterance Tracker::generate_tracked_utterance(const DialogueHistory& history) {
  if (history.next_speaker() != kAgentB)
    throw Error(ErrorCode::PreconditionViolation, "it is not agent B's turn");
  const auto rendered = render_history(history, ctx_.profile.names());
  TemplateId id;
  Bindings bindings{
      {"agent_name", ctx_.profile.tracker_name},
      {"recipient_name", ctx_.profile.self_name},
  };
  if (state_.variant == TrackerVariant::NoTom) {
    id = ctx_.profile.scenario == Scenario::Persuasion ? TemplateId::BaselinePersuasive
                                                       : TemplateId::BaselineEmpathetic;
    bindings["corpus_dialogue_episode"] = rendered;
  } else {
    if (!state_.initialized())
      throw Error(ErrorCode::PreconditionViolation, "tracker ledgers are not initialized");
    id = TemplateId::UtterFromInferred;
    bindings["conversation_history"] = rendered;
    bindings["inferred_belief"] = top1(state_.ledgers.at(Facet::Belief)).statement;
    bindings["inferred_desire"] = top1(state_.ledgers.at(Facet::Desire)).statement;
    bindings["inferred_intention"] = top1(state_.ledgers.at(Facet::Intention)).statement;
    bindings["response_style"] = ctx_.profile.response_style;
  }
  GenerationRequest request{ctx_.templates.render(id, bindings), ctx_.temperatures.utterance,
                            ctx_.max_tokens, std::string(template_name(id))};
  return Utterance{std::string(kAgentB), ctx_.llm.complete(request), history.size()};
}

namespace {

std::string inferred_triple_text(const LedgerSet& ledgers) {
  return "belief: " + top1(ledgers.at(Facet::Belief)).statement +
         "; desire: " + top1(ledgers.at(Facet::Desire)).statement +
         "; intention: " + top1(ledgers.at(Facet::Intention)).statement;
}

}  // namespace

std::string Tracker::virtual_response(const DialogueHistory& history, const LedgerSet& ledgers) {
  const Bindings bindings{
      {"agent_name", ctx_.profile.tracker_name},
      {"recipient_name", ctx_.profile.self_name},
      {"conversation_history", render_history(history, ctx_.profile.names())},
      {"picked_type", "belief, desire, and intention"},
      {"inferred_bid", inferred_triple_text(ledgers)},
  };
  GenerationRequest request{ctx_.templates.render(TemplateId::PredictResponse, bindings),
                            ctx_.temperatures.utterance, ctx_.max_tokens, "virtual_response"};
  return ctx_.llm.complete(request);
}

std::string Tracker::predict_response(const DialogueHistory& history) {
  if (!state_.initialized())
    throw Error(ErrorCode::PreconditionViolation, "tracker ledgers are not initialized");
  const Bindings bindings{
      {"agent_name", ctx_.profile.tracker_name},
      {"recipient_name", ctx_.profile.self_name},
      {"conversation_history", render_history(history, ctx_.profile.names())},
      {"picked_type", "belief, desire, and intention"},
      {"inferred_bid", inferred_triple_text(state_.ledgers)},
  };
  GenerationRequest request{ctx_.templates.render(TemplateId::PredictResponse, bindings),
                            ctx_.temperatures.utterance, ctx_.max_tokens,
                            std::string(template_name(TemplateId::PredictResponse))};
  auto prediction = ctx_.llm.complete(request);
  if (state_.predicted_next) flag("prediction_overwritten");
  state_.predicted_next = prediction;
  return prediction;
}

double Tracker::observe_and_score(const Utterance& real, int round) {
  if (!state_.predicted_next) throw Error(ErrorCode::MissingPrediction, "no prediction to score");
  const double s = scorer_.score(SimilarityQuery{*state_.predicted_next, real.text, round,
                                                 SimilarityKind::Foresight});
  state_.similarity_history.push_back(s);
  state_.last_prediction = std::move(state_.predicted_next);
  state_.predicted_next.reset();
  return s;
}

std::optional<ConfidenceLedger> Tracker::derive_update(const ConfidenceLedger& old,
                                                       const ReflectionOutput& out) {
  const std::string facet(facet_name(old.facet));
  if (out.no_sections) flag("no_sections:" + facet);

  if (!out.updated_ledger_raw.empty()) {
    try {
      return parse_ranked_list(out.updated_ledger_raw, old.facet, old.capacity, old.strict_capacity);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseFailure) throw;
      flag("updated_unparseable:" + facet);
    }
  }

  if (out.any_amount_defaulted()) flag("amount_defaulted:" + facet);
  // Ops whose target cannot be matched are dropped rather than failing the
  // whole plan.
  ConfidenceLedger probe = old;
  std::vector<PlanOp> ops;
  for (const auto& op : out.plan) {
    if (op.kind == PlanKind::Add) {
      probe.entries.push_back(LedgerEntry{op.target, op.amount});
      ops.push_back(op);
    } else if (find_target(probe, op.target)) {
      ops.push_back(op);
    } else {
      flag("unmatched_target:" + facet);
    }
  }
  if (ops.empty()) return std::nullopt;
  try {
    return apply_plan(old, ops);
  } catch (const Error& e) {
    flag("update_error:" + facet + ":" + std::string(error_code_name(e.code())));
    return std::nullopt;
  }
}

ConfidenceLedger Tracker::reflect_and_update(const DialogueHistory& history, Facet facet) {
  auto it = state_.ledgers.find(facet);
  if (it == state_.ledgers.end())
    throw Error(ErrorCode::PreconditionViolation, "no ledger for " + std::string(facet_name(facet)));
  const Bindings bindings{
      {"agent_name", ctx_.profile.tracker_name},
      {"recipient_name", ctx_.profile.self_name},
      {"conversation_history", render_history(history, ctx_.profile.names())},
      {"reflection_history", reflection_history_text()},
      {"picked_type", std::string(facet_name(facet))},
      {"inferred_bdi", render_ledger_list(it->second)},
      {"top_k", std::to_string(options_.top_k)},
  };
  GenerationRequest request{ctx_.templates.render(TemplateId::Reflect, bindings), ctx_.temperatures.structured,
                            ctx_.max_tokens, std::string(template_name(TemplateId::Reflect))};
  const auto out = parse_reflection(ctx_.llm.complete(request), options_.top_k);
  plans_[facet] = out.plan_raw;
  if (!out.reflection.empty())
    state_.reflection_history.push_back(std::string(facet_name(facet)) + ": " + out.reflection);

  if (auto updated = derive_update(it->second, out)) {
    it->second = std::move(*updated);
  } else {
    flag("update_skipped:" + std::string(facet_name(facet)));
  }
  return it->second;
}

BranchRecord Tracker::counterfactual_step(const DialogueHistory& history, const Utterance& real, int round) {
  if (state_.variant != TrackerVariant::CR)
    throw Error(ErrorCode::PreconditionViolation, "counterfactual step requires the CR variant");
  if (state_.similarity_history.empty())
    throw Error(ErrorCode::PreconditionViolation, "no foresight score for this round");
  if (!state_.initialized())
    throw Error(ErrorCode::PreconditionViolation, "tracker ledgers are not initialized");

  const auto& sims = state_.similarity_history;
  BranchRecord record;
  record.policy = state_.cf_trigger_policy;
  record.s_curr = sims.back();
  record.s_prev = sims.size() >= 2 ? sims[sims.size() - 2] : 0.0;
  record.triggered = should_trigger(record.policy, record.s_prev, record.s_curr);

  auto standard = [&] {
    for (auto facet : kAllFacets) reflect_and_update(history, facet);
    record.path = UpdatePath::Standard;
  };

  if (!record.triggered) {
    standard();
    return record;
  }

  LedgerSet candidates = state_.ledgers;
  std::vector<std::string> reflections;
  const auto rendered = render_history(history, ctx_.profile.names());
  const std::string predicted = state_.last_prediction.value_or("");
  for (auto facet : kAllFacets) {
    const auto& old = state_.ledgers.at(facet);
    const Bindings bindings{
        {"agent_name", ctx_.profile.tracker_name},
        {"recipient_name", ctx_.profile.self_name},
        {"conversation_history", rendered},
        {"reflection_history", reflection_history_text()},
        {"picked_type", std::string(facet_name(facet))},
        {"inferred_bdi", render_ledger_list(old)},
        {"inferred_top_bdi", top1(old).statement},
        {"predicted_response", predicted},
        {"real_response", real.text},
        {"top_k", std::to_string(options_.top_k)},
    };
    GenerationRequest request{ctx_.templates.render(TemplateId::CounterfactualReflect, bindings),
                              ctx_.temperatures.structured, ctx_.max_tokens,
                              std::string(template_name(TemplateId::CounterfactualReflect))};
    const auto out = parse_reflection(ctx_.llm.complete(request), options_.top_k);
    plans_[facet] = out.plan_raw;
    if (!out.reflection.empty())
      reflections.push_back(std::string(facet_name(facet)) + ": " + out.reflection);
    if (auto updated = derive_update(old, out)) candidates[facet] = std::move(*updated);
    else flag("cf_update_skipped:" + std::string(facet_name(facet)));
  }

  // The virtual response answers the same history the real one did.
  DialogueHistory before = history;
  if (!before.empty() && before.turns().back().speaker == real.speaker && before.turns().back().text == real.text)
    before = before.drop_last();
  record.virtual_utt = virtual_response(before, candidates);
  record.s_v = scorer_.score(SimilarityQuery{*record.virtual_utt, real.text, round, SimilarityKind::Virtual});

  const double reference = options_.compare_to == CompareTo::Current ? record.s_curr : record.s_prev;
  if (*record.s_v > reference) {
    state_.ledgers = std::move(candidates);
    for (auto& r : reflections) state_.reflection_history.push_back(std::move(r));
    record.path = UpdatePath::Counterfactual;
  } else {
    standard();
  }
  return record;
}

std::optional<BranchRecord> Tracker::update(const DialogueHistory& history, const Utterance& real, int round) {
  switch (state_.variant) {
    case TrackerVariant::NoTom:
      return std::nullopt;
    case TrackerVariant::Vanilla:
      for (auto facet : kAllFacets) state_.ledgers[facet] = infer_topk(history, facet, 1);
      return std::nullopt;
    case TrackerVariant::Reflection:
    case TrackerVariant::CR:
      break;
  }
  if (!state_.initialized()) {
    for (auto facet : kAllFacets) state_.ledgers[facet] = infer_topk(history, facet, options_.top_k);
    return std::nullopt;
  }
  if (state_.variant == TrackerVariant::CR && !state_.similarity_history.empty())
    return counterfactual_step(history, real, round);
  for (auto facet : kAllFacets) reflect_and_update(history, facet);
  return std::nullopt;
}

}  // namespace tomsim
