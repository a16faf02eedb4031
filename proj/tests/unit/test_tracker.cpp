#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"
#include "tomsim/tracker.hpp"

namespace tomsim {
namespace {

bool has_flag(const std::vector<std::string>& flags, const std::string& f) {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

ConfidenceLedger ledger_of(Facet facet, std::vector<std::pair<std::string, double>> entries, std::size_t k = 3,
                           bool strict = true) {
  ConfidenceLedger l{facet, k, strict, {}};
  for (auto& [s, c] : entries) l.entries.push_back({s, c});
  return l;
}

struct Harness {
  explicit Harness(TrackerOptions options = {}, Scenario scenario = Scenario::Empathetic)
      : ctx{llm, TemplateRegistry::builtin(), ScenarioProfile::defaults(scenario)},
        tracker(ctx, llm, options) {}

  void seed_ledgers(const std::string& prefix) {
    for (auto facet : kAllFacets) {
      const std::string f(facet_name(facet));
      tracker.mutable_state().ledgers[facet] =
          ledger_of(facet, {{prefix + f + " one", 50}, {prefix + f + " two", 30}, {prefix + f + " three", 20}});
    }
  }

  ScriptedBackend llm;
  AgentContext ctx;
  Tracker tracker;
};

DialogueHistory two_turns() {
  auto h = append_turn(DialogueHistory{}, kAgentA, "I miss my dog.");
  return append_turn(h, kAgentB, "That must be hard.");
}

TEST(TrackerNames, RoundTrip) {
  for (auto v : {TrackerVariant::NoTom, TrackerVariant::Vanilla, TrackerVariant::Reflection, TrackerVariant::CR})
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_TOMSIM_ERROR(parse_variant("bogus"), InvalidConfig);
  for (auto p : {UpdatePath::None, UpdatePath::Standard, UpdatePath::Counterfactual})
    EXPECT_EQ(parse_update_path(update_path_name(p)), p);
}

TEST(InferTopK, ParsesLedger) {
  Harness h;
  h.llm.push("infer_topk", "sad about the dog | 50%\nwants comfort | 30%\nlonely | 20%");
  const auto l = h.tracker.infer_topk(append_turn(DialogueHistory{}, kAgentA, "I miss my dog."), Facet::Belief, 3);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(top1(l).statement, "sad about the dog");
  EXPECT_TRUE(h.tracker.take_flags().empty());
  const auto prompt = h.llm.call_log()->snapshot().at(0).prompt;
  EXPECT_NE(prompt.find("List top-3 possible belief"), std::string::npos);
  EXPECT_NE(prompt.find("Sympathy-needing Agent: I miss my dog."), std::string::npos);
}

TEST(InferTopK, RetryAndWarnings) {
  Harness h;
  h.llm.push("infer_topk", "I cannot tell.");
  h.llm.push("infer_topk", "x | high\ny | 100%");
  const auto l = h.tracker.infer_topk(append_turn(DialogueHistory{}, kAgentA, "hi"), Facet::Desire, 3);
  EXPECT_EQ(l.size(), 1u);
  const auto flags = h.tracker.take_flags();
  EXPECT_TRUE(has_flag(flags, "infer_retry:desire"));
  EXPECT_TRUE(has_flag(flags, "nonnumeric_confidence:desire"));
  EXPECT_DOUBLE_EQ(h.llm.call_log()->snapshot().at(1).temperature, 0.0);
}

TEST(InferTopK, NeedsAnUtteranceFromA) {
  Harness h;
  EXPECT_TOMSIM_ERROR(h.tracker.infer_topk(DialogueHistory{}, Facet::Belief, 3), PreconditionViolation);
}

TEST(Prediction, OverwriteIsFlagged) {
  Harness h;
  h.seed_ledgers("");
  h.llm.push("predict_response", "first guess");
  h.llm.push("predict_response", "second guess");
  const auto hist = two_turns();
  h.tracker.predict_response(hist);
  h.tracker.predict_response(hist);
  EXPECT_TRUE(has_flag(h.tracker.take_flags(), "prediction_overwritten"));
  EXPECT_EQ(h.tracker.state().predicted_next, "second guess");
  const auto prompt = h.llm.call_log()->snapshot().at(0).prompt;
  EXPECT_NE(prompt.find("belief: belief one; desire: desire one; intention: intention one"), std::string::npos);
}

TEST(Prediction, ScoreConsumesPrediction) {
  Harness h;
  h.seed_ledgers("");
  EXPECT_TOMSIM_ERROR(h.tracker.observe_and_score(Utterance{"A", "a b d", 2}, 2), MissingPrediction);
  h.llm.push("predict_response", "a b c");
  h.tracker.predict_response(two_turns());
  EXPECT_DOUBLE_EQ(h.tracker.observe_and_score(Utterance{"A", "a b d", 2}, 2), 0.5);
  EXPECT_FALSE(h.tracker.state().predicted_next);
  EXPECT_EQ(h.tracker.state().last_prediction, "a b c");
  EXPECT_EQ(h.tracker.state().similarity_history, std::vector<double>{0.5});
}

TEST(Reflect, UpdatedSectionWins) {
  TrackerOptions opts;
  opts.variant = TrackerVariant::Reflection;
  opts.strict_capacity = false;
  Harness h(opts);
  h.tracker.mutable_state().ledgers[Facet::Belief] =
      ledger_of(Facet::Belief,
                {{"Sympathy-needing Agent values quality time with loved ones", 50},
                 {"Sympathy-needing Agent regrets taking time with the dog for granted", 30},
                 {"Sympathy-needing Agent hopes voicing regret will earn understanding", 20}},
                3, false);
  h.llm.push("reflect", tomsim::testing::slurp(tomsim::testing::fixture("reflection_example.txt")));
  const auto l = h.tracker.reflect_and_update(two_turns(), Facet::Belief);
  ASSERT_EQ(l.size(), 4u);
  std::vector<double> conf;
  for (const auto& e : l.entries) conf.push_back(e.confidence);
  EXPECT_EQ(conf, (std::vector<double>{55, 30, 10, 5}));
  EXPECT_EQ(h.tracker.state().reflection_history.size(), 1u);
  EXPECT_EQ(h.tracker.state().reflection_history[0].rfind("belief: ", 0), 0u);
  EXPECT_FALSE(h.tracker.take_plans().at(Facet::Belief).empty());
}

TEST(Reflect, EmptyPlanLeavesLedger) {
  Harness h;
  h.seed_ledgers("");
  const auto before = h.tracker.state().ledgers.at(Facet::Belief);
  h.llm.push("reflect", "Reflection: nothing new.\nPlan:\nKeep everything as it is.");
  EXPECT_EQ(h.tracker.reflect_and_update(two_turns(), Facet::Belief), before);
  EXPECT_TRUE(has_flag(h.tracker.take_flags(), "update_skipped:belief"));
}

TEST(Reflect, DeletingSoleEntryIsRejected) {
  Harness h;
  h.seed_ledgers("");
  h.tracker.mutable_state().ledgers[Facet::Belief] = ledger_of(Facet::Belief, {{"the user is sad", 100}});
  const auto before = h.tracker.state().ledgers.at(Facet::Belief);
  h.llm.push("reflect", "Reflection: wrong.\nPlan:\n1. Delete the belief that the user is sad.");
  EXPECT_EQ(h.tracker.reflect_and_update(two_turns(), Facet::Belief), before);
  const auto flags = h.tracker.take_flags();
  EXPECT_TRUE(has_flag(flags, "update_error:belief:E_EMPTY_RESULT"));
  EXPECT_TRUE(has_flag(flags, "update_skipped:belief"));
}

TEST(Reflect, UnmatchedTargetsDropped) {
  Harness h;
  h.seed_ledgers("");
  h.llm.push("reflect", "Plan:\n1. Increase the confidence of \"belief two\" by 25%.\n2. Decrease the confidence of \"zebra\" by 5%.");
  const auto l = h.tracker.reflect_and_update(two_turns(), Facet::Belief);
  EXPECT_EQ(top1(l).statement, "belief two");
  EXPECT_TRUE(has_flag(h.tracker.take_flags(), "unmatched_target:belief"));
}

// Independent statement of the CR decision rule used as the oracle.
struct CrCase {
  TriggerPolicy policy;
  double s_prev;
  double s_curr;
  double s_v;
};

UpdatePath expected_path(const CrCase& c) {
  const bool rose = c.s_curr > c.s_prev;
  const bool fire = c.policy == TriggerPolicy::OnIncrease ? rose : !rose;
  if (!fire) return UpdatePath::Standard;
  return c.s_v > c.s_curr ? UpdatePath::Counterfactual : UpdatePath::Standard;
}

TEST(CounterfactualStep, TruthTable) {
  std::vector<CrCase> cases;
  for (auto policy : {TriggerPolicy::OnIncrease, TriggerPolicy::OnNonIncrease})
    for (auto [prev, curr] : std::vector<std::pair<double, double>>{{0.2, 0.5}, {0.5, 0.2}})
      for (double sv : {0.9, 0.1}) cases.push_back({policy, prev, curr, sv});
  ASSERT_EQ(cases.size(), 8u);

  for (const auto& c : cases) {
    TrackerOptions opts;
    opts.policy = c.policy;
    Harness h(opts);
    h.seed_ledgers("");
    h.tracker.mutable_state().similarity_history = {c.s_prev, c.s_curr};
    h.tracker.mutable_state().last_prediction = "predicted";
    h.llm.pin_similarity(2, SimilarityKind::Virtual, c.s_v);
    for (auto facet : kAllFacets) {
      const std::string f(facet_name(facet));
      h.llm.push("counterfactual_reflect", "Reflection: cf " + f + "\nUpdated:\ncf " + f + " | 80%\n" + f + " one | 20%");
      h.llm.push("reflect", "Reflection: std " + f + "\nUpdated:\nstd " + f + " | 70%\n" + f + " one | 30%");
    }
    h.llm.push("virtual_response", "virtual reply");

    auto hist = append_turn(two_turns(), kAgentA, "real reply");
    const auto rec = h.tracker.counterfactual_step(hist, Utterance{"A", "real reply", 2}, 2);
    const auto want = expected_path(c);
    SCOPED_TRACE(std::string(trigger_policy_name(c.policy)) + " " + std::to_string(c.s_prev) + "->" +
                 std::to_string(c.s_curr) + " sv=" + std::to_string(c.s_v));
    EXPECT_EQ(rec.path, want);
    EXPECT_EQ(rec.triggered, should_trigger(c.policy, c.s_prev, c.s_curr));
    EXPECT_EQ(rec.s_v.has_value(), rec.triggered);
    EXPECT_DOUBLE_EQ(rec.s_prev, c.s_prev);
    EXPECT_DOUBLE_EQ(rec.s_curr, c.s_curr);
    const std::string expect_prefix = want == UpdatePath::Counterfactual ? "cf " : "std ";
    for (auto facet : kAllFacets) {
      EXPECT_EQ(top1(h.tracker.state().ledgers.at(facet)).statement, expect_prefix + std::string(facet_name(facet)));
    }
    // Exactly one path's reflections are kept.
    for (const auto& r : h.tracker.state().reflection_history)
      EXPECT_NE(r.find(expect_prefix), std::string::npos) << r;
    if (rec.triggered) {
      EXPECT_EQ(rec.virtual_utt, "virtual reply");
      // The virtual reply answers the history without the real utterance.
      const auto vr = h.llm.call_log()->with_tag("virtual_response").at(0).prompt;
      EXPECT_EQ(vr.find("real reply"), std::string::npos);
    }
  }
}

TEST(CounterfactualStep, CompareToPrevious) {
  TrackerOptions opts;
  opts.compare_to = CompareTo::Previous;
  Harness h(opts);
  h.seed_ledgers("");
  h.tracker.mutable_state().similarity_history = {0.2, 0.5};
  h.llm.pin_similarity(2, SimilarityKind::Virtual, 0.3);
  for (auto facet : kAllFacets)
    h.llm.push("counterfactual_reflect", "Updated:\ncf " + std::string(facet_name(facet)) + " | 100%");
  h.llm.push("virtual_response", "virtual reply");
  const auto rec = h.tracker.counterfactual_step(two_turns(), Utterance{"A", "x", 2}, 2);
  EXPECT_EQ(rec.path, UpdatePath::Counterfactual);
}

TEST(Update, FirstCallInitializesLedgers) {
  TrackerOptions opts;
  opts.variant = TrackerVariant::Reflection;
  Harness h(opts);
  for (int i = 0; i < 3; ++i) h.llm.push("infer_topk", "a | 60%\nb | 40%");
  const auto hist = append_turn(DialogueHistory{}, kAgentA, "hi");
  EXPECT_FALSE(h.tracker.update(hist, hist.turns().back(), 1));
  EXPECT_TRUE(h.tracker.state().initialized());
}

TEST(Update, VanillaKeepsOneEntry) {
  TrackerOptions opts;
  opts.variant = TrackerVariant::Vanilla;
  Harness h(opts);
  for (int i = 0; i < 3; ++i) h.llm.push("infer_topk", "a | 60%\nb | 40%");
  const auto hist = append_turn(DialogueHistory{}, kAgentA, "hi");
  h.tracker.update(hist, hist.turns().back(), 1);
  for (auto facet : kAllFacets) EXPECT_EQ(h.tracker.state().ledgers.at(facet).size(), 1u);
}

TEST(NoTom, BaselinePromptCarriesNoBdi) {
  TrackerOptions opts;
  opts.variant = TrackerVariant::NoTom;
  Harness h(opts);
  h.llm.push("baseline_empathetic", "That sounds hard.");
  const auto hist = append_turn(DialogueHistory{}, kAgentA, "I miss my dog.");
  EXPECT_FALSE(h.tracker.update(hist, hist.turns().back(), 1));
  EXPECT_TRUE(h.tracker.state().ledgers.empty());
  const auto u = h.tracker.generate_tracked_utterance(hist);
  EXPECT_EQ(u.text, "That sounds hard.");
  const auto prompt = h.llm.call_log()->snapshot().at(0).prompt;
  const auto& persona = h.ctx.profile.tracker_persona;
  EXPECT_EQ(prompt.find(persona.belief), std::string::npos);
  EXPECT_EQ(prompt.find("Belief"), std::string::npos);
  EXPECT_EQ(prompt.find("Definition:"), std::string::npos);
}

TEST(NoTom, PersuasionUsesItsBaseline) {
  TrackerOptions opts;
  opts.variant = TrackerVariant::NoTom;
  Harness h(opts, Scenario::Persuasion);
  h.llm.push("baseline_persuasive", "Would you consider a donation?");
  h.tracker.generate_tracked_utterance(append_turn(DialogueHistory{}, kAgentA, "Hello."));
  EXPECT_EQ(h.llm.call_log()->snapshot().at(0).tag, "baseline_persuasive");
}

}  // namespace
}  // namespace tomsim
