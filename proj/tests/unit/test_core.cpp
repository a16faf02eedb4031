#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "tomsim/core.hpp"

namespace tomsim {
namespace {

const NameMap kNames{{"A", "Sympathy-needing Agent"}, {"B", "Empathetic Agent"}};

TEST(Facet, NamesAndParsing) {
  EXPECT_EQ(facet_name(Facet::Belief), "belief");
  EXPECT_EQ(parse_facet("Desires"), Facet::Desire);
  EXPECT_EQ(parse_facet(" intention "), Facet::Intention);
  EXPECT_FALSE(parse_facet("emotion"));
  EXPECT_EQ(kAllFacets.size(), 3u);
}

TEST(BDITriple, RejectsBlankFields) {
  EXPECT_NO_THROW(BDITriple::make("b", "d", "i"));
  EXPECT_TOMSIM_ERROR(BDITriple::make("b", "  ", "i"), InvalidTriple);
  const auto t = BDITriple::make("b", "d", "i");
  EXPECT_EQ(t.get(Facet::Desire), "d");
}

TEST(AppendTurn, BaseCaseAndAlternation) {
  DialogueHistory h;
  h = append_turn(h, kAgentA, "hello");
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h.turns()[0].turn_index, 0u);
  h = append_turn(h, kAgentB, "hi");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.turns()[1].turn_index, 1u);
}

TEST(AppendTurn, Violations) {
  const auto h = append_turn(DialogueHistory{}, kAgentA, "hello");
  EXPECT_TOMSIM_ERROR(append_turn(h, kAgentA, "again"), AlternationViolation);
  EXPECT_TOMSIM_ERROR(append_turn(DialogueHistory{}, kAgentB, "first"), AlternationViolation);
  EXPECT_TOMSIM_ERROR(append_turn(h, kAgentB, " \n"), EmptyUtterance);
}

TEST(AppendTurn, LeavesOriginalUntouched) {
  const auto h1 = append_turn(DialogueHistory{}, kAgentA, "hello");
  const auto h2 = append_turn(h1, kAgentB, "hi");
  EXPECT_EQ(h1.size(), 1u);
  EXPECT_EQ(h2.drop_last(), h1);
}

TEST(RenderHistory, Empty) { EXPECT_EQ(render_history(DialogueHistory{}, kNames), ""); }

TEST(RenderHistory, SingleLine) {
  const auto h = append_turn(DialogueHistory{}, kAgentA, "I miss walking my dog every morning");
  EXPECT_EQ(render_history(h, kNames), "Sympathy-needing Agent: I miss walking my dog every morning");
}

TEST(RenderHistory, TwoTurnsInOrder) {
  auto h = append_turn(DialogueHistory{}, kAgentA, "one");
  h = append_turn(h, kAgentB, "two");
  EXPECT_EQ(render_history(h, kNames), "Sympathy-needing Agent: one\nEmpathetic Agent: two");
}

TEST(RenderHistory, UnknownSpeaker) {
  const auto h = append_turn(DialogueHistory{}, kAgentA, "one");
  EXPECT_TOMSIM_ERROR(render_history(h, NameMap{{"B", "x"}}), UnknownSpeaker);
}

TEST(DialogueHistory, LineAndRoundCountProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng() % 12);
    DialogueHistory h;
    for (std::size_t i = 0; i < n; ++i) h = append_turn(h, h.next_speaker(), "turn " + std::to_string(i));
    const auto rendered = render_history(h, kNames);
    const auto lines = rendered.empty() ? 0 : std::count(rendered.begin(), rendered.end(), '\n') + 1;
    EXPECT_EQ(static_cast<std::size_t>(lines), n);
    EXPECT_EQ(h.round_count(), (n + 1) / 2);
    EXPECT_EQ(h.count(TurnUnit::Utterance), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(h.turns()[i].turn_index, i);
      EXPECT_EQ(h.turns()[i].speaker, i % 2 == 0 ? "A" : "B");
    }
  }
}

TEST(Decision, Tokens) {
  EXPECT_EQ(decision_name(Decision::Say), "SAY");
  EXPECT_EQ(decision_name(Decision::Goodbye), "GOODBYE");
  EXPECT_EQ(parse_decision("goodbye"), Decision::Goodbye);
  EXPECT_FALSE(parse_decision("bye"));
}

}  // namespace
}  // namespace tomsim
