#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "tomsim/prompts.hpp"

namespace tomsim {
namespace {

using tomsim::testing::TempDir;

Bindings bind_all(TemplateId id) {
  Bindings b;
  for (const auto& name : documented_bindings(id)) b[name] = "<" + name + ">";
  return b;
}

TEST(Templates, NamesRoundTrip) {
  for (auto id : kAllTemplates) EXPECT_EQ(parse_template_id(template_name(id)), id);
  EXPECT_FALSE(parse_template_id("nope"));
}

TEST(Templates, PlaceholdersMatchDocumentedBindings) {
  const auto& reg = TemplateRegistry::builtin();
  for (auto id : kAllTemplates) {
    const auto found = extract_placeholders(reg.text(id));
    const std::set<std::string> got(found.begin(), found.end());
    EXPECT_EQ(got, documented_bindings(id)) << template_name(id);
  }
}

TEST(Templates, BuiltinMatchesSourceFiles) {
  const auto disk = TemplateRegistry::load(TOMSIM_TEMPLATE_DIR);
  EXPECT_EQ(disk.checksums(), TemplateRegistry::builtin().checksums());
}

TEST(Render, InferTopK) {
  auto b = bind_all(TemplateId::InferTopK);
  b["top_k"] = "3";
  b["picked_type"] = "belief";
  const auto out = TemplateRegistry::builtin().render(TemplateId::InferTopK, b);
  EXPECT_NE(out.find("List top-3 possible belief"), std::string::npos);
  EXPECT_NE(out.find("split by |"), std::string::npos);
  EXPECT_EQ(out.find('{'), std::string::npos);
  EXPECT_EQ(out.rfind("Definition:", 0), 0u);
}

TEST(Render, MissingPlaceholderNamesIt) {
  auto b = bind_all(TemplateId::SelfUtterance);
  b.erase("judgement_reason");
  try {
    (void)TemplateRegistry::builtin().render(TemplateId::SelfUtterance, b);
    FAIL() << "expected MissingPlaceholder";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholder);
    EXPECT_EQ(std::string(e.what()), "judgement_reason");
  }
}

TEST(Render, IsPure) {
  const auto& reg = TemplateRegistry::builtin();
  for (auto id : kAllTemplates) {
    const auto b = bind_all(id);
    EXPECT_EQ(reg.render(id, b), reg.render(id, b));
  }
}

TEST(Render, BdiInitGetsDefinition) {
  auto b = bind_all(TemplateId::BdiInit);
  b.erase("definition");
  const auto& reg = TemplateRegistry::builtin();
  const auto out = reg.render(TemplateId::BdiInit, b);
  EXPECT_NE(out.find(reg.definition().substr(0, 30)), std::string::npos);
}

TEST(Registry, LoadAndChecksum) {
  TempDir dir;
  for (auto id : kAllTemplates) std::ofstream(dir / (std::string(template_name(id)) + ".txt")) << "abc";
  std::ofstream(dir / "definition.txt") << "abc";
  const auto reg = TemplateRegistry::load(dir.path());
  const auto sums = reg.checksums();
  EXPECT_EQ(sums.size(), std::size(kAllTemplates) + 1);
  for (const auto& [name, sum] : sums)
    EXPECT_EQ(sum, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad") << name;
}

TEST(Registry, LoadMissingFile) {
  TempDir dir;
  EXPECT_TOMSIM_ERROR(TemplateRegistry::load(dir.path()), IoError);
}

TEST(ParseJudgment, Forms) {
  auto say = parse_judgment("decision: SAY | I still feel my fear of judgment has not been addressed.");
  EXPECT_EQ(say.judgment.decision, Decision::Say);
  EXPECT_FALSE(say.fallback);
  EXPECT_EQ(say.judgment.reason, "I still feel my fear of judgment has not been addressed.");

  auto bye = parse_judgment("GOODBYE | satisfied");
  EXPECT_EQ(bye.judgment.decision, Decision::Goodbye);
  EXPECT_EQ(bye.judgment.reason, "satisfied");

  auto odd = parse_judgment("I am not sure what to do.");
  EXPECT_EQ(odd.judgment.decision, Decision::Say);
  EXPECT_TRUE(odd.fallback);
}

TEST(ParseBdiSets, LabeledBlocks) {
  const std::string raw =
      "1. Belief: b1\nDesire: d1\nIntention: i1\n"
      "2. Belief: b2\nDesire: d2\nIntention: i2\n"
      "3. Belief: b3\nDesire: d3\nIntention: i3\n";
  const auto sets = parse_bdi_sets(raw, 3);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[1], BDITriple::make("b2", "d2", "i2"));
}

TEST(ParseBdiSets, TruncatesToK) {
  std::string raw;
  for (int i = 1; i <= 5; ++i) {
    const auto n = std::to_string(i);
    raw += "Belief: b" + n + "; Desire: d" + n + "; Intention: i" + n + "\n";
  }
  const auto sets = parse_bdi_sets(raw, 3);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[2].belief, "b3");
}

TEST(ParseBdiSets, ProseHasNoTriples) {
  EXPECT_TOMSIM_ERROR(parse_bdi_sets("I think the person is sad about something.", 3), NoTriplesFound);
}

TEST(ParsePlanLine, IncreaseWithAmount) {
  const auto op = parse_plan_line("increase the confidence of X by 10%", 3);
  ASSERT_TRUE(op);
  EXPECT_EQ(op->kind, PlanKind::Increase);
  EXPECT_EQ(op->target, "X");
  EXPECT_DOUBLE_EQ(op->amount, 10.0);
  EXPECT_FALSE(op->amount_defaulted);
}

TEST(ParsePlanLine, DefaultsAndNonOps) {
  const auto add = parse_plan_line("Add a new belief that the user likes tea.", 3);
  ASSERT_TRUE(add);
  EXPECT_EQ(add->kind, PlanKind::Add);
  EXPECT_TRUE(add->amount_defaulted);
  EXPECT_DOUBLE_EQ(add->amount, 25.0);
  const auto del = parse_plan_line("2. Delete the intention to leave early.", 3);
  ASSERT_TRUE(del);
  EXPECT_EQ(del->kind, PlanKind::Delete);
  EXPECT_FALSE(parse_plan_line("Keep everything else as it is.", 3));
}

TEST(ParseReflection, Example) {
  const auto raw = tomsim::testing::slurp(tomsim::testing::fixture("reflection_example.txt"));
  const auto out = parse_reflection(raw, 3);
  EXPECT_FALSE(out.no_sections);
  EXPECT_EQ(out.reflection.rfind("The newest reply", 0), 0u);
  EXPECT_EQ(std::count(out.plan_raw.begin(), out.plan_raw.end(), '\n'), 3);
  EXPECT_EQ(out.updated_ledger_raw.rfind("- Sympathy-needing Agent values", 0), 0u);
  EXPECT_EQ(std::count(out.updated_ledger_raw.begin(), out.updated_ledger_raw.end(), '\n'), 3);
  ASSERT_GE(out.plan.size(), 2u);
  EXPECT_EQ(out.plan[0].kind, PlanKind::Add);
  EXPECT_EQ(out.plan[1].kind, PlanKind::Increase);
}

TEST(ParseReflection, NoSections) {
  const auto out = parse_reflection("The person seems upset and I should be kinder.");
  EXPECT_TRUE(out.no_sections);
  EXPECT_EQ(out.plan_raw, "The person seems upset and I should be kinder.");
  EXPECT_TRUE(out.plan.empty());
}

}  // namespace
}  // namespace tomsim
