#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "tomsim/backend.hpp"

namespace tomsim {
namespace {

// Independent oracle: token-set Jaccard built from std::set.
double jaccard_oracle(const std::string& a, const std::string& b) {
  auto tokens = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    std::istringstream in(s);
    std::set<std::string> out;
    for (std::string t; in >> t;) out.insert(t);
    return out;
  };
  const auto ta = tokens(a);
  const auto tb = tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::vector<std::string> inter;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(inter));
  std::set<std::string> uni(ta);
  uni.insert(tb.begin(), tb.end());
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(jaccard_similarity("a b c", "a b d"), jaccard_oracle("a b c", "a b d"));
  EXPECT_DOUBLE_EQ(jaccard_similarity("a b c", "a b d"), 0.5);
  EXPECT_DOUBLE_EQ(jaccard_similarity("x y", "z w"), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_similarity("Hello World", "hello world"), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_similarity("", ""), 1.0);
}

TEST(Jaccard, RandomizedAgainstOracle) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "G", "h"};
  auto sentence = [&] {
    std::string s;
    for (auto n = rng() % 6; n > 0; --n) s += vocab[rng() % vocab.size()] + " ";
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = sentence();
    const auto b = sentence();
    const double s = jaccard_similarity(a, b);
    EXPECT_DOUBLE_EQ(s, jaccard_oracle(a, b));
    EXPECT_DOUBLE_EQ(s, jaccard_similarity(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(jaccard_similarity(a, a), 1.0);
  }
}

TEST(Cosine, ClampedAndChecked) {
  EXPECT_DOUBLE_EQ(clamped_cosine({1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(clamped_cosine({1, 0}, {0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(clamped_cosine({1, 0}, {-1, 0}), 0.0);
  EXPECT_NEAR(clamped_cosine({1, 1}, {1, 0}), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_TOMSIM_ERROR(clamped_cosine({1, 0}, {1, 0, 0}), EmbeddingDimensionMismatch);
}

TEST(Scripted, FifoPerTag) {
  ScriptedBackend b;
  b.push("infer_topk", "first");
  b.push("judgment", "SAY | x");
  b.push("infer_topk", "second");
  EXPECT_EQ(b.complete({"p", 0.7, 10, "infer_topk"}), "first");
  EXPECT_EQ(b.complete({"p", 0.7, 10, "judgment"}), "SAY | x");
  EXPECT_EQ(b.complete({"p", 0.7, 10, "infer_topk"}), "second");
  EXPECT_TOMSIM_ERROR(b.complete({"p", 0.7, 10, "infer_topk"}), ScriptExhausted);
  EXPECT_EQ(b.call_log()->size(), 3u);
  EXPECT_EQ(b.call_log()->with_tag("infer_topk").size(), 2u);
}

TEST(Scripted, EmptyResponse) {
  ScriptedBackend b;
  b.push("t", "   ");
  EXPECT_TOMSIM_ERROR(b.complete({"p", 0.7, 10, "t"}), EmptyCompletion);
}

TEST(Scripted, SimilarityOverrides) {
  ScriptedBackend b;
  b.pin_similarity(2, SimilarityKind::Foresight, 0.35);
  b.pin_similarity(2, SimilarityKind::Virtual, 0.6);
  EXPECT_DOUBLE_EQ(b.score({"a b", "c d", 2, SimilarityKind::Foresight}), 0.35);
  EXPECT_DOUBLE_EQ(b.score({"a b", "c d", 2, SimilarityKind::Virtual}), 0.6);
  EXPECT_DOUBLE_EQ(b.score({"a b c", "a b d", 1, SimilarityKind::Foresight}), 0.5);
  EXPECT_DOUBLE_EQ(b.score({"a b c", "a b d", 2, SimilarityKind::Truth}), 0.5);
}

TEST(Scripted, CloneHasFreshLogAndSameQueues) {
  ScriptedBackend b;
  b.push("t", "r");
  auto c = b.clone();
  EXPECT_EQ(c->complete({"p", 0.7, 10, "t"}), "r");
  EXPECT_EQ(b.remaining("t"), 1u);
  EXPECT_EQ(b.call_log()->size(), 0u);
}

TEST(ParseScript, ValidLines) {
  auto b = parse_script(
      "# comment\n"
      "{\"tag\": \"a\", \"response\": \"one\"}\n"
      "\n"
      "{\"tag\": \"a\", \"response\": \"two\"}\n"
      "{\"tag\": \"__similarity__\", \"round\": 2, \"value\": 0.6, \"which\": \"s_v\"}\n");
  EXPECT_EQ(b.remaining("a"), 2u);
  EXPECT_EQ(b.total_remaining(), 2u);
  EXPECT_DOUBLE_EQ(b.score({"x", "y", 2, SimilarityKind::Virtual}), 0.6);
}

TEST(ParseScript, ErrorsNameTheLine) {
  try {
    parse_script("{\"tag\": \"a\", \"response\": \"one\"}\n{\"tag\": \"a\"}\n");
    FAIL() << "expected ScriptParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScriptParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_TOMSIM_ERROR(parse_script("not json"), ScriptParseError);
  EXPECT_TOMSIM_ERROR(parse_script("{\"tag\": \"__similarity__\", \"round\": 1, \"value\": 2}"), ScriptParseError);
  EXPECT_TOMSIM_ERROR(load_script("/nonexistent/script.jsonl"), IoError);
}

TEST(ParseScript, DemoFixtureLoads) {
  auto b = load_script(tomsim::testing::fixture("cr_demo.jsonl"));
  EXPECT_GT(b.total_remaining(), 10u);
}

}  // namespace
}  // namespace tomsim
