#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scripts.hpp"
#include "test_support.hpp"
#include "tomsim_cli/cli.hpp"

namespace {

using nlohmann::json;
using tomsim::testing::fixture;
using tomsim::testing::slurp;
using tomsim::testing::TempDir;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
  [[nodiscard]] json summary() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = tomsim::cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> simulate_demo(const std::string& out) {
  return {"simulate", "--variant", "cr", "--scenario", "empathetic", "--backend", "scripted",
          "--script", fixture("cr_demo.jsonl").string(), "--seed", "7", "--out", out};
}

TEST(Cli, SimulateMatchesGoldenTrace) {
  TempDir dir;
  const auto r = run(simulate_demo((dir / "run.jsonl").string()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = r.summary();
  EXPECT_EQ(s["success"], true);
  EXPECT_EQ(s["rounds_used"], 2);
  EXPECT_EQ(slurp(dir / "run.jsonl"), slurp(fixture("cr_demo_trace.jsonl")));
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["templates"].size(), 12u);
}

TEST(Cli, RepeatRunsAreByteIdentical) {
  TempDir a, b;
  ASSERT_EQ(run(simulate_demo((a / "run.jsonl").string())).code, 0);
  ASSERT_EQ(run(simulate_demo((b / "run.jsonl").string())).code, 0);
  EXPECT_EQ(slurp(a / "run.jsonl"), slurp(b / "run.jsonl"));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
}

TEST(Cli, BatchEchoesConfig) {
  TempDir dir;
  std::ofstream(dir / "script.jsonl") << tomsim::testing::make_script({});
  const auto r = run({"batch", "--variant", "reflection", "--backend", "scripted", "--script",
                      (dir / "script.jsonl").string(), "--n", "100", "--t", "10", "--k", "3", "--jobs", "2",
                      "--seed", "11", "--out", (dir / "batch.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = r.summary();
  EXPECT_EQ(s["episodes"], 100);
  EXPECT_EQ(s["succeeded"], 100);
  EXPECT_EQ(s["config"]["top_k"], 3);
  EXPECT_EQ(s["config"]["max_rounds"], 10);
  EXPECT_DOUBLE_EQ(s["success_rate"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(s["average_turn"].get<double>(), 2.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));

  const auto v = run({"validate-trace", (dir / "batch.jsonl").string()});
  EXPECT_EQ(v.code, 0) << v.out << v.err;
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  TempDir dir;
  std::ofstream(dir / "config.json") << R"({"variant": "cr", "top_k": 5, "max_rounds": 4, "backend": "scripted",
      "script": ")" << fixture("cr_demo.jsonl").string() << R"("})";
  const auto r = run({"simulate", "--config", (dir / "config.json").string(), "--k", "3", "--seed", "7", "--out",
                      (dir / "run.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary()["config"]["top_k"], 3);
  EXPECT_EQ(r.summary()["config"]["max_rounds"], 4);
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  auto r = run({"simulate", "--variant", "bogus", "--out", (dir / "x.jsonl").string()});
  EXPECT_EQ(r.code, tomsim::cli::kExitUsage);
  EXPECT_NE(r.err.find("--variant"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, tomsim::cli::kExitUsage);
  EXPECT_EQ(run({"simulate"}).code, tomsim::cli::kExitUsage);
}

TEST(Cli, DomainErrors) {
  TempDir dir;
  auto args = simulate_demo((dir / "missing" / "run.jsonl").string());
  auto r = run(args);
  EXPECT_EQ(r.code, tomsim::cli::kExitDomainError);
  EXPECT_NE(r.err.find("error[E_IO]"), std::string::npos) << r.err;
  std::ofstream(dir / "bad.json") << R"({"top_k": 3, "wat": 1})";
  r = run({"simulate", "--config", (dir / "bad.json").string(), "--backend", "scripted", "--script",
           fixture("cr_demo.jsonl").string(), "--out", (dir / "run.jsonl").string()});
  EXPECT_EQ(r.code, tomsim::cli::kExitDomainError);
  EXPECT_NE(r.err.find("E_INVALID_CONFIG"), std::string::npos) << r.err;
}

TEST(Cli, ValidateTraceRejectsMutation) {
  TempDir dir;
  auto text = slurp(fixture("cr_demo_trace.jsonl"));
  const auto pos = text.find("\"rounds_used\":2");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 15, "\"rounds_used\":7");
  std::ofstream(dir / "bad.jsonl") << text;
  const auto r = run({"validate-trace", (dir / "bad.jsonl").string()});
  EXPECT_EQ(r.code, tomsim::cli::kExitDomainError);
  EXPECT_NE(r.err.find("E_INVALID_TRACE"), std::string::npos);
  EXPECT_EQ(run({"validate-trace", fixture("cr_demo_trace.jsonl").string()}).code, 0);
}

TEST(Cli, IngestSampleAndInit) {
  TempDir dir;
  std::ofstream(dir / "ed.csv") << "conv_id,utterance_idx,context,prompt,speaker_idx,utterance\n"
                                   "hit:1,1,sad,x,1,I lost my job.\nhit:1,2,sad,x,2,I am sorry.\n"
                                   "hit:2,1,joy,y,3,I got a puppy!\nhit:2,2,joy,y,4,How fun!\n"
                                   "hit:3,1,joy,z,5,We won.\nhit:3,2,joy,z,6,Congrats.\n";
  auto r = run({"ingest", "--input", (dir / "ed.csv").string(), "--source", "empathetic_dialogues", "--out",
                (dir / "episodes.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary()["episodes"], 3);

  r = run({"sample-seeds", "--episodes", (dir / "episodes.jsonl").string(), "--n", "2", "--seed", "4", "--out",
           (dir / "seeds.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary()["episode_ids"].size(), 2u);
  r = run({"sample-seeds", "--episodes", (dir / "episodes.jsonl").string(), "--n", "9", "--out",
           (dir / "too_many.jsonl").string()});
  EXPECT_EQ(r.code, tomsim::cli::kExitDomainError);

  std::ofstream(dir / "init.jsonl") << tomsim::testing::make_script({});
  r = run({"init-bdi", "--backend", "scripted", "--script", (dir / "init.jsonl").string(), "--seeds",
           (dir / "seeds.jsonl").string(), "--seed-index", "1", "--seed", "5", "--out",
           (dir / "bdi.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "bdi.json"));
}

TEST(Cli, EvalAndCurves) {
  TempDir dir;
  std::ofstream(dir / "ann.csv") << "episode_id,facet,order,score_1,score_2\n"
                                    "ep-7,belief,first,4,5\nep-7,belief,second,5,5\n";
  auto r = run({"eval", "--traces", fixture("cr_demo_trace.jsonl").string(), "--annotations",
                (dir / "ann.csv").string(), "--out", (dir / "report.json").string(), "--table",
                (dir / "table.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir / "report.json"));
  ASSERT_EQ(report["groups"].size(), 1u);
  EXPECT_EQ(report["groups"][0]["variant"], "cr");
  EXPECT_DOUBLE_EQ(report["groups"][0]["success_rate"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["groups"][0]["average_turn"].get<double>(), 2.0);
  EXPECT_NE(slurp(dir / "table.csv").find("first_belief_precision"), std::string::npos);

  r = run({"export-curves", "--traces", fixture("cr_demo_trace.jsonl").string(), "--similarity", "jaccard", "--out",
           (dir / "curves.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir / "curves.csv");
  EXPECT_EQ(csv.rfind("episode_id,facet,round,similarity\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 2);
}

}  // namespace
