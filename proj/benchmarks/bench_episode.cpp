#include <benchmark/benchmark.h>

#include "support/scripts.hpp"
#include "tomsim/data.hpp"
#include "tomsim/engine.hpp"

namespace {

tomsim::ScriptedBackend script_for(std::size_t rounds) {
  tomsim::testing::ScriptSpec spec;
  spec.rounds = rounds;
  return tomsim::parse_script(tomsim::testing::make_script(spec));
}

tomsim::EpisodeResult run_once(const tomsim::ScriptedBackend& script, std::size_t max_rounds) {
  tomsim::EpisodeConfig config;
  config.max_rounds = max_rounds;
  std::shared_ptr<tomsim::ScriptedBackend> b = script.clone();
  return tomsim::run_episode(config, tomsim::demo_seed_episode(), tomsim::EpisodeBackends{b, b});
}

void BM_ScriptedEpisode(benchmark::State& state) {
  const auto rounds = static_cast<std::size_t>(state.range(0));
  const auto script = script_for(rounds);
  for (auto _ : state) {
    auto result = run_once(script, rounds);
    if (result.aborted) state.SkipWithError(result.abort_reason.c_str());
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_ScriptedEpisode)->Arg(2)->Arg(10);

void BM_TraceSerialization(benchmark::State& state) {
  const auto result = run_once(script_for(10), 10);
  for (auto _ : state) benchmark::DoNotOptimize(tomsim::traces_to_jsonl({result}));
}
BENCHMARK(BM_TraceSerialization);

}  // namespace
