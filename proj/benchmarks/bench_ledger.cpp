#include <benchmark/benchmark.h>

#include <random>

#include "tomsim/ledger.hpp"

namespace {

tomsim::ConfidenceLedger make_ledger(std::size_t k, std::mt19937_64& rng) {
  tomsim::ConfidenceLedger l{tomsim::Facet::Belief, k, true, {}};
  for (std::size_t i = 0; i < k; ++i)
    l.entries.push_back({"statement " + std::to_string(i), static_cast<double>(1 + rng() % 50)});
  return l;
}

void BM_Normalize(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto l = make_ledger(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(tomsim::normalize(l));
}
BENCHMARK(BM_Normalize)->Arg(1)->Arg(3)->Arg(5)->Arg(20);

void BM_ApplyPlan(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto l = tomsim::normalize(make_ledger(k, rng));
  const std::vector<tomsim::PlanOp> ops{{tomsim::PlanKind::Increase, "statement 0", 5},
                                        {tomsim::PlanKind::Add, "a new statement", 30},
                                        {tomsim::PlanKind::Decrease, l.entries.back().statement, 3}};
  for (auto _ : state) benchmark::DoNotOptimize(tomsim::apply_plan(l, ops));
}
BENCHMARK(BM_ApplyPlan)->Arg(1)->Arg(3)->Arg(5)->Arg(20);

void BM_ParseRankedList(benchmark::State& state) {
  const std::string raw =
      "1. **The user misses their dog** | 50% confidence (increased)\n"
      "2. The user wants comfort | 30% confidence\n"
      "3. The user regrets not spending time | 20% confidence (decreased)\n";
  for (auto _ : state) benchmark::DoNotOptimize(tomsim::parse_ranked_list(raw, tomsim::Facet::Belief, 3));
}
BENCHMARK(BM_ParseRankedList);

}  // namespace
