#include "tomsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "text_util.hpp"
#include "tomsim/error.hpp"
#include "tomsim/rng.hpp"
#include "tomsim/self_agent.hpp"

namespace tomsim {

using nlohmann::json;

namespace {

std::string_view turn_unit_name(TurnUnit unit) {
  return unit == TurnUnit::Utterance ? "utterance" : "round";
}

TurnUnit parse_turn_unit(std::string_view text) {
  if (text == "round") return TurnUnit::Round;
  if (text == "utterance") return TurnUnit::Utterance;
  throw Error(ErrorCode::InvalidConfig, "unknown turn unit: " + std::string(text));
}

}  // namespace

void EpisodeConfig::validate() const {
  if (top_k == 0) throw Error(ErrorCode::InvalidConfig, "top_k must be at least 1");
  if (max_rounds == 0) throw Error(ErrorCode::InvalidConfig, "max_rounds must be at least 1");
  if (!(reverse_probability >= 0.0 && reverse_probability <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "reverse_probability must lie in [0, 1]");
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
  if (temperatures.utterance < 0.0 || temperatures.structured < 0.0)
    throw Error(ErrorCode::InvalidConfig, "temperatures must be non-negative");
  if (true_bdi && !true_bdi->valid()) throw Error(ErrorCode::InvalidConfig, "true_bdi has a blank field");
}

std::size_t EpisodeConfig::round_limit() const noexcept {
  if (turn_unit == TurnUnit::Round) return max_rounds;
  return std::max<std::size_t>(1, (max_rounds + 1) / 2);
}

ScenarioProfile EpisodeConfig::resolved_profile() const {
  return profile ? *profile : ScenarioProfile::defaults(scenario);
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

json triple_to_json(const BDITriple& t) {
  return json{{"belief", t.belief}, {"desire", t.desire}, {"intention", t.intention}};
}

BDITriple triple_from_json(const json& j) {
  return BDITriple{j.at("belief").get<std::string>(), j.at("desire").get<std::string>(),
                   j.at("intention").get<std::string>()};
}

const std::set<std::string, std::less<>> kConfigKeys = {
    "episode_id", "scenario", "variant", "top_k", "max_rounds", "turn_unit", "rng_seed",
    "cf_trigger_policy", "cf_compare_to", "reverse_probability", "strict_capacity",
    "count_aborted_as_failure", "compute_truth_similarity", "temperatures", "max_tokens",
    "true_bdi", "profile"};

}  // namespace

json config_to_json(const EpisodeConfig& c) {
  json j{
      {"episode_id", c.episode_id},
      {"scenario", scenario_name(c.scenario)},
      {"variant", variant_name(c.variant)},
      {"top_k", c.top_k},
      {"max_rounds", c.max_rounds},
      {"turn_unit", turn_unit_name(c.turn_unit)},
      {"rng_seed", c.rng_seed},
      {"cf_trigger_policy", trigger_policy_name(c.cf_trigger_policy)},
      {"cf_compare_to", compare_to_name(c.cf_compare_to)},
      {"reverse_probability", c.reverse_probability},
      {"strict_capacity", c.strict_capacity},
      {"count_aborted_as_failure", c.count_aborted_as_failure},
      {"compute_truth_similarity", c.compute_truth_similarity},
      {"temperatures", {{"utterance", c.temperatures.utterance}, {"structured", c.temperatures.structured}}},
      {"max_tokens", c.max_tokens},
      {"true_bdi", c.true_bdi ? triple_to_json(*c.true_bdi) : json(nullptr)},
  };
  if (c.profile) {
    j["profile"] = {{"self_name", c.profile->self_name},
                    {"tracker_name", c.profile->tracker_name},
                    {"seek_goal", c.profile->seek_goal},
                    {"response_style", c.profile->response_style},
                    {"tracker_persona", triple_to_json(c.profile->tracker_persona)}};
  } else {
    j["profile"] = nullptr;
  }
  return j;
}

EpisodeConfig config_from_json(const json& j, EpisodeConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kConfigKeys.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key: " + key);
  try {
    if (j.contains("episode_id")) c.episode_id = j["episode_id"].get<std::string>();
    if (j.contains("scenario")) c.scenario = parse_scenario(j["scenario"].get<std::string>());
    if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
    if (j.contains("top_k")) c.top_k = j["top_k"].get<std::size_t>();
    if (j.contains("max_rounds")) c.max_rounds = j["max_rounds"].get<std::size_t>();
    if (j.contains("turn_unit")) c.turn_unit = parse_turn_unit(j["turn_unit"].get<std::string>());
    if (j.contains("rng_seed")) c.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("cf_trigger_policy"))
      c.cf_trigger_policy = parse_trigger_policy(j["cf_trigger_policy"].get<std::string>());
    if (j.contains("cf_compare_to")) c.cf_compare_to = parse_compare_to(j["cf_compare_to"].get<std::string>());
    if (j.contains("reverse_probability")) c.reverse_probability = j["reverse_probability"].get<double>();
    if (j.contains("strict_capacity")) c.strict_capacity = j["strict_capacity"].get<bool>();
    if (j.contains("count_aborted_as_failure"))
      c.count_aborted_as_failure = j["count_aborted_as_failure"].get<bool>();
    if (j.contains("compute_truth_similarity"))
      c.compute_truth_similarity = j["compute_truth_similarity"].get<bool>();
    if (j.contains("temperatures")) {
      const auto& t = j["temperatures"];
      if (t.contains("utterance")) c.temperatures.utterance = t["utterance"].get<double>();
      if (t.contains("structured")) c.temperatures.structured = t["structured"].get<double>();
    }
    if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<int>();
    if (j.contains("true_bdi")) {
      if (j["true_bdi"].is_null()) c.true_bdi.reset();
      else c.true_bdi = triple_from_json(j["true_bdi"]);
    }
    if (j.contains("profile")) {
      if (j["profile"].is_null()) {
        c.profile.reset();
      } else {
        auto p = ScenarioProfile::defaults(c.scenario);
        const auto& pj = j["profile"];
        if (pj.contains("self_name")) p.self_name = pj["self_name"].get<std::string>();
        if (pj.contains("tracker_name")) p.tracker_name = pj["tracker_name"].get<std::string>();
        if (pj.contains("seek_goal")) p.seek_goal = pj["seek_goal"].get<std::string>();
        if (pj.contains("response_style")) p.response_style = pj["response_style"].get<std::string>();
        if (pj.contains("tracker_persona")) p.tracker_persona = triple_from_json(pj["tracker_persona"]);
        c.profile = p;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Episode loop

std::size_t EpisodeResult::similarity_count() const noexcept {
  std::size_t n = closing_s ? 1 : 0;
  for (const auto& t : traces) n += t.s ? 1 : 0;
  return n;
}

bool EpisodeResult::has_fallback_flags() const noexcept {
  return std::any_of(traces.begin(), traces.end(),
                     [](const TurnTrace& t) { return t.judgment_fallback || !t.flags.empty(); });
}

namespace {

bool predicts(TrackerVariant v) { return v == TrackerVariant::Reflection || v == TrackerVariant::CR; }

void mark_aborted(EpisodeResult& result, const Error& e) {
  result.aborted = true;
  result.success = false;
  result.abort_reason = std::string(error_code_name(e.code())) + ": " + e.what();
}

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& config, const NormalizedEpisode& seed_episode,
                          const EpisodeBackends& backends, const TemplateRegistry& templates) {
  config.validate();
  if (!backends.llm || !backends.scorer)
    throw Error(ErrorCode::InvalidConfig, "episode needs a text generator and a similarity scorer");

  EpisodeResult result;
  result.episode_id = config.episode_id.empty() ? "ep-" + std::to_string(config.rng_seed) : config.episode_id;
  result.scenario = config.scenario;
  result.variant = config.variant;
  result.top_k = config.top_k;
  result.max_rounds = config.round_limit();
  result.rng_seed = config.rng_seed;
  result.strict_capacity = config.strict_capacity;

  AgentContext ctx{*backends.llm, templates, config.resolved_profile(), config.temperatures,
                   config.max_tokens, result.episode_id};
  SimilarityScorer& scorer = *backends.scorer;

  try {
    if (config.true_bdi) {
      result.true_bdi = *config.true_bdi;
    } else {
      auto init = init_bdi(ctx, seed_episode, config.top_k, derive_seed(config.rng_seed, kInitStream));
      result.true_bdi = init.chosen;
      result.init_choice = init.choice_index;
    }
    if (config.reverse_probability > 0.0) {
      Rng rng(derive_seed(config.rng_seed, kReverseStream));
      if (uniform_unit(rng) < config.reverse_probability) {
        result.original_bdi = result.true_bdi;
        result.true_bdi = reverse_bdi(ctx, result.true_bdi);
      }
    }
  } catch (const Error& e) {
    if (!is_backend_failure(e.code())) throw;
    mark_aborted(result, e);
    return result;
  }

  SelfAgentState self{result.true_bdi, config.scenario, ctx.profile.self_name, std::nullopt};
  Tracker tracker(ctx, scorer,
                  TrackerOptions{config.variant, config.top_k, config.strict_capacity, config.cf_trigger_policy,
                                 config.cf_compare_to});
  DialogueHistory history;

  for (std::size_t round = 1; round <= result.max_rounds; ++round) {
    const int r = static_cast<int>(round);
    TurnTrace trace;
    trace.round = round;
    try {
      const auto a = generate_self_utterance(ctx, self, history);
      history = append_turn(history, kAgentA, a.text);
      trace.a_utt = a.text;

      if (tracker.state().predicted_next) {
        trace.pred_utt = tracker.state().predicted_next;
        trace.s = tracker.observe_and_score(a, r);
      }
      trace.branch = tracker.update(history, a, r);

      const auto b = tracker.generate_tracked_utterance(history);
      history = append_turn(history, kAgentB, b.text);
      trace.b_utt = b.text;

      if (predicts(config.variant)) tracker.predict_response(history);

      const auto judged = judge_second_order(ctx, self, history);
      trace.judgment = judged.judgment;
      trace.judgment_fallback = judged.fallback;

      trace.ledgers = tracker.state().ledgers;
      if (auto plans = tracker.take_plans(); !plans.empty()) trace.plan = std::move(plans);
      trace.flags = tracker.take_flags();
      if (judged.fallback) trace.flags.push_back("judgment_fallback");
      if (config.compute_truth_similarity && tracker.state().initialized()) {
        std::map<Facet, double> sims;
        for (auto facet : kAllFacets)
          sims[facet] = scorer.score(top1(trace.ledgers.at(facet)).statement, result.true_bdi.get(facet));
        trace.truth_sim = std::move(sims);
      }
    } catch (const Error& e) {
      if (!is_backend_failure(e.code())) throw;
      mark_aborted(result, e);
      break;
    }

    result.traces.push_back(std::move(trace));
    result.rounds_used = round;
    result.final_judgment = self.last_judgment;

    if (self.last_judgment && self.last_judgment->decision == Decision::Goodbye) {
      try {
        const auto closing = generate_self_utterance(ctx, self, history);
        history = append_turn(history, kAgentA, closing.text);
        result.closing_utt = closing.text;
        if (tracker.state().predicted_next) {
          result.closing_pred_utt = tracker.state().predicted_next;
          result.closing_s = tracker.observe_and_score(closing, r + 1);
        }
        result.success = true;
      } catch (const Error& e) {
        if (!is_backend_failure(e.code())) throw;
        mark_aborted(result, e);
      }
      break;
    }
  }
  result.final_ledgers = tracker.state().ledgers;
  return result;
}

std::string batch_episode_id(std::uint64_t batch_seed, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ep-%llu-%04zu", static_cast<unsigned long long>(batch_seed), index);
  return buf;
}

std::vector<EpisodeResult> run_batch(const EpisodeConfig& config, std::size_t n,
                                     const std::vector<NormalizedEpisode>& seeds, const BackendFactory& backends,
                                     std::uint64_t batch_seed, std::size_t jobs, const TemplateRegistry& templates) {
  config.validate();
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
  if (seeds.size() < n)
    throw Error(ErrorCode::InsufficientCorpus,
                "batch of " + std::to_string(n) + " needs as many seeds, got " + std::to_string(seeds.size()));

  std::vector<EpisodeConfig> configs(n, config);
  std::vector<EpisodeBackends> episode_backends;
  episode_backends.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    configs[i].episode_id = batch_episode_id(batch_seed, i);
    configs[i].rng_seed = derive_seed(batch_seed, i);
    episode_backends.push_back(backends(i));
  }

  std::vector<EpisodeResult> results(n);
  auto run_one = [&](std::size_t i) {
    try {
      results[i] = run_episode(configs[i], seeds[i], episode_backends[i], templates);
    } catch (const Error& e) {
      EpisodeResult failed;
      failed.episode_id = configs[i].episode_id;
      failed.scenario = config.scenario;
      failed.variant = config.variant;
      failed.top_k = config.top_k;
      failed.max_rounds = config.round_limit();
      failed.rng_seed = configs[i].rng_seed;
      failed.strict_capacity = config.strict_capacity;
      mark_aborted(failed, e);
      results[i] = std::move(failed);
    }
  };

  jobs = std::clamp<std::size_t>(jobs, 1, n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) run_one(i);
    });
  pool.clear();
  return results;
}

std::vector<std::pair<std::size_t, double>> truth_similarity_curve(const EpisodeResult& result, Facet facet,
                                                                   SimilarityScorer& scorer) {
  std::vector<std::pair<std::size_t, double>> curve;
  for (const auto& trace : result.traces) {
    auto it = trace.ledgers.find(facet);
    if (it == trace.ledgers.end() || it->second.empty()) continue;
    curve.emplace_back(trace.round, scorer.score(top1(it->second).statement, result.true_bdi.get(facet)));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Trace JSON

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json ledgers_to_json(const LedgerSet& ledgers) {
  json j = json::object();
  for (const auto& [facet, ledger] : ledgers) {
    json entries = json::array();
    for (const auto& e : ledger.entries) entries.push_back({{"text", e.statement}, {"conf", e.confidence}});
    j[std::string(facet_name(facet))] = std::move(entries);
  }
  return j;
}

json judgment_to_json(const std::optional<Judgment>& j) {
  if (!j) return nullptr;
  return {{"decision", decision_name(j->decision)}, {"reason", j->reason}};
}

template <typename T>
json facet_map(const std::map<Facet, T>& m) {
  json j = json::object();
  for (const auto& [facet, v] : m) j[std::string(facet_name(facet))] = v;
  return j;
}

Facet facet_key(const std::string& key) {
  auto f = parse_facet(key);
  if (!f) throw Error(ErrorCode::InvalidTrace, "unknown facet key: " + key);
  return *f;
}

LedgerSet ledgers_from_json(const json& j, std::size_t capacity, bool strict) {
  LedgerSet out;
  for (const auto& [key, entries] : j.items()) {
    ConfidenceLedger ledger;
    ledger.facet = facet_key(key);
    ledger.capacity = capacity;
    ledger.strict_capacity = strict;
    for (const auto& e : entries)
      ledger.entries.push_back(LedgerEntry{e.at("text").get<std::string>(), e.at("conf").get<double>()});
    out[ledger.facet] = std::move(ledger);
  }
  return out;
}

std::optional<Judgment> judgment_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  auto d = parse_decision(j.at("decision").get<std::string>());
  if (!d) throw Error(ErrorCode::InvalidTrace, "unknown decision: " + j.at("decision").get<std::string>());
  return Judgment{*d, j.at("reason").get<std::string>()};
}

template <typename T>
std::optional<T> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace

json trace_to_json(const std::string& episode_id, const TurnTrace& t) {
  json branch = nullptr;
  if (t.branch) {
    branch = {{"policy", trigger_policy_name(t.branch->policy)},
              {"s_prev", t.branch->s_prev},
              {"s_curr", t.branch->s_curr},
              {"triggered", t.branch->triggered},
              {"s_v", opt(t.branch->s_v)},
              {"virtual_utt", opt(t.branch->virtual_utt)},
              {"path", update_path_name(t.branch->path)}};
  }
  return json{
      {"kind", "turn"},
      {"episode_id", episode_id},
      {"round", t.round},
      {"a_utt", t.a_utt},
      {"b_utt", t.b_utt},
      {"pred_utt", opt(t.pred_utt)},
      {"s", opt(t.s)},
      {"s_v", t.branch ? opt(t.branch->s_v) : json(nullptr)},
      {"branch", branch},
      {"ledgers", ledgers_to_json(t.ledgers)},
      {"plan", t.plan ? facet_map(*t.plan) : json(nullptr)},
      {"judgment", judgment_to_json(t.judgment)},
      {"judgment_fallback", t.judgment_fallback},
      {"truth_sim", t.truth_sim ? facet_map(*t.truth_sim) : json(nullptr)},
      {"flags", t.flags},
  };
}

json summary_to_json(const EpisodeResult& r) {
  return json{
      {"kind", "summary"},
      {"episode_id", r.episode_id},
      {"scenario", scenario_name(r.scenario)},
      {"variant", variant_name(r.variant)},
      {"top_k", r.top_k},
      {"max_rounds", r.max_rounds},
      {"rng_seed", r.rng_seed},
      {"strict_capacity", r.strict_capacity},
      {"success", r.success},
      {"aborted", r.aborted},
      {"abort_reason", r.abort_reason},
      {"rounds_used", r.rounds_used},
      {"final_judgment", judgment_to_json(r.final_judgment)},
      {"true_bdi", triple_to_json(r.true_bdi)},
      {"original_bdi", r.original_bdi ? triple_to_json(*r.original_bdi) : json(nullptr)},
      {"init_choice", r.init_choice},
      {"final_ledgers", ledgers_to_json(r.final_ledgers)},
      {"closing_utt", opt(r.closing_utt)},
      {"closing_pred_utt", opt(r.closing_pred_utt)},
      {"closing_s", opt(r.closing_s)},
  };
}

std::string traces_to_jsonl(const std::vector<EpisodeResult>& results) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& t : r.traces) out += trace_to_json(r.episode_id, t).dump() + '\n';
    out += summary_to_json(r).dump() + '\n';
  }
  return out;
}

void write_traces(const std::vector<EpisodeResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open trace file for writing: " + path.string());
  out << traces_to_jsonl(results);
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing trace file: " + path.string());
}

namespace {

TurnTrace turn_from_json(const json& j) {
  TurnTrace t;
  t.round = j.at("round").get<std::size_t>();
  t.a_utt = j.at("a_utt").get<std::string>();
  t.b_utt = j.at("b_utt").get<std::string>();
  t.pred_utt = opt_from<std::string>(j.at("pred_utt"));
  t.s = opt_from<double>(j.at("s"));
  if (const auto& b = j.at("branch"); !b.is_null()) {
    BranchRecord br;
    br.policy = parse_trigger_policy(b.at("policy").get<std::string>());
    br.s_prev = b.at("s_prev").get<double>();
    br.s_curr = b.at("s_curr").get<double>();
    br.triggered = b.at("triggered").get<bool>();
    br.s_v = opt_from<double>(b.at("s_v"));
    br.virtual_utt = opt_from<std::string>(b.at("virtual_utt"));
    br.path = parse_update_path(b.at("path").get<std::string>());
    t.branch = br;
  }
  if (const auto& p = j.at("plan"); !p.is_null()) {
    std::map<Facet, std::string> plan;
    for (const auto& [k, v] : p.items()) plan[facet_key(k)] = v.get<std::string>();
    t.plan = std::move(plan);
  }
  t.judgment = judgment_from_json(j.at("judgment"));
  t.judgment_fallback = j.at("judgment_fallback").get<bool>();
  if (const auto& ts = j.at("truth_sim"); !ts.is_null()) {
    std::map<Facet, double> sims;
    for (const auto& [k, v] : ts.items()) sims[facet_key(k)] = v.get<double>();
    t.truth_sim = std::move(sims);
  }
  t.flags = j.at("flags").get<std::vector<std::string>>();
  return t;
}

std::size_t ledger_capacity(const EpisodeResult& r) { return r.variant == TrackerVariant::Vanilla ? 1 : r.top_k; }

void summary_from_json(const json& j, EpisodeResult& r) {
  r.episode_id = j.at("episode_id").get<std::string>();
  r.scenario = parse_scenario(j.at("scenario").get<std::string>());
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.top_k = j.at("top_k").get<std::size_t>();
  r.max_rounds = j.at("max_rounds").get<std::size_t>();
  r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  r.strict_capacity = j.at("strict_capacity").get<bool>();
  r.success = j.at("success").get<bool>();
  r.aborted = j.at("aborted").get<bool>();
  r.abort_reason = j.at("abort_reason").get<std::string>();
  r.rounds_used = j.at("rounds_used").get<std::size_t>();
  r.final_judgment = judgment_from_json(j.at("final_judgment"));
  r.true_bdi = triple_from_json(j.at("true_bdi"));
  if (const auto& o = j.at("original_bdi"); !o.is_null()) r.original_bdi = triple_from_json(o);
  r.init_choice = j.at("init_choice").get<std::size_t>();
  r.final_ledgers = ledgers_from_json(j.at("final_ledgers"), ledger_capacity(r), r.strict_capacity);
  r.closing_utt = opt_from<std::string>(j.at("closing_utt"));
  r.closing_pred_utt = opt_from<std::string>(j.at("closing_pred_utt"));
  r.closing_s = opt_from<double>(j.at("closing_s"));
}

}  // namespace

std::vector<EpisodeResult> parse_traces(std::string_view jsonl) {
  std::vector<EpisodeResult> results;
  std::vector<std::pair<std::string, json>> pending;  // turn lines awaiting their summary
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      const auto j = json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "turn") {
        pending.emplace_back(j.at("episode_id").get<std::string>(), j);
      } else if (kind == "summary") {
        EpisodeResult r;
        summary_from_json(j, r);
        for (const auto& [id, tj] : pending) {
          if (id != r.episode_id)
            throw Error(ErrorCode::InvalidTrace, "turn for episode " + id + " precedes summary of " + r.episode_id);
          auto t = turn_from_json(tj);
          t.ledgers = ledgers_from_json(tj.at("ledgers"), ledger_capacity(r), r.strict_capacity);
          r.traces.push_back(std::move(t));
        }
        pending.clear();
        results.push_back(std::move(r));
      } else {
        throw Error(ErrorCode::InvalidTrace, "unknown line kind: " + kind);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidTrace, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidTrace, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!pending.empty()) throw Error(ErrorCode::InvalidTrace, "turn lines without a summary line");
  return results;
}

std::vector<EpisodeResult> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open trace file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_traces(buf.str());
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class Checker {
 public:
  explicit Checker(std::vector<std::string>& problems) : problems_(problems) {}

  void at(std::size_t line) { line_ = line; }
  void fail(const std::string& message) {
    problems_.push_back("line " + std::to_string(line_) + ": " + message);
  }

  bool field(const json& j, const char* name, json::value_t type, bool nullable = false) {
    auto it = j.find(name);
    if (it == j.end()) {
      fail(std::string("missing field ") + name);
      return false;
    }
    if (nullable && it->is_null()) return true;
    const bool ok = type == json::value_t::number_float ? it->is_number()
                    : type == json::value_t::number_unsigned ? it->is_number_unsigned()
                                                             : it->type() == type;
    if (!ok) fail(std::string("field ") + name + " has the wrong type");
    return ok;
  }

  void unit_interval(const json& j, const char* name) {
    if (j.contains(name) && j[name].is_number()) {
      const double v = j[name].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " outside [0, 1]");
    }
  }

  void decision(const json& j, const char* name) {
    if (!j.contains(name) || j[name].is_null()) return;
    const auto& d = j[name];
    if (!d.is_object() || !d.contains("decision") || !d["decision"].is_string() || !d.contains("reason") ||
        !d["reason"].is_string() || !parse_decision(d["decision"].get<std::string>())) {
      fail(std::string(name) + " is not a {decision, reason} object");
    }
  }

  void triple(const json& j, const char* name, bool nullable) {
    if (!field(j, name, json::value_t::object, nullable) || j[name].is_null()) return;
    for (const char* f : {"belief", "desire", "intention"})
      if (!j[name].contains(f) || !j[name][f].is_string()) fail(std::string(name) + "." + f + " missing");
  }

  void ledgers(const json& j, const char* name, std::size_t capacity, bool strict) {
    if (!field(j, name, json::value_t::object)) return;
    for (const auto& [key, entries] : j[name].items()) {
      const auto facet = parse_facet(key);
      if (!facet) {
        fail(std::string(name) + " has unknown facet " + key);
        continue;
      }
      if (!entries.is_array()) {
        fail(std::string(name) + "." + key + " is not an array");
        continue;
      }
      ConfidenceLedger ledger{*facet, capacity, strict, {}};
      bool ok = true;
      for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("text") || !e["text"].is_string() || !e.contains("conf") ||
            !e["conf"].is_number()) {
          ok = false;
          break;
        }
        ledger.entries.push_back({e["text"].get<std::string>(), e["conf"].get<double>()});
      }
      if (!ok) {
        fail(std::string(name) + "." + key + " entries need text and conf");
      } else if (auto problem = ledger.validate()) {
        fail(std::string(name) + "." + key + ": " + *problem);
      }
    }
  }

 private:
  std::vector<std::string>& problems_;
  std::size_t line_ = 0;
};

}  // namespace

std::vector<std::string> validate_traces(std::string_view jsonl) {
  std::vector<std::string> problems;
  Checker check(problems);
  std::vector<json> turns;
  std::set<std::string> seen_episodes;
  std::size_t line_no = 0;
  std::size_t summaries = 0;

  for (const auto& line : text::split_lines(jsonl)) {
    check.at(++line_no);
    if (text::is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      check.fail("not valid JSON");
      continue;
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      check.fail("missing kind");
      continue;
    }
    const auto kind = j["kind"].get<std::string>();
    if (!check.field(j, "episode_id", json::value_t::string)) continue;

    if (kind == "turn") {
      using V = json::value_t;
      bool ok = check.field(j, "round", V::number_unsigned);
      ok &= check.field(j, "a_utt", V::string);
      ok &= check.field(j, "b_utt", V::string);
      ok &= check.field(j, "pred_utt", V::string, true);
      ok &= check.field(j, "s", V::number_float, true);
      ok &= check.field(j, "s_v", V::number_float, true);
      ok &= check.field(j, "branch", V::object, true);
      ok &= check.field(j, "plan", V::object, true);
      ok &= check.field(j, "judgment", V::object, true);
      ok &= check.field(j, "judgment_fallback", V::boolean);
      ok &= check.field(j, "truth_sim", V::object, true);
      ok &= check.field(j, "flags", V::array);
      ok &= check.field(j, "ledgers", V::object);
      check.unit_interval(j, "s");
      check.unit_interval(j, "s_v");
      check.decision(j, "judgment");
      if (ok && j["a_utt"].get<std::string>().empty()) check.fail("a_utt is empty");
      if (ok && j["b_utt"].get<std::string>().empty()) check.fail("b_utt is empty");
      if (ok && j["pred_utt"].is_null() != j["s"].is_null()) check.fail("pred_utt and s must be present together");
      if (ok && !j["branch"].is_null()) {
        const auto& b = j["branch"];
        for (const char* f : {"policy", "s_prev", "s_curr", "triggered", "s_v", "virtual_utt", "path"})
          if (!b.contains(f)) check.fail(std::string("branch.") + f + " missing");
        if (b.contains("path") && b["path"].is_string()) {
          const auto path = b["path"].get<std::string>();
          if (path != "standard" && path != "counterfactual") check.fail("branch.path invalid");
          if (path == "counterfactual" && b.contains("triggered") && b["triggered"] == false)
            check.fail("counterfactual path without a trigger");
        }
        if (b.contains("s_v") && b["s_v"] != j["s_v"]) check.fail("s_v disagrees with branch.s_v");
      }
      if (ok && !j["truth_sim"].is_null())
        for (const auto& [key, v] : j["truth_sim"].items())
          if (!parse_facet(key) || !v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0)
            check.fail("truth_sim." + key + " invalid");
      if (ok) turns.push_back(j);
      else turns.push_back(json{{"episode_id", j["episode_id"]}, {"invalid", true}});
    } else if (kind == "summary") {
      ++summaries;
      using V = json::value_t;
      bool ok = true;
      for (const char* f : {"scenario", "variant", "abort_reason"}) ok &= check.field(j, f, V::string);
      for (const char* f : {"top_k", "max_rounds", "rng_seed", "rounds_used", "init_choice"})
        ok &= check.field(j, f, V::number_unsigned);
      for (const char* f : {"strict_capacity", "success", "aborted"}) ok &= check.field(j, f, V::boolean);
      ok &= check.field(j, "final_judgment", V::object, true);
      ok &= check.field(j, "closing_utt", V::string, true);
      ok &= check.field(j, "closing_pred_utt", V::string, true);
      ok &= check.field(j, "closing_s", V::number_float, true);
      check.triple(j, "true_bdi", false);
      check.triple(j, "original_bdi", true);
      check.decision(j, "final_judgment");
      check.unit_interval(j, "closing_s");
      const auto id = j["episode_id"].get<std::string>();
      if (!seen_episodes.insert(id).second) check.fail("duplicate summary for episode " + id);

      TrackerVariant variant = TrackerVariant::CR;
      if (ok) {
        try {
          parse_scenario(j["scenario"].get<std::string>());
          variant = parse_variant(j["variant"].get<std::string>());
        } catch (const Error& e) {
          check.fail(e.what());
          ok = false;
        }
      }
      const std::size_t capacity =
          ok ? (variant == TrackerVariant::Vanilla ? 1 : j["top_k"].get<std::size_t>()) : 3;
      const bool strict = ok ? j["strict_capacity"].get<bool>() : true;
      check.ledgers(j, "final_ledgers", capacity, strict);

      std::size_t expected_round = 1;
      std::size_t with_s = 0;
      const json* last = nullptr;
      for (const auto& t : turns) {
        if (t["episode_id"] != id) {
          check.fail("turn for episode " + t["episode_id"].get<std::string>() + " precedes summary of " + id);
          continue;
        }
        if (t.contains("invalid")) {
          ++expected_round;
          continue;
        }
        if (t["round"].get<std::size_t>() != expected_round)
          check.fail("episode " + id + ": rounds are not contiguous from 1");
        ++expected_round;
        with_s += t["s"].is_null() ? 0 : 1;
        if (t["ledgers"].is_object()) {
          check.ledgers(t, "ledgers", capacity, strict);
          if (variant == TrackerVariant::NoTom && !t["ledgers"].empty()) check.fail("notom turn carries ledgers");
        }
        if (variant != TrackerVariant::CR && !t["branch"].is_null()) check.fail("branch record outside CR");
        last = &t;
      }
      if (!ok) {
        turns.clear();
        continue;
      }
      const auto rounds_used = j["rounds_used"].get<std::size_t>();
      const auto max_rounds = j["max_rounds"].get<std::size_t>();
      const bool success = j["success"].get<bool>();
      const bool aborted = j["aborted"].get<bool>();
      if (rounds_used != turns.size()) check.fail("rounds_used does not match the number of turn lines");
      if (rounds_used > max_rounds) check.fail("rounds_used exceeds max_rounds");
      if (success && aborted) check.fail("episode both succeeded and aborted");
      if (success) {
        const bool goodbye = last && !(*last)["judgment"].is_null() && (*last)["judgment"]["decision"] == "GOODBYE";
        if (!goodbye) check.fail("success without a final GOODBYE judgment");
        if (j["closing_utt"].is_null()) check.fail("success without a closing utterance");
      }
      if (!success && !aborted && rounds_used != max_rounds) check.fail("failed episode stopped before max_rounds");
      if (!aborted && (variant == TrackerVariant::Reflection || variant == TrackerVariant::CR) && rounds_used > 0) {
        if (with_s != rounds_used - 1) check.fail("similarity count does not equal rounds_used - 1");
        if (success && j["closing_s"].is_null()) check.fail("closing prediction was not scored");
      }
      turns.clear();
    } else {
      check.fail("unknown kind " + kind);
    }
  }
  if (!turns.empty()) {
    check.at(line_no);
    check.fail("turn lines without a summary line");
  }
  if (summaries == 0 && problems.empty()) {
    check.at(line_no);
    check.fail("no episodes");
  }
  return problems;
}

}  // namespace tomsim
