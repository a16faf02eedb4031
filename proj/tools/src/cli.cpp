#include "tomsim_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tomsim/data.hpp"
#include "tomsim/engine.hpp"
#include "tomsim/error.hpp"
#include "tomsim/eval.hpp"
#include "tomsim/rng.hpp"
#include "tomsim/self_agent.hpp"

namespace tomsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Keys a config file may carry besides the EpisodeConfig fields.
struct RunSettings {
  std::string backend = "scripted";
  std::string script;
  std::string similarity;  // empty: jaccard for scripted, embedding for remote
  std::string model;
  std::string embedding_model;
  std::string base_url;
  std::string seeds;
  std::size_t seed_index = 0;
  std::size_t n = 1;
  std::size_t jobs = 1;
  std::string templates;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

fs::path manifest_path(const fs::path& out) {
  return (out.has_parent_path() ? out.parent_path() : fs::path(".")) / "manifest.json";
}

void write_manifest(const fs::path& out, const std::string& command, json config,
                    const TemplateRegistry& templates) {
  json manifest{{"tool", "tom-sim"},
                {"version", kVersion},
                {"command", command},
                {"config", std::move(config)},
                {"templates", templates.checksums()}};
  write_text(manifest_path(out), manifest.dump(2) + "\n");
}

// Options shared by the commands that run agents.
struct AgentFlags {
  std::string config_file;
  std::string scenario, variant, turn_unit, cf_policy, cf_compare;
  std::size_t k = 0, t = 0;
  std::uint64_t seed = 0;
  double reverse_probability = 0.0;
  bool strict_capacity = true;
  bool count_aborted = false;
  bool truth_similarity = true;
  int max_tokens = 0;
  double temperature = 0.0;
  RunSettings run;
  std::string out;

  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_agent_flags(CLI::App* sub, AgentFlags& f, bool episode_options) {
  auto lower = CLI::ignore_case;
  f.opts["config"] = sub->add_option("--config", f.config_file, "JSON config file (flags override it)")
                         ->check(CLI::ExistingFile);
  f.opts["scenario"] = sub->add_option("--scenario", f.scenario, "empathetic | persuasion")
                           ->check(CLI::IsMember({"empathetic", "persuasion"}, lower));
  f.opts["seed"] = sub->add_option("--seed", f.seed, "RNG seed controlling every random choice");
  f.opts["k"] = sub->add_option("--k,--top-k", f.k, "ledger size / BDI candidates")->check(CLI::PositiveNumber);
  f.opts["backend"] = sub->add_option("--backend", f.run.backend, "scripted | remote")
                          ->check(CLI::IsMember({"scripted", "remote"}, lower));
  f.opts["script"] = sub->add_option("--script", f.run.script, "JSON Lines script for the scripted backend");
  f.opts["model"] = sub->add_option("--model", f.run.model, "chat model for the remote backend");
  f.opts["base_url"] = sub->add_option("--base-url", f.run.base_url, "OpenAI-compatible endpoint");
  f.opts["seeds"] = sub->add_option("--seeds", f.run.seeds, "episodes JSONL used for BDI initialization");
  f.opts["templates"] = sub->add_option("--templates", f.run.templates, "directory overriding built-in templates");
  f.opts["max_tokens"] = sub->add_option("--max-tokens", f.max_tokens, "completion token limit")
                             ->check(CLI::PositiveNumber);
  f.opts["temperature"] = sub->add_option("--temperature", f.temperature, "utterance sampling temperature")
                              ->check(CLI::NonNegativeNumber);
  f.opts["reverse_probability"] =
      sub->add_option("--reverse-probability", f.reverse_probability, "chance of reversing the initialized BDI")
          ->check(CLI::Range(0.0, 1.0));
  f.opts["out"] = sub->add_option("--out", f.out, "output path")->required();
  if (!episode_options) return;
  f.opts["variant"] = sub->add_option("--variant", f.variant, "notom | vanilla | reflection | cr")
                          ->check(CLI::IsMember({"notom", "vanilla", "reflection", "cr"}, lower));
  f.opts["t"] = sub->add_option("--t,--max-rounds", f.t, "round budget t")->check(CLI::PositiveNumber);
  f.opts["turn_unit"] = sub->add_option("--turn-unit", f.turn_unit, "round | utterance")
                            ->check(CLI::IsMember({"round", "utterance"}, lower));
  f.opts["cf_policy"] = sub->add_option("--cf-policy", f.cf_policy, "on_increase | on_non_increase")
                            ->check(CLI::IsMember({"on_increase", "on_non_increase"}, lower));
  f.opts["cf_compare"] = sub->add_option("--cf-compare", f.cf_compare, "current | previous")
                             ->check(CLI::IsMember({"current", "previous"}, lower));
  f.opts["strict"] = sub->add_flag("--strict-capacity,!--no-strict-capacity", f.strict_capacity,
                                   "evict entries beyond k after an update");
  f.opts["count_aborted"] = sub->add_flag("--count-aborted-as-failure", f.count_aborted,
                                          "include aborted episodes in AT/SR as failures");
  f.opts["truth_sim"] = sub->add_flag("--truth-similarity,!--no-truth-similarity", f.truth_similarity,
                                      "score ledgers against the true BDI every round");
  f.opts["similarity"] = sub->add_option("--similarity", f.run.similarity, "jaccard | embedding")
                             ->check(CLI::IsMember({"jaccard", "embedding"}, lower));
  f.opts["embedding_model"] = sub->add_option("--embedding-model", f.run.embedding_model, "remote embedding model");
}

std::string lowered(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Defaults, then the config file, then explicit flags.
EpisodeConfig resolve_config(AgentFlags& f) {
  EpisodeConfig config;
  if (!f.config_file.empty()) {
    json j = read_json_file(f.config_file);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    auto take = [&](const char* key, auto& target) {
      if (auto it = j.find(key); it != j.end()) {
        try {
          target = it->template get<std::decay_t<decltype(target)>>();
        } catch (const json::exception& e) {
          throw Error(ErrorCode::InvalidConfig, std::string("config key ") + key + ": " + e.what());
        }
        j.erase(it);
      }
    };
    take("backend", f.run.backend);
    take("script", f.run.script);
    take("similarity", f.run.similarity);
    take("model", f.run.model);
    take("embedding_model", f.run.embedding_model);
    take("base_url", f.run.base_url);
    take("seeds", f.run.seeds);
    take("seed_index", f.run.seed_index);
    take("n", f.run.n);
    take("jobs", f.run.jobs);
    take("templates", f.run.templates);
    config = config_from_json(j, config);
  }
  auto flag = [&](const char* name, auto&& apply) {
    if (f.given(name)) apply();
  };
  flag("scenario", [&] { config.scenario = parse_scenario(f.scenario); });
  flag("variant", [&] { config.variant = parse_variant(f.variant); });
  flag("k", [&] { config.top_k = f.k; });
  flag("t", [&] { config.max_rounds = f.t; });
  flag("turn_unit", [&] { config.turn_unit = lowered(f.turn_unit) == "utterance" ? TurnUnit::Utterance : TurnUnit::Round; });
  flag("seed", [&] { config.rng_seed = f.seed; });
  flag("cf_policy", [&] { config.cf_trigger_policy = parse_trigger_policy(f.cf_policy); });
  flag("cf_compare", [&] { config.cf_compare_to = parse_compare_to(f.cf_compare); });
  flag("reverse_probability", [&] { config.reverse_probability = f.reverse_probability; });
  flag("strict", [&] { config.strict_capacity = f.strict_capacity; });
  flag("count_aborted", [&] { config.count_aborted_as_failure = f.count_aborted; });
  flag("truth_sim", [&] { config.compute_truth_similarity = f.truth_similarity; });
  flag("max_tokens", [&] { config.max_tokens = f.max_tokens; });
  flag("temperature", [&] { config.temperatures.utterance = f.temperature; });
  f.run.backend = lowered(f.run.backend);
  f.run.similarity = lowered(f.run.similarity);
  config.validate();
  return config;
}

json run_settings_json(const RunSettings& r) {
  return json{{"backend", r.backend},       {"script", r.script},
              {"similarity", r.similarity}, {"model", r.model},
              {"embedding_model", r.embedding_model}, {"base_url", r.base_url},
              {"seeds", r.seeds},           {"seed_index", r.seed_index},
              {"n", r.n},                   {"jobs", r.jobs},
              {"templates", r.templates}};
}

RemoteConfig remote_config(const RunSettings& r) {
  auto rc = RemoteConfig::from_environment();
  if (!r.base_url.empty()) rc.base_url = r.base_url;
  if (!r.model.empty()) rc.model = r.model;
  if (!r.embedding_model.empty()) rc.embedding_model = r.embedding_model;
  return rc;
}

// Builds a factory handing each episode its own backends. Scripted runs load
// the script once and give every episode a fresh clone of it.
BackendFactory make_factory(const RunSettings& r) {
  if (r.backend == "scripted") {
    if (r.script.empty()) throw Error(ErrorCode::InvalidConfig, "--script is required with --backend scripted");
    auto script = std::make_shared<ScriptedBackend>(load_script(r.script));
    const bool embedding = r.similarity == "embedding";
    auto rc = remote_config(r);
    return [script, embedding, rc](std::size_t) {
      std::shared_ptr<ScriptedBackend> backend = script->clone();
      EpisodeBackends b{backend, backend};
      if (embedding) b.scorer = std::make_shared<RemoteEmbeddingScorer>(rc);
      return b;
    };
  }
  auto rc = remote_config(r);
  if (rc.api_key.empty()) throw Error(ErrorCode::InvalidConfig, "TOMSIM_API_KEY is not set");
  const bool jaccard = r.similarity == "jaccard";
  return [rc, jaccard](std::size_t) {
    EpisodeBackends b;
    b.llm = std::make_shared<RemoteChatBackend>(rc);
    if (jaccard) b.scorer = std::make_shared<JaccardScorer>();
    else b.scorer = std::make_shared<RemoteEmbeddingScorer>(rc);
    return b;
  };
}

TemplateRegistry load_templates(const RunSettings& r) {
  return r.templates.empty() ? TemplateRegistry::builtin() : TemplateRegistry::load(r.templates);
}

std::vector<NormalizedEpisode> load_seeds(const RunSettings& r) {
  if (r.seeds.empty()) return {demo_seed_episode()};
  return read_episodes(r.seeds);
}

json optional_metric(const std::vector<EpisodeResult>& results, const MetricOptions& o, bool rate) {
  try {
    return rate ? success_rate(results, o) : average_turn(results, o);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoResults) throw;
    return nullptr;
  }
}

// ---------------------------------------------------------------------------

int cmd_simulate(AgentFlags& f, std::ostream& out, std::ostream& err) {
  auto config = resolve_config(f);
  const auto templates = load_templates(f.run);
  const auto seeds = load_seeds(f.run);
  if (f.run.seed_index >= seeds.size())
    throw Error(ErrorCode::InsufficientCorpus, "seed index " + std::to_string(f.run.seed_index) + " out of range");
  auto factory = make_factory(f.run);
  auto result = run_episode(config, seeds[f.run.seed_index], factory(0), templates);
  write_traces({result}, f.out);
  write_manifest(f.out, "simulate", {{"episode", config_to_json(config)}, {"run", run_settings_json(f.run)}},
                 templates);
  if (result.aborted) err << "warning: episode aborted: " << result.abort_reason << "\n";
  out << json{{"command", "simulate"},
              {"episode_id", result.episode_id},
              {"success", result.success},
              {"aborted", result.aborted},
              {"rounds_used", result.rounds_used},
              {"out", f.out},
              {"config", config_to_json(config)}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_batch(AgentFlags& f, std::size_t n_flag, bool n_given, std::size_t jobs_flag, bool jobs_given,
              std::ostream& out, std::ostream& err) {
  auto config = resolve_config(f);
  if (n_given) f.run.n = n_flag;
  if (jobs_given) f.run.jobs = jobs_flag;
  if (f.run.n == 0) throw Error(ErrorCode::InvalidConfig, "n must be positive");
  const auto templates = load_templates(f.run);
  auto seeds = load_seeds(f.run);
  if (f.run.seeds.empty()) seeds.assign(f.run.n, seeds.front());
  auto factory = make_factory(f.run);
  auto results = run_batch(config, f.run.n, seeds, factory, config.rng_seed, f.run.jobs, templates);
  write_traces(results, f.out);
  write_manifest(f.out, "batch", {{"episode", config_to_json(config)}, {"run", run_settings_json(f.run)}},
                 templates);

  std::size_t succeeded = 0, aborted = 0;
  for (const auto& r : results) {
    succeeded += r.success ? 1 : 0;
    if (r.aborted) {
      ++aborted;
      err << "warning: " << r.episode_id << " aborted: " << r.abort_reason << "\n";
    }
  }
  const MetricOptions mo{config.count_aborted_as_failure, config.turn_unit};
  out << json{{"command", "batch"},
              {"episodes", results.size()},
              {"succeeded", succeeded},
              {"aborted", aborted},
              {"average_turn", optional_metric(results, mo, false)},
              {"success_rate", optional_metric(results, mo, true)},
              {"out", f.out},
              {"config", config_to_json(config)},
              {"n", f.run.n},
              {"jobs", f.run.jobs}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_init_bdi(AgentFlags& f, std::ostream& out) {
  auto config = resolve_config(f);
  const auto templates = load_templates(f.run);
  const auto seeds = load_seeds(f.run);
  if (f.run.seed_index >= seeds.size())
    throw Error(ErrorCode::InsufficientCorpus, "seed index " + std::to_string(f.run.seed_index) + " out of range");
  auto backends = make_factory(f.run)(0);
  AgentContext ctx{*backends.llm, templates, config.resolved_profile(), config.temperatures, config.max_tokens,
                   seeds[f.run.seed_index].episode_id};
  const auto init = init_bdi(ctx, seeds[f.run.seed_index], config.top_k, derive_seed(config.rng_seed, kInitStream));
  json candidates = json::array();
  for (const auto& c : init.candidates)
    candidates.push_back({{"belief", c.belief}, {"desire", c.desire}, {"intention", c.intention}});
  json result{{"seed_episode", seeds[f.run.seed_index].episode_id},
              {"candidates", candidates},
              {"choice_index", init.choice_index},
              {"chosen", candidates[init.choice_index]},
              {"retried", init.retried},
              {"reversed", nullptr}};
  if (config.reverse_probability > 0.0) {
    Rng rng(derive_seed(config.rng_seed, kReverseStream));
    if (uniform_unit(rng) < config.reverse_probability) {
      const auto r = reverse_bdi(ctx, init.chosen);
      result["reversed"] = {{"belief", r.belief}, {"desire", r.desire}, {"intention", r.intention}};
    }
  }
  write_text(f.out, result.dump(2) + "\n");
  write_manifest(f.out, "init-bdi", {{"episode", config_to_json(config)}, {"run", run_settings_json(f.run)}},
                 templates);
  out << json{{"command", "init-bdi"},
              {"candidates", init.candidates.size()},
              {"choice_index", init.choice_index},
              {"reversed", !result["reversed"].is_null()},
              {"out", f.out}}
             .dump()
      << "\n";
  return kExitOk;
}

struct IngestFlags {
  std::string input, source = "custom", columns, out;
};

int cmd_ingest(const IngestFlags& f, std::ostream& out, std::ostream& err) {
  const auto source = parse_corpus_source(f.source);
  const auto columns = f.columns.empty() ? ColumnMap::preset(source) : ColumnMap::load(f.columns);
  IngestReport report;
  const auto episodes = ingest(f.input, source, columns, &report);
  write_episodes(episodes, f.out);
  json config{{"input", f.input}, {"source", corpus_source_name(source)}, {"columns", f.columns}};
  write_manifest(f.out, "ingest", config, TemplateRegistry::builtin());
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << json{{"command", "ingest"},
              {"episodes", episodes.size()},
              {"rows", report.rows},
              {"skipped_rows", report.skipped_rows},
              {"merged_turns", report.merged_turns},
              {"dropped_episodes", report.dropped_episodes},
              {"warnings", report.warnings},
              {"out", f.out}}
             .dump()
      << "\n";
  return kExitOk;
}

struct SampleFlags {
  std::string episodes, out;
  std::size_t n = 100;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleFlags& f, std::ostream& out) {
  const auto corpus = read_episodes(f.episodes);
  const auto sample = sample_episodes(corpus, f.n, f.seed);
  write_episodes(sample, f.out);
  write_manifest(f.out, "sample-seeds", {{"episodes", f.episodes}, {"n", f.n}, {"seed", f.seed}},
                 TemplateRegistry::builtin());
  json ids = json::array();
  for (const auto& e : sample) ids.push_back(e.episode_id);
  out << json{{"command", "sample-seeds"}, {"corpus", corpus.size()}, {"n", f.n}, {"episode_ids", ids}, {"out", f.out}}
             .dump()
      << "\n";
  return kExitOk;
}

std::vector<EpisodeResult> read_all_traces(const std::vector<std::string>& paths) {
  std::vector<EpisodeResult> all;
  for (const auto& p : paths) {
    auto rs = read_traces(p);
    all.insert(all.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
  }
  return all;
}

struct EvalFlags {
  std::vector<std::string> traces;
  std::string annotations, predictions, out, table;
  double tau = kDefaultTau;
  double threshold = kSimilarThreshold;
  bool count_aborted = false;
  std::string unit = "round";
};

json prf_json(const Prf& p) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json("undefined"); };
  return json{{"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"tn", p.tn},
              {"precision", opt(p.precision)}, {"f1", opt(p.f1)}, {"recall", opt(p.recall)}};
}

std::string csv_cell(const json& v) {
  if (v.is_number_float()) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v.get<double>();
    return s.str();
  }
  return v.is_string() ? v.get<std::string>() : v.dump();
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const auto results = read_all_traces(f.traces);
  const MetricOptions mo{f.count_aborted, lowered(f.unit) == "utterance" ? TurnUnit::Utterance : TurnUnit::Round};

  // One row per (variant, scenario) group.
  std::map<std::pair<std::string, std::string>, std::vector<EpisodeResult>> groups;
  for (const auto& r : results)
    groups[{std::string(variant_name(r.variant)), std::string(scenario_name(r.scenario))}].push_back(r);

  std::vector<AnnotationRecord> annotations;
  if (!f.annotations.empty()) annotations = read_annotations(f.annotations);
  std::optional<PredictionTable> external;
  if (!f.predictions.empty()) {
    std::ifstream in(f.predictions, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + f.predictions);
    std::ostringstream buf;
    buf << in.rdbuf();
    external = parse_predictions(buf.str());
  }

  json rows = json::array();
  for (const auto& [key, rs] : groups) {
    json row{{"variant", key.first},
             {"scenario", key.second},
             {"episodes", rs.size()},
             {"aborted", std::count_if(rs.begin(), rs.end(), [](const EpisodeResult& r) { return r.aborted; })},
             {"average_turn", optional_metric(rs, mo, false)},
             {"success_rate", optional_metric(rs, mo, true)}};
    if (!annotations.empty()) {
      for (auto order : {ToMOrder::First, ToMOrder::Second}) {
        json facets = json::object();
        for (auto facet : kAllFacets) {
          std::vector<AnnotationRecord> subset;
          for (const auto& a : annotations)
            if (a.facet == facet) subset.push_back(a);
          const auto outcomes =
              build_outcomes(rs, subset, order, f.tau, f.threshold, external ? &*external : nullptr);
          facets[std::string(facet_name(facet))] = prf_json(prf1(outcomes));
        }
        row[std::string(order_name(order)) + "_order"] = facets;
      }
    }
    rows.push_back(row);
  }
  json report{{"episodes", results.size()},
              {"tau", f.tau},
              {"threshold", f.threshold},
              {"count_aborted_as_failure", f.count_aborted},
              {"unit", lowered(f.unit)},
              {"groups", rows}};
  write_text(f.out, report.dump(2) + "\n");

  if (!f.table.empty()) {
    std::string csv = "variant,scenario,episodes,aborted,average_turn,success_rate";
    const bool prf = !annotations.empty();
    if (prf)
      for (const char* o : {"first", "second"})
        for (auto facet : kAllFacets)
          for (const char* m : {"precision", "f1", "recall"})
            csv += std::string(",") + o + "_" + std::string(facet_name(facet)) + "_" + m;
    csv += "\n";
    for (const auto& row : rows) {
      csv += row["variant"].get<std::string>() + "," + row["scenario"].get<std::string>() + "," +
             csv_cell(row["episodes"]) + "," + csv_cell(row["aborted"]) + "," + csv_cell(row["average_turn"]) + "," +
             csv_cell(row["success_rate"]);
      if (prf)
        for (const char* o : {"first_order", "second_order"})
          for (auto facet : kAllFacets)
            for (const char* m : {"precision", "f1", "recall"})
              csv += "," + csv_cell(row[o][std::string(facet_name(facet))][m]);
      csv += "\n";
    }
    write_text(f.table, csv);
  }
  write_manifest(f.out, "eval",
                 {{"traces", f.traces}, {"annotations", f.annotations}, {"predictions", f.predictions},
                  {"tau", f.tau}, {"threshold", f.threshold}, {"count_aborted_as_failure", f.count_aborted},
                  {"unit", lowered(f.unit)}},
                 TemplateRegistry::builtin());
  out << json{{"command", "eval"}, {"episodes", results.size()}, {"groups", rows.size()}, {"out", f.out}}.dump()
      << "\n";
  return kExitOk;
}

struct CurveFlags {
  std::vector<std::string> traces;
  std::string out, similarity = "stored", base_url, embedding_model;
};

int cmd_export_curves(const CurveFlags& f, std::ostream& out) {
  const auto results = read_all_traces(f.traces);
  const auto mode = lowered(f.similarity);
  std::unique_ptr<SimilarityScorer> scorer;
  if (mode == "jaccard") {
    scorer = std::make_unique<JaccardScorer>();
  } else if (mode == "embedding") {
    RunSettings r;
    r.base_url = f.base_url;
    r.embedding_model = f.embedding_model;
    scorer = std::make_unique<RemoteEmbeddingScorer>(remote_config(r));
  }
  std::string csv = "episode_id,facet,round,similarity\n";
  std::size_t points = 0;
  for (const auto& r : results) {
    for (auto facet : kAllFacets) {
      std::vector<std::pair<std::size_t, double>> curve;
      if (scorer) {
        curve = truth_similarity_curve(r, facet, *scorer);
      } else {
        for (const auto& t : r.traces)
          if (t.truth_sim)
            if (auto it = t.truth_sim->find(facet); it != t.truth_sim->end()) curve.emplace_back(t.round, it->second);
      }
      for (const auto& [round, value] : curve) {
        std::ostringstream line;
        line.precision(17);
        line << r.episode_id << "," << facet_name(facet) << "," << round << "," << value << "\n";
        csv += line.str();
        ++points;
      }
    }
  }
  write_text(f.out, csv);
  write_manifest(f.out, "export-curves", {{"traces", f.traces}, {"similarity", mode}}, TemplateRegistry::builtin());
  out << json{{"command", "export-curves"}, {"episodes", results.size()}, {"points", points}, {"out", f.out}}.dump()
      << "\n";
  return kExitOk;
}

int cmd_validate(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  std::size_t invalid = 0;
  json files = json::array();
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + p);
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto problems = validate_traces(buf.str());
    for (const auto& problem : problems) err << p << ": " << problem << "\n";
    invalid += problems.empty() ? 0 : 1;
    files.push_back({{"path", p}, {"valid", problems.empty()}, {"problems", problems.size()}});
  }
  out << json{{"command", "validate-trace"}, {"valid", invalid == 0}, {"files", files}}.dump() << "\n";
  if (invalid > 0) {
    err << "error[" << error_code_name(ErrorCode::InvalidTrace) << "]: " << invalid << " invalid trace file(s)\n";
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Theory-of-mind agent simulation", "tom-sim"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  IngestFlags ingest_f;
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize a corpus CSV into episodes JSONL");
  ingest_cmd->add_option("--input", ingest_f.input, "corpus CSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--source", ingest_f.source, "empathetic_dialogues | persuasion_for_good | custom")
      ->check(CLI::IsMember({"empathetic_dialogues", "persuasion_for_good", "custom"}, CLI::ignore_case));
  ingest_cmd->add_option("--columns", ingest_f.columns, "column map JSON (default: source preset)")
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest_f.out, "episodes JSONL")->required();

  SampleFlags sample_f;
  auto* sample_cmd = app.add_subcommand("sample-seeds", "Draw n distinct seed episodes");
  sample_cmd->add_option("--episodes", sample_f.episodes, "episodes JSONL")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--n", sample_f.n, "episodes to draw")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample_f.seed, "RNG seed");
  sample_cmd->add_option("--out", sample_f.out, "output JSONL")->required();

  AgentFlags init_f;
  auto* init_cmd = app.add_subcommand("init-bdi", "Zero-shot BDI initialization from one seed episode");
  add_agent_flags(init_cmd, init_f, false);
  init_cmd->add_option("--seed-index", init_f.run.seed_index, "episode index within --seeds");

  AgentFlags sim_f;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one episode and write its trace");
  add_agent_flags(sim_cmd, sim_f, true);
  sim_cmd->add_option("--seed-index", sim_f.run.seed_index, "episode index within --seeds");

  AgentFlags batch_f;
  std::size_t batch_n = 1, batch_jobs = 1;
  auto* batch_cmd = app.add_subcommand("batch", "Run n episodes and write all traces");
  add_agent_flags(batch_cmd, batch_f, true);
  auto* n_opt = batch_cmd->add_option("--n", batch_n, "episodes")->check(CLI::PositiveNumber);
  auto* jobs_opt = batch_cmd->add_option("--jobs", batch_jobs, "parallel episodes")->check(CLI::PositiveNumber);

  EvalFlags eval_f;
  auto* eval_cmd = app.add_subcommand("eval", "AT, SR@t and P/R/F1 from traces and annotations");
  eval_cmd->add_option("--traces", eval_f.traces, "trace JSONL file(s)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--annotations", eval_f.annotations, "annotation CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", eval_f.predictions, "external predicted labels CSV")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--tau", eval_f.tau, "top-1 confidence threshold for first-order predictions");
  eval_cmd->add_option("--threshold", eval_f.threshold, "normalized annotation threshold");
  eval_cmd->add_flag("--count-aborted-as-failure", eval_f.count_aborted, "include aborted episodes");
  eval_cmd->add_option("--unit", eval_f.unit, "round | utterance")
      ->check(CLI::IsMember({"round", "utterance"}, CLI::ignore_case));
  eval_cmd->add_option("--out", eval_f.out, "JSON report")->required();
  eval_cmd->add_option("--table", eval_f.table, "CSV table");

  CurveFlags curve_f;
  auto* curve_cmd = app.add_subcommand("export-curves", "Per-round similarity to the true BDI as CSV");
  curve_cmd->add_option("--traces", curve_f.traces, "trace JSONL file(s)")->required()->check(CLI::ExistingFile);
  curve_cmd->add_option("--similarity", curve_f.similarity, "stored | jaccard | embedding")
      ->check(CLI::IsMember({"stored", "jaccard", "embedding"}, CLI::ignore_case));
  curve_cmd->add_option("--base-url", curve_f.base_url, "embedding endpoint");
  curve_cmd->add_option("--embedding-model", curve_f.embedding_model, "embedding model");
  curve_cmd->add_option("--out", curve_f.out, "curve CSV")->required();

  std::vector<std::string> validate_paths;
  auto* validate_cmd = app.add_subcommand("validate-trace", "Check trace files against the schema");
  validate_cmd->add_option("traces,--traces", validate_paths, "trace JSONL file(s)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    err << "usage error: " << e.what() << "\n\n" << target->help();
    return kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest_f, out, err);
    if (*sample_cmd) return cmd_sample(sample_f, out);
    if (*init_cmd) return cmd_init_bdi(init_f, out);
    if (*sim_cmd) return cmd_simulate(sim_f, out, err);
    if (*batch_cmd) return cmd_batch(batch_f, batch_n, n_opt->count() > 0, batch_jobs, jobs_opt->count() > 0, out, err);
    if (*eval_cmd) return cmd_eval(eval_f, out);
    if (*curve_cmd) return cmd_export_curves(curve_f, out);
    if (*validate_cmd) return cmd_validate(validate_paths, out, err);
  } catch (const Error& e) {
    err << "error[" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error[E_INTERNAL]: " << e.what() << "\n";
    return kExitDomainError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace tomsim::cli
