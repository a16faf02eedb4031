#include "tomsim/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tomsim/error.hpp"
#include "tomsim/rng.hpp"

namespace tomsim {

using nlohmann::json;

std::string_view corpus_source_name(CorpusSource source) noexcept {
  switch (source) {
    case CorpusSource::EmpatheticDialogues: return "empathetic_dialogues";
    case CorpusSource::PersuasionForGood: return "persuasion_for_good";
    case CorpusSource::Custom: return "custom";
  }
  return "custom";
}

CorpusSource parse_corpus_source(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "empathetic_dialogues" || t == "empathetic" || t == "ed") return CorpusSource::EmpatheticDialogues;
  if (t == "persuasion_for_good" || t == "persuasion" || t == "p4g") return CorpusSource::PersuasionForGood;
  if (t == "custom") return CorpusSource::Custom;
  throw Error(ErrorCode::InvalidConfig, "unknown corpus source: " + std::string(text));
}

std::string NormalizedEpisode::self_role() const {
  if (auto it = metadata.find("self_role"); it != metadata.end() && !it->second.empty()) return it->second;
  return turns.empty() ? std::string() : turns.front().speaker_role;
}

namespace {

const std::vector<std::string> kRequiredFields = {"episode_id", "turn_order", "speaker", "text"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Numeric turn orders sort numerically, anything else lexically after them.
struct TurnKey {
  bool numeric = false;
  double number = 0.0;
  std::string raw;

  bool operator<(const TurnKey& o) const {
    if (numeric != o.numeric) return numeric;
    return numeric ? number < o.number : raw < o.raw;
  }
};

TurnKey turn_key(std::string_view raw) {
  const auto t = text::trim(raw);
  TurnKey key{false, 0.0, std::string(t)};
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec == std::errc() && p == end && !t.empty()) {
    key.numeric = true;
    key.number = v;
  }
  return key;
}

}  // namespace

ColumnMap ColumnMap::preset(CorpusSource source) {
  ColumnMap map;
  switch (source) {
    case CorpusSource::EmpatheticDialogues:
      map.fields = {{"episode_id", "conv_id"}, {"turn_order", "utterance_idx"},
                    {"speaker", "speaker_idx"}, {"text", "utterance"}};
      map.metadata_columns = {"context", "prompt"};
      map.replacements = {{"_comma_", ","}};
      break;
    case CorpusSource::PersuasionForGood:
      map.fields = {{"episode_id", "B2"}, {"turn_order", "Turn"}, {"speaker", "B4"}, {"text", "Unit"}};
      map.self_role = "1";
      break;
    case CorpusSource::Custom:
      map.fields = {{"episode_id", "episode_id"}, {"turn_order", "turn_order"},
                    {"speaker", "speaker"}, {"text", "text"}};
      break;
  }
  return map;
}

ColumnMap ColumnMap::load(const std::filesystem::path& path) {
  ColumnMap map;
  try {
    const auto j = json::parse(read_file(path));
    map.fields = j.at("fields").get<std::map<std::string, std::string>>();
    if (j.contains("metadata_columns")) map.metadata_columns = j["metadata_columns"].get<std::vector<std::string>>();
    if (j.contains("replacements")) {
      for (const auto& [from, to] : j["replacements"].items()) map.replacements.emplace_back(from, to.get<std::string>());
    }
    if (j.contains("self_role")) map.self_role = j["self_role"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "column map " + path.string() + ": " + e.what());
  }
  for (const auto& f : kRequiredFields)
    if (!map.fields.contains(f))
      throw Error(ErrorCode::InvalidConfig, "column map " + path.string() + " lacks field " + f);
  return map;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseFailure, "unterminated quoted CSV field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::vector<NormalizedEpisode> ingest_csv(std::string_view csv_text, CorpusSource source, const ColumnMap& columns,
                                          IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep = IngestReport{};

  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw Error(ErrorCode::EmptyCorpus, "CSV has no header row");
  const auto& header = rows.front();
  auto column_index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (text::trim(header[c]) == name) return c;
    return std::nullopt;
  };

  std::map<std::string, std::size_t> idx;
  for (const auto& f : kRequiredFields) {
    auto it = columns.fields.find(f);
    if (it == columns.fields.end()) throw Error(ErrorCode::InvalidConfig, "column map lacks field " + f);
    auto c = column_index(it->second);
    if (!c) throw Error(ErrorCode::MissingColumn, it->second);
    idx[f] = *c;
  }
  std::vector<std::pair<std::string, std::size_t>> meta;
  for (const auto& m : columns.metadata_columns) {
    if (auto c = column_index(m)) meta.emplace_back(m, *c);
    else rep.warnings.push_back("metadata column not found: " + m);
  }
  std::size_t needed = 0;
  for (const auto& [_, c] : idx) needed = std::max(needed, c + 1);

  struct Row {
    TurnKey key;
    std::string speaker;
    std::string text;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> grouped;
  std::map<std::string, std::map<std::string, std::string>> metadata;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    ++rep.rows;
    if (row.size() < needed) {
      ++rep.skipped_rows;
      continue;
    }
    std::string id(text::trim(row[idx["episode_id"]]));
    std::string speaker(text::trim(row[idx["speaker"]]));
    std::string utterance(text::trim(row[idx["text"]]));
    for (const auto& [from, to] : columns.replacements) replace_all(utterance, from, to);
    utterance = std::string(text::trim(utterance));
    if (id.empty() || speaker.empty() || utterance.empty() || text::is_blank(row[idx["turn_order"]])) {
      ++rep.skipped_rows;
      continue;
    }
    if (!grouped.contains(id)) {
      order.push_back(id);
      auto& md = metadata[id];
      for (const auto& [name, c] : meta) {
        if (c < row.size()) {
          std::string value = row[c];
          for (const auto& [from, to] : columns.replacements) replace_all(value, from, to);
          md[name] = value;
        }
      }
    }
    grouped[id].push_back(Row{turn_key(row[idx["turn_order"]]), std::move(speaker), std::move(utterance)});
  }
  if (rep.skipped_rows > 0)
    rep.warnings.push_back("skipped " + std::to_string(rep.skipped_rows) + " malformed row(s)");

  std::vector<NormalizedEpisode> episodes;
  for (const auto& id : order) {
    auto& rs = grouped[id];
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    NormalizedEpisode ep;
    ep.source = source;
    ep.episode_id = id;
    ep.metadata = metadata[id];
    if (!columns.self_role.empty()) ep.metadata["self_role"] = columns.self_role;
    for (auto& r : rs) {
      if (!ep.turns.empty() && ep.turns.back().speaker_role == r.speaker) {
        ep.turns.back().text += ' ' + r.text;
        ++rep.merged_turns;
      } else {
        ep.turns.push_back(SeedTurn{r.speaker, std::move(r.text)});
      }
    }
    if (ep.turns.size() < 2) {
      ++rep.dropped_episodes;
      continue;
    }
    episodes.push_back(std::move(ep));
  }
  if (rep.dropped_episodes > 0)
    rep.warnings.push_back("dropped " + std::to_string(rep.dropped_episodes) + " episode(s) with fewer than 2 turns");
  if (episodes.empty()) throw Error(ErrorCode::EmptyCorpus, "no usable episodes in corpus");
  if (const auto expected = expected_corpus_size(source); expected != 0 && episodes.size() != expected)
    rep.warnings.push_back("ingested " + std::to_string(episodes.size()) + " episodes; the full " +
                           std::string(corpus_source_name(source)) + " release has " + std::to_string(expected));
  return episodes;
}

std::vector<NormalizedEpisode> ingest(const std::filesystem::path& path, CorpusSource source,
                                      const ColumnMap& columns, IngestReport* report) {
  return ingest_csv(read_file(path), source, columns, report);
}

std::size_t expected_corpus_size(CorpusSource source) noexcept {
  switch (source) {
    case CorpusSource::EmpatheticDialogues: return 24850;
    case CorpusSource::PersuasionForGood: return 1017;
    case CorpusSource::Custom: return 0;
  }
  return 0;
}

std::vector<NormalizedEpisode> sample_episodes(const std::vector<NormalizedEpisode>& corpus, std::size_t n,
                                               std::uint64_t rng_seed) {
  if (corpus.size() < n)
    throw Error(ErrorCode::InsufficientCorpus, "cannot sample " + std::to_string(n) + " episodes from " +
                                                   std::to_string(corpus.size()));
  std::vector<NormalizedEpisode> out;
  out.reserve(n);
  for (auto i : sample_indices(corpus.size(), n, rng_seed)) out.push_back(corpus[i]);
  return out;
}

void write_episodes(const std::vector<NormalizedEpisode>& episodes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  for (const auto& ep : episodes) {
    json turns = json::array();
    for (const auto& t : ep.turns) turns.push_back({{"speaker", t.speaker_role}, {"text", t.text}});
    out << json{{"source", corpus_source_name(ep.source)},
                {"episode_id", ep.episode_id},
                {"turns", turns},
                {"metadata", ep.metadata}}
               .dump()
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<NormalizedEpisode> read_episodes(const std::filesystem::path& path) {
  const auto content = read_file(path);
  std::vector<NormalizedEpisode> episodes;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      const auto j = json::parse(line);
      NormalizedEpisode ep;
      ep.source = parse_corpus_source(j.value("source", "custom"));
      ep.episode_id = j.at("episode_id").get<std::string>();
      for (const auto& t : j.at("turns"))
        ep.turns.push_back(SeedTurn{t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
      if (j.contains("metadata")) ep.metadata = j["metadata"].get<std::map<std::string, std::string>>();
      episodes.push_back(std::move(ep));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseFailure, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (episodes.empty()) throw Error(ErrorCode::EmptyCorpus, "no episodes in " + path.string());
  return episodes;
}

NormalizedEpisode demo_seed_episode() {
  NormalizedEpisode ep;
  ep.source = CorpusSource::Custom;
  ep.episode_id = "demo-0";
  ep.metadata = {{"context", "lonely"}};
  ep.turns = {
      {"speaker", "My best friend moved across the country last month and the weekends feel so empty now."},
      {"listener", "That sounds hard. Have you two been able to keep in touch?"},
      {"speaker", "We text, but it is not the same as grabbing coffee every Saturday like we used to."},
      {"listener", "Maybe you could set up a regular video call to keep that Saturday ritual going."},
  };
  return ep;
}

}  // namespace tomsim
