#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tomsim {

enum class CorpusSource { EmpatheticDialogues, PersuasionForGood, Custom };

std::string_view corpus_source_name(CorpusSource source) noexcept;
CorpusSource parse_corpus_source(std::string_view text);  // throws InvalidConfig

struct SeedTurn {
  std::string speaker_role;
  std::string text;

  bool operator==(const SeedTurn&) const = default;
};

struct NormalizedEpisode {
  CorpusSource source = CorpusSource::Custom;
  std::string episode_id;
  std::vector<SeedTurn> turns;
  std::map<std::string, std::string> metadata;

  // Role played by agent A: metadata "self_role" when present, else the
  // first speaker.
  [[nodiscard]] std::string self_role() const;

  bool operator==(const NormalizedEpisode&) const = default;
};

// Maps the logical fields episode_id, turn_order, speaker, text onto CSV
// header names. Optional extras: metadata columns, literal substitutions
// applied to text (e.g. "_comma_" -> ","), and the role agent A plays.
struct ColumnMap {
  std::map<std::string, std::string> fields;
  std::vector<std::string> metadata_columns;
  std::vector<std::pair<std::string, std::string>> replacements;
  std::string self_role;  // empty: first speaker of each episode

  static ColumnMap preset(CorpusSource source);
  static ColumnMap load(const std::filesystem::path& path);  // JSON preset file
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t skipped_rows = 0;
  std::size_t merged_turns = 0;
  std::size_t dropped_episodes = 0;  // fewer than two turns after merging
  std::vector<std::string> warnings;
};

// RFC 4180 CSV: quoted fields may contain separators, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Throws MissingColumn naming the mapped header, EmptyCorpus, IoError.
std::vector<NormalizedEpisode> ingest_csv(std::string_view csv_text, CorpusSource source,
                                          const ColumnMap& columns,
                                          IngestReport* report = nullptr);
std::vector<NormalizedEpisode> ingest(const std::filesystem::path& path, CorpusSource source,
                                      const ColumnMap& columns, IngestReport* report = nullptr);

// Episode totals of the public releases; a mismatch is only a warning.
std::size_t expected_corpus_size(CorpusSource source) noexcept;

// Uniform draw of n distinct episodes: mt19937_64 seeded with rng_seed and a
// partial Fisher-Yates shuffle (see rng.hpp). Throws InsufficientCorpus.
std::vector<NormalizedEpisode> sample_episodes(const std::vector<NormalizedEpisode>& corpus,
                                               std::size_t n, std::uint64_t rng_seed);

void write_episodes(const std::vector<NormalizedEpisode>& episodes,
                    const std::filesystem::path& path);
std::vector<NormalizedEpisode> read_episodes(const std::filesystem::path& path);

// Built-in single-episode seed used when no corpus is supplied.
NormalizedEpisode demo_seed_episode();

}  // namespace tomsim
