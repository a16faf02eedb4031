#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tomsim/core.hpp"
#include "tomsim/engine.hpp"

namespace tomsim {

struct MetricOptions {
  bool count_aborted_as_failure = false;
  TurnUnit unit = TurnUnit::Round;
};

// Mean rounds_used. Throws NoResults when nothing is included.
double average_turn(const std::vector<EpisodeResult>& results, const MetricOptions& options = {});
// Fraction of successful episodes. Throws NoResults.
double success_rate(const std::vector<EpisodeResult>& results, const MetricOptions& options = {});

enum class ToMOrder { First, Second };

std::string_view order_name(ToMOrder order) noexcept;
ToMOrder parse_order(std::string_view text);

struct AnnotationRecord {
  std::string episode_id;
  Facet facet = Facet::Belief;
  std::vector<double> scores;  // one per annotator, each in [0, 5]
  ToMOrder order = ToMOrder::First;
};

inline constexpr double kSimilarThreshold = 0.25;

// (mean(scores) / 5) > threshold.
bool label_from_annotations(const AnnotationRecord& record, double threshold = kSimilarThreshold);

// Columns: episode_id, facet, order, score_1..score_m.
std::vector<AnnotationRecord> parse_annotations(std::string_view csv);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

struct BinaryOutcome {
  std::string episode_id;
  Facet facet = Facet::Belief;
  bool predicted = false;
  bool gold = false;
};

struct Prf {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  // nullopt when the denominator is zero.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Prf prf1(const std::vector<BinaryOutcome>& outcomes);

inline constexpr double kDefaultTau = 50.0;

// First order: top-1 confidence of the final ledger >= tau.
// Second order: the episode ended with GOODBYE.
std::optional<bool> system_prediction(const EpisodeResult& result, Facet facet, ToMOrder order,
                                      double tau = kDefaultTau);

using PredictionTable = std::map<std::pair<std::string, Facet>, bool>;

// Columns: episode_id, facet, predicted (0/1/true/false).
PredictionTable parse_predictions(std::string_view csv);

// Joins annotations of one order with predictions (external table first,
// else the system rule). Annotations without a matching episode are skipped.
std::vector<BinaryOutcome> build_outcomes(const std::vector<EpisodeResult>& results,
                                          const std::vector<AnnotationRecord>& annotations,
                                          ToMOrder order, double tau = kDefaultTau,
                                          double threshold = kSimilarThreshold,
                                          const PredictionTable* external = nullptr);

struct CurveStats {
  double final_value = 0.0;
  double max_value = 0.0;
  double monotone_fraction = 1.0;
};

// Throws EmptyCurve.
CurveStats curve_stats(const std::vector<std::pair<std::size_t, double>>& curve);

}  // namespace tomsim
