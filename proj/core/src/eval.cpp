#include "tomsim/eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "text_util.hpp"
#include "tomsim/data.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

namespace {

std::vector<const EpisodeResult*> included(const std::vector<EpisodeResult>& results, const MetricOptions& o) {
  std::vector<const EpisodeResult*> out;
  for (const auto& r : results)
    if (!r.aborted || o.count_aborted_as_failure) out.push_back(&r);
  if (out.empty()) throw Error(ErrorCode::NoResults, "no episodes to evaluate");
  return out;
}

// Aborted episodes counted as failures contribute the full round budget.
double turns_of(const EpisodeResult& r, const MetricOptions& o) {
  const double rounds = static_cast<double>(r.aborted ? r.max_rounds : r.rounds_used);
  if (o.unit == TurnUnit::Round) return rounds;
  return 2.0 * rounds + (!r.aborted && r.closing_utt ? 1.0 : 0.0);
}

double parse_number(std::string_view raw, const std::string& what) {
  const auto t = text::trim(raw);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw Error(ErrorCode::ParseFailure, what + " is not a number: " + std::string(raw));
  return v;
}

Facet parse_facet_or_throw(std::string_view raw) {
  auto f = parse_facet(text::to_lower(text::trim(raw)));
  if (!f) throw Error(ErrorCode::ParseFailure, "unknown facet: " + std::string(raw));
  return *f;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[text::to_lower(text::trim(header[i]))] = i;
  return idx;
}

std::size_t require(const std::map<std::string, std::size_t>& idx, const std::string& name) {
  auto it = idx.find(name);
  if (it == idx.end()) throw Error(ErrorCode::MissingColumn, name);
  return it->second;
}

}  // namespace

double average_turn(const std::vector<EpisodeResult>& results, const MetricOptions& options) {
  const auto rs = included(results, options);
  double sum = 0.0;
  for (const auto* r : rs) sum += turns_of(*r, options);
  return sum / static_cast<double>(rs.size());
}

double success_rate(const std::vector<EpisodeResult>& results, const MetricOptions& options) {
  const auto rs = included(results, options);
  const auto wins = std::count_if(rs.begin(), rs.end(), [](const EpisodeResult* r) { return r->success; });
  return static_cast<double>(wins) / static_cast<double>(rs.size());
}

std::string_view order_name(ToMOrder order) noexcept { return order == ToMOrder::Second ? "second" : "first"; }

ToMOrder parse_order(std::string_view text) {
  const auto t = text::to_lower(text::trim(text));
  if (t == "first" || t == "1") return ToMOrder::First;
  if (t == "second" || t == "2") return ToMOrder::Second;
  throw Error(ErrorCode::ParseFailure, "unknown ToM order: " + std::string(text));
}

bool label_from_annotations(const AnnotationRecord& record, double threshold) {
  if (record.scores.empty()) return false;
  const double mean = std::accumulate(record.scores.begin(), record.scores.end(), 0.0) /
                      static_cast<double>(record.scores.size());
  return mean / 5.0 > threshold;
}

std::vector<AnnotationRecord> parse_annotations(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::EmptyCorpus, "annotation file has no header");
  const auto idx = header_index(rows.front());
  const auto c_id = require(idx, "episode_id");
  const auto c_facet = require(idx, "facet");
  const auto c_order = require(idx, "order");
  std::vector<std::size_t> score_cols;
  for (std::size_t m = 1;; ++m) {
    auto it = idx.find("score_" + std::to_string(m));
    if (it == idx.end()) break;
    score_cols.push_back(it->second);
  }
  if (score_cols.empty()) throw Error(ErrorCode::MissingColumn, "score_1");

  std::vector<AnnotationRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "annotation row " + std::to_string(r + 1);
    if (row.size() <= std::max({c_id, c_facet, c_order}))
      throw Error(ErrorCode::ParseFailure, where + " has too few columns");
    AnnotationRecord rec;
    rec.episode_id = std::string(text::trim(row[c_id]));
    rec.facet = parse_facet_or_throw(row[c_facet]);
    rec.order = parse_order(row[c_order]);
    for (auto c : score_cols) {
      if (c >= row.size() || text::is_blank(row[c])) continue;
      const double v = parse_number(row[c], where + " score");
      if (v < 0.0 || v > 5.0) throw Error(ErrorCode::ParseFailure, where + " score outside [0, 5]");
      rec.scores.push_back(v);
    }
    if (rec.scores.empty()) throw Error(ErrorCode::ParseFailure, where + " has no scores");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str());
}

Prf prf1(const std::vector<BinaryOutcome>& outcomes) {
  Prf p;
  for (const auto& o : outcomes) {
    if (o.predicted && o.gold) ++p.tp;
    else if (o.predicted) ++p.fp;
    else if (o.gold) ++p.fn;
    else ++p.tn;
  }
  if (p.tp + p.fp > 0) p.precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
  if (p.tp + p.fn > 0) p.recall = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn);
  if (p.precision && p.recall && *p.precision + *p.recall > 0.0)
    p.f1 = 2.0 * *p.precision * *p.recall / (*p.precision + *p.recall);
  return p;
}

std::optional<bool> system_prediction(const EpisodeResult& result, Facet facet, ToMOrder order, double tau) {
  if (order == ToMOrder::Second) {
    if (!result.final_judgment) return std::nullopt;
    return result.final_judgment->decision == Decision::Goodbye;
  }
  auto it = result.final_ledgers.find(facet);
  if (it == result.final_ledgers.end() || it->second.empty()) return std::nullopt;
  return top1(it->second).confidence >= tau;
}

PredictionTable parse_predictions(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::EmptyCorpus, "prediction file has no header");
  const auto idx = header_index(rows.front());
  const auto c_id = require(idx, "episode_id");
  const auto c_facet = require(idx, "facet");
  const auto c_pred = require(idx, "predicted");
  PredictionTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max({c_id, c_facet, c_pred}))
      throw Error(ErrorCode::ParseFailure, "prediction row " + std::to_string(r + 1) + " has too few columns");
    const auto v = text::to_lower(text::trim(row[c_pred]));
    bool predicted;
    if (v == "1" || v == "true" || v == "yes") predicted = true;
    else if (v == "0" || v == "false" || v == "no") predicted = false;
    else throw Error(ErrorCode::ParseFailure, "prediction row " + std::to_string(r + 1) + ": bad value " + v);
    table[{std::string(text::trim(row[c_id])), parse_facet_or_throw(row[c_facet])}] = predicted;
  }
  return table;
}

std::vector<BinaryOutcome> build_outcomes(const std::vector<EpisodeResult>& results,
                                          const std::vector<AnnotationRecord>& annotations, ToMOrder order,
                                          double tau, double threshold, const PredictionTable* external) {
  std::map<std::string, const EpisodeResult*> by_id;
  for (const auto& r : results) by_id[r.episode_id] = &r;
  std::vector<BinaryOutcome> out;
  for (const auto& a : annotations) {
    if (a.order != order) continue;
    std::optional<bool> predicted;
    if (external) {
      if (auto it = external->find({a.episode_id, a.facet}); it != external->end()) predicted = it->second;
    }
    if (!predicted) {
      auto it = by_id.find(a.episode_id);
      if (it == by_id.end()) continue;
      predicted = system_prediction(*it->second, a.facet, order, tau);
    }
    if (!predicted) continue;
    out.push_back(BinaryOutcome{a.episode_id, a.facet, *predicted, label_from_annotations(a, threshold)});
  }
  return out;
}

CurveStats curve_stats(const std::vector<std::pair<std::size_t, double>>& curve) {
  if (curve.empty()) throw Error(ErrorCode::EmptyCurve, "curve has no points");
  CurveStats s;
  s.final_value = curve.back().second;
  s.max_value = curve.front().second;
  std::size_t rising = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    s.max_value = std::max(s.max_value, curve[i].second);
    if (i > 0 && curve[i].second - curve[i - 1].second >= 0.0) ++rising;
  }
  s.monotone_fraction = curve.size() == 1 ? 1.0 : static_cast<double>(rising) / static_cast<double>(curve.size() - 1);
  return s;
}

}  // namespace tomsim
