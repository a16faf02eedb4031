#include "tomsim/ledger.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

namespace {

constexpr double kTieEpsilon = 1e-9;

bool tied(double a, double b) noexcept { return std::fabs(a - b) <= kTieEpsilon; }

void sort_descending(std::vector<LedgerEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const LedgerEntry& a, const LedgerEntry& b) { return a.confidence > b.confidence; });
}

bool has_ties(const std::vector<LedgerEntry>& sorted) {
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (tied(sorted[i - 1].confidence, sorted[i].confidence)) return true;
  return false;
}

// Groups of tied, adjacent entries in a descending list: [begin, end).
std::vector<std::pair<std::size_t, std::size_t>> tie_groups(const std::vector<LedgerEntry>& sorted) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && tied(sorted[i].confidence, sorted[j].confidence)) ++j;
    groups.emplace_back(i, j);
    i = j;
  }
  return groups;
}

// Spreads every tie group around its value: member j of an m-sized group
// moves by step * (m - 1 - 2j), so the group sum is unchanged. The step is
// 0.01 unless neighbouring groups are closer than that allows.
void break_ties(std::vector<LedgerEntry>& sorted) {
  auto groups = tie_groups(sorted);
  std::size_t largest = 1;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    largest = std::max(largest, groups[g].second - groups[g].first);
    if (g + 1 < groups.size())
      min_gap = std::min(min_gap, sorted[groups[g].first].confidence -
                                      sorted[groups[g + 1].first].confidence);
  }
  if (largest < 2) return;
  const double step = std::min(kTieStep, min_gap / (2.0 * static_cast<double>(largest)));

  double borrowed = 0.0;
  for (auto [begin, end] : groups) {
    const auto m = end - begin;
    if (m < 2) continue;
    const double value = sorted[begin].confidence;
    const bool near_zero = value - step * static_cast<double>(m - 1) < 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double offset = near_zero ? step * static_cast<double>(m - 1 - j)
                                : step * (static_cast<double>(m - 1) - 2.0 * static_cast<double>(j));
      sorted[begin + j].confidence = value + offset;
      if (near_zero) borrowed += offset;
    }
  }
  // Groups pinned at zero can only move up; the top entry pays for it so the
  // total stays at 100.
  if (borrowed > 0.0) sorted.front().confidence -= borrowed;
}

std::string normalize_for_match(std::string_view s) {
  auto t = text::to_lower(text::strip_emphasis(text::trim(s)));
  while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == ';' || t.back() == '"' ||
                        t.back() == '\''))
    t.pop_back();
  while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(0, 1);
  // Collapse whitespace.
  return text::join(text::split_whitespace(t), " ");
}

}  // namespace

double ConfidenceLedger::total() const noexcept {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.confidence;
  return sum;
}

std::optional<std::string> ConfidenceLedger::validate() const {
  if (entries.empty()) return "ledger is empty";
  if (strict_capacity && entries.size() > capacity)
    return "ledger holds " + std::to_string(entries.size()) + " entries, capacity " +
           std::to_string(capacity);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (text::is_blank(e.statement)) return "entry " + std::to_string(i) + " has a blank statement";
    if (!(e.confidence >= 0.0 && e.confidence <= 100.0))
      return "entry " + std::to_string(i) + " confidence out of [0,100]";
    if (i > 0 && !(entries[i - 1].confidence - e.confidence > kTieEpsilon))
      return "confidences not strictly descending at entry " + std::to_string(i);
  }
  if (std::fabs(total() - 100.0) > kSumTolerance)
    return "confidences sum to " + text::format_fixed(total(), 4);
  return std::nullopt;
}

std::string_view plan_kind_name(PlanKind kind) noexcept {
  switch (kind) {
    case PlanKind::Add: return "add";
    case PlanKind::Increase: return "increase";
    case PlanKind::Decrease: return "decrease";
    case PlanKind::Delete: return "delete";
  }
  return "add";
}

ConfidenceLedger parse_ranked_list(std::string_view raw, Facet facet, std::size_t k,
                                   bool strict_capacity, std::vector<ParseWarning>* warnings) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "ledger capacity must be positive");
  auto warn = [&](std::size_t line, std::string msg) {
    if (warnings) warnings->push_back(ParseWarning{line, std::move(msg)});
  };

  ConfidenceLedger ledger{facet, k, strict_capacity, {}};
  std::size_t candidates = 0;
  auto lines = text::split_lines(raw);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto line = text::strip_bullet(lines[n]);
    auto bar = line.rfind('|');
    if (bar == std::string_view::npos) continue;
    ++candidates;
    auto statement = text::strip_emphasis(line.substr(0, bar));
    auto rest = text::strip_emphasis(line.substr(bar + 1));
    auto rest_view = text::trim(std::string_view(rest));
    while (!rest_view.empty() && (rest_view.front() == '"' || rest_view.front() == '(' ||
                                  rest_view.front() == '['))
      rest_view.remove_prefix(1);

    double value = 0.0;
    auto [ptr, ec] = std::from_chars(rest_view.data(), rest_view.data() + rest_view.size(), value);
    if (ec != std::errc{} || ptr == rest_view.data()) {
      warn(n + 1, "non-numeric confidence: " + std::string(text::trim(lines[n])));
      continue;
    }
    if (value < 0.0 || !std::isfinite(value)) {
      warn(n + 1, "negative confidence: " + std::string(text::trim(lines[n])));
      continue;
    }
    if (text::is_blank(statement)) {
      warn(n + 1, "blank statement");
      continue;
    }
    bool duplicate = std::any_of(ledger.entries.begin(), ledger.entries.end(), [&](const LedgerEntry& e) {
      return normalize_for_match(e.statement) == normalize_for_match(statement);
    });
    if (duplicate) {
      warn(n + 1, "duplicate statement skipped");
      continue;
    }
    ledger.entries.push_back(LedgerEntry{statement, value});
  }

  if (ledger.entries.empty())
    throw Error(ErrorCode::ParseFailure,
                candidates == 0 ? "no `statement | N%` lines found"
                                : "no ranked line had a numeric confidence");

  sort_descending(ledger.entries);
  if (strict_capacity && ledger.entries.size() > k) ledger.entries.resize(k);
  if (std::fabs(ledger.total() - 100.0) > kSumTolerance || has_ties(ledger.entries)) {
    try {
      return normalize(ledger);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroMass)
        throw Error(ErrorCode::ParseFailure, "all parsed confidences are zero");
      throw;
    }
  }
  return ledger;
}

ConfidenceLedger normalize(const ConfidenceLedger& ledger) {
  if (ledger.entries.empty()) throw Error(ErrorCode::EmptyLedger, "cannot normalize an empty ledger");
  ConfidenceLedger out = ledger;
  for (auto& e : out.entries) e.confidence = std::max(0.0, e.confidence);
  const double total = out.total();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroMass, "all confidences are zero");
  const double scale = 100.0 / total;
  for (auto& e : out.entries) e.confidence = std::min(100.0, e.confidence * scale);
  sort_descending(out.entries);
  for (int pass = 0; pass < 4 && has_ties(out.entries); ++pass) {
    break_ties(out.entries);
    sort_descending(out.entries);
  }
  return out;
}

std::optional<std::size_t> find_target(const ConfidenceLedger& ledger, std::string_view target) {
  const auto trimmed = text::trim(target);
  if (trimmed.empty()) return std::nullopt;
  for (std::size_t i = 0; i < ledger.entries.size(); ++i)
    if (ledger.entries[i].statement == trimmed) return i;

  const auto key = normalize_for_match(trimmed);
  if (key.empty()) return std::nullopt;
  for (std::size_t i = 0; i < ledger.entries.size(); ++i)
    if (normalize_for_match(ledger.entries[i].statement) == key) return i;

  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < ledger.entries.size(); ++i) {
    auto candidate = normalize_for_match(ledger.entries[i].statement);
    if (candidate.empty()) continue;
    if (candidate.find(key) != std::string::npos || key.find(candidate) != std::string::npos) {
      if (found) return std::nullopt;  // ambiguous
      found = i;
    }
  }
  return found;
}

ConfidenceLedger apply_plan(const ConfidenceLedger& ledger, const std::vector<PlanOp>& ops) {
  ConfidenceLedger work = ledger;
  for (const auto& op : ops) {
    if (op.kind != PlanKind::Delete && !(op.amount != 0.0 && std::isfinite(op.amount)))
      throw Error(ErrorCode::InvalidPlanOp,
                  std::string(plan_kind_name(op.kind)) + " requires a non-zero amount");
    const double amount = std::fabs(op.amount);
    switch (op.kind) {
      case PlanKind::Add: {
        if (text::is_blank(op.target))
          throw Error(ErrorCode::InvalidPlanOp, "add requires a statement");
        auto key = normalize_for_match(op.target);
        auto it = std::find_if(work.entries.begin(), work.entries.end(), [&](const LedgerEntry& e) {
          return normalize_for_match(e.statement) == key;
        });
        if (it != work.entries.end())
          it->confidence = std::min(100.0, it->confidence + amount);
        else
          work.entries.push_back(LedgerEntry{std::string(text::trim(op.target)), std::min(100.0, amount)});
        break;
      }
      case PlanKind::Increase:
      case PlanKind::Decrease:
      case PlanKind::Delete: {
        auto idx = find_target(work, op.target);
        if (!idx)
          throw Error(ErrorCode::UnknownTarget,
                      std::string(plan_kind_name(op.kind)) + " names no entry: " + op.target);
        auto& entry = work.entries[*idx];
        if (op.kind == PlanKind::Increase)
          entry.confidence = std::clamp(entry.confidence + amount, 0.0, 100.0);
        else if (op.kind == PlanKind::Decrease)
          entry.confidence = std::clamp(entry.confidence - amount, 0.0, 100.0);
        else
          work.entries.erase(work.entries.begin() + static_cast<std::ptrdiff_t>(*idx));
        break;
      }
    }
  }

  std::erase_if(work.entries, [](const LedgerEntry& e) { return !(e.confidence > 0.0); });
  if (work.entries.empty()) throw Error(ErrorCode::EmptyResult, "plan removed every entry");

  sort_descending(work.entries);
  if (work.strict_capacity && work.entries.size() > work.capacity)
    work.entries.resize(work.capacity);
  return normalize(work);
}

std::vector<PlanOp> reconcile_plan(const ConfidenceLedger& before, const ConfidenceLedger& after) {
  std::vector<PlanOp> ops;
  std::vector<bool> used(before.entries.size(), false);
  for (const auto& entry : after.entries) {
    auto idx = find_target(before, entry.statement);
    if (idx && !used[*idx]) {
      used[*idx] = true;
      const double delta = entry.confidence - before.entries[*idx].confidence;
      const auto& target = before.entries[*idx].statement;
      if (delta > 0.0) ops.push_back(PlanOp{PlanKind::Increase, target, delta, false});
      else if (delta < 0.0) ops.push_back(PlanOp{PlanKind::Decrease, target, -delta, false});
    } else {
      ops.push_back(PlanOp{PlanKind::Add, entry.statement, entry.confidence, false});
    }
  }
  for (std::size_t i = 0; i < before.entries.size(); ++i)
    if (!used[i]) ops.push_back(PlanOp{PlanKind::Delete, before.entries[i].statement, 0.0, false});
  return ops;
}

const LedgerEntry& top1(const ConfidenceLedger& ledger) {
  if (ledger.entries.empty()) throw Error(ErrorCode::EmptyLedger, "ledger has no entries");
  return *std::max_element(ledger.entries.begin(), ledger.entries.end(),
                           [](const LedgerEntry& a, const LedgerEntry& b) { return a.confidence < b.confidence; });
}

std::string serialize_entry(const LedgerEntry& entry) {
  return entry.statement + " | " + text::format_fixed(entry.confidence, 2) + "%";
}

std::string serialize(const ConfidenceLedger& ledger) {
  std::string out;
  for (const auto& e : ledger.entries) {
    if (!out.empty()) out += '\n';
    out += serialize_entry(e);
  }
  return out;
}

}  // namespace tomsim
