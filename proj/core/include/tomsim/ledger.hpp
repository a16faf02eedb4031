#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tomsim/core.hpp"

namespace tomsim {

struct LedgerEntry {
  std::string statement;
  double confidence = 0.0;  // percentage points in [0, 100]

  bool operator==(const LedgerEntry&) const = default;
};

// Ranked list of candidate statements for one facet with confidences that
// sum to 100 and never tie. A ledger returned by parse_ranked_list,
// normalize or apply_plan satisfies validate(); a hand-built one may not.
struct ConfidenceLedger {
  Facet facet = Facet::Belief;
  std::size_t capacity = 3;
  // When false, capacity is advisory and overflow is tolerated.
  bool strict_capacity = true;
  std::vector<LedgerEntry> entries;

  [[nodiscard]] bool empty() const noexcept { return entries.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
  [[nodiscard]] double total() const noexcept;

  // First violated invariant, or nullopt when the ledger is well formed.
  [[nodiscard]] std::optional<std::string> validate() const;

  bool operator==(const ConfidenceLedger&) const = default;
};

inline constexpr double kSumTolerance = 0.5;
inline constexpr double kTieStep = 0.01;

enum class PlanKind { Add, Increase, Decrease, Delete };

std::string_view plan_kind_name(PlanKind kind) noexcept;

struct PlanOp {
  PlanKind kind = PlanKind::Add;
  std::string target;
  double amount = 0.0;  // ignored for Delete
  bool amount_defaulted = false;

  bool operator==(const PlanOp&) const = default;
};

struct ParseWarning {
  std::size_t line = 0;  // 1-based
  std::string message;
};

// Parses `statement | N% ...` lines. Bullets, numbering, markdown emphasis and
// trailing annotations such as "confidence (increased)" are tolerated. The
// result is sorted, truncated to the k highest when strict, and normalized
// only if the parsed sum is off by more than kSumTolerance or ties exist.
// Throws ParseFailure when no line yields an entry.
ConfidenceLedger parse_ranked_list(std::string_view raw, Facet facet, std::size_t k,
                                   bool strict_capacity = true,
                                   std::vector<ParseWarning>* warnings = nullptr);

// Rescale to 100, break ties by list position, restore descending order.
// Throws ZeroMass when the total confidence is not positive.
ConfidenceLedger normalize(const ConfidenceLedger& ledger);

// Applies ops in order, drops entries that reach 0, evicts the lowest
// entries past capacity (strict only), then normalizes.
// Throws UnknownTarget, EmptyResult or InvalidPlanOp.
ConfidenceLedger apply_plan(const ConfidenceLedger& ledger, const std::vector<PlanOp>& ops);

// Index of the entry matched by `target`: exact text first, then a unique
// case-insensitive containment in either direction.
std::optional<std::size_t> find_target(const ConfidenceLedger& ledger, std::string_view target);

// Ops that turn `before` into `after` (statements matched by find_target).
std::vector<PlanOp> reconcile_plan(const ConfidenceLedger& before, const ConfidenceLedger& after);

// Throws EmptyLedger.
const LedgerEntry& top1(const ConfidenceLedger& ledger);

// `<statement> | <confidence with 2 decimals>%`, one line per entry.
std::string serialize_entry(const LedgerEntry& entry);
std::string serialize(const ConfidenceLedger& ledger);

}  // namespace tomsim
