#pragma once

// Domain types shared by every module: BDI triples, facets, utterances,
// dialogue histories and second-order judgments.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tomsim {

enum class Facet { Belief, Desire, Intention };

inline constexpr std::array<Facet, 3> kAllFacets = {Facet::Belief, Facet::Desire,
                                                    Facet::Intention};

// Lowercase singular name as used in prompts ("belief", "desire", "intention").
std::string_view facet_name(Facet facet) noexcept;
std::optional<Facet> parse_facet(std::string_view text);

struct BDITriple {
  std::string belief;
  std::string desire;
  std::string intention;

  // Throws Error{InvalidTriple} when any field is blank.
  static BDITriple make(std::string belief, std::string desire, std::string intention);

  [[nodiscard]] bool valid() const noexcept;
  [[nodiscard]] const std::string& get(Facet facet) const noexcept;

  bool operator==(const BDITriple&) const = default;
};

// Agent ids are fixed: "A" is the self-BDI-aware agent and always opens the
// dialogue, "B" is the tracking agent.
inline constexpr std::string_view kAgentA = "A";
inline constexpr std::string_view kAgentB = "B";

struct Utterance {
  std::string speaker;
  std::string text;
  std::size_t turn_index = 0;

  bool operator==(const Utterance&) const = default;
};

enum class TurnUnit { Round, Utterance };

// Immutable once built: append_turn returns a new history.
class DialogueHistory {
 public:
  DialogueHistory() = default;

  [[nodiscard]] const std::vector<Utterance>& turns() const noexcept { return turns_; }
  [[nodiscard]] std::size_t size() const noexcept { return turns_.size(); }
  [[nodiscard]] bool empty() const noexcept { return turns_.empty(); }

  // Speaker expected for the next append ("A" on an empty history).
  [[nodiscard]] std::string_view next_speaker() const noexcept;

  // Number of (U_a, U_b) pairs started so far: ceil(turns / 2).
  [[nodiscard]] std::size_t round_count() const noexcept;
  [[nodiscard]] std::size_t count(TurnUnit unit) const noexcept;

  // History without its last `n` turns.
  [[nodiscard]] DialogueHistory drop_last(std::size_t n = 1) const;

  bool operator==(const DialogueHistory&) const = default;

 private:
  friend DialogueHistory append_turn(const DialogueHistory&, std::string_view,
                                     std::string_view);
  std::vector<Utterance> turns_;
};

// Throws AlternationViolation when `speaker` is not next_speaker(), and
// EmptyUtterance when `text` is blank.
DialogueHistory append_turn(const DialogueHistory& history, std::string_view speaker,
                            std::string_view text);

using NameMap = std::map<std::string, std::string, std::less<>>;

// One `<DisplayName>: <text>` line per turn. Throws UnknownSpeaker.
std::string render_history(const DialogueHistory& history, const NameMap& names);

enum class Decision { Say, Goodbye };

std::string_view decision_name(Decision decision) noexcept;  // "SAY" / "GOODBYE"
std::optional<Decision> parse_decision(std::string_view text);

struct Judgment {
  Decision decision = Decision::Say;
  std::string reason;

  bool operator==(const Judgment&) const = default;
};

}  // namespace tomsim
