#include "tomsim/core.hpp"

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

std::string_view facet_name(Facet facet) noexcept {
  switch (facet) {
    case Facet::Belief: return "belief";
    case Facet::Desire: return "desire";
    case Facet::Intention: return "intention";
  }
  return "belief";
}

std::optional<Facet> parse_facet(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  if (!t.empty() && t.back() == 's') t.pop_back();
  for (auto f : kAllFacets)
    if (t == facet_name(f)) return f;
  return std::nullopt;
}

BDITriple BDITriple::make(std::string belief, std::string desire, std::string intention) {
  BDITriple t{std::move(belief), std::move(desire), std::move(intention)};
  if (!t.valid()) throw Error(ErrorCode::InvalidTriple, "BDI triple has a blank field");
  return t;
}

bool BDITriple::valid() const noexcept {
  return !text::is_blank(belief) && !text::is_blank(desire) && !text::is_blank(intention);
}

const std::string& BDITriple::get(Facet facet) const noexcept {
  switch (facet) {
    case Facet::Desire: return desire;
    case Facet::Intention: return intention;
    case Facet::Belief: break;
  }
  return belief;
}

std::string_view DialogueHistory::next_speaker() const noexcept {
  if (turns_.empty() || turns_.back().speaker == kAgentB) return kAgentA;
  return kAgentB;
}

std::size_t DialogueHistory::round_count() const noexcept { return (turns_.size() + 1) / 2; }

std::size_t DialogueHistory::count(TurnUnit unit) const noexcept {
  return unit == TurnUnit::Round ? round_count() : turns_.size();
}

DialogueHistory DialogueHistory::drop_last(std::size_t n) const {
  DialogueHistory out;
  auto keep = n >= turns_.size() ? 0 : turns_.size() - n;
  out.turns_.assign(turns_.begin(), turns_.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

DialogueHistory append_turn(const DialogueHistory& history, std::string_view speaker,
                            std::string_view text) {
  if (speaker != history.next_speaker())
    throw Error(ErrorCode::AlternationViolation,
                "expected speaker " + std::string(history.next_speaker()) + ", got " +
                    std::string(speaker));
  if (text::is_blank(text)) throw Error(ErrorCode::EmptyUtterance, "utterance text is blank");
  DialogueHistory out = history;
  out.turns_.push_back(Utterance{std::string(speaker), std::string(text), history.size()});
  return out;
}

std::string render_history(const DialogueHistory& history, const NameMap& names) {
  std::string out;
  for (const auto& turn : history.turns()) {
    auto it = names.find(turn.speaker);
    if (it == names.end())
      throw Error(ErrorCode::UnknownSpeaker, "no display name for speaker " + turn.speaker);
    if (!out.empty()) out += '\n';
    out += it->second;
    out += ": ";
    out += turn.text;
  }
  return out;
}

std::string_view decision_name(Decision decision) noexcept {
  return decision == Decision::Goodbye ? "GOODBYE" : "SAY";
}

std::optional<Decision> parse_decision(std::string_view text) {
  auto t = text::trim(text);
  if (text::iequals(t, "SAY")) return Decision::Say;
  if (text::iequals(t, "GOODBYE")) return Decision::Goodbye;
  return std::nullopt;
}

}  // namespace tomsim
