#include "tomsim/agents.hpp"

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

std::string_view scenario_name(Scenario scenario) noexcept {
  return scenario == Scenario::Persuasion ? "persuasion" : "empathetic";
}

Scenario parse_scenario(std::string_view text) {
  auto t = text::to_lower(text::trim(text));
  if (t == "empathetic" || t == "empathy") return Scenario::Empathetic;
  if (t == "persuasion" || t == "persuasive") return Scenario::Persuasion;
  throw Error(ErrorCode::InvalidConfig, "unknown scenario: " + std::string(text));
}

ScenarioProfile ScenarioProfile::defaults(Scenario scenario) {
  if (scenario == Scenario::Persuasion) {
    return ScenarioProfile{
        "Persuadee",
        "Persuader",
        "the understanding",
        "a persuasive",
        BDITriple{"Donations to a children's charity make a real difference for children in need.",
                  "I want the other person to make a donation to the charity.",
                  "I will address the other person's concerns and persuade them to donate."},
        Scenario::Persuasion,
    };
  }
  return ScenarioProfile{
      "Sympathy-needing Agent",
      "Empathetic Agent",
      "the understanding or empathy",
      "an empathetic",
      BDITriple{"Listening closely to someone's feelings helps them feel understood.",
                "I want the other person to feel heard and supported.",
                "I will respond with empathy to what the other person is going through."},
      Scenario::Empathetic,
  };
}

NameMap ScenarioProfile::names() const {
  return NameMap{{std::string(kAgentA), self_name}, {std::string(kAgentB), tracker_name}};
}

}  // namespace tomsim
