#pragma once

// Scenario-level settings shared by both agents.

#include <string>
#include <string_view>

#include "tomsim/core.hpp"

namespace tomsim {

enum class Scenario { Empathetic, Persuasion };

std::string_view scenario_name(Scenario scenario) noexcept;
Scenario parse_scenario(std::string_view text);  // throws InvalidConfig

struct ScenarioProfile {
  std::string self_name;      // agent A
  std::string tracker_name;   // agent B
  std::string seek_goal;      // SelfUtterance goal clause
  std::string response_style; // UtterFromInferred style ("an empathetic")
  BDITriple tracker_persona;  // B's own BDI, bound into tracker prompts
  Scenario scenario = Scenario::Empathetic;  // picks the no-ToM baseline prompt

  static ScenarioProfile defaults(Scenario scenario);
  [[nodiscard]] NameMap names() const;
};

struct Temperatures {
  double utterance = 0.7;
  double structured = 0.0;
};

}  // namespace tomsim
