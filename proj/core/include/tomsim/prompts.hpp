#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tomsim/core.hpp"
#include "tomsim/ledger.hpp"

namespace tomsim {

enum class TemplateId {
  BdiInit,
  SelfUtterance,
  SecondOrderJudgment,
  InferTopK,
  PredictResponse,
  Reflect,
  CounterfactualReflect,
  UtterFromInferred,
  BaselineEmpathetic,
  BaselinePersuasive,
  ReverseBdi,
};

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::BdiInit,           TemplateId::SelfUtterance,
    TemplateId::SecondOrderJudgment, TemplateId::InferTopK,
    TemplateId::PredictResponse,   TemplateId::Reflect,
    TemplateId::CounterfactualReflect, TemplateId::UtterFromInferred,
    TemplateId::BaselineEmpathetic, TemplateId::BaselinePersuasive,
    TemplateId::ReverseBdi,
};

// snake_case id, also the asset file stem and the scripted routing tag.
std::string_view template_name(TemplateId id) noexcept;
std::optional<TemplateId> parse_template_id(std::string_view name);

// Placeholders a caller must bind for `id` (the `definition` slot of
// BdiInit is filled by the registry when absent).
const std::set<std::string>& documented_bindings(TemplateId id);

// `{name}` placeholders appearing in `text`, in first-seen order.
std::vector<std::string> extract_placeholders(std::string_view text);

using Bindings = std::map<std::string, std::string, std::less<>>;

class TemplateRegistry {
 public:
  // Templates compiled into the library from templates/*.txt.
  static const TemplateRegistry& builtin();
  // Reads templates/<id>.txt and definition.txt. Throws IoError/UnknownTemplate.
  static TemplateRegistry load(const std::filesystem::path& dir);

  [[nodiscard]] const std::string& text(TemplateId id) const;
  [[nodiscard]] const std::string& definition() const noexcept { return definition_; }

  // Substitutes every placeholder. BdiInit and InferTopK get the BDI
  // definition block prepended. Throws MissingPlaceholder.
  [[nodiscard]] std::string render(TemplateId id, const Bindings& bindings) const;

  // Hex SHA-256 of each stored template, keyed by template name.
  [[nodiscard]] std::map<std::string, std::string> checksums() const;

 private:
  std::map<TemplateId, std::string> texts_;
  std::string definition_;
};

struct ParsedJudgment {
  Judgment judgment;
  bool fallback = false;  // neither SAY nor GOODBYE found; defaulted to SAY
};

ParsedJudgment parse_judgment(std::string_view raw);

// Throws NoTriplesFound.
std::vector<BDITriple> parse_bdi_sets(std::string_view raw, std::size_t k);

struct ReflectionOutput {
  std::string reflection;
  std::string plan_raw;
  std::vector<PlanOp> plan;
  std::string updated_ledger_raw;
  bool no_sections = false;  // no recognizable titles; raw kept as plan text

  [[nodiscard]] bool any_amount_defaulted() const noexcept;
};

// One plan line to an op, or nullopt for lines that are not add/increase/
// decrease/delete instructions. Missing amounts default to 10 points for
// Increase/Decrease and 100/(k+1) for Add.
std::optional<PlanOp> parse_plan_line(std::string_view line, std::size_t k);

ReflectionOutput parse_reflection(std::string_view raw, std::size_t k = 3);

}  // namespace tomsim
