#include "tomsim/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <openssl/evp.h>

#include "text_util.hpp"
#include "tomsim/error.hpp"

namespace tomsim {

namespace detail {
// Generated from templates/*.txt at configure time.
const std::map<std::string_view, std::string_view>& builtin_template_texts();
}  // namespace detail

namespace {

constexpr std::string_view kDefinitionAsset = "definition";

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

bool wants_definition_block(TemplateId id) {
  return id == TemplateId::BdiInit || id == TemplateId::InferTopK;
}

}  // namespace

std::string_view template_name(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::BdiInit: return "bdi_init";
    case TemplateId::SelfUtterance: return "self_utterance";
    case TemplateId::SecondOrderJudgment: return "second_order_judgment";
    case TemplateId::InferTopK: return "infer_topk";
    case TemplateId::PredictResponse: return "predict_response";
    case TemplateId::Reflect: return "reflect";
    case TemplateId::CounterfactualReflect: return "counterfactual_reflect";
    case TemplateId::UtterFromInferred: return "utter_from_inferred";
    case TemplateId::BaselineEmpathetic: return "baseline_empathetic";
    case TemplateId::BaselinePersuasive: return "baseline_persuasive";
    case TemplateId::ReverseBdi: return "reverse_bdi";
  }
  return "";
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
  for (auto id : kAllTemplates)
    if (template_name(id) == name) return id;
  return std::nullopt;
}

const std::set<std::string>& documented_bindings(TemplateId id) {
  static const std::map<TemplateId, std::set<std::string>> table = {
      {TemplateId::BdiInit,
       {"agent_name", "recipient_name", "corpus_dialogue_episode", "definition", "top_k"}},
      {TemplateId::SelfUtterance,
       {"agent_name", "recipient_name", "conversation_history", "self_belief", "self_desire",
        "self_intention", "judgment", "judgement_reason", "seek_goal"}},
      {TemplateId::SecondOrderJudgment,
       {"agent_name", "recipient_name", "conversation_history", "belief", "desire", "intention"}},
      {TemplateId::InferTopK,
       {"agent_name", "recipient_name", "conversation_history", "self_belief", "self_desire",
        "self_intention", "top_k", "picked_type"}},
      {TemplateId::PredictResponse,
       {"agent_name", "recipient_name", "conversation_history", "picked_type", "inferred_bid"}},
      {TemplateId::Reflect,
       {"agent_name", "recipient_name", "conversation_history", "reflection_history", "picked_type",
        "inferred_bdi", "top_k"}},
      {TemplateId::CounterfactualReflect,
       {"agent_name", "recipient_name", "conversation_history", "reflection_history", "picked_type",
        "inferred_bdi", "inferred_top_bdi", "predicted_response", "real_response", "top_k"}},
      {TemplateId::UtterFromInferred,
       {"agent_name", "recipient_name", "conversation_history", "inferred_belief", "inferred_desire",
        "inferred_intention", "response_style"}},
      {TemplateId::BaselineEmpathetic, {"agent_name", "recipient_name", "corpus_dialogue_episode"}},
      {TemplateId::BaselinePersuasive, {"agent_name", "recipient_name", "corpus_dialogue_episode"}},
      {TemplateId::ReverseBdi, {"agent_name", "belief", "desire", "intention"}},
  };
  return table.at(id);
}

std::vector<std::string> extract_placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    auto close = text.find('}', pos + 1);
    if (close == std::string_view::npos) break;
    auto name = text.substr(pos + 1, close - pos - 1);
    bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
    if (ok && std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
    pos = ok ? close + 1 : pos + 1;
  }
  return out;
}

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry = [] {
    TemplateRegistry r;
    const auto& texts = detail::builtin_template_texts();
    for (auto id : kAllTemplates) r.texts_[id] = std::string(texts.at(template_name(id)));
    r.definition_ = std::string(texts.at(kDefinitionAsset));
    return r;
  }();
  return registry;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
  auto read = [&](std::string_view stem) {
    auto path = dir / (std::string(stem) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  TemplateRegistry r;
  for (auto id : kAllTemplates) r.texts_[id] = read(template_name(id));
  r.definition_ = read(kDefinitionAsset);
  return r;
}

const std::string& TemplateRegistry::text(TemplateId id) const {
  auto it = texts_.find(id);
  if (it == texts_.end())
    throw Error(ErrorCode::UnknownTemplate, "template not loaded: " + std::string(template_name(id)));
  return it->second;
}

std::string TemplateRegistry::render(TemplateId id, const Bindings& bindings) const {
  const auto& body = text(id);
  const std::string definition(text::trim(definition_));
  std::string out;
  if (wants_definition_block(id)) out = "Definition:\n" + definition + "\n\nPrompt:\n";

  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find('{', pos);
    if (open == std::string::npos) {
      out.append(body, pos, std::string::npos);
      break;
    }
    auto close = body.find('}', open + 1);
    if (close == std::string::npos) {
      out.append(body, pos, std::string::npos);
      break;
    }
    out.append(body, pos, open - pos);
    auto name = std::string_view(body).substr(open + 1, close - open - 1);
    auto it = bindings.find(name);
    if (it != bindings.end()) {
      out += it->second;
    } else if (name == "definition") {
      out += definition;
    } else {
      throw Error(ErrorCode::MissingPlaceholder, std::string(name));
    }
    pos = close + 1;
  }
  return out;
}

std::map<std::string, std::string> TemplateRegistry::checksums() const {
  std::map<std::string, std::string> out;
  for (const auto& [id, body] : texts_) out[std::string(template_name(id))] = sha256_hex(body);
  out[std::string(kDefinitionAsset)] = sha256_hex(definition_);
  return out;
}

// ---------------------------------------------------------------------------
// Judgment

namespace {

bool has_token(std::string_view haystack, std::string_view token) {
  std::regex re("\\b" + std::string(token) + "\\b", std::regex::icase);
  return std::regex_search(haystack.begin(), haystack.end(), re);
}

}  // namespace

ParsedJudgment parse_judgment(std::string_view raw) {
  ParsedJudgment out;
  const auto trimmed = text::trim(raw);
  const auto bar = trimmed.find('|');
  const bool has_bar = bar != std::string_view::npos;
  const auto head = has_bar ? trimmed.substr(0, bar) : trimmed;

  out.judgment.reason = has_bar ? std::string(text::trim(trimmed.substr(bar + 1))) : std::string(trimmed);
  const bool say_anywhere = has_token(trimmed, "say");
  if (has_bar ? has_token(head, "goodbye") : (has_token(trimmed, "goodbye") && !say_anywhere)) {
    out.judgment.decision = Decision::Goodbye;
  } else if (has_bar ? (has_token(head, "say") || say_anywhere) : say_anywhere) {
    out.judgment.decision = Decision::Say;
  } else {
    out.judgment.decision = Decision::Say;
    out.fallback = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BDI sets

std::vector<BDITriple> parse_bdi_sets(std::string_view raw, std::size_t k) {
  static const std::regex label_re("\\b(belief|desire|intention)s?\\s*:", std::regex::icase);
  std::vector<BDITriple> triples;
  auto lines = text::split_lines(raw);

  struct Partial {
    std::optional<std::string> fields[3];
    bool complete() const { return fields[0] && fields[1] && fields[2]; }
    void clear() { for (auto& f : fields) f.reset(); }
  } current;

  auto clean = [](std::string_view s) {
    auto t = text::trim(s);
    while (!t.empty() && (t.back() == ';' || t.back() == '|' || t.back() == ',')) t.remove_suffix(1);
    while (!t.empty() && (t.front() == ';' || t.front() == '|' || t.front() == ',')) t.remove_prefix(1);
    return std::string(text::trim(t));
  };

  bool any_label = false;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = text::strip_emphasis(text::strip_bullet(lines[n]));
    std::vector<std::pair<int, std::pair<std::size_t, std::size_t>>> hits;  // field, [label start, value start)
    for (auto it = std::sregex_iterator(line.begin(), line.end(), label_re); it != std::sregex_iterator(); ++it) {
      auto word = text::to_lower((*it)[1].str());
      int field = word == "belief" ? 0 : word == "desire" ? 1 : 2;
      hits.push_back({field, {static_cast<std::size_t>(it->position()),
                              static_cast<std::size_t>(it->position() + it->length())}});
    }
    for (std::size_t h = 0; h < hits.size(); ++h) {
      any_label = true;
      auto end = h + 1 < hits.size() ? hits[h + 1].second.first : line.size();
      auto value = clean(std::string_view(line).substr(hits[h].second.second, end - hits[h].second.second));
      if (value.empty() && h + 1 == hits.size()) {
        // "Belief:" alone on its line; the sentence follows on the next one.
        for (std::size_t m = n + 1; m < lines.size(); ++m) {
          auto next = text::strip_emphasis(text::strip_bullet(lines[m]));
          if (next.empty()) continue;
          if (!std::regex_search(next, label_re)) {
            value = clean(next);
            n = m;
          }
          break;
        }
      }
      if (value.empty()) continue;
      int field = hits[h].first;
      if (current.fields[field]) current.clear();
      current.fields[field] = value;
      if (current.complete()) {
        triples.push_back(BDITriple{*current.fields[0], *current.fields[1], *current.fields[2]});
        current.clear();
      }
    }
  }

  if (!any_label) {
    // Unlabeled: blocks of exactly three one-sentence lines, or lines of
    // three '|' / ';' separated parts.
    std::vector<std::vector<std::string>> blocks(1);
    for (auto l : lines) {
      auto s = std::string(text::strip_bullet(l));
      if (text::is_blank(s)) {
        if (!blocks.back().empty()) blocks.emplace_back();
      } else {
        blocks.back().push_back(text::strip_emphasis(s));
      }
    }
    for (const auto& block : blocks) {
      if (block.size() == 3) {
        triples.push_back(BDITriple{block[0], block[1], block[2]});
        continue;
      }
      for (const auto& l : block) {
        for (char sep : {'|', ';'}) {
          std::vector<std::string> parts;
          std::string cur;
          for (char c : l) {
            if (c == sep) { parts.push_back(clean(cur)); cur.clear(); }
            else cur.push_back(c);
          }
          parts.push_back(clean(cur));
          if (parts.size() == 3 && std::none_of(parts.begin(), parts.end(), [](auto& p) { return p.empty(); })) {
            triples.push_back(BDITriple{parts[0], parts[1], parts[2]});
            break;
          }
        }
      }
    }
  }

  std::erase_if(triples, [](const BDITriple& t) { return !t.valid(); });
  if (triples.empty()) throw Error(ErrorCode::NoTriplesFound, "no belief/desire/intention set found");
  if (triples.size() > k) triples.resize(k);
  return triples;
}

// ---------------------------------------------------------------------------
// Reflection output

bool ReflectionOutput::any_amount_defaulted() const noexcept {
  return std::any_of(plan.begin(), plan.end(), [](const PlanOp& op) { return op.amount_defaulted; });
}

std::optional<PlanOp> parse_plan_line(std::string_view line, std::size_t k) {
  const std::string l = text::strip_emphasis(text::strip_bullet(line));
  if (l.empty()) return std::nullopt;

  static const std::regex add_re("\\badd(s|ed|ing)?\\b(?!\\s+up\\b)", std::regex::icase);
  static const std::regex inc_re("\\b(increase|raise|boost|strengthen)\\w*", std::regex::icase);
  static const std::regex dec_re("\\b(decrease|reduce|lower|weaken)\\w*", std::regex::icase);
  static const std::regex del_re("\\b(delete|remove|drop|discard)\\w*", std::regex::icase);

  struct Hit {
    PlanKind kind;
    std::size_t pos;
    std::size_t end;
  };
  std::optional<Hit> best;
  auto probe = [&](const std::regex& re, PlanKind kind) {
    std::smatch m;
    if (std::regex_search(l, m, re)) {
      auto pos = static_cast<std::size_t>(m.position(0));
      if (!best || pos < best->pos) best = Hit{kind, pos, pos + static_cast<std::size_t>(m.length(0))};
    }
  };
  probe(add_re, PlanKind::Add);
  probe(inc_re, PlanKind::Increase);
  probe(dec_re, PlanKind::Decrease);
  probe(del_re, PlanKind::Delete);
  if (!best) return std::nullopt;

  PlanOp op;
  op.kind = best->kind;

  // Amount
  std::optional<double> amount;
  std::smatch m;
  static const std::regex by_re("\\bby\\s+(\\d+(?:\\.\\d+)?)\\s*(%|percent|points?)?", std::regex::icase);
  static const std::regex from_to_re("from\\s+(\\d+(?:\\.\\d+)?)\\s*%?\\s+to\\s+(\\d+(?:\\.\\d+)?)\\s*%?",
                                     std::regex::icase);
  static const std::regex pct_re("(\\d+(?:\\.\\d+)?)\\s*%");
  if (op.kind != PlanKind::Delete) {
    if (std::regex_search(l, m, by_re)) {
      amount = std::stod(m[1].str());
    } else if (std::regex_search(l, m, from_to_re)) {
      amount = std::fabs(std::stod(m[1].str()) - std::stod(m[2].str()));
    } else if (op.kind == PlanKind::Add && std::regex_search(l, m, pct_re)) {
      amount = std::stod(m[1].str());
    }
    if (amount && !(*amount > 0.0)) amount.reset();
    if (amount) {
      op.amount = *amount;
    } else {
      op.amount = op.kind == PlanKind::Add ? 100.0 / static_cast<double>(k + 1) : 10.0;
      op.amount_defaulted = true;
    }
  }

  // Target
  static const std::regex quoted_re("\"([^\"]+)\"|\xE2\x80\x9C([^\xE2]+)\xE2\x80\x9D");
  std::string target;
  if (std::regex_search(l, m, quoted_re)) {
    target = m[1].matched ? m[1].str() : m[2].str();
  } else {
    target = l.substr(best->end);
    static const std::vector<std::regex> leading = {
        std::regex("^\\s*(the\\s+)?(confidence|probability|likelihood)(\\s+levels?)?\\s+(of|in|for|that)\\s+",
                   std::regex::icase),
        std::regex("^\\s*(a|an|the)\\s+", std::regex::icase),
        std::regex("^\\s*(new|specific|existing)\\s+", std::regex::icase),
        std::regex("^\\s*(belief|desire|intention)s?\\s*(that\\b|:|,)?\\s*", std::regex::icase),
    };
    for (const auto& re : leading) target = std::regex_replace(target, re, "", std::regex_constants::format_first_only);
    static const std::vector<std::regex> trailing = {
        std::regex("\\s+from\\s+(the\\s+)?(list|ledger)\\b.*$", std::regex::icase),
        std::regex("\\s+(by|from|to)\\s+\\d.*$", std::regex::icase),
        std::regex("\\s+with\\s+(an?\\s+)?(initial\\s+)?(confidence|probability).*$", std::regex::icase),
        std::regex("\\s*[(|].*$"),
        std::regex("\\s+(because|since|as it|according to)\\b.*$", std::regex::icase),
    };
    for (const auto& re : trailing) target = std::regex_replace(target, re, "");
  }
  auto t = text::trim(target);
  while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == ';' || t.back() == ':'))
    t.remove_suffix(1);
  op.target = std::string(text::trim(t));
  if (op.target.empty()) return std::nullopt;
  return op;
}

ReflectionOutput parse_reflection(std::string_view raw, std::size_t k) {
  static const std::regex title_re(
      "^(reflections?|refections?|reflection details|plans?|updated(?:\\s+[a-z'\\-]+){0,4}|"
      "previous(?:ly)?(?:\\s+[a-z'\\-]+){0,4})\\s*(?::\\s*(.*))?$",
      std::regex::icase);

  enum class Section { None, Reflection, Plan, Updated, Other };
  ReflectionOutput out;
  Section current = Section::None;
  bool found = false;
  std::vector<std::string> reflection, plan, updated;

  for (auto raw_line : text::split_lines(raw)) {
    const auto stripped = text::strip_emphasis(text::strip_bullet(raw_line));
    std::smatch m;
    if (std::regex_match(stripped, m, title_re)) {
      auto title = text::to_lower(m[1].str());
      // A bare "Plan"/"Updated beliefs" line is a title; text after a colon
      // continues on the same line.
      found = true;
      if (title.rfind("ref", 0) == 0) current = Section::Reflection;
      else if (title.rfind("plan", 0) == 0) current = Section::Plan;
      else if (title.rfind("updated", 0) == 0) current = Section::Updated;
      else current = Section::Other;
      std::string rest = m[2].matched ? std::string(text::trim(m[2].str())) : std::string();
      if (!rest.empty()) {
        if (current == Section::Reflection) reflection.push_back(rest);
        else if (current == Section::Plan) plan.push_back(rest);
        else if (current == Section::Updated) updated.push_back(rest);
      }
      continue;
    }
    switch (current) {
      case Section::Reflection: reflection.emplace_back(raw_line); break;
      case Section::Plan: plan.emplace_back(raw_line); break;
      case Section::Updated: updated.emplace_back(raw_line); break;
      default: break;
    }
  }

  if (!found) {
    out.no_sections = true;
    out.plan_raw = std::string(text::trim(raw));
    return out;
  }
  auto collapse = [](const std::vector<std::string>& lines) {
    return std::string(text::trim(text::join(lines, "\n")));
  };
  out.reflection = collapse(reflection);
  out.plan_raw = collapse(plan);
  out.updated_ledger_raw = collapse(updated);
  for (auto line : text::split_lines(out.plan_raw))
    if (auto op = parse_plan_line(line, k)) out.plan.push_back(std::move(*op));
  return out;
}

}  // namespace tomsim
