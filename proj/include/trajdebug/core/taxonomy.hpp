#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajdebug/core/module_kind.hpp"
#include "trajdebug/core/result.hpp"
#include "trajdebug/core/text.hpp"

namespace trajdbg {

inline constexpr std::string_view kNoErrorId = "no_error";
inline constexpr std::string_view kOtherId = "other";

// One catalog row: stable snake_case id, the prose name detectors tend to
// echo back, and the definition text rendered into judge prompts.
struct ErrorType {
  std::string id;
  ModuleKind module;
  std::string prose_name;
  std::string definition;
};

struct ErrorLabel {
  ModuleKind module = ModuleKind::others;
  std::string error_type{kNoErrorId};

  bool is_no_error() const { return error_type == kNoErrorId; }
  bool operator==(const ErrorLabel& o) const {
    return module == o.module && error_type == o.error_type;
  }
  std::string str() const {
    return std::string(to_string(module)) + "/" + error_type;
  }
};

inline ErrorLabel no_error_label(ModuleKind m) { return ErrorLabel{m, std::string(kNoErrorId)}; }

namespace detail {

// The 17 leaf error types, in catalog order. Definitions are the verbatim
// taxonomy texts the detector and analyzer prompts quote.
inline const std::vector<ErrorType>& leaf_error_types() {
  static const std::vector<ErrorType> catalog = {
      {"over_simplification", ModuleKind::memory, "Over-simplification / Incomplete Summary",
       "Summarizes past info too crudely, ignoring details; leads to flawed reasoning."},
      {"hallucination", ModuleKind::memory, "Hallucination (False Memory)",
       "Recalls events or states that never happened, filling missing gaps with fabricated "
       "info."},
      {"retrieval_failure", ModuleKind::memory, "Retrieval Failure",
       "Relevant info exists but is not retrieved when needed."},
      {"progress_misassessment", ModuleKind::reflection, "Progress Misassessment",
       "Incorrectly evaluates progress (too optimistic, too pessimistic, or misses "
       "completion)."},
      {"outcome_misinterpretation", ModuleKind::reflection, "Outcome Misinterpretation",
       "Executes an action but misreads the immediate result or environment feedback."},
      {"causal_misattribution", ModuleKind::reflection, "Causal Misattribution",
       "Correctly notes failure but blames the wrong cause, misguiding subsequent plans."},
      {"hallucination", ModuleKind::reflection, "Hallucination",
       "Reflects on events/results that never occurred."},
      {"constraint_ignorance", ModuleKind::planning, "Constraint Ignorance",
       "Ignores limits (time, budget, space, etc.) when forming plans."},
      {"impossible_action", ModuleKind::planning, "Impossible Action",
       "Plans a step that is physically/logically impossible given current preconditions."},
      {"inefficient_planning", ModuleKind::planning, "Inefficient Planning",
       "Plan is overly long or illogical; wastes steps and risks hitting limits."},
      {"planning_action_disconnect", ModuleKind::action, "Planning-Action Disconnect",
       "Chosen actions do not align with the stated plan intent."},
      {"format_error", ModuleKind::action, "Format Error",
       "Produces syntactically invalid actions."},
      {"parameter_error", ModuleKind::action, "Parameter Error",
       "Generates unreasonable or malformed parameters."},
      {"step_limit", ModuleKind::system, "Step Limit Exhaustion",
       "Fails due to reaching the maximum step cap despite reasonable behavior."},
      {"tool_execution_error", ModuleKind::system, "Tool Execution Error",
       "External tool/API misbehaves or errors, causing downstream failures."},
      {"llm_limit", ModuleKind::system, "LLM Limit",
       "Fails due to API/model constraints (e.g., timeouts, token limits)."},
      {"environment_error", ModuleKind::system, "Environment Error",
       "Simulator/environment breaks expected rules (bug/crash/network), not agent's fault."},
  };
  return catalog;
}

inline const ErrorType& other_error_type() {
  static const ErrorType other = {"other", ModuleKind::others, "Other",
                                  "Unusual failures not covered by standard error types."};
  return other;
}

// Lowercase, unify dash variants, collapse separator runs to '_'.
inline std::string normalize_alias(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(raw[i]);
    // en/em dash (UTF-8 e2 80 93 / e2 80 94) -> separator
    if (c == 0xe2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(raw[i + 2]) == 0x93 ||
         static_cast<unsigned char>(raw[i + 2]) == 0x94)) {
      s.push_back('_');
      i += 2;
      continue;
    }
    if (c == ' ' || c == '-' || c == '_' || c == '/' || c == '\t')
      s.push_back('_');
    else
      s.push_back(static_cast<char>(std::tolower(c)));
  }
  // collapse runs of '_' and trim them
  std::string out;
  for (char c : s) {
    if (c == '_' && (out.empty() || out.back() == '_')) continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace detail

// Full catalog order: the 17 leaves plus the others catch-all.
inline const std::vector<ErrorType>& error_catalog() {
  static const std::vector<ErrorType> all = [] {
    std::vector<ErrorType> v = detail::leaf_error_types();
    v.push_back(detail::other_error_type());
    return v;
  }();
  return all;
}

inline std::vector<ErrorType> error_types_for(ModuleKind module) {
  std::vector<ErrorType> out;
  for (const auto& e : error_catalog())
    if (e.module == module) out.push_back(e);
  return out;
}

// Matches raw detector output against the closed catalog. Case-insensitive
// and separator-tolerant; prose names ("Hallucination (False Memory)") and
// ids both resolve. no_error passes for any module; so does others/other.
inline Result<ErrorLabel> parse_error_label(std::string_view module_text,
                                            std::string_view type_text) {
  auto module = module_kind_from_string(trim(module_text));
  if (!module) {
    // tolerate the same separator noise in the module name
    module = module_kind_from_string(detail::normalize_alias(module_text));
    if (!module)
      return err(Errc::unknown_error_type, "unknown module: " + std::string(module_text));
  }
  const std::string norm = detail::normalize_alias(type_text);
  if (norm.empty())
    return err(Errc::unknown_error_type, "empty error type");
  if (norm == kNoErrorId || norm == "none" || norm == "no_errors")
    return no_error_label(*module);
  if (norm == kOtherId || norm == "others")
    return ErrorLabel{*module, std::string(kOtherId)};

  bool seen_elsewhere = false;
  for (const auto& e : error_catalog()) {
    const bool matches = norm == detail::normalize_alias(e.id) ||
                         norm == detail::normalize_alias(e.prose_name);
    if (!matches) continue;
    if (e.module == *module) return ErrorLabel{*module, e.id};
    seen_elsewhere = true;
  }
  if (seen_elsewhere)
    return err(Errc::module_mismatch, std::string(type_text) + " does not belong to module " +
                                          std::string(to_string(*module)));
  return err(Errc::unknown_error_type, "not in catalog: " + std::string(type_text));
}

inline bool label_valid(const ErrorLabel& label) {
  if (label.is_no_error()) return true;
  if (label.error_type == kOtherId) return true;
  for (const auto& e : error_catalog())
    if (e.module == label.module && e.id == label.error_type) return true;
  return false;
}

struct DefinitionScope {
  // nullopt = all modules
  std::optional<ModuleKind> module;
};

inline std::string to_upper_module(ModuleKind m) {
  std::string s(to_string(m));
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Deterministic {error_definitions} / {error_reference} block. All-module
// scope lists the 17 leaf definitions; single-module scope lists only that
// module. Both end with the no_error sentinel line.
inline std::string render_error_definitions(DefinitionScope scope = {}) {
  std::string out = "ERROR DEFINITIONS BY MODULE:\n";
  ModuleKind last = ModuleKind::others;
  bool first_group = true;
  for (const auto& e : detail::leaf_error_types()) {
    if (scope.module && e.module != *scope.module) continue;
    if (first_group || e.module != last) {
      if (!first_group) out += "\n";
      std::string header = to_upper_module(e.module);
      out += header + " ERRORS:\n";
      last = e.module;
      first_group = false;
    }
    out += "- " + e.id + " (" + e.prose_name + "): " + e.definition + "\n";
  }
  if (scope.module && *scope.module == ModuleKind::others) {
    const auto& other = detail::other_error_type();
    out += "OTHERS ERRORS:\n- " + other.id + " (" + other.prose_name + "): " +
           other.definition + "\n";
  }
  out += "\n- no_error: The module output is correct for this step.\n";
  return out;
}

// Versioned catalog export so external annotation tools can validate labels.
inline nlohmann::json catalog_to_json() {
  nlohmann::json modules = nlohmann::json::object();
  for (const auto& e : error_catalog()) {
    modules[std::string(to_string(e.module))].push_back(
        {{"id", e.id}, {"prose_name", e.prose_name}, {"definition", e.definition}});
  }
  return {{"catalog_version", 1}, {"modules", modules}};
}

}  // namespace trajdbg
