#pragma once

#include <map>
#include <string>
#include <string_view>

#include "trajdebug/core/text.hpp"

namespace trajdbg {

// Normalized form of what the agent chose to do at one step.
struct CanonicalAction {
  enum class Kind { env_action, tool_call, final_answer, invalid };

  Kind kind = Kind::invalid;
  std::string text;                                   // env_action / final_answer / invalid raw
  std::string tool_name;                              // tool_call only
  std::map<std::string, std::string> tool_parameters; // tool_call only; values as JSON text

  static CanonicalAction env(std::string_view raw) {
    CanonicalAction a;
    a.kind = Kind::env_action;
    a.text = normalize_whitespace(raw);
    return a;
  }
  static CanonicalAction tool(std::string name, std::map<std::string, std::string> params) {
    CanonicalAction a;
    a.kind = Kind::tool_call;
    a.tool_name = std::move(name);
    a.tool_parameters = std::move(params);
    return a;
  }
  static CanonicalAction answer(std::string_view value) {
    CanonicalAction a;
    a.kind = Kind::final_answer;
    a.text = trim(value);
    return a;
  }
  static CanonicalAction invalid_raw(std::string_view raw) {
    CanonicalAction a;
    a.kind = Kind::invalid;
    a.text = std::string(raw);
    return a;
  }

  bool operator==(const CanonicalAction& o) const {
    return kind == o.kind && text == o.text && tool_name == o.tool_name &&
           tool_parameters == o.tool_parameters;
  }

  // Single-line display form used in histories and prompts.
  std::string display() const {
    switch (kind) {
      case Kind::env_action: return text;
      case Kind::final_answer: return "answer: " + text;
      case Kind::tool_call: {
        std::string out = "tool: " + tool_name + " parameters: {";
        bool first = true;
        for (const auto& [k, v] : tool_parameters) {
          if (!first) out += ", ";
          out += "\"" + k + "\": " + v;
          first = false;
        }
        out += "}";
        return out;
      }
      case Kind::invalid: return "(invalid) " + normalize_whitespace(text);
    }
    return text;
  }
};

inline std::string_view to_string(CanonicalAction::Kind k) {
  switch (k) {
    case CanonicalAction::Kind::env_action: return "env_action";
    case CanonicalAction::Kind::tool_call: return "tool_call";
    case CanonicalAction::Kind::final_answer: return "final_answer";
    case CanonicalAction::Kind::invalid: return "invalid";
  }
  return "invalid";
}

inline std::optional<CanonicalAction::Kind> action_kind_from_string(std::string_view s) {
  using K = CanonicalAction::Kind;
  for (K k : {K::env_action, K::tool_call, K::final_answer, K::invalid})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

}  // namespace trajdbg
