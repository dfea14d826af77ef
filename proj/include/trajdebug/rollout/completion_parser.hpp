#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajdebug/core/action.hpp"
#include "trajdebug/core/module_kind.hpp"
#include "trajdebug/core/text.hpp"
#include "trajdebug/gateway/json_extract.hpp"

namespace trajdbg {

struct ParsedCompletion {
  std::map<ModuleKind, std::string> module_outputs;
  CanonicalAction action;
};

namespace detail {

// Innermost content of <tag>...</tag>: first closing tag, nearest opening
// tag before it. Case-insensitive tag names.
inline std::optional<std::string> extract_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const std::string lower = to_lower(text);
  const std::string open_l = to_lower(open);
  const std::string close_l = to_lower(close);
  size_t close_at = lower.find(close_l);
  if (close_at == std::string::npos) return std::nullopt;
  size_t open_at = lower.rfind(open_l, close_at);
  if (open_at == std::string::npos) return std::nullopt;
  size_t content_start = open_at + open_l.size();
  return std::string(text.substr(content_start, close_at - content_start));
}

// "action: [name] parameters: {...}" or "tool: name parameters: {...}"
inline std::optional<CanonicalAction> parse_tool_call(std::string_view body) {
  const std::string lower = to_lower(body);
  size_t label = lower.find("tool:");
  size_t label_len = 5;
  if (label == std::string::npos) {
    label = lower.find("action:");
    label_len = 7;
  }
  if (label == std::string::npos) return std::nullopt;
  size_t params = lower.find("parameters:", label);
  if (params == std::string::npos) return std::nullopt;

  std::string name = trim(body.substr(label + label_len, params - label - label_len));
  if (!name.empty() && name.front() == '[') name.erase(0, 1);
  if (!name.empty() && name.back() == ']') name.pop_back();
  name = trim(name);
  if (name.empty()) return std::nullopt;

  std::map<std::string, std::string> args;
  auto parsed = extract_json(body.substr(params + 11));
  if (parsed.ok() && parsed.value().is_object()) {
    for (auto it = parsed.value().begin(); it != parsed.value().end(); ++it)
      args[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                              : it.value().dump();
  }
  return CanonicalAction::tool(name, std::move(args));
}

}  // namespace detail

// Normalizes a raw action string against the admissible list: exact match
// after whitespace normalization, then a single unambiguous case-insensitive
// (prefix-tolerant) match. Anything else passes through verbatim and the
// environment decides validity.
inline CanonicalAction normalize_action(std::string_view raw,
                                        const std::optional<std::vector<std::string>>& admissible) {
  const std::string cleaned = normalize_whitespace(raw);
  if (!admissible) return CanonicalAction::env(cleaned);
  for (const auto& option : *admissible)
    if (normalize_whitespace(option) == cleaned) return CanonicalAction::env(option);
  std::optional<CanonicalAction> match;
  int hits = 0;
  for (const auto& option : *admissible) {
    const std::string opt_norm = normalize_whitespace(option);
    if (iequals(opt_norm, cleaned) || istarts_with(opt_norm, cleaned)) {
      ++hits;
      match = CanonicalAction::env(option);
    }
  }
  if (hits == 1) return *match;
  return CanonicalAction::env(cleaned);
}

// Pulls tagged module outputs and the action out of a raw agent completion.
// Unparseable actions become CanonicalAction::invalid so the detector can
// label them rather than the engine crashing.
inline ParsedCompletion parse_agent_completion(std::string_view text,
                                               const std::vector<ModuleKind>& modules) {
  ParsedCompletion out;
  auto wants = [&](ModuleKind m) {
    for (ModuleKind x : modules)
      if (x == m) return true;
    return false;
  };

  if (wants(ModuleKind::memory)) {
    auto memory = detail::extract_tag(text, "memory");
    if (!memory) memory = detail::extract_tag(text, "memory_recall");
    if (memory) out.module_outputs[ModuleKind::memory] = trim(*memory);
  }
  if (wants(ModuleKind::reflection)) {
    if (auto reflection = detail::extract_tag(text, "reflection"))
      out.module_outputs[ModuleKind::reflection] = trim(*reflection);
  }
  if (wants(ModuleKind::planning)) {
    if (auto plan = detail::extract_tag(text, "plan"))
      out.module_outputs[ModuleKind::planning] = trim(*plan);
  }

  auto answer = detail::extract_tag(text, "answer");
  auto action_body = detail::extract_tag(text, "action");
  if (answer) {
    out.action = CanonicalAction::answer(*answer);
    if (wants(ModuleKind::action)) out.module_outputs[ModuleKind::action] = trim(*answer);
    return out;
  }
  if (action_body) {
    if (wants(ModuleKind::action)) out.module_outputs[ModuleKind::action] = trim(*action_body);
    if (auto tool = detail::parse_tool_call(*action_body)) {
      out.action = *tool;
      return out;
    }
    const std::string cleaned = normalize_whitespace(*action_body);
    if (cleaned.empty())
      out.action = CanonicalAction::invalid_raw(std::string(text));
    else
      out.action = CanonicalAction::env(cleaned);
    return out;
  }
  out.action = CanonicalAction::invalid_raw(std::string(text));
  return out;
}

inline ParsedCompletion parse_agent_completion(std::string_view text, StrategyId strategy) {
  return parse_agent_completion(text, module_set(strategy));
}

}  // namespace trajdbg
