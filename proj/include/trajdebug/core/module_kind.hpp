#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trajdbg {

// The per-step reasoning phases plus the two non-reasoning categories.
enum class ModuleKind { memory, reflection, planning, action, system, others };

inline constexpr std::array<ModuleKind, 6> kAllModuleKinds = {
    ModuleKind::memory, ModuleKind::reflection, ModuleKind::planning,
    ModuleKind::action, ModuleKind::system,     ModuleKind::others};

// The four module kinds an agent completion may emit tags for.
inline constexpr std::array<ModuleKind, 4> kReasoningModules = {
    ModuleKind::memory, ModuleKind::reflection, ModuleKind::planning, ModuleKind::action};

inline std::string_view to_string(ModuleKind m) {
  switch (m) {
    case ModuleKind::memory: return "memory";
    case ModuleKind::reflection: return "reflection";
    case ModuleKind::planning: return "planning";
    case ModuleKind::action: return "action";
    case ModuleKind::system: return "system";
    case ModuleKind::others: return "others";
  }
  return "others";
}

inline std::optional<ModuleKind> module_kind_from_string(std::string_view s) {
  for (ModuleKind m : kAllModuleKinds)
    if (s == to_string(m)) return m;
  return std::nullopt;
}

// Rollout paradigms compared in the ablation study.
enum class StrategyId { modular, react, reflection, act_only, memory_react };

inline constexpr std::array<StrategyId, 5> kAllStrategies = {
    StrategyId::modular, StrategyId::react, StrategyId::reflection, StrategyId::act_only,
    StrategyId::memory_react};

inline std::string_view to_string(StrategyId s) {
  switch (s) {
    case StrategyId::modular: return "modular";
    case StrategyId::react: return "react";
    case StrategyId::reflection: return "reflection";
    case StrategyId::act_only: return "act_only";
    case StrategyId::memory_react: return "memory_react";
  }
  return "modular";
}

inline std::optional<StrategyId> strategy_from_string(std::string_view s) {
  for (StrategyId id : kAllStrategies)
    if (s == to_string(id)) return id;
  return std::nullopt;
}

// Reasoning modules a strategy produces at steps after the first.
inline std::vector<ModuleKind> module_set(StrategyId s) {
  switch (s) {
    case StrategyId::modular:
      return {ModuleKind::memory, ModuleKind::reflection, ModuleKind::planning,
              ModuleKind::action};
    case StrategyId::react: return {ModuleKind::planning, ModuleKind::action};
    case StrategyId::reflection:
      return {ModuleKind::reflection, ModuleKind::planning, ModuleKind::action};
    case StrategyId::act_only: return {ModuleKind::action};
    case StrategyId::memory_react:
      return {ModuleKind::memory, ModuleKind::planning, ModuleKind::action};
  }
  return {};
}

// Step 1 has no history, so memory and reflection are never produced there.
inline std::vector<ModuleKind> module_set_at(StrategyId s, int step_index) {
  auto mods = module_set(s);
  if (step_index == 1) {
    std::vector<ModuleKind> first;
    for (ModuleKind m : mods)
      if (m == ModuleKind::planning || m == ModuleKind::action) first.push_back(m);
    return first;
  }
  return mods;
}

}  // namespace trajdbg
