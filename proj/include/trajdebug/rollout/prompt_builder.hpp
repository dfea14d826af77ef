#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "trajdebug/core/module_kind.hpp"
#include "trajdebug/core/trajectory.hpp"
#include "trajdebug/gateway/prompt_template.hpp"

namespace trajdbg {

struct RolloutConfig {
  StrategyId strategy = StrategyId::modular;
  int history_window = 10;  // K recent steps shown in prompts
  int step_cap = 30;
  std::string model_id = "scripted";
  double temperature = 0.0;
  std::string template_set = "alfworld";  // alfworld | webshop | gaia | gridworld
  int observation_char_limit = 600;

  Status check() const {
    if (history_window < 1) return err(Errc::precondition, "history_window must be >= 1");
    if (step_cap < 1) return err(Errc::precondition, "step_cap must be >= 1");
    return ok_status();
  }
};

namespace detail {

// gridworld reuses the alfworld template text with its own bindings
inline std::string template_dir(const std::string& set) {
  return set == "gridworld" ? "alfworld" : set;
}

inline std::string actions_placeholder(const std::string& set) {
  const std::string dir = template_dir(set);
  if (dir == "webshop") return "available_actions";
  if (dir == "gaia") return "available_tools";
  return "admissible_actions";
}

inline std::string truncate_observation(const std::string& text, int limit) {
  if (limit <= 0 || static_cast<int>(text.size()) <= limit) return text;
  return text.substr(0, static_cast<size_t>(limit)) + "[...]";
}

}  // namespace detail

inline std::string format_admissible(const std::optional<std::vector<std::string>>& actions) {
  if (!actions || actions->empty()) return "[none listed]";
  return "[" + join(*actions, ", ") + "]";
}

// Window of the most recent K steps, oldest first, one line per step.
inline std::string format_action_history(const std::vector<StepRecord>& steps, int window,
                                         int observation_char_limit = 600) {
  if (steps.empty()) return "";
  const int count = static_cast<int>(steps.size());
  const int first = std::max(0, count - window);
  std::vector<std::string> lines;
  for (int i = first; i < count; ++i) {
    const StepRecord& s = steps[i];
    lines.push_back("Step " + std::to_string(s.index) + " — Observation: " +
                    detail::truncate_observation(normalize_whitespace(s.observation),
                                                 observation_char_limit) +
                    "; Action: " + s.action.display() + "; Result: " +
                    detail::truncate_observation(normalize_whitespace(s.env_response),
                                                 observation_char_limit));
  }
  return join(lines, "\n");
}

inline std::string format_feedback_block(const Feedback& feedback) {
  std::string out = "\nDEBUG FEEDBACK (must follow):\n";
  out += "- Error type: " + feedback.error_label.str() + "\n";
  out += "- Guidance: " + feedback.guidance + "\n";
  if (!feedback.prior_guidance.empty()) {
    out += "- Previously issued instructions that did not yet fix the task:\n";
    for (const auto& g : feedback.prior_guidance) out += "  * " + g + "\n";
  }
  return out;
}

// Assembles the step prompt for the strategy: template head, optional debug
// feedback block, then the tag-instruction blocks for the modules this
// strategy produces at this step. history = the steps already taken (their
// count determines the step number and template variant).
inline Result<std::string> build_step_prompt(const PromptStore& prompts,
                                             const RolloutConfig& config,
                                             const std::string& task_description,
                                             const std::vector<StepRecord>& history,
                                             const std::string& current_observation,
                                             const std::optional<std::vector<std::string>>& admissible,
                                             const std::optional<Feedback>& feedback = std::nullopt) {
  const int step_index = static_cast<int>(history.size()) + 1;
  const std::string dir = detail::template_dir(config.template_set);
  const bool first_step = history.empty();
  const bool gaia_last = dir == "gaia" && !first_step && step_index >= config.step_cap;

  std::map<std::string, std::string> bindings;
  bindings["task_description"] = task_description;
  bindings["current_observation"] = current_observation;
  if (!first_step) {
    const int window = gaia_last ? static_cast<int>(history.size()) : config.history_window;
    bindings["step_count"] = std::to_string(history.size());
    bindings["history_length"] =
        std::to_string(std::min<int>(window, static_cast<int>(history.size())));
    bindings["action_history"] =
        format_action_history(history, window, config.observation_char_limit);
    bindings["current_step"] = std::to_string(step_index);
  }

  std::string head_id;
  if (gaia_last)
    head_id = dir + "/last_step";
  else
    head_id = dir + (first_step ? "/head_no_his" : "/head_his");
  if (!gaia_last) bindings[detail::actions_placeholder(config.template_set)] =
      format_admissible(admissible);

  auto head = prompts.render(head_id, bindings);
  if (!head.ok()) return head.error();
  std::string out = head.take();

  if (feedback && step_index >= feedback->target_step) out += format_feedback_block(*feedback);

  if (gaia_last) return out;  // the last-step template asks only for <answer>

  const auto modules = module_set_at(config.strategy, step_index);
  auto has = [&](ModuleKind m) {
    return std::find(modules.begin(), modules.end(), m) != modules.end();
  };
  std::map<std::string, std::string> block_bindings;
  block_bindings[detail::actions_placeholder(config.template_set)] =
      format_admissible(admissible);

  if (dir == "gaia" && first_step) {
    auto block = prompts.render("gaia/block_no_his", {});
    if (!block.ok()) return block.error();
    return out + block.take();
  }

  auto append_block = [&](const std::string& id,
                          const std::map<std::string, std::string>& b) -> Status {
    auto block = prompts.render(id, b);
    if (!block.ok()) return block.error();
    out += block.take();
    return ok_status();
  };

  if (has(ModuleKind::memory)) {
    auto s = append_block(dir + "/block_memory", {});
    if (!s.ok()) return s.error();
  }
  if (has(ModuleKind::reflection)) {
    auto s = append_block(dir + "/block_reflection", {});
    if (!s.ok()) return s.error();
  }
  if (has(ModuleKind::planning)) {
    auto s = append_block(dir + (first_step ? "/block_plan_no_his" : "/block_plan_his"), {});
    if (!s.ok()) return s.error();
  }
  if (has(ModuleKind::action)) {
    auto s = append_block(dir + "/block_action",
                          dir == "gaia" ? std::map<std::string, std::string>{} : block_bindings);
    if (!s.ok()) return s.error();
  }
  return out;
}

}  // namespace trajdbg
