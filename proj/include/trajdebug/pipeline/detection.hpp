#pragma once

#include <string>
#include <vector>

#include "trajdebug/core/taxonomy.hpp"
#include "trajdebug/core/trajectory.hpp"
#include "trajdebug/gateway/chat_client.hpp"
#include "trajdebug/gateway/json_extract.hpp"
#include "trajdebug/gateway/prompt_template.hpp"
#include "trajdebug/rollout/prompt_builder.hpp"

namespace trajdbg {

struct ErrorDetection {
  int step = 1;
  ModuleKind module = ModuleKind::others;
  bool error_detected = false;
  ErrorLabel error_label;
  std::string evidence;
  std::string reasoning;
};

// Per-step, per-module judgments for one trajectory: every reasoning module
// the strategy produces at each step, plus one rule-based system entry per step.
struct ErrorProfile {
  std::string trajectory_id;
  std::vector<ErrorDetection> detections;

  std::vector<const ErrorDetection*> at_step(int step) const {
    std::vector<const ErrorDetection*> out;
    for (const auto& d : detections)
      if (d.step == step) out.push_back(&d);
    return out;
  }
};

struct JudgeConfig {
  int history_window = 10;
  int json_retries = 2;  // bounded re-prompt on unparseable judge output
  std::string model_id = "judge";
  double temperature = 0.0;
};

namespace detail {

inline std::string template_set_for_env(const std::string& env_name) {
  if (env_name == "webshop" || env_name == "gaia" || env_name == "gridworld") return env_name;
  return "alfworld";
}

// Ask once, then re-prompt with a JSON-only reminder up to cfg.json_retries.
inline Result<nlohmann::json> complete_json(ChatClient& judge, const JudgeConfig& cfg,
                                            const std::string& prompt) {
  std::string attempt_prompt = prompt;
  for (int attempt = 0; attempt <= cfg.json_retries; ++attempt) {
    auto completion =
        judge.complete(ChatRequest::user_prompt(cfg.model_id, attempt_prompt, cfg.temperature));
    if (!completion.ok()) return completion.error();
    auto parsed = extract_json(completion.value().text);
    if (parsed.ok()) return parsed;
    attempt_prompt = prompt + "\n\nreturn valid JSON only";
  }
  return err(Errc::judge_parse_failure,
             "judge output was not parseable JSON after retries");
}

}  // namespace detail

// Stage-1 single probe: render the detector prompt for (step, module), ask
// the judge, and map its answer into the closed taxonomy.
inline Result<ErrorDetection> detect_step_errors(const Trajectory& trajectory, int step,
                                                 ModuleKind module, ChatClient& judge,
                                                 const PromptStore& prompts,
                                                 const JudgeConfig& cfg = {}) {
  if (module == ModuleKind::system || module == ModuleKind::others)
    return err(Errc::precondition, "system/others detections are rule-based, not judged");
  if (step < 1 || step > trajectory.length())
    return err(Errc::precondition, "step out of range");
  const StepRecord& record = trajectory.steps[step - 1];
  {
    const auto applicable = module_set_at(trajectory.strategy, step);
    if (std::find(applicable.begin(), applicable.end(), module) == applicable.end())
      return err(Errc::precondition, "module not produced by this strategy at this step");
  }

  // context = the full step input the agent saw (history window + observation)
  RolloutConfig rollout_cfg;
  rollout_cfg.strategy = trajectory.strategy;
  rollout_cfg.history_window = cfg.history_window;
  rollout_cfg.step_cap = std::max(trajectory.length(), step + 1);
  rollout_cfg.template_set = detail::template_set_for_env(trajectory.env_name);
  std::vector<StepRecord> history(trajectory.steps.begin(),
                                  trajectory.steps.begin() + (step - 1));
  auto context = build_step_prompt(prompts, rollout_cfg, trajectory.task_description, history,
                                   record.observation, record.admissible_actions);
  if (!context.ok()) return context.error();

  auto module_it = record.module_outputs.find(module);
  std::map<std::string, std::string> bindings{
      {"task_description", trajectory.task_description},
      {"environment", trajectory.env_name},
      {"step_num", std::to_string(step)},
      {"context", context.value()},
      {"module_name", std::string(to_string(module))},
      {"module_content", module_it != record.module_outputs.end() && !module_it->second.empty()
                             ? module_it->second
                             : "No content found for this module"},
      {"env_response", record.env_response.empty() ? "No response" : record.env_response},
      {"error_definitions", render_error_definitions({module})}};
  auto prompt = prompts.render("detector", bindings);
  if (!prompt.ok()) return prompt.error();

  auto parsed = detail::complete_json(judge, cfg, prompt.value());
  if (!parsed.ok()) return parsed.error();
  const nlohmann::json& j = parsed.value();

  ErrorDetection detection;
  detection.step = step;
  detection.module = module;
  detection.error_detected = j.value("error_detected", false);
  detection.evidence = j.value("evidence", "");
  detection.reasoning = j.value("reasoning", "");
  if (!detection.error_detected) {
    detection.error_label = no_error_label(module);
    return detection;
  }
  if (!j.contains("error_type") || !j["error_type"].is_string())
    return err(Errc::judge_parse_failure, "detector reply lacks error_type");
  auto label = parse_error_label(to_string(module), j["error_type"].get<std::string>());
  if (!label.ok()) return label.error();
  detection.error_label = label.value();
  detection.error_detected = !detection.error_label.is_no_error();
  return detection;
}

// Rule-based system judgment: halts surface at the final step; everything
// else is clean. The detector prompt handles reasoning modules only.
inline ErrorDetection system_detection(const Trajectory& trajectory, int step) {
  ErrorDetection d;
  d.step = step;
  d.module = ModuleKind::system;
  d.error_label = no_error_label(ModuleKind::system);
  if (step == trajectory.length() && trajectory.outcome.kind == Outcome::Kind::system_halt) {
    d.error_detected = true;
    d.error_label = ErrorLabel{ModuleKind::system,
                               std::string(to_string(*trajectory.outcome.halt_reason))};
    d.evidence = "episode ended as " + trajectory.outcome.str();
    d.reasoning = "rule-based: recorded outcome maps directly to a system error type";
  }
  return d;
}

// Stage 1 over the whole trajectory: steps x applicable modules, plus one
// system entry per step.
inline Result<ErrorProfile> detect_all(const Trajectory& trajectory, ChatClient& judge,
                                       const PromptStore& prompts, const JudgeConfig& cfg = {}) {
  ErrorProfile profile;
  profile.trajectory_id = trajectory.task_id;
  for (int t = 1; t <= trajectory.length(); ++t) {
    for (ModuleKind module : module_set_at(trajectory.strategy, t)) {
      auto detection = detect_step_errors(trajectory, t, module, judge, prompts, cfg);
      if (!detection.ok()) return detection.error();
      profile.detections.push_back(detection.take());
    }
    profile.detections.push_back(system_detection(trajectory, t));
  }
  return profile;
}

inline nlohmann::json to_json(const ErrorDetection& d) {
  return {{"step", d.step},
          {"module", std::string(to_string(d.module))},
          {"error_detected", d.error_detected},
          {"error_type", d.error_label.error_type},
          {"evidence", d.evidence},
          {"reasoning", d.reasoning}};
}

inline nlohmann::json to_json(const ErrorProfile& p) {
  nlohmann::json detections = nlohmann::json::array();
  for (const auto& d : p.detections) detections.push_back(to_json(d));
  return {{"trajectory_id", p.trajectory_id}, {"detections", detections}};
}

inline Result<ErrorProfile> profile_from_json(const nlohmann::json& j) {
  ErrorProfile p;
  try {
    p.trajectory_id = j.at("trajectory_id").get<std::string>();
    for (const auto& dj : j.at("detections")) {
      ErrorDetection d;
      d.step = dj.at("step").get<int>();
      auto module = module_kind_from_string(dj.at("module").get<std::string>());
      if (!module) return err(Errc::schema_violation, "profile: unknown module");
      d.module = *module;
      d.error_detected = dj.at("error_detected").get<bool>();
      auto label =
          parse_error_label(dj.at("module").get<std::string>(), dj.at("error_type").get<std::string>());
      if (!label.ok()) return err(Errc::schema_violation, "profile: " + label.error().message);
      d.error_label = label.value();
      d.evidence = dj.value("evidence", "");
      d.reasoning = dj.value("reasoning", "");
      p.detections.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    return err(Errc::schema_violation, std::string("profile: ") + e.what());
  }
  return p;
}

}  // namespace trajdbg
