#pragma once

#include <string>
#include <vector>

#include "trajdebug/pipeline/detection.hpp"

namespace trajdbg {

struct CascadeEntry {
  int step = 1;
  std::string impact;
};

// Stage-2 output: the earliest critical error plus the guidance that seeds
// the first re-rollout feedback.
struct CriticalDiagnosis {
  std::string trajectory_id;
  int critical_step = 1;
  ModuleKind critical_module = ModuleKind::others;
  ErrorLabel error_label;
  std::string root_cause;
  std::string evidence;
  std::string correction_guidance;
  std::vector<CascadeEntry> cascading_effects;
};

inline nlohmann::json to_json(const CriticalDiagnosis& d) {
  nlohmann::json cascades = nlohmann::json::array();
  for (const auto& c : d.cascading_effects)
    cascades.push_back({{"step", c.step}, {"impact", c.impact}});
  return {{"trajectory_id", d.trajectory_id},
          {"critical_step", d.critical_step},
          {"critical_module", std::string(to_string(d.critical_module))},
          {"error_type", d.error_label.error_type},
          {"root_cause", d.root_cause},
          {"evidence", d.evidence},
          {"correction_guidance", d.correction_guidance},
          {"cascading_effects", cascades}};
}

inline Result<CriticalDiagnosis> diagnosis_from_json(const nlohmann::json& j) {
  CriticalDiagnosis d;
  try {
    d.trajectory_id = j.value("trajectory_id", "");
    d.critical_step = j.at("critical_step").get<int>();
    const std::string module_text = j.at("critical_module").get<std::string>();
    auto module = module_kind_from_string(module_text);
    if (!module) return err(Errc::schema_violation, "diagnosis: unknown module");
    d.critical_module = *module;
    auto label = parse_error_label(module_text, j.at("error_type").get<std::string>());
    if (!label.ok()) return err(Errc::schema_violation, "diagnosis: " + label.error().message);
    d.error_label = label.value();
    d.root_cause = j.value("root_cause", "");
    d.evidence = j.value("evidence", "");
    d.correction_guidance = j.value("correction_guidance", "");
    if (j.contains("cascading_effects"))
      for (const auto& c : j["cascading_effects"])
        d.cascading_effects.push_back({c.at("step").get<int>(), c.value("impact", "")});
  } catch (const nlohmann::json::exception& e) {
    return err(Errc::schema_violation, std::string("diagnosis: ") + e.what());
  }
  return d;
}

namespace detail {

// Deterministic step dump fed to the analyzer: per step, the module outputs,
// action, environment response, and Stage-1 findings.
inline std::string render_all_steps(const Trajectory& trajectory, const ErrorProfile& profile) {
  std::string out;
  for (const auto& step : trajectory.steps) {
    out += "Step " + std::to_string(step.index) + ":\n";
    out += "  Observation: " + normalize_whitespace(step.observation) + "\n";
    for (const auto& [module, text] : step.module_outputs)
      out += "  " + std::string(to_string(module)) + ": " + normalize_whitespace(text) + "\n";
    out += "  Action: " + step.action.display() + "\n";
    out += "  Environment response: " + normalize_whitespace(step.env_response) + "\n";
    for (const ErrorDetection* d : profile.at_step(step.index)) {
      out += "  Detection [" + std::string(to_string(d->module)) + "]: " +
             (d->error_detected ? d->error_label.error_type : std::string(kNoErrorId));
      if (d->error_detected && !d->evidence.empty())
        out += " (" + normalize_whitespace(d->evidence) + ")";
      out += "\n";
    }
  }
  out += "Final outcome: " + trajectory.outcome.str() + "\n";
  return out;
}

inline std::string render_prior_instructions(const std::vector<std::string>& prior) {
  if (prior.empty()) return "(none)";
  std::string out;
  for (size_t i = 0; i < prior.size(); ++i)
    out += std::to_string(i + 1) + ". " + prior[i] + (i + 1 < prior.size() ? "\n" : "");
  return out;
}

}  // namespace detail

// Stage 2, primary route: the holistic judge reads the full trajectory plus
// the Stage-1 profile and names the earliest critical error. Earliest-step
// selection is enforced by the prompt and post-validated against the
// cascading effects it reports.
inline Result<CriticalDiagnosis> analyze_critical(const Trajectory& trajectory,
                                                  const ErrorProfile& profile, int attempt_index,
                                                  const std::vector<std::string>& prior_guidance,
                                                  ChatClient& judge, const PromptStore& prompts,
                                                  const JudgeConfig& cfg = {}) {
  if (trajectory.outcome.is_success())
    return err(Errc::precondition, "successful trajectories are not analyzed");
  if (trajectory.length() == 0) return err(Errc::precondition, "empty trajectory");

  std::map<std::string, std::string> bindings{
      {"task_description", trajectory.task_description},
      {"attempt_index", std::to_string(attempt_index)},
      {"prior_instructions", detail::render_prior_instructions(prior_guidance)},
      {"all_steps", detail::render_all_steps(trajectory, profile)},
      {"error_reference", render_error_definitions()}};
  auto prompt = prompts.render("analyzer", bindings);
  if (!prompt.ok()) return prompt.error();

  auto parsed = detail::complete_json(judge, cfg, prompt.value());
  if (!parsed.ok()) return parsed.error();
  const nlohmann::json& j = parsed.value();

  if (!j.contains("critical_step") || j["critical_step"].is_null())
    return err(Errc::not_found, "judge reported no critical error");
  if (!j["critical_step"].is_number_integer())
    return err(Errc::judge_parse_failure, "critical_step is not an integer");
  const int step = j["critical_step"].get<int>();
  if (step == 0) return err(Errc::not_found, "judge reported no critical error");
  if (step < 1 || step > trajectory.length())
    return err(Errc::invalid_diagnosis,
               "critical_step " + std::to_string(step) + " outside 1.." +
                   std::to_string(trajectory.length()));

  if (!j.contains("critical_module") || !j["critical_module"].is_string())
    return err(Errc::judge_parse_failure, "missing critical_module");
  if (!j.contains("error_type") || !j["error_type"].is_string())
    return err(Errc::judge_parse_failure, "missing error_type");

  CriticalDiagnosis d;
  d.trajectory_id = trajectory.task_id;
  d.critical_step = step;
  const std::string module_text = j["critical_module"].get<std::string>();
  auto module = module_kind_from_string(trim(module_text));
  if (!module) return err(Errc::invalid_diagnosis, "unknown module: " + module_text);
  d.critical_module = *module;
  auto label = parse_error_label(module_text, j["error_type"].get<std::string>());
  if (!label.ok()) return err(Errc::invalid_diagnosis, label.error().message);
  d.error_label = label.value();
  d.root_cause = j.value("root_cause", "");
  d.evidence = j.value("evidence", "");
  d.correction_guidance = j.value("correction_guidance", "");
  if (j.contains("cascading_effects") && j["cascading_effects"].is_array()) {
    for (const auto& c : j["cascading_effects"]) {
      if (!c.is_object() || !c.contains("step") || !c["step"].is_number_integer()) continue;
      d.cascading_effects.push_back({c["step"].get<int>(), c.value("impact", "")});
    }
  }
  for (const auto& c : d.cascading_effects)
    if (c.step < d.critical_step)
      return err(Errc::invalid_diagnosis,
                 "cascading effect at step " + std::to_string(c.step) +
                     " precedes the critical step");
  return d;
}

// Renders the trajectory as plain numbered text. The vanilla-debug baseline
// displays 0-based step numbers (and its replies are converted back); all
// other callers use 1-based numbering.
inline std::string render_trajectory_text(const Trajectory& trajectory, bool zero_based = false) {
  std::string out = "Task: " + trajectory.task_description + "\n";
  for (const auto& step : trajectory.steps) {
    out += "Step " + std::to_string(zero_based ? step.index - 1 : step.index) + ": ";
    out += "observation=" + normalize_whitespace(step.observation);
    out += "; action=" + step.action.display();
    out += "; result=" + normalize_whitespace(step.env_response) + "\n";
  }
  out += "Outcome: " + trajectory.outcome.str() + "\n";
  return out;
}

// Baseline: one-shot localization without the Stage-1 profile. The reply's
// 0-based step is converted to the 1-based convention; module and error type
// stay at the others/other placeholder because the baseline does not predict
// them.
inline Result<CriticalDiagnosis> direct_prompt_localize(const Trajectory& trajectory,
                                                        ChatClient& judge,
                                                        const PromptStore& prompts,
                                                        const JudgeConfig& cfg = {}) {
  if (trajectory.outcome.is_success())
    return err(Errc::precondition, "successful trajectories are not analyzed");
  auto prompt = prompts.render(
      "vanilla_debug", {{"trajectory", render_trajectory_text(trajectory, /*zero_based=*/true)}});
  if (!prompt.ok()) return prompt.error();
  auto completion =
      judge.complete(ChatRequest::user_prompt(cfg.model_id, prompt.value(), cfg.temperature));
  if (!completion.ok()) return completion.error();

  std::optional<int> step;
  std::optional<std::string> reason, suggestion;
  for (const auto& line : split_lines(completion.value().text)) {
    const std::string t = trim(line);
    if (t.rfind("step:", 0) == 0 && !step) {
      try {
        step = std::stoi(trim(t.substr(5)));
      } catch (...) {
        return err(Errc::line_format_parse_failure, "step line is not a number: " + t);
      }
    } else if (t.rfind("reason:", 0) == 0 && !reason) {
      reason = trim(t.substr(7));
    } else if (t.rfind("suggestion:", 0) == 0 && !suggestion) {
      suggestion = trim(t.substr(11));
    }
  }
  if (!step || !reason || !suggestion)
    return err(Errc::line_format_parse_failure,
               "reply must contain step:/reason:/suggestion: lines");

  const int one_based = *step + 1;
  if (one_based < 1 || one_based > trajectory.length())
    return err(Errc::invalid_diagnosis, "step " + std::to_string(*step) + " out of range");

  CriticalDiagnosis d;
  d.trajectory_id = trajectory.task_id;
  d.critical_step = one_based;
  d.critical_module = ModuleKind::others;
  d.error_label = ErrorLabel{ModuleKind::others, std::string(kOtherId)};
  d.root_cause = *reason;
  d.evidence = *reason;
  d.correction_guidance = *suggestion;
  return d;
}

}  // namespace trajdbg
