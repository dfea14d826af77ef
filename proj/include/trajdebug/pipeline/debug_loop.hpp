#pragma once

#include <optional>
#include <vector>

#include "trajdebug/pipeline/counterfactual.hpp"

namespace trajdbg {

struct DebugAttempt {
  Feedback feedback;
  Trajectory trajectory;
};

struct DebugResult {
  Trajectory initial;
  std::optional<CriticalDiagnosis> diagnosis;  // absent on early return / no critical error
  std::vector<DebugAttempt> attempts;
  Outcome final_outcome;
  TokenUsage total_usage;

  bool flipped() const { return !initial.outcome.is_success() && final_outcome.is_success(); }
};

struct DebugOptions {
  int budget = 5;  // re-rollout attempts
  JudgeConfig judge;
  int history_window = 10;
  double agent_temperature = 0.0;
};

inline Feedback feedback_from_diagnosis(const CriticalDiagnosis& diagnosis, int attempt_index,
                                        std::vector<std::string> prior_guidance) {
  Feedback f;
  f.target_step = diagnosis.critical_step;
  f.error_label = diagnosis.error_label;
  f.guidance = diagnosis.correction_guidance;
  f.attempt_index = attempt_index;
  f.prior_guidance = std::move(prior_guidance);
  return f;
}

// Re-runs Stage 1 + Stage 2 on the failed attempt, accumulates the previous
// guidance, and keeps the earliest target step seen so far.
inline Result<Feedback> update_feedback(const Feedback& prev, const Trajectory& failed_trajectory,
                                        ChatClient& judge, const PromptStore& prompts,
                                        const JudgeConfig& cfg = {}) {
  if (failed_trajectory.outcome.is_success())
    return err(Errc::precondition, "update_feedback expects a failed trajectory");
  auto profile = detect_all(failed_trajectory, judge, prompts, cfg);
  if (!profile.ok()) return profile.error();
  std::vector<std::string> prior = prev.prior_guidance;
  prior.push_back(prev.guidance);
  auto diagnosis = analyze_critical(failed_trajectory, profile.value(), prev.attempt_index + 1,
                                    prior, judge, prompts, cfg);
  if (!diagnosis.ok()) return diagnosis.error();
  Feedback next = feedback_from_diagnosis(diagnosis.value(), prev.attempt_index + 1, prior);
  next.target_step = std::min(next.target_step, prev.target_step);
  return next;
}

// The full inference procedure: Stage-1 scan, Stage-2 critical-error
// diagnosis, then up to `budget` re-rollouts from the critical step with
// refined feedback. A successful input returns immediately without touching
// either model client. A judge that finds no critical error yields a failed
// result rather than an error.
inline Result<DebugResult> debug_loop(const Trajectory& initial, const EnvFactory& env_factory,
                                      ChatClient& judge, ChatClient& agent,
                                      const PromptStore& prompts, const DebugOptions& options = {}) {
  if (options.budget < 1) return err(Errc::precondition, "budget must be >= 1");

  DebugResult result;
  result.initial = initial;
  result.final_outcome = initial.outcome;
  if (initial.outcome.is_success()) return result;

  const TokenUsage judge_before = judge.usage_report();
  const TokenUsage agent_before = agent.usage_report();
  auto settle_usage = [&] {
    result.total_usage = (judge.usage_report() + agent.usage_report());
    result.total_usage.prompt_tokens -= judge_before.prompt_tokens + agent_before.prompt_tokens;
    result.total_usage.completion_tokens -=
        judge_before.completion_tokens + agent_before.completion_tokens;
  };

  auto profile = detect_all(initial, judge, prompts, options.judge);
  if (!profile.ok()) return profile.error();
  auto diagnosis =
      analyze_critical(initial, profile.value(), 1, {}, judge, prompts, options.judge);
  if (!diagnosis.ok()) {
    if (diagnosis.error().code == Errc::not_found) {
      settle_usage();
      return result;  // judge found no critical error: report the failure as data
    }
    return diagnosis.error();
  }
  result.diagnosis = diagnosis.value();

  Feedback feedback = feedback_from_diagnosis(diagnosis.value(), 1, {});

  RolloutConfig config;
  config.strategy = initial.strategy;
  config.model_id = initial.model_id;
  config.history_window = options.history_window;
  config.temperature = options.agent_temperature;
  config.template_set = detail::template_set_for_env(initial.env_name);

  for (int attempt = 1; attempt <= options.budget; ++attempt) {
    auto env = env_factory();
    if (!env) return err(Errc::precondition, "environment factory returned nothing");
    config.step_cap = env->descriptor().step_cap;

    const Trajectory& previous =
        result.attempts.empty() ? initial : result.attempts.back().trajectory;
    auto prefix = truncate_before(previous, feedback.target_step);
    if (!prefix.ok()) return prefix.error();
    auto attempt_result = run_rollout(config, prompts, *env, agent,
                                      {initial.task_id, initial.seed}, prefix.value(), feedback);
    if (!attempt_result.ok()) return attempt_result.error();

    result.attempts.push_back({feedback, attempt_result.take()});
    const Trajectory& latest = result.attempts.back().trajectory;
    result.final_outcome = latest.outcome;
    if (latest.outcome.is_success()) break;

    if (attempt < options.budget) {
      auto next = update_feedback(feedback, latest, judge, prompts, options.judge);
      if (!next.ok()) {
        if (next.error().code == Errc::not_found) break;  // judge gave up
        return next.error();
      }
      feedback = next.take();
    }
  }
  settle_usage();
  return result;
}

inline nlohmann::json to_json(const DebugResult& r) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : r.attempts)
    attempts.push_back(
        {{"feedback", to_json(a.feedback)}, {"trajectory", to_json(a.trajectory)}});
  nlohmann::json j{{"initial", to_json(r.initial)},
                   {"attempts", attempts},
                   {"final_outcome", to_json(r.final_outcome)},
                   {"total_usage", to_json(r.total_usage)}};
  if (r.diagnosis) j["diagnosis"] = to_json(*r.diagnosis);
  return j;
}

}  // namespace trajdbg
