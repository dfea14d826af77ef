#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "trajdebug/pipeline/diagnosis.hpp"
#include "trajdebug/rollout/engine.hpp"

namespace trajdbg {

// Proposes one replacement action per (trajectory, step), memoized so
// repeated probes of the same step reuse the same correction.
class Corrector {
 public:
  Corrector(ChatClient& client, const PromptStore& prompts, JudgeConfig cfg = {})
      : client_(client), prompts_(prompts), cfg_(std::move(cfg)) {}

  Result<CanonicalAction> propose(const Trajectory& trajectory, int t) {
    if (t < 1 || t > trajectory.length()) return err(Errc::out_of_range, "no such step");
    const MemoKey key{trajectory.task_id, t};
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    const StepRecord& step = trajectory.steps[t - 1];
    std::vector<StepRecord> head(trajectory.steps.begin(), trajectory.steps.begin() + (t - 1));
    std::vector<StepRecord> tail(trajectory.steps.begin() + (t - 1), trajectory.steps.end());
    std::map<std::string, std::string> bindings{
        {"task_description", trajectory.task_description},
        {"prefix_summary",
         head.empty() ? "(nothing yet)" : format_action_history(head, trajectory.length())},
        {"step_num", std::to_string(t)},
        {"observation", step.observation},
        {"admissible_actions", format_admissible(step.admissible_actions)},
        {"original_action", step.action.display()},
        {"failure_summary", "continuation failed as " + trajectory.outcome.str() + ": " +
                                format_action_history(tail, trajectory.length())}};
    auto prompt = prompts_.render("corrector", bindings);
    if (!prompt.ok()) return prompt.error();
    auto completion =
        client_.complete(ChatRequest::user_prompt(cfg_.model_id, prompt.value(), cfg_.temperature));
    if (!completion.ok()) return completion.error();
    CanonicalAction action =
        normalize_action(completion.value().text, step.admissible_actions);
    memo_.emplace(key, action);
    return action;
  }

  int64_t calls() const { return client_.call_count(); }

 private:
  using MemoKey = std::pair<std::string, int>;
  ChatClient& client_;
  const PromptStore& prompts_;
  JudgeConfig cfg_;
  std::map<MemoKey, CanonicalAction> memo_;
};

struct CounterfactualOptions {
  RolloutConfig rollout;  // strategy/model/template overwritten from the trajectory
};

namespace detail {

inline RolloutConfig config_for(const Trajectory& trajectory, const Environment& env,
                                RolloutConfig base) {
  base.strategy = trajectory.strategy;
  base.model_id = trajectory.model_id.empty() ? base.model_id : trajectory.model_id;
  base.step_cap = env.descriptor().step_cap;
  base.template_set = template_set_for_env(trajectory.env_name);
  return base;
}

}  // namespace detail

// Substitutes corrected_action at step t (prefix 1..t-1 replayed and checked
// against the record) and lets the normal agent policy finish the episode.
// Returns the success flag together with the counterfactual trajectory.
inline Result<std::pair<bool, Trajectory>> counterfactual_fix_succeeds(
    const Trajectory& trajectory, int t, const CanonicalAction& corrected_action,
    const EnvFactory& env_factory, ChatClient& agent_client, const PromptStore& prompts,
    const CounterfactualOptions& options = {}) {
  if (t < 1 || t > trajectory.length()) return err(Errc::out_of_range, "no such step");

  auto env = env_factory();
  if (!env) return err(Errc::precondition, "environment factory returned nothing");
  if (!env->descriptor().deterministic)
    return err(Errc::non_deterministic_env, "counterfactual probes need determinism");
  const RolloutConfig config = detail::config_for(trajectory, *env, options.rollout);

  // replay 1..t-1, then apply the corrected action to learn its response
  std::vector<CanonicalAction> head_actions;
  std::vector<StepRecord> head_records(trajectory.steps.begin(),
                                       trajectory.steps.begin() + (t - 1));
  for (const auto& s : head_records) head_actions.push_back(s.action);
  auto replayed = replay_prefix(*env, head_actions, env->reset(), &head_records);
  if (!replayed.ok()) return replayed.error();
  ActionResult before = replayed.take();

  auto stepped = env->step(corrected_action);
  if (!stepped.ok()) return stepped.error();

  StepRecord synthetic;
  synthetic.index = t;
  synthetic.observation = before.observation;
  synthetic.admissible_actions = before.admissible_actions;
  synthetic.module_outputs[ModuleKind::action] = corrected_action.display();
  synthetic.action = corrected_action;
  synthetic.env_response = stepped.value().observation;
  synthetic.raw_completion = "<action>" + corrected_action.display() + "</action>";

  TrajectoryPrefix prefix = truncate_before(trajectory, t).take();
  prefix.steps.push_back(synthetic);

  if (stepped.value().done) {
    TrajectoryBuilder builder = TrajectoryBuilder::from_prefix(prefix);
    auto outcome = outcome_of(*env, env->steps_taken());
    Trajectory probe = std::move(builder).finish(
        outcome.ok() ? outcome.value() : Outcome::failure());
    return std::make_pair(probe.outcome.is_success(), std::move(probe));
  }

  // fresh environment; run_rollout replays the extended prefix and hands
  // control to the agent policy from step t+1
  auto continuation_env = env_factory();
  auto finished = run_rollout(config, prompts, *continuation_env, agent_client,
                              {trajectory.task_id, trajectory.seed}, prefix);
  if (!finished.ok()) return finished.error();
  return std::make_pair(finished.value().outcome.is_success(), finished.take());
}

// Search procedures over an abstract probe; the trajectory-level functions
// wrap the counterfactual probe. Both return the first step whose fix
// succeeds. The synthetic versions exist so the monotone-agreement property
// can be tested over thousands of predicates without environments.
using FixProbe = std::function<Result<bool>(int)>;

inline Result<int> brute_force_boundary(int length, const FixProbe& probe) {
  for (int t = 1; t <= length; ++t) {
    auto fixed = probe(t);
    if (!fixed.ok()) return fixed.error();
    if (fixed.value()) return t;
  }
  return err(Errc::not_found, "no step's correction flips the outcome");
}

// Leftmost success under a monotone predicate, <= ceil(log2 T)+1 distinct
// probes. Monotonicity is assumed, not enforced; on non-monotone predicates
// the returned boundary may differ from brute force.
inline Result<int> binary_search_boundary(int length, const FixProbe& probe) {
  if (length < 1) return err(Errc::not_found, "empty trajectory");
  std::map<int, bool> seen;
  auto probe_once = [&](int t) -> Result<bool> {
    auto it = seen.find(t);
    if (it != seen.end()) return it->second;
    auto fixed = probe(t);
    if (!fixed.ok()) return fixed.error();
    seen.emplace(t, fixed.value());
    return fixed;
  };
  int lo = 1, hi = length;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    auto fixed = probe_once(mid);
    if (!fixed.ok()) return fixed.error();
    if (fixed.value())
      hi = mid;
    else
      lo = mid + 1;
  }
  auto final_check = probe_once(lo);
  if (!final_check.ok()) return final_check.error();
  if (!final_check.value()) return err(Errc::not_found, "rightmost probe failed");
  return lo;
}

struct LocalizationResult {
  int critical_step = 1;
  CriticalDiagnosis diagnosis;  // step + the corrected action as guidance
  int probes = 0;
};

namespace detail {

inline CriticalDiagnosis diagnosis_lite(const Trajectory& trajectory, int t,
                                        const CanonicalAction& corrected) {
  CriticalDiagnosis d;
  d.trajectory_id = trajectory.task_id;
  d.critical_step = t;
  d.critical_module = ModuleKind::others;
  d.error_label = ErrorLabel{ModuleKind::others, std::string(kOtherId)};
  d.root_cause = "counterfactual probe: substituting a corrected action at step " +
                 std::to_string(t) + " flips the outcome";
  d.correction_guidance = "Replace the action at step " + std::to_string(t) + " with: " +
                          corrected.display();
  return d;
}

inline FixProbe counterfactual_probe(const Trajectory& trajectory, const EnvFactory& env_factory,
                                     Corrector& corrector, ChatClient& agent_client,
                                     const PromptStore& prompts, int* probe_count) {
  return [&, probe_count](int t) -> Result<bool> {
    auto corrected = corrector.propose(trajectory, t);
    if (!corrected.ok()) return corrected.error();
    auto probe =
        counterfactual_fix_succeeds(trajectory, t, corrected.value(), env_factory, agent_client,
                                    prompts);
    if (!probe.ok()) return probe.error();
    if (probe_count) ++*probe_count;
    return probe.value().first;
  };
}

}  // namespace detail

// Baseline: probe t = 1, 2, ... and stop at the first success.
inline Result<LocalizationResult> brute_force_localize(const Trajectory& trajectory,
                                                       const EnvFactory& env_factory,
                                                       Corrector& corrector,
                                                       ChatClient& agent_client,
                                                       const PromptStore& prompts) {
  if (trajectory.outcome.is_success())
    return err(Errc::precondition, "successful trajectories have no critical step");
  LocalizationResult out;
  auto probe = detail::counterfactual_probe(trajectory, env_factory, corrector, agent_client,
                                            prompts, &out.probes);
  auto found = brute_force_boundary(trajectory.length(), probe);
  if (!found.ok()) return found.error();
  out.critical_step = found.value();
  auto corrected = corrector.propose(trajectory, out.critical_step);
  out.diagnosis = detail::diagnosis_lite(trajectory, out.critical_step, corrected.value());
  return out;
}

// Baseline: divide and conquer on the fix predicate.
inline Result<LocalizationResult> binary_search_localize(const Trajectory& trajectory,
                                                         const EnvFactory& env_factory,
                                                         Corrector& corrector,
                                                         ChatClient& agent_client,
                                                         const PromptStore& prompts) {
  if (trajectory.outcome.is_success())
    return err(Errc::precondition, "successful trajectories have no critical step");
  LocalizationResult out;
  auto probe = detail::counterfactual_probe(trajectory, env_factory, corrector, agent_client,
                                            prompts, &out.probes);
  auto found = binary_search_boundary(trajectory.length(), probe);
  if (!found.ok()) return found.error();
  out.critical_step = found.value();
  auto corrected = corrector.propose(trajectory, out.critical_step);
  out.diagnosis = detail::diagnosis_lite(trajectory, out.critical_step, corrected.value());
  return out;
}

}  // namespace trajdbg
