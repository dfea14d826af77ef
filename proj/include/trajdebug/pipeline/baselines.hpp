#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "trajdebug/pipeline/debug_loop.hpp"

namespace trajdbg {

namespace detail {

inline bool budget_spent(const ChatClient& client) {
  if (client.budget_exhausted()) return true;
  auto budget = client.armed_budget();
  return budget && client.usage_report().total() >= *budget;
}

inline Feedback free_text_feedback(std::string guidance, int attempt_index,
                                   std::vector<std::string> prior) {
  Feedback f;
  f.target_step = 1;
  f.error_label = ErrorLabel{ModuleKind::others, std::string(kOtherId)};
  f.guidance = std::move(guidance);
  f.attempt_index = attempt_index;
  f.prior_guidance = std::move(prior);
  return f;
}

}  // namespace detail

// Self-Refine: full restart per attempt; the agent critiques its own failed
// trajectory in free text and that critique is injected at step 1 of the
// next run. Halts gracefully when an armed token budget runs out.
inline Result<DebugResult> self_refine_loop(const RolloutConfig& base_config,
                                            const EnvFactory& env_factory, ChatClient& agent,
                                            const PromptStore& prompts, const RolloutTask& task,
                                            int budget) {
  if (budget < 1) return err(Errc::precondition, "budget must be >= 1");
  const TokenUsage before = agent.usage_report();

  DebugResult result;
  {
    auto env = env_factory();
    RolloutConfig config = base_config;
    config.step_cap = env->descriptor().step_cap;
    auto initial = run_rollout(config, prompts, *env, agent, task);
    if (!initial.ok()) return initial.error();
    result.initial = initial.take();
    result.final_outcome = result.initial.outcome;
  }

  std::vector<std::string> prior;
  for (int attempt = 1; attempt <= budget && !result.final_outcome.is_success(); ++attempt) {
    if (detail::budget_spent(agent)) break;
    const Trajectory& last =
        result.attempts.empty() ? result.initial : result.attempts.back().trajectory;
    auto prompt =
        prompts.render("self_refine", {{"trajectory", render_trajectory_text(last)}});
    if (!prompt.ok()) return prompt.error();
    auto critique =
        agent.complete(ChatRequest::user_prompt(base_config.model_id, prompt.value()));
    if (!critique.ok()) {
      if (critique.error().code == Errc::budget_exceeded) break;
      return critique.error();
    }
    Feedback feedback = detail::free_text_feedback(trim(critique.value().text), attempt, prior);
    prior.push_back(feedback.guidance);

    auto env = env_factory();
    RolloutConfig config = base_config;
    config.step_cap = env->descriptor().step_cap;
    auto retry = run_rollout(config, prompts, *env, agent, task, std::nullopt, feedback);
    if (!retry.ok()) return retry.error();
    result.attempts.push_back({feedback, retry.take()});
    result.final_outcome = result.attempts.back().trajectory.outcome;
  }

  result.total_usage = agent.usage_report();
  result.total_usage.prompt_tokens -= before.prompt_tokens;
  result.total_usage.completion_tokens -= before.completion_tokens;
  return result;
}

// Best-of-N: independent restarts with derived seeds; overall success if any
// rollout succeeds. All trajectories are recorded.
inline Result<DebugResult> best_of_n(const RolloutConfig& base_config,
                                     const EnvFactory& env_factory, ChatClient& agent,
                                     const PromptStore& prompts, const RolloutTask& task, int n) {
  if (n < 1) return err(Errc::precondition, "n must be >= 1");
  const TokenUsage before = agent.usage_report();

  DebugResult result;
  bool any_success = false;
  for (int i = 0; i < n; ++i) {
    auto env = env_factory();
    RolloutConfig config = base_config;
    config.step_cap = env->descriptor().step_cap;
    RolloutTask sampled = task;
    sampled.seed = task.seed + i;  // sampling seeds derive by counter
    auto rollout = run_rollout(config, prompts, *env, agent, sampled);
    if (!rollout.ok()) return rollout.error();
    if (i == 0) {
      result.initial = rollout.take();
      any_success = result.initial.outcome.is_success();
    } else {
      Feedback marker = detail::free_text_feedback("", i, {});
      marker.error_label = no_error_label(ModuleKind::others);
      result.attempts.push_back({marker, rollout.take()});
      any_success = any_success || result.attempts.back().trajectory.outcome.is_success();
    }
    if (detail::budget_spent(agent)) break;
  }
  // best outcome wins across the n samples
  result.final_outcome = any_success ? Outcome::success()
                         : result.attempts.empty()
                             ? result.initial.outcome
                             : result.attempts.back().trajectory.outcome;
  result.total_usage = agent.usage_report();
  result.total_usage.prompt_tokens -= before.prompt_tokens;
  result.total_usage.completion_tokens -= before.completion_tokens;
  return result;
}

struct TotOptions {
  int proposals = 3;  // k candidate actions per expansion
  int beam = 1;
};

namespace detail {

struct TotState {
  std::vector<StepRecord> steps;
  double score = 0.0;
  bool done = false;
  bool success = false;
};

inline std::string tot_history_text(const std::vector<StepRecord>& steps, int window) {
  if (steps.empty()) return "";
  return "Recent steps:\n" + format_action_history(steps, window) + "\n\n";
}

}  // namespace detail

// Tree search over next actions: propose up to k candidates, score each in
// [0,1], keep the best `beam` states (first maximal wins ties), repeat until
// a state finishes or the cap is hit. Beam states are re-materialized on
// fresh environments by prefix replay, so the factory must be deterministic.
inline Result<DebugResult> tot_search(const RolloutConfig& base_config,
                                      const EnvFactory& env_factory, ChatClient& agent,
                                      const PromptStore& prompts, const RolloutTask& task,
                                      const TotOptions& options = {}) {
  if (options.proposals < 1 || options.beam < 1)
    return err(Errc::precondition, "k and beam must be >= 1");
  const TokenUsage before = agent.usage_report();

  auto probe_env = env_factory();
  if (!probe_env->descriptor().deterministic)
    return err(Errc::non_deterministic_env, "tree search needs a deterministic environment");
  const EnvDescriptor descriptor = probe_env->descriptor();
  const std::string env_type = descriptor.env_name;

  Trajectory header;
  header.task_id = task.task_id;
  header.env_name = descriptor.env_name;
  header.task_description = descriptor.task_description;
  header.strategy = StrategyId::act_only;  // search emits bare actions
  header.model_id = base_config.model_id;
  header.seed = task.seed;

  // Materialize a state's environment by replaying its actions.
  auto materialize = [&](const detail::TotState& state)
      -> Result<std::pair<std::unique_ptr<Environment>, ActionResult>> {
    auto env = env_factory();
    std::vector<CanonicalAction> actions;
    for (const auto& s : state.steps) actions.push_back(s.action);
    auto latest = replay_prefix(*env, actions, env->reset(), &state.steps);
    if (!latest.ok()) return latest.error();
    return std::make_pair(std::move(env), latest.take());
  };

  std::vector<detail::TotState> beam{detail::TotState{}};
  std::optional<detail::TotState> finished;
  bool budget_halted = false;

  for (int depth = 1; depth <= descriptor.step_cap && !finished && !budget_halted; ++depth) {
    struct Candidate {
      size_t state_index;
      CanonicalAction action;
      double score;
      size_t order;  // proposal order for deterministic tie-breaks
    };
    std::vector<Candidate> pool;

    for (size_t si = 0; si < beam.size(); ++si) {
      auto mat = materialize(beam[si]);
      if (!mat.ok()) return mat.error();
      const ActionResult& latest = mat.value().second;

      std::map<std::string, std::string> propose_bindings{
          {"env_type", env_type},
          {"history_desc", detail::tot_history_text(beam[si].steps, base_config.history_window)},
          {"obs", latest.observation},
          {"k", std::to_string(options.proposals)},
          {"diversity_desc", ""}};
      auto propose_prompt = prompts.render("tot_propose", propose_bindings);
      if (!propose_prompt.ok()) return propose_prompt.error();
      auto proposed = agent.complete(
          ChatRequest::user_prompt(base_config.model_id, propose_prompt.value()));
      if (!proposed.ok()) {
        if (proposed.error().code == Errc::budget_exceeded) {
          budget_halted = true;
          break;
        }
        return proposed.error();
      }
      auto proposal_list = extract_json_array(proposed.value().text);
      if (!proposal_list.ok() || !proposal_list.value().is_array())
        return err(Errc::parse_failure, "proposal reply is not a JSON list");
      std::vector<std::string> candidates;
      for (const auto& c : proposal_list.value()) {
        if (!c.is_string()) return err(Errc::parse_failure, "proposal entries must be strings");
        if (static_cast<int>(candidates.size()) < options.proposals)
          candidates.push_back(c.get<std::string>());
      }
      if (candidates.empty()) return err(Errc::parse_failure, "no candidate actions proposed");

      nlohmann::json cand_json = candidates;
      std::map<std::string, std::string> value_bindings{
          {"env_type", env_type},
          {"history_section", detail::tot_history_text(beam[si].steps, base_config.history_window)},
          {"obs", latest.observation},
          {"cand_json", cand_json.dump()}};
      auto value_prompt = prompts.render("tot_value", value_bindings);
      if (!value_prompt.ok()) return value_prompt.error();
      auto valued =
          agent.complete(ChatRequest::user_prompt(base_config.model_id, value_prompt.value()));
      if (!valued.ok()) {
        if (valued.error().code == Errc::budget_exceeded) {
          budget_halted = true;
          break;
        }
        return valued.error();
      }
      auto scores = extract_json_array(valued.value().text);
      if (!scores.ok() || !scores.value().is_array() ||
          scores.value().size() != candidates.size())
        return err(Errc::score_parse_failure,
                   "score array must align one-to-one with the candidates");
      for (size_t i = 0; i < candidates.size(); ++i) {
        if (!scores.value()[i].is_number())
          return err(Errc::score_parse_failure, "scores must be numeric");
        pool.push_back({si, normalize_action(candidates[i], latest.admissible_actions),
                        scores.value()[i].get<double>(), pool.size()});
      }
    }

    if (budget_halted) break;

    // stable by (score desc, proposal order asc): first maximal wins
    std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
      return a.score > b.score;
    });

    std::vector<detail::TotState> next_beam;
    for (const auto& candidate : pool) {
      if (static_cast<int>(next_beam.size()) >= options.beam) break;
      auto mat = materialize(beam[candidate.state_index]);
      if (!mat.ok()) return mat.error();
      auto& [env, latest] = mat.value();
      auto stepped = env->step(candidate.action);
      if (!stepped.ok()) return stepped.error();

      detail::TotState state = beam[candidate.state_index];
      StepRecord record;
      record.index = static_cast<int>(state.steps.size()) + 1;
      record.observation = latest.observation;
      record.admissible_actions = latest.admissible_actions;
      record.module_outputs[ModuleKind::action] = candidate.action.display();
      record.action = candidate.action;
      record.env_response = stepped.value().observation;
      record.raw_completion = "<action>" + candidate.action.display() + "</action>";
      state.steps.push_back(std::move(record));
      state.score = candidate.score;
      state.done = stepped.value().done;
      state.success = stepped.value().success.value_or(false);
      if (state.done && state.success) {
        finished = state;
        break;
      }
      next_beam.push_back(std::move(state));
    }
    if (finished) break;
    // drop dead ends; if everything ended unsuccessfully, keep the best for reporting
    std::vector<detail::TotState> alive;
    for (auto& s : next_beam)
      if (!s.done) alive.push_back(std::move(s));
    if (alive.empty()) {
      if (next_beam.empty()) break;
      finished = next_beam.front();
      break;
    }
    beam = std::move(alive);
  }

  const detail::TotState* last = finished ? &*finished : (beam.empty() ? nullptr : &beam.front());
  TrajectoryBuilder builder(header);
  if (last)
    for (const auto& s : last->steps) {
      auto appended = builder.append_step(s);
      if (!appended.ok()) return appended.error();
    }
  Outcome outcome = budget_halted ? Outcome::halt(HaltReason::llm_limit)
                    : last && last->done
                        ? (last->success ? Outcome::success() : Outcome::failure())
                        : Outcome::halt(HaltReason::step_limit);

  DebugResult result;
  result.initial = std::move(builder).finish(outcome);
  result.final_outcome = result.initial.outcome;
  result.total_usage = agent.usage_report();
  result.total_usage.prompt_tokens -= before.prompt_tokens;
  result.total_usage.completion_tokens -= before.completion_tokens;
  return result;
}

}  // namespace trajdbg
