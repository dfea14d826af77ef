#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trajdebug/core/json_io.hpp"
#include "trajdebug/core/trajectory.hpp"
#include "trajdebug/env/environment.hpp"
#include "trajdebug/gateway/chat_client.hpp"
#include "trajdebug/gateway/prompt_template.hpp"
#include "trajdebug/rollout/completion_parser.hpp"
#include "trajdebug/rollout/prompt_builder.hpp"

namespace trajdbg {

struct RolloutTask {
  std::string task_id;
  int64_t seed = 0;
};

namespace detail {

inline std::vector<CanonicalAction> actions_of(const std::vector<StepRecord>& steps) {
  std::vector<CanonicalAction> actions;
  actions.reserve(steps.size());
  for (const auto& s : steps) actions.push_back(s.action);
  return actions;
}

}  // namespace detail

// Runs one episode: prompt, complete, parse, act, record, until the
// environment finishes or the cap is hit. A prefix replays recorded actions
// first; feedback is injected into every prompt from its target step onward.
// Model failure after the gateway's retries finalizes the trajectory as
// system_halt(llm_limit) instead of erroring out.
inline Result<Trajectory> run_rollout(const RolloutConfig& config, const PromptStore& prompts,
                                      Environment& env, ChatClient& client,
                                      const RolloutTask& task,
                                      const std::optional<TrajectoryPrefix>& prefix = std::nullopt,
                                      const std::optional<Feedback>& feedback = std::nullopt) {
  if (auto s = config.check(); !s.ok()) return s.error();
  if (prefix && !env.descriptor().deterministic)
    return err(Errc::non_deterministic_env, "prefix resume needs a deterministic environment");
  if (prefix && feedback && feedback->target_step != prefix->length() + 1)
    return err(Errc::precondition, "feedback target_step must be the first resumed step");

  Trajectory header;
  header.task_id = task.task_id;
  header.env_name = env.descriptor().env_name;
  header.task_description = env.descriptor().task_description;
  header.strategy = config.strategy;
  header.model_id = config.model_id;
  header.seed = task.seed;

  ActionResult latest = env.reset();
  TrajectoryBuilder builder =
      prefix ? TrajectoryBuilder::from_prefix(*prefix, task.task_id) : TrajectoryBuilder(header);

  if (prefix) {
    auto replayed =
        replay_prefix(env, detail::actions_of(prefix->steps), std::move(latest), &prefix->steps);
    if (!replayed.ok()) return replayed.error();
    latest = replayed.take();
    if (env.done()) {
      auto early = outcome_of(env, env.steps_taken());
      return std::move(builder).finish(early.ok() ? early.value() : Outcome::failure(), feedback);
    }
  }

  while (true) {
    const int t = builder.next_index();
    if (t > config.step_cap) break;

    auto prompt = build_step_prompt(prompts, config, header.task_description, builder.steps(),
                                    latest.observation, latest.admissible_actions, feedback);
    if (!prompt.ok()) return prompt.error();

    ChatRequest request = ChatRequest::user_prompt(config.model_id, prompt.take(),
                                                   config.temperature);
    auto completion = client.complete(request);
    if (!completion.ok()) {
      // surface transport/budget exhaustion as a system halt on the episode
      return std::move(builder).finish(Outcome::halt(HaltReason::llm_limit), feedback);
    }

    ParsedCompletion parsed = parse_agent_completion(
        completion.value().text, module_set_at(config.strategy, t));
    CanonicalAction action = parsed.action;
    if (action.kind == CanonicalAction::Kind::env_action)
      action = normalize_action(action.text, latest.admissible_actions);

    auto stepped = env.step(action);
    if (!stepped.ok())
      return std::move(builder).finish(Outcome::halt(HaltReason::environment_error), feedback);

    StepRecord record;
    record.index = t;
    record.observation = latest.observation;
    record.admissible_actions = latest.admissible_actions;
    record.module_outputs = parsed.module_outputs;
    record.action = action;
    record.env_response = stepped.value().observation;
    record.raw_completion = completion.value().text;
    record.token_usage = completion.value().usage;
    if (auto appended = builder.append_step(std::move(record)); !appended.ok())
      return appended.error();

    latest = stepped.take();
    if (latest.done) break;
    if (action.kind == CanonicalAction::Kind::final_answer) break;
  }

  auto outcome = outcome_of(env, env.steps_taken());
  if (!outcome.ok()) {
    // an agent that stopped early (final answer on a non-terminal env state)
    return std::move(builder).finish(Outcome::failure(), feedback);
  }
  return std::move(builder).finish(outcome.value(), feedback);
}

}  // namespace trajdbg
