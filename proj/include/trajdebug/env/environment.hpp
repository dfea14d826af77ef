#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trajdebug/core/action.hpp"
#include "trajdebug/core/result.hpp"
#include "trajdebug/core/trajectory.hpp"

namespace trajdbg {

struct EnvDescriptor {
  std::string env_name;
  std::string task_description;
  int step_cap = 30;
  bool deterministic = true;
  int64_t seed = 0;
};

struct ActionResult {
  std::string observation;
  std::optional<std::vector<std::string>> admissible_actions;
  bool done = false;
  std::optional<bool> success;  // present iff done
  bool invalid_action = false;
};

// One episode's world. Instances are single-threaded; run one per worker.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvDescriptor& descriptor() const = 0;
  virtual ActionResult reset() = 0;
  virtual Result<ActionResult> step(const CanonicalAction& action) = 0;
  virtual bool done() const = 0;
  virtual std::optional<bool> final_success() const = 0;  // present iff done
  virtual int steps_taken() const = 0;

  // Checkpoint hook for future live simulators; built-in environments rely
  // on deterministic prefix replay instead.
  virtual Result<Unit> save_checkpoint() {
    return err(Errc::precondition, "checkpointing not supported by this environment");
  }
};

// Maps a finished (or cap-exhausted) episode to its outcome. Cap exhaustion
// without success is a system halt, not a plain failure.
inline Result<Outcome> outcome_of(const Environment& env, int steps_taken) {
  const bool cap_reached = steps_taken >= env.descriptor().step_cap;
  if (!env.done() && !cap_reached)
    return err(Errc::not_finished, "episode still in progress");
  if (env.done() && env.final_success().value_or(false)) return Outcome::success();
  if (cap_reached) return Outcome::halt(HaltReason::step_limit);
  return Outcome::failure();
}

// Replays recorded actions on a freshly reset deterministic environment and
// returns the final ActionResult (or the reset result when there is nothing
// to replay). When the recorded steps are supplied, each replayed result is
// checked against the recording and any difference is a divergence error.
inline Result<ActionResult> replay_prefix(Environment& env,
                                          const std::vector<CanonicalAction>& actions,
                                          ActionResult reset_result,
                                          const std::vector<StepRecord>* check_against = nullptr) {
  if (!env.descriptor().deterministic)
    return err(Errc::non_deterministic_env, "prefix replay needs a deterministic environment");
  if (env.steps_taken() != 0)
    return err(Errc::precondition, "prefix replay needs a freshly reset environment");
  ActionResult latest = std::move(reset_result);
  for (size_t i = 0; i < actions.size(); ++i) {
    auto result = env.step(actions[i]);
    if (!result.ok()) return result.error();
    if (check_against) {
      if (i >= check_against->size())
        return err(Errc::replay_divergence, "more actions than recorded steps");
      const StepRecord& recorded = (*check_against)[i];
      if (result.value().observation != recorded.env_response)
        return err(Errc::replay_divergence,
                   "step " + std::to_string(i + 1) + ": replayed response differs from record");
    }
    latest = result.take();
  }
  return latest;
}

inline Result<ActionResult> replay_prefix(Environment& env,
                                          const std::vector<CanonicalAction>& actions,
                                          const std::vector<StepRecord>* check_against = nullptr) {
  return replay_prefix(env, actions, env.reset(), check_against);
}

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

}  // namespace trajdbg
