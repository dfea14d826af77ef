#pragma once

#include <string>
#include <vector>

#include "trajdebug/env/environment.hpp"

namespace trajdbg {

// Offline environment backed by a recorded trajectory. The recorded
// env_response is ground truth; any off-script action is invalid and leaves
// the cursor where it was. This makes Stage-1/Stage-2 evaluation possible on
// stored benchmark trajectories without a simulator.
class ReplayEnv : public Environment {
 public:
  explicit ReplayEnv(Trajectory source, int step_cap = 0) : source_(std::move(source)) {
    descriptor_.env_name = source_.env_name;
    descriptor_.task_description = source_.task_description;
    descriptor_.step_cap = step_cap > 0 ? step_cap : std::max(1, source_.length());
    descriptor_.deterministic = true;
    descriptor_.seed = source_.seed;
  }

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  bool done() const override { return done_; }
  std::optional<bool> final_success() const override {
    return done_ ? std::optional<bool>(success_) : std::nullopt;
  }
  int steps_taken() const override { return steps_; }

  ActionResult reset() override {
    cursor_ = 0;
    steps_ = 0;
    done_ = source_.steps.empty();
    success_ = done_ && source_.outcome.is_success();
    ActionResult r;
    if (source_.steps.empty()) {
      r.observation = "Recorded episode is empty.";
      r.done = true;
      r.success = success_;
      return r;
    }
    r.observation = source_.steps.front().observation;
    r.admissible_actions = source_.steps.front().admissible_actions;
    return r;
  }

  Result<ActionResult> step(const CanonicalAction& action) override {
    if (done_) return err(Errc::stepped_after_done, "recorded episode already finished");
    ActionResult r;
    const StepRecord& expected = source_.steps[cursor_];
    ++steps_;
    if (!(action == expected.action)) {
      r.invalid_action = true;
      r.observation = "Nothing happens. This replay only accepts the recorded action: " +
                      expected.action.display();
      r.admissible_actions = expected.admissible_actions;
      if (steps_ >= descriptor_.step_cap) {
        done_ = true;
        r.done = true;
        r.success = false;
      }
      return r;
    }
    r.observation = expected.env_response;
    ++cursor_;
    if (cursor_ >= static_cast<int>(source_.steps.size())) {
      done_ = true;
      success_ = source_.outcome.is_success();
      r.done = true;
      r.success = success_;
    } else {
      r.admissible_actions = source_.steps[cursor_].admissible_actions;
      if (steps_ >= descriptor_.step_cap) {
        done_ = true;
        r.done = true;
        r.success = false;
      }
    }
    return r;
  }

  const Trajectory& source() const { return source_; }

 private:
  Trajectory source_;
  EnvDescriptor descriptor_;
  int cursor_ = 0;
  int steps_ = 0;
  bool done_ = false;
  bool success_ = false;
};

}  // namespace trajdbg
