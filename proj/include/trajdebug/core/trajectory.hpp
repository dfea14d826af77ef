#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajdebug/core/action.hpp"
#include "trajdebug/core/module_kind.hpp"
#include "trajdebug/core/result.hpp"
#include "trajdebug/core/taxonomy.hpp"

namespace trajdbg {

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;

  int64_t total() const { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  bool operator==(const TokenUsage& o) const {
    return prompt_tokens == o.prompt_tokens && completion_tokens == o.completion_tokens;
  }
};

enum class HaltReason { step_limit, tool_execution_error, llm_limit, environment_error };

inline std::string_view to_string(HaltReason r) {
  switch (r) {
    case HaltReason::step_limit: return "step_limit";
    case HaltReason::tool_execution_error: return "tool_execution_error";
    case HaltReason::llm_limit: return "llm_limit";
    case HaltReason::environment_error: return "environment_error";
  }
  return "environment_error";
}

inline std::optional<HaltReason> halt_reason_from_string(std::string_view s) {
  using H = HaltReason;
  for (H r : {H::step_limit, H::tool_execution_error, H::llm_limit, H::environment_error})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

struct Outcome {
  enum class Kind { success, failure, system_halt };

  Kind kind = Kind::failure;
  std::optional<HaltReason> halt_reason;  // present iff kind == system_halt

  static Outcome success() { return {Kind::success, std::nullopt}; }
  static Outcome failure() { return {Kind::failure, std::nullopt}; }
  static Outcome halt(HaltReason r) { return {Kind::system_halt, r}; }

  bool is_success() const { return kind == Kind::success; }
  bool operator==(const Outcome& o) const {
    return kind == o.kind && halt_reason == o.halt_reason;
  }
  std::string str() const {
    switch (kind) {
      case Kind::success: return "success";
      case Kind::failure: return "failure";
      case Kind::system_halt:
        return "system_halt(" + std::string(to_string(*halt_reason)) + ")";
    }
    return "failure";
  }
};

// Guidance injected into every prompt from target_step onward during a
// re-rollout attempt.
struct Feedback {
  int target_step = 1;
  ErrorLabel error_label;
  std::string guidance;
  int attempt_index = 1;
  std::vector<std::string> prior_guidance;  // length == attempt_index - 1
};

struct StepRecord {
  int index = 1;  // 1-based
  std::string observation;
  std::optional<std::vector<std::string>> admissible_actions;
  std::map<ModuleKind, std::string> module_outputs;  // memory/reflection/planning/action only
  CanonicalAction action;
  std::string env_response;
  std::string raw_completion;
  TokenUsage token_usage;
};

struct Trajectory {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string task_id;
  std::string env_name;
  std::string task_description;
  StrategyId strategy = StrategyId::modular;
  std::string model_id;
  int64_t seed = 0;
  std::vector<StepRecord> steps;
  Outcome outcome;
  std::optional<Feedback> feedback_applied;

  int length() const { return static_cast<int>(steps.size()); }
};

// Steps before a cut point plus the task metadata needed to resume.
struct TrajectoryPrefix {
  std::string task_id;
  std::string env_name;
  std::string task_description;
  StrategyId strategy = StrategyId::modular;
  std::string model_id;
  int64_t seed = 0;
  std::vector<StepRecord> steps;

  int length() const { return static_cast<int>(steps.size()); }
};

struct Violation {
  int step_index = 0;  // 0 = trajectory-level
  std::string rule_id;
  std::string message;
};

namespace detail {

inline std::optional<Violation> check_step_rules(const StepRecord& step, StrategyId strategy) {
  for (const auto& [module, _] : step.module_outputs) {
    if (module == ModuleKind::system || module == ModuleKind::others)
      return Violation{step.index, "ModuleRuleViolation",
                       "module_outputs may not contain system/others"};
  }
  if (step.index == 1 && strategy == StrategyId::modular) {
    if (step.module_outputs.count(ModuleKind::memory) ||
        step.module_outputs.count(ModuleKind::reflection))
      return Violation{1, "ModuleRuleViolation",
                       "step 1 has no memory/reflection under the modular strategy"};
  }
  return std::nullopt;
}

}  // namespace detail

// Structural invariant check. Empty result means the trajectory is well formed.
inline std::vector<Violation> validate(const Trajectory& t) {
  std::vector<Violation> out;
  if (t.schema_version != Trajectory::kSchemaVersion)
    out.push_back({0, "SchemaViolation", "unsupported schema_version"});
  for (size_t i = 0; i < t.steps.size(); ++i) {
    const StepRecord& step = t.steps[i];
    const int expected = static_cast<int>(i) + 1;
    if (step.index != expected) {
      out.push_back({step.index, "IndexGap",
                     "expected index " + std::to_string(expected) + ", found " +
                         std::to_string(step.index)});
    }
    if (auto v = detail::check_step_rules(step, t.strategy)) out.push_back(*v);
    if (step.token_usage.prompt_tokens < 0 || step.token_usage.completion_tokens < 0)
      out.push_back({step.index, "UsageNegative", "token usage components must be >= 0"});
  }
  if (t.feedback_applied) {
    const Feedback& f = *t.feedback_applied;
    if (f.attempt_index < 1 ||
        static_cast<int>(f.prior_guidance.size()) != f.attempt_index - 1)
      out.push_back({0, "FeedbackBookkeeping",
                     "prior_guidance length must equal attempt_index - 1"});
  }
  return out;
}

// Incremental construction with the contiguity and module rules enforced at
// append time. Trajectories themselves stay immutable value objects.
class TrajectoryBuilder {
 public:
  explicit TrajectoryBuilder(Trajectory header) : t_(std::move(header)) { t_.steps.clear(); }

  // Seeds the builder with already-validated steps (re-rollout prefixes).
  static TrajectoryBuilder from_prefix(const TrajectoryPrefix& prefix, std::string task_id = {}) {
    Trajectory header;
    header.task_id = task_id.empty() ? prefix.task_id : std::move(task_id);
    header.env_name = prefix.env_name;
    header.task_description = prefix.task_description;
    header.strategy = prefix.strategy;
    header.model_id = prefix.model_id;
    header.seed = prefix.seed;
    TrajectoryBuilder b(std::move(header));
    b.t_.steps = prefix.steps;
    return b;
  }

  Status append_step(StepRecord step) {
    const int expected = static_cast<int>(t_.steps.size()) + 1;
    if (step.index != expected)
      return err(Errc::index_gap, "expected step index " + std::to_string(expected) +
                                      ", got " + std::to_string(step.index));
    if (auto v = detail::check_step_rules(step, t_.strategy))
      return err(Errc::module_rule_violation, v->message);
    t_.steps.push_back(std::move(step));
    return ok_status();
  }

  int next_index() const { return static_cast<int>(t_.steps.size()) + 1; }
  const std::vector<StepRecord>& steps() const { return t_.steps; }

  Trajectory finish(Outcome outcome, std::optional<Feedback> feedback = std::nullopt) && {
    t_.outcome = outcome;
    t_.feedback_applied = std::move(feedback);
    return std::move(t_);
  }

 private:
  Trajectory t_;
};

// Pure append returning a fresh value; builder state emulated by requiring a
// non-final trajectory is being extended externally.
inline Result<Trajectory> append_step(const Trajectory& t, StepRecord step) {
  const int expected = t.length() + 1;
  if (step.index != expected)
    return err(Errc::index_gap, "expected step index " + std::to_string(expected) + ", got " +
                                    std::to_string(step.index));
  if (auto v = detail::check_step_rules(step, t.strategy))
    return err(Errc::module_rule_violation, v->message);
  Trajectory out = t;
  out.steps.push_back(std::move(step));
  return out;
}

// Immutable prefix of steps with index < t. t may be T+1 (the whole record).
inline Result<TrajectoryPrefix> truncate_before(const Trajectory& traj, int t) {
  if (t < 1 || t > traj.length() + 1)
    return err(Errc::out_of_range,
               "cut point " + std::to_string(t) + " outside 1.." + std::to_string(traj.length() + 1));
  TrajectoryPrefix prefix;
  prefix.task_id = traj.task_id;
  prefix.env_name = traj.env_name;
  prefix.task_description = traj.task_description;
  prefix.strategy = traj.strategy;
  prefix.model_id = traj.model_id;
  prefix.seed = traj.seed;
  prefix.steps.assign(traj.steps.begin(), traj.steps.begin() + (t - 1));
  return prefix;
}

}  // namespace trajdbg
