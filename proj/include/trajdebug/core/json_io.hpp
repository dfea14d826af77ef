#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "trajdebug/core/trajectory.hpp"

namespace trajdbg {

using json = nlohmann::json;

namespace detail {

inline Error schema_error(const std::string& path, const std::string& what) {
  return err(Errc::schema_violation, path + ": " + what);
}

inline Result<const json*> field_ptr(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) return schema_error(path, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) return schema_error(path + "." + key, "missing required field");
  return Result<const json*>(&*it);
}

inline Result<std::string> get_string(const json& obj, const std::string& path, const char* key) {
  auto f = field_ptr(obj, path, key);
  if (!f.ok()) return f.error();
  if (!f.value()->is_string()) return schema_error(path + "." + key, "expected string");
  return f.value()->get<std::string>();
}

inline Result<int64_t> get_int(const json& obj, const std::string& path, const char* key) {
  auto f = field_ptr(obj, path, key);
  if (!f.ok()) return f.error();
  if (!f.value()->is_number_integer()) return schema_error(path + "." + key, "expected integer");
  return f.value()->get<int64_t>();
}

}  // namespace detail

inline json to_json(const TokenUsage& u) {
  return {{"prompt", u.prompt_tokens}, {"completion", u.completion_tokens}};
}

inline json to_json(const CanonicalAction& a) {
  json j{{"kind", std::string(to_string(a.kind))}};
  switch (a.kind) {
    case CanonicalAction::Kind::env_action:
    case CanonicalAction::Kind::final_answer: j["text"] = a.text; break;
    case CanonicalAction::Kind::invalid: j["raw"] = a.text; break;
    case CanonicalAction::Kind::tool_call:
      j["name"] = a.tool_name;
      j["parameters"] = a.tool_parameters;
      break;
  }
  return j;
}

inline json to_json(const Outcome& o) {
  switch (o.kind) {
    case Outcome::Kind::success: return {{"kind", "success"}};
    case Outcome::Kind::failure: return {{"kind", "failure"}};
    case Outcome::Kind::system_halt:
      return {{"kind", "system_halt"}, {"reason", std::string(to_string(*o.halt_reason))}};
  }
  return {{"kind", "failure"}};
}

inline json to_json(const Feedback& f) {
  return {{"target_step", f.target_step},
          {"module", std::string(to_string(f.error_label.module))},
          {"error_type", f.error_label.error_type},
          {"guidance", f.guidance},
          {"attempt_index", f.attempt_index},
          {"prior_guidance", f.prior_guidance}};
}

inline json to_json(const StepRecord& s) {
  json module_outputs = json::object();
  for (const auto& [module, text] : s.module_outputs)
    module_outputs[std::string(to_string(module))] = text;
  json j{{"index", s.index},
         {"observation", s.observation},
         {"module_outputs", module_outputs},
         {"action", to_json(s.action)},
         {"env_response", s.env_response},
         {"raw_completion", s.raw_completion},
         {"token_usage", to_json(s.token_usage)}};
  if (s.admissible_actions) j["admissible_actions"] = *s.admissible_actions;
  return j;
}

inline json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  json j{{"schema_version", t.schema_version},
         {"task_id", t.task_id},
         {"env_name", t.env_name},
         {"task_description", t.task_description},
         {"strategy", std::string(to_string(t.strategy))},
         {"model_id", t.model_id},
         {"seed", t.seed},
         {"steps", steps},
         {"outcome", to_json(t.outcome)}};
  if (t.feedback_applied) j["feedback_applied"] = to_json(*t.feedback_applied);
  return j;
}

// Canonical pretty-printed form: 2-space indent, sorted keys (nlohmann
// objects are ordered maps), trailing newline, LF only.
inline std::string serialize(const Trajectory& t) { return to_json(t).dump(2) + "\n"; }

inline Result<TokenUsage> token_usage_from_json(const json& j, const std::string& path) {
  auto p = detail::get_int(j, path, "prompt");
  if (!p.ok()) return p.error();
  auto c = detail::get_int(j, path, "completion");
  if (!c.ok()) return c.error();
  if (p.value() < 0 || c.value() < 0)
    return detail::schema_error(path, "token counts must be non-negative");
  return TokenUsage{p.value(), c.value()};
}

inline Result<CanonicalAction> action_from_json(const json& j, const std::string& path) {
  auto kind_text = detail::get_string(j, path, "kind");
  if (!kind_text.ok()) return kind_text.error();
  auto kind = action_kind_from_string(kind_text.value());
  if (!kind) return detail::schema_error(path + ".kind", "unknown action kind");
  CanonicalAction a;
  a.kind = *kind;
  switch (*kind) {
    case CanonicalAction::Kind::env_action:
    case CanonicalAction::Kind::final_answer: {
      auto text = detail::get_string(j, path, "text");
      if (!text.ok()) return text.error();
      a.text = text.value();
      break;
    }
    case CanonicalAction::Kind::invalid: {
      auto raw = detail::get_string(j, path, "raw");
      if (!raw.ok()) return raw.error();
      a.text = raw.value();
      break;
    }
    case CanonicalAction::Kind::tool_call: {
      auto name = detail::get_string(j, path, "name");
      if (!name.ok()) return name.error();
      a.tool_name = name.value();
      auto params = detail::field_ptr(j, path, "parameters");
      if (!params.ok()) return params.error();
      if (!params.value()->is_object())
        return detail::schema_error(path + ".parameters", "expected object");
      for (auto it = params.value()->begin(); it != params.value()->end(); ++it) {
        if (!it.value().is_string())
          return detail::schema_error(path + ".parameters." + it.key(), "expected string");
        a.tool_parameters[it.key()] = it.value().get<std::string>();
      }
      break;
    }
  }
  return a;
}

inline Result<Outcome> outcome_from_json(const json& j, const std::string& path) {
  auto kind = detail::get_string(j, path, "kind");
  if (!kind.ok()) return kind.error();
  if (kind.value() == "success") return Outcome::success();
  if (kind.value() == "failure") return Outcome::failure();
  if (kind.value() == "system_halt") {
    auto reason = detail::get_string(j, path, "reason");
    if (!reason.ok()) return reason.error();
    auto r = halt_reason_from_string(reason.value());
    if (!r) return detail::schema_error(path + ".reason", "unknown halt reason");
    return Outcome::halt(*r);
  }
  return detail::schema_error(path + ".kind", "unknown outcome kind");
}

inline Result<Feedback> feedback_from_json(const json& j, const std::string& path) {
  Feedback f;
  auto target = detail::get_int(j, path, "target_step");
  if (!target.ok()) return target.error();
  f.target_step = static_cast<int>(target.value());
  auto module = detail::get_string(j, path, "module");
  if (!module.ok()) return module.error();
  auto type = detail::get_string(j, path, "error_type");
  if (!type.ok()) return type.error();
  auto label = parse_error_label(module.value(), type.value());
  if (!label.ok()) return detail::schema_error(path + ".error_type", label.error().message);
  f.error_label = label.value();
  auto guidance = detail::get_string(j, path, "guidance");
  if (!guidance.ok()) return guidance.error();
  f.guidance = guidance.value();
  auto attempt = detail::get_int(j, path, "attempt_index");
  if (!attempt.ok()) return attempt.error();
  f.attempt_index = static_cast<int>(attempt.value());
  auto prior = detail::field_ptr(j, path, "prior_guidance");
  if (!prior.ok()) return prior.error();
  if (!prior.value()->is_array())
    return detail::schema_error(path + ".prior_guidance", "expected array");
  for (const auto& g : *prior.value()) {
    if (!g.is_string()) return detail::schema_error(path + ".prior_guidance", "expected strings");
    f.prior_guidance.push_back(g.get<std::string>());
  }
  return f;
}

inline Result<StepRecord> step_from_json(const json& j, const std::string& path) {
  StepRecord s;
  auto index = detail::get_int(j, path, "index");
  if (!index.ok()) return index.error();
  if (index.value() < 1) return detail::schema_error(path + ".index", "step index must be >= 1");
  s.index = static_cast<int>(index.value());
  auto obs = detail::get_string(j, path, "observation");
  if (!obs.ok()) return obs.error();
  s.observation = obs.value();
  if (j.contains("admissible_actions")) {
    const auto& arr = j["admissible_actions"];
    if (!arr.is_array())
      return detail::schema_error(path + ".admissible_actions", "expected array");
    std::vector<std::string> actions;
    for (const auto& a : arr) {
      if (!a.is_string())
        return detail::schema_error(path + ".admissible_actions", "expected strings");
      actions.push_back(a.get<std::string>());
    }
    s.admissible_actions = std::move(actions);
  }
  auto modules = detail::field_ptr(j, path, "module_outputs");
  if (!modules.ok()) return modules.error();
  if (!modules.value()->is_object())
    return detail::schema_error(path + ".module_outputs", "expected object");
  for (auto it = modules.value()->begin(); it != modules.value()->end(); ++it) {
    auto m = module_kind_from_string(it.key());
    if (!m || *m == ModuleKind::system || *m == ModuleKind::others)
      return detail::schema_error(path + ".module_outputs." + it.key(),
                                  "key must be a reasoning module");
    if (!it.value().is_string())
      return detail::schema_error(path + ".module_outputs." + it.key(), "expected string");
    s.module_outputs[*m] = it.value().get<std::string>();
  }
  auto action_field = detail::field_ptr(j, path, "action");
  if (!action_field.ok()) return action_field.error();
  auto action = action_from_json(*action_field.value(), path + ".action");
  if (!action.ok()) return action.error();
  s.action = action.take();
  auto env_response = detail::get_string(j, path, "env_response");
  if (!env_response.ok()) return env_response.error();
  s.env_response = env_response.value();
  auto raw = detail::get_string(j, path, "raw_completion");
  if (!raw.ok()) return raw.error();
  s.raw_completion = raw.value();
  auto usage_field = detail::field_ptr(j, path, "token_usage");
  if (!usage_field.ok()) return usage_field.error();
  auto usage = token_usage_from_json(*usage_field.value(), path + ".token_usage");
  if (!usage.ok()) return usage.error();
  s.token_usage = usage.value();
  return s;
}

inline Result<Trajectory> trajectory_from_json(const json& j) {
  const std::string path = "trajectory";
  Trajectory t;
  auto version = detail::get_int(j, path, "schema_version");
  if (!version.ok()) return version.error();
  if (version.value() != Trajectory::kSchemaVersion)
    return detail::schema_error(path + ".schema_version",
                                "unsupported version " + std::to_string(version.value()));
  t.schema_version = static_cast<int>(version.value());

  auto task_id = detail::get_string(j, path, "task_id");
  if (!task_id.ok()) return task_id.error();
  t.task_id = task_id.value();
  auto env_name = detail::get_string(j, path, "env_name");
  if (!env_name.ok()) return env_name.error();
  t.env_name = env_name.value();
  auto desc = detail::get_string(j, path, "task_description");
  if (!desc.ok()) return desc.error();
  t.task_description = desc.value();
  auto strategy_text = detail::get_string(j, path, "strategy");
  if (!strategy_text.ok()) return strategy_text.error();
  auto strategy = strategy_from_string(strategy_text.value());
  if (!strategy) return detail::schema_error(path + ".strategy", "unknown strategy");
  t.strategy = *strategy;
  auto model_id = detail::get_string(j, path, "model_id");
  if (!model_id.ok()) return model_id.error();
  t.model_id = model_id.value();
  auto seed = detail::get_int(j, path, "seed");
  if (!seed.ok()) return seed.error();
  t.seed = seed.value();

  auto steps_field = detail::field_ptr(j, path, "steps");
  if (!steps_field.ok()) return steps_field.error();
  if (!steps_field.value()->is_array())
    return detail::schema_error(path + ".steps", "expected array");
  int i = 0;
  for (const auto& step_json : *steps_field.value()) {
    auto step = step_from_json(step_json, path + ".steps[" + std::to_string(i) + "]");
    if (!step.ok()) return step.error();
    t.steps.push_back(step.take());
    ++i;
  }

  auto outcome_field = detail::field_ptr(j, path, "outcome");
  if (!outcome_field.ok()) return outcome_field.error();
  auto outcome = outcome_from_json(*outcome_field.value(), path + ".outcome");
  if (!outcome.ok()) return outcome.error();
  t.outcome = outcome.value();

  if (j.contains("feedback_applied")) {
    auto f = feedback_from_json(j["feedback_applied"], path + ".feedback_applied");
    if (!f.ok()) return f.error();
    t.feedback_applied = f.take();
  }

  for (const auto& v : validate(t))
    return detail::schema_error(path, v.rule_id + " at step " + std::to_string(v.step_index) +
                                          ": " + v.message);
  return t;
}

inline Result<Trajectory> deserialize(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return err(Errc::schema_violation, "trajectory: not valid JSON");
  return trajectory_from_json(j);
}

// Equality via the canonical form; used by prefix-preservation checks.
inline bool structurally_equal(const Trajectory& a, const Trajectory& b) {
  return to_json(a) == to_json(b);
}

inline bool steps_equal(const StepRecord& a, const StepRecord& b) {
  return to_json(a) == to_json(b);
}

}  // namespace trajdbg
