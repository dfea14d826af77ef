#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture_helpers.hpp"
#include "trajdebug/core/json_io.hpp"
#include "trajdebug/rollout/engine.hpp"

using namespace trajdbg;
using namespace trajdbg::testfix;

namespace {

PromptStore prompts() { return PromptStore(TRAJDBG_PROMPT_DIR); }

RolloutConfig gridworld_config(int step_cap = 30, StrategyId strategy = StrategyId::modular) {
  RolloutConfig c;
  c.strategy = strategy;
  c.step_cap = step_cap;
  c.template_set = "gridworld";
  return c;
}

StepRecord make_history_step(int index) {
  StepRecord s;
  s.index = index;
  s.observation = "obs " + std::to_string(index);
  s.action = CanonicalAction::env("act " + std::to_string(index));
  s.env_response = "resp " + std::to_string(index);
  return s;
}

}  // namespace

TEST_CASE("scripted agent solves the mug fixture in 6 steps") {
  auto store = prompts();
  GridWorldEnv env(mug_task());
  ScriptedClient agent(mug_solution_completions());
  auto result = run_rollout(gridworld_config(), store, env, agent, {"mug-1", 7});
  REQUIRE(result.ok());
  const Trajectory& t = result.value();
  CHECK(t.outcome.is_success());
  CHECK(t.length() == 6);
  CHECK(validate(t).empty());
  CHECK(t.steps[0].observation.find("doorway") != std::string::npos);
  CHECK(t.steps[5].env_response.find("mug 1 in/on the coffee machine 1") != std::string::npos);
}

TEST_CASE("repeating agent hits the step cap as a system halt") {
  auto store = prompts();
  GridWorldEnv env(mug_task(10));
  ScriptedClient agent(std::vector<ScriptEntry>{
      ScriptEntry{{}, modular_completion("go to cabinet 1"), std::nullopt}});
  auto result = run_rollout(gridworld_config(10), store, env, agent, {"loop-1", 1});
  REQUIRE(result.ok());
  CHECK(result.value().outcome == Outcome::halt(HaltReason::step_limit));
  CHECK(result.value().length() == 10);
}

TEST_CASE("model failure mid-rollout finalizes as llm_limit halt") {
  auto store = prompts();
  GridWorldEnv env(mug_task());
  ScriptedClient agent(std::vector<std::string>{modular_completion("go to cabinet 1")});
  auto result = run_rollout(gridworld_config(), store, env, agent, {"dead-model", 1});
  REQUIRE(result.ok());
  CHECK(result.value().outcome == Outcome::halt(HaltReason::llm_limit));
  CHECK(result.value().length() == 1);
}

TEST_CASE("prefix resume preserves the prefix byte-identically and injects feedback") {
  auto store = prompts();

  // source run: three wasted steps then stuck until the cap
  GridWorldEnv env(mug_task(8));
  ScriptedClient wander(std::vector<ScriptEntry>{
      ScriptEntry{{}, modular_completion("go to cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("open cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("examine cabinet 1"), std::nullopt}});
  auto initial = run_rollout(gridworld_config(8), store, env, wander, {"stuck-1", 3});
  REQUIRE(initial.ok());
  REQUIRE(initial.value().outcome == Outcome::halt(HaltReason::step_limit));

  auto prefix = truncate_before(initial.value(), 4).take();
  Feedback feedback;
  feedback.target_step = 4;
  feedback.error_label = ErrorLabel{ModuleKind::planning, "inefficient_planning"};
  feedback.guidance = "Go to countertop 1 and take mug 1, then put it in the coffee machine.";
  feedback.attempt_index = 1;

  // the retry agent reacts once to the feedback marker, then follows observations
  std::vector<ScriptEntry> retry_entries = {
      ScriptEntry::keyed_all({"DEBUG FEEDBACK", "examine"},
                             modular_completion("go to countertop 1"), 1),
  };
  for (auto& e : mug_recovery_policy()) retry_entries.push_back(e);
  ScriptedClient retry(retry_entries);

  GridWorldEnv env2(mug_task(8));
  auto attempt = run_rollout(gridworld_config(8), store, env2, retry, {"stuck-1", 3}, prefix,
                             feedback);
  REQUIRE(attempt.ok());
  const Trajectory& t = attempt.value();
  CHECK(t.outcome.is_success());
  REQUIRE(t.length() >= 3);
  for (int i = 0; i < 3; ++i)
    CHECK(to_json(t.steps[i]).dump() == to_json(initial.value().steps[i]).dump());
  REQUIRE(t.feedback_applied.has_value());
  CHECK(t.feedback_applied->guidance == feedback.guidance);
  CHECK(t.steps[3].raw_completion.find("go to countertop 1") != std::string::npos);
}

TEST_CASE("build_step_prompt: step 1 renders the no-history template head") {
  auto store = prompts();
  RolloutConfig config = gridworld_config();
  auto prompt = build_step_prompt(store, config, "put mug 1 in/on coffee machine 1", {},
                                  "You are in the room.", std::vector<std::string>{"go to x"});
  REQUIRE(prompt.ok());
  CHECK(prompt.value().rfind("You are an expert agent operating in the ALFRED Embodied "
                             "Environment.",
                             0) == 0);
  CHECK(prompt.value().find("Please begin by analyzing the situation") != std::string::npos);
  // no-history variant has no memory/reflection instructions
  CHECK(prompt.value().find("<memory>") == std::string::npos);
  CHECK(prompt.value().find("<reflection>") == std::string::npos);
  CHECK(prompt.value().find("{") == std::string::npos);
  CHECK(prompt.value().find("}") == std::string::npos);
}

TEST_CASE("build_step_prompt: history window arithmetic") {
  auto store = prompts();
  RolloutConfig config = gridworld_config();
  config.history_window = 3;
  std::vector<StepRecord> history;
  for (int i = 1; i <= 4; ++i) history.push_back(make_history_step(i));

  auto prompt = build_step_prompt(store, config, "task", history, "obs 5",
                                  std::vector<std::string>{"act"});
  REQUIRE(prompt.ok());
  const std::string& text = prompt.value();
  // step 5 with K=3 shows steps 2..4 only
  CHECK(text.find("Step 2 —") != std::string::npos);
  CHECK(text.find("Step 3 —") != std::string::npos);
  CHECK(text.find("Step 4 —") != std::string::npos);
  CHECK(text.find("Step 1 —") == std::string::npos);
  CHECK(text.find("you have already taken 4 step(s)") != std::string::npos);
  CHECK(text.find("the most recent 3 observaitons") != std::string::npos);
  CHECK(text.find("You are now at step 5") != std::string::npos);
}

TEST_CASE("build_step_prompt: feedback appears verbatim between head and instructions") {
  auto store = prompts();
  RolloutConfig config = gridworld_config();
  std::vector<StepRecord> history = {make_history_step(1)};
  Feedback f;
  f.target_step = 2;
  f.error_label = ErrorLabel{ModuleKind::planning, "constraint_ignorance"};
  f.guidance = "Check the countertop before any cabinet.";
  f.attempt_index = 1;
  auto prompt = build_step_prompt(store, config, "task", history, "obs", std::nullopt, f);
  REQUIRE(prompt.ok());
  const std::string& text = prompt.value();
  const size_t feedback_at = text.find("DEBUG FEEDBACK (must follow):");
  const size_t guidance_at = text.find("Check the countertop before any cabinet.");
  const size_t memory_at = text.find("You should first recall");
  REQUIRE(feedback_at != std::string::npos);
  REQUIRE(guidance_at != std::string::npos);
  REQUIRE(memory_at != std::string::npos);
  CHECK(feedback_at < guidance_at);
  CHECK(guidance_at < memory_at);

  // steps before the target carry no feedback
  auto early = build_step_prompt(store, config, "task", {}, "obs", std::nullopt, f);
  REQUIRE(early.ok());
  CHECK(early.value().find("DEBUG FEEDBACK") == std::string::npos);
}

TEST_CASE("parse_agent_completion extracts tags and classifies actions") {
  auto parsed = parse_agent_completion("<plan>search</plan><action>go to cabinet 1</action>",
                                       StrategyId::react);
  CHECK(parsed.module_outputs.at(ModuleKind::planning) == "search");
  CHECK(parsed.action.kind == CanonicalAction::Kind::env_action);
  CHECK(parsed.action.text == "go to cabinet 1");

  auto tool = parse_agent_completion(
      "<plan>look it up</plan><action> action: search parameters: {\"query\": \"x\"} </action>",
      StrategyId::react);
  CHECK(tool.action.kind == CanonicalAction::Kind::tool_call);
  CHECK(tool.action.tool_name == "search");
  CHECK(tool.action.tool_parameters.at("query") == "x");

  auto bracketed = parse_agent_completion(
      "<action> tool: [web_search] parameters: {\"q\": \"42\"} </action>", StrategyId::act_only);
  CHECK(bracketed.action.tool_name == "web_search");

  auto answer = parse_agent_completion("<plan>done</plan><answer>Paris</answer>",
                                       StrategyId::react);
  CHECK(answer.action.kind == CanonicalAction::Kind::final_answer);
  CHECK(answer.action.text == "Paris");

  auto none = parse_agent_completion("I refuse to use tags.", StrategyId::modular);
  CHECK(none.action.kind == CanonicalAction::Kind::invalid);
  CHECK(none.action.text == "I refuse to use tags.");
  CHECK(none.module_outputs.empty());

  // tags outside the strategy's module set are dropped
  auto filtered = parse_agent_completion(
      "<memory>m</memory><plan>p</plan><action>a</action>", StrategyId::act_only);
  CHECK(filtered.module_outputs.count(ModuleKind::memory) == 0);
  CHECK(filtered.module_outputs.count(ModuleKind::planning) == 0);
  CHECK(filtered.module_outputs.at(ModuleKind::action) == "a");
}

TEST_CASE("normalize_action matches against the admissible list") {
  std::vector<std::string> admissible = {"go to cabinet 1", "go to countertop 1",
                                         "examine cabinet 1"};
  auto exact = normalize_action("  Go To Cabinet 1 ", admissible);
  CHECK(exact.kind == CanonicalAction::Kind::env_action);
  CHECK(exact.text == "go to cabinet 1");

  auto free = normalize_action("open drawer", std::nullopt);
  CHECK(free.text == "open drawer");

  // ambiguous prefix passes through verbatim
  auto ambiguous = normalize_action("go", admissible);
  CHECK(ambiguous.text == "go");

  auto unique_prefix = normalize_action("examine", admissible);
  CHECK(unique_prefix.text == "examine cabinet 1");
}

TEST_CASE("format_action_history windows and truncation") {
  CHECK(format_action_history({}, 10) == "");

  std::vector<StepRecord> two = {make_history_step(1), make_history_step(2)};
  CHECK(split_lines(format_action_history(two, 10)).size() == 2);

  std::vector<StepRecord> many;
  for (int i = 1; i <= 15; ++i) many.push_back(make_history_step(i));
  auto lines = split_lines(format_action_history(many, 10));
  REQUIRE(lines.size() == 10);
  CHECK(lines.front().rfind("Step 6 —", 0) == 0);
  CHECK(lines.back().rfind("Step 15 —", 0) == 0);

  StepRecord long_obs = make_history_step(1);
  long_obs.observation = std::string(2000, 'x');
  auto truncated = format_action_history({long_obs}, 10, 100);
  CHECK(truncated.find("[...]") != std::string::npos);
  CHECK(truncated.size() < 400);
}

TEST_CASE("module-set conformance across strategies") {
  auto store = prompts();
  // the scripted agent emits every tag at every step; the engine must keep
  // only what the strategy allows
  for (StrategyId strategy : kAllStrategies) {
    GridWorldEnv env(mug_task(4));
    ScriptedClient agent(std::vector<ScriptEntry>{
        ScriptEntry{{}, modular_completion("go to cabinet 1"), std::nullopt}});
    auto result =
        run_rollout(gridworld_config(4, strategy), store, env, agent, {"conformance", 1});
    REQUIRE(result.ok());
    for (const auto& step : result.value().steps) {
      const auto allowed_here = module_set_at(strategy, step.index);
      for (const auto& [module, _] : step.module_outputs) {
        CHECK(std::find(allowed_here.begin(), allowed_here.end(), module) !=
              allowed_here.end());
      }
      if (step.index == 1) {
        CHECK(step.module_outputs.count(ModuleKind::memory) == 0);
        CHECK(step.module_outputs.count(ModuleKind::reflection) == 0);
      }
    }
  }
}

TEST_CASE("determinism: identical scripted runs serialize identically") {
  auto store = prompts();
  auto run_once = [&] {
    GridWorldEnv env(mug_task());
    ScriptedClient agent(mug_solution_completions());
    return serialize(run_rollout(gridworld_config(), store, env, agent, {"det-1", 42}).take());
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("tag-parse agreement: steps re-parse to their stored outputs") {
  auto store = prompts();
  GridWorldEnv env(mug_task());
  ScriptedClient agent(mug_solution_completions());
  auto result = run_rollout(gridworld_config(), store, env, agent, {"reparse", 7});
  REQUIRE(result.ok());
  for (const auto& step : result.value().steps) {
    auto reparsed = parse_agent_completion(step.raw_completion,
                                           module_set_at(StrategyId::modular, step.index));
    CHECK(reparsed.module_outputs == step.module_outputs);
    CanonicalAction action = reparsed.action;
    if (action.kind == CanonicalAction::Kind::env_action)
      action = normalize_action(action.text, step.admissible_actions);
    CHECK(action == step.action);
  }
}

TEST_CASE("gaia template set renders tool instructions and the last-step variant") {
  auto store = prompts();
  RolloutConfig config;
  config.strategy = StrategyId::modular;
  config.template_set = "gaia";
  config.step_cap = 3;

  auto first = build_step_prompt(store, config, "find the answer", {}, "no observation yet",
                                 std::vector<std::string>{"search", "calculator"});
  REQUIRE(first.ok());
  CHECK(first.value().rfind("You are an expert research assistant", 0) == 0);
  CHECK(first.value().find("Format for tool usage:") != std::string::npos);
  CHECK(first.value().find("parameters: {\"param1\": \"value1\", \"param2\": \"value2\"}") !=
        std::string::npos);

  std::vector<StepRecord> history = {make_history_step(1), make_history_step(2)};
  auto last = build_step_prompt(store, config, "find the answer", history, "final obs",
                                std::nullopt);
  REQUIRE(last.ok());
  CHECK(last.value().find("this is the final step") != std::string::npos);
  CHECK(last.value().find("<answer>") != std::string::npos);
  // full history mode: both prior steps are listed
  CHECK(last.value().find("Step 1 —") != std::string::npos);
  CHECK(last.value().find("Step 2 —") != std::string::npos);
}
