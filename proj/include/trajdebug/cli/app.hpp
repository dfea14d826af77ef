#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "trajdebug/core/json_io.hpp"
#include "trajdebug/env/grid_world.hpp"
#include "trajdebug/env/replay_env.hpp"
#include "trajdebug/eval/benchmark.hpp"
#include "trajdebug/eval/propagation.hpp"
#include "trajdebug/gateway/http_client.hpp"
#include "trajdebug/pipeline/baselines.hpp"
#include "trajdebug/pipeline/debug_loop.hpp"

namespace trajdbg::cli {

namespace fs = std::filesystem;

// Exit codes: 0 ok, 1 usage/config, 2 runtime.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;
inline constexpr int kRuntimeError = 2;

struct RunConfig {
  std::string backend = "scripted";  // scripted | live
  std::string script_path;           // scripted backend playback file
  std::string judge_script_path;     // separate playback for judge calls
  std::string model_id = "scripted";
  double temperature = 0.0;
  std::string env_name = "gridworld";  // gridworld | replay
  std::string strategy = "modular";
  int step_cap = 30;
  int history_window = 10;
  int budget = 5;
  int64_t token_budget = 0;  // 0 = unlimited
  std::string output_dir = "out";
  int64_t seed = 0;
  int jobs = 1;
  bool micro = false;
  std::string prompts_dir;
  std::string endpoint;
  std::string api_key;
};

namespace detail {

inline int fail(int code, Errc errc, const std::string& message) {
  std::cerr << "ERROR " << errc_name(errc) << ": " << message << "\n";
  return code;
}

inline int fail(int code, const Error& error) {
  std::cerr << "ERROR " << errc_name(error.code) << ": " << error.message << "\n";
  return code;
}

inline std::string default_prompts_dir() {
#ifdef TRAJDBG_PROMPT_DIR
  return TRAJDBG_PROMPT_DIR;
#else
  return "prompts";
#endif
}

// Precedence: flags > config file > environment variables > defaults.
// The layering below seeds the option targets before CLI11 parses the
// command line, so CLI11 only overwrites what the user actually passed.
inline void apply_environment(RunConfig& config) {
  if (const char* v = std::getenv("TRAJDBG_ENDPOINT")) config.endpoint = v;
  if (const char* v = std::getenv("TRAJDBG_API_KEY")) config.api_key = v;
  if (const char* v = std::getenv("TRAJDBG_MODEL")) config.model_id = v;
  if (const char* v = std::getenv("TRAJDBG_PROMPTS")) config.prompts_dir = v;
}

inline Status apply_config_file(RunConfig& config, const std::string& path) {
  auto text = read_text_file(path);
  if (!text.ok()) return text.error();
  nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    return err(Errc::schema_violation, "config file must be a JSON object");
  config.backend = j.value("backend", config.backend);
  config.script_path = j.value("script", config.script_path);
  config.judge_script_path = j.value("judge_script", config.judge_script_path);
  config.model_id = j.value("model", config.model_id);
  config.temperature = j.value("temperature", config.temperature);
  config.env_name = j.value("env", config.env_name);
  config.strategy = j.value("strategy", config.strategy);
  config.step_cap = j.value("step_cap", config.step_cap);
  config.history_window = j.value("history_window", config.history_window);
  config.budget = j.value("budget", config.budget);
  config.token_budget = j.value("token_budget", config.token_budget);
  config.output_dir = j.value("out", config.output_dir);
  config.seed = j.value("seed", config.seed);
  config.jobs = j.value("jobs", config.jobs);
  config.prompts_dir = j.value("prompts", config.prompts_dir);
  config.endpoint = j.value("endpoint", config.endpoint);
  config.api_key = j.value("api_key", config.api_key);
  return ok_status();
}

inline Result<std::vector<ScriptEntry>> script_from_json(const nlohmann::json& j) {
  std::vector<ScriptEntry> entries;
  if (j.contains("responses")) {
    for (const auto& r : j["responses"]) {
      if (!r.is_string()) return err(Errc::schema_violation, "responses must be strings");
      entries.push_back(ScriptEntry::once(r.get<std::string>()));
    }
    return entries;
  }
  if (!j.contains("entries") || !j["entries"].is_array())
    return err(Errc::schema_violation, "script needs 'responses' or 'entries'");
  for (const auto& e : j["entries"]) {
    ScriptEntry entry;
    if (e.contains("match")) {
      if (e["match"].is_string())
        entry.match.push_back(e["match"].get<std::string>());
      else if (e["match"].is_array())
        for (const auto& m : e["match"]) entry.match.push_back(m.get<std::string>());
    }
    if (!e.contains("response") || !e["response"].is_string())
      return err(Errc::schema_violation, "script entry needs a response string");
    entry.response = e["response"].get<std::string>();
    if (e.contains("max_uses") && !e["max_uses"].is_null())
      entry.max_uses = e["max_uses"].get<int>();
    else
      entry.max_uses = std::nullopt;
    entries.push_back(std::move(entry));
  }
  return entries;
}

inline Result<std::unique_ptr<ChatClient>> make_client(const RunConfig& config,
                                                       const std::string& script_path) {
  if (config.backend == "scripted") {
    if (script_path.empty())
      return err(Errc::precondition, "scripted backend requires a script file");
    auto text = read_text_file(script_path);
    if (!text.ok()) return text.error();
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded()) return err(Errc::schema_violation, "script file is not JSON");
    auto entries = script_from_json(j);
    if (!entries.ok()) return entries.error();
    auto client = std::make_unique<ScriptedClient>(entries.take(), j.value("repeat_last", false));
    if (config.token_budget > 0) client->arm_budget(config.token_budget);
    return std::unique_ptr<ChatClient>(std::move(client));
  }
  if (config.backend == "live") {
    HttpClientConfig http;
    http.base_url = config.endpoint;
    http.api_key = config.api_key;
    http.default_model = config.model_id;
    auto client = std::make_unique<HttpChatClient>(http);
    if (config.token_budget > 0) client->arm_budget(config.token_budget);
    return std::unique_ptr<ChatClient>(std::move(client));
  }
  return err(Errc::precondition, "unknown backend: " + config.backend);
}

inline Status write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) return err(Errc::io_error, "cannot write " + path.string());
  out << content;
  return ok_status();
}

inline Result<Trajectory> load_trajectory(const fs::path& path) {
  auto text = read_text_file(path);
  if (!text.ok()) return text.error();
  return deserialize(text.value());
}

inline RolloutConfig rollout_config(const RunConfig& config) {
  RolloutConfig rc;
  auto strategy = strategy_from_string(config.strategy);
  rc.strategy = strategy.value_or(StrategyId::modular);
  rc.history_window = config.history_window;
  rc.step_cap = config.step_cap;
  rc.model_id = config.model_id;
  rc.temperature = config.temperature;
  return rc;
}

// Task-level parallelism: run `work(i)` for i in [0, n) on `jobs` threads.
// Results are slotted by index, so output order stays deterministic.
inline void for_each_task(int n, int jobs, const std::function<void(int)>& work) {
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min(jobs, n); ++j)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
    });
  for (auto& t : pool) t.join();
}

inline Result<EnvFactory> env_factory_for(const RunConfig& config, const fs::path& world_path,
                                          const std::optional<Trajectory>& source) {
  if (config.env_name == "gridworld") {
    auto text = read_text_file(world_path);
    if (!text.ok()) return text.error();
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded()) return err(Errc::schema_violation, "world file is not JSON");
    auto spec = world_from_json(j);
    if (!spec.ok()) return spec.error();
    WorldSpec world = spec.take();
    return EnvFactory([world] { return std::make_unique<GridWorldEnv>(world); });
  }
  if (config.env_name == "replay") {
    if (!source) return err(Errc::precondition, "replay environment needs a source trajectory");
    Trajectory copy = *source;
    int cap = config.step_cap;
    return EnvFactory([copy, cap] { return std::make_unique<ReplayEnv>(copy, cap); });
  }
  return err(Errc::precondition, "unknown env: " + config.env_name);
}

}  // namespace detail

inline int cmd_rollout(const RunConfig& config, const std::vector<std::string>& world_files) {
  if (world_files.empty())
    return detail::fail(kConfigError, Errc::precondition, "rollout needs at least one --world");
  PromptStore prompts{fs::path(config.prompts_dir)};
  auto client = detail::make_client(config, config.script_path);
  if (!client.ok()) return detail::fail(kConfigError, client.error());

  int exit_code = kOk;
  std::mutex io_mutex;
  std::vector<std::string> task_ids(world_files.size());
  detail::for_each_task(static_cast<int>(world_files.size()), config.jobs, [&](int i) {
    auto handle_error = [&](int code, const Error& error) {
      std::lock_guard<std::mutex> lock(io_mutex);
      exit_code = std::max(exit_code, code);
      std::cerr << "ERROR " << errc_name(error.code) << ": " << error.message << "\n";
    };
    auto text = read_text_file(world_files[i]);
    if (!text.ok()) return handle_error(kConfigError, text.error());
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded())
      return handle_error(kConfigError, err(Errc::schema_violation, "world file is not JSON"));
    auto spec = world_from_json(j);
    if (!spec.ok()) return handle_error(kConfigError, spec.error());

    GridWorldEnv env(spec.value());
    RolloutConfig rc = detail::rollout_config(config);
    rc.step_cap = env.descriptor().step_cap;
    rc.template_set = "gridworld";
    auto trajectory = run_rollout(rc, prompts, env, *client.value(),
                                  {spec.value().world_id, config.seed});
    if (!trajectory.ok()) return handle_error(kRuntimeError, trajectory.error());
    if (trajectory.value().outcome == Outcome::halt(HaltReason::environment_error)) {
      std::lock_guard<std::mutex> lock(io_mutex);
      exit_code = std::max(exit_code, kRuntimeError);
    }
    auto written =
        detail::write_file(fs::path(config.output_dir) /
                               (spec.value().world_id + ".0.json"),
                           serialize(trajectory.value()));
    if (!written.ok()) return handle_error(kRuntimeError, written.error());
    std::lock_guard<std::mutex> lock(io_mutex);
    task_ids[i] = spec.value().world_id;
  });
  for (const auto& id : task_ids)
    if (!id.empty()) std::cout << "wrote " << id << ".0.json\n";
  return exit_code;
}

inline int cmd_detect(const RunConfig& config, const std::vector<std::string>& trajectory_files) {
  if (trajectory_files.empty())
    return detail::fail(kConfigError, Errc::precondition, "detect needs --trajectory files");
  PromptStore prompts{fs::path(config.prompts_dir)};
  auto judge = detail::make_client(config, config.judge_script_path.empty()
                                               ? config.script_path
                                               : config.judge_script_path);
  if (!judge.ok()) return detail::fail(kConfigError, judge.error());
  JudgeConfig jc;
  jc.history_window = config.history_window;
  jc.model_id = config.model_id;

  for (const auto& file : trajectory_files) {
    auto trajectory = detail::load_trajectory(file);
    if (!trajectory.ok()) return detail::fail(kConfigError, trajectory.error());
    auto profile = detect_all(trajectory.value(), *judge.value(), prompts, jc);
    if (!profile.ok()) return detail::fail(kRuntimeError, profile.error());
    auto written = detail::write_file(
        fs::path(config.output_dir) / (trajectory.value().task_id + ".profile.json"),
        to_json(profile.value()).dump(2) + "\n");
    if (!written.ok()) return detail::fail(kRuntimeError, written.error());
    std::cout << "wrote " << trajectory.value().task_id << ".profile.json ("
              << profile.value().detections.size() << " detections)\n";
  }
  return kOk;
}

inline int cmd_analyze(const RunConfig& config, const std::vector<std::string>& trajectory_files,
                       const std::string& method) {
  if (trajectory_files.empty())
    return detail::fail(kConfigError, Errc::precondition, "analyze needs --trajectory files");
  PromptStore prompts{fs::path(config.prompts_dir)};
  auto judge = detail::make_client(config, config.judge_script_path.empty()
                                               ? config.script_path
                                               : config.judge_script_path);
  if (!judge.ok()) return detail::fail(kConfigError, judge.error());
  JudgeConfig jc;
  jc.history_window = config.history_window;
  jc.model_id = config.model_id;

  for (const auto& file : trajectory_files) {
    auto trajectory = detail::load_trajectory(file);
    if (!trajectory.ok()) return detail::fail(kConfigError, trajectory.error());
    Result<CriticalDiagnosis> diagnosis = err(Errc::precondition, "unreachable");
    if (method == "holistic") {
      auto profile = detect_all(trajectory.value(), *judge.value(), prompts, jc);
      if (!profile.ok()) return detail::fail(kRuntimeError, profile.error());
      diagnosis =
          analyze_critical(trajectory.value(), profile.value(), 1, {}, *judge.value(), prompts, jc);
    } else if (method == "direct") {
      diagnosis = direct_prompt_localize(trajectory.value(), *judge.value(), prompts, jc);
    } else {
      return detail::fail(kConfigError, Errc::precondition, "unknown --method " + method);
    }
    if (!diagnosis.ok()) return detail::fail(kRuntimeError, diagnosis.error());
    auto written = detail::write_file(
        fs::path(config.output_dir) / (trajectory.value().task_id + ".diagnosis.json"),
        to_json(diagnosis.value()).dump(2) + "\n");
    if (!written.ok()) return detail::fail(kRuntimeError, written.error());
    std::cout << "wrote " << trajectory.value().task_id << ".diagnosis.json (critical step "
              << diagnosis.value().critical_step << ")\n";
  }
  return kOk;
}

inline int cmd_debug(const RunConfig& config, const std::vector<std::string>& trajectory_files,
                     const std::string& worlds_dir) {
  if (trajectory_files.empty())
    return detail::fail(kConfigError, Errc::precondition, "debug needs --trajectory files");
  if (config.budget < 1)
    return detail::fail(kConfigError, Errc::precondition, "budget must be >= 1");
  PromptStore prompts{fs::path(config.prompts_dir)};
  auto judge = detail::make_client(config, config.judge_script_path.empty()
                                               ? config.script_path
                                               : config.judge_script_path);
  if (!judge.ok()) return detail::fail(kConfigError, judge.error());
  auto agent = detail::make_client(config, config.script_path);
  if (!agent.ok()) return detail::fail(kConfigError, agent.error());

  DebugOptions options;
  options.budget = config.budget;
  options.history_window = config.history_window;
  options.judge.history_window = config.history_window;
  options.judge.model_id = config.model_id;

  int initial_successes = 0, final_successes = 0;
  std::map<int, int> attempts_histogram;
  TokenUsage usage_total;

  for (const auto& file : trajectory_files) {
    auto trajectory = detail::load_trajectory(file);
    if (!trajectory.ok()) return detail::fail(kConfigError, trajectory.error());

    const fs::path world_path =
        fs::path(worlds_dir) / (trajectory.value().task_id + ".world.json");
    auto factory = detail::env_factory_for(config, world_path,
                                           std::optional<Trajectory>(trajectory.value()));
    if (!factory.ok()) return detail::fail(kConfigError, factory.error());

    auto result =
        debug_loop(trajectory.value(), factory.value(), *judge.value(), *agent.value(), prompts,
                   options);
    if (!result.ok()) return detail::fail(kRuntimeError, result.error());

    const DebugResult& r = result.value();
    if (r.initial.outcome.is_success()) ++initial_successes;
    if (r.final_outcome.is_success()) ++final_successes;
    ++attempts_histogram[static_cast<int>(r.attempts.size())];
    usage_total += r.total_usage;

    auto written = detail::write_file(
        fs::path(config.output_dir) / (trajectory.value().task_id + ".debug.json"),
        to_json(r).dump(2) + "\n");
    if (!written.ok()) return detail::fail(kRuntimeError, written.error());
    // each attempt trajectory also lands as {task_id}.{attempt}.json
    for (size_t k = 0; k < r.attempts.size(); ++k) {
      auto attempt_written = detail::write_file(
          fs::path(config.output_dir) /
              (trajectory.value().task_id + "." + std::to_string(k + 1) + ".json"),
          serialize(r.attempts[k].trajectory));
      if (!attempt_written.ok()) return detail::fail(kRuntimeError, attempt_written.error());
    }
  }

  std::cout << "tasks:             " << trajectory_files.size() << "\n";
  std::cout << "initial successes: " << initial_successes << "\n";
  std::cout << "final successes:   " << final_successes << "\n";
  std::cout << "attempts histogram:";
  for (const auto& [attempts, count] : attempts_histogram)
    std::cout << " " << attempts << "x" << count;
  std::cout << "\n";
  std::cout << "total usage:       " << usage_total.total() << " tokens\n";
  return kOk;
}

inline int cmd_eval_detection(const RunConfig& config,
                              const std::vector<std::string>& prediction_files,
                              const std::string& benchmark_file) {
  auto benchmark = load_benchmark(benchmark_file);
  if (!benchmark.ok()) return detail::fail(kConfigError, benchmark.error());

  // --pred accepts files or directories of *.json diagnoses
  std::vector<std::string> expanded;
  for (const auto& path : prediction_files) {
    if (fs::is_directory(path)) {
      for (const auto& entry : fs::directory_iterator(path))
        if (entry.path().extension() == ".json") expanded.push_back(entry.path().string());
    } else {
      expanded.push_back(path);
    }
  }
  std::sort(expanded.begin(), expanded.end());

  std::map<std::string, CriticalDiagnosis> predictions;
  for (const auto& file : expanded) {
    auto text = read_text_file(file);
    if (!text.ok()) return detail::fail(kConfigError, text.error());
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded())
      return detail::fail(kConfigError, Errc::schema_violation,
                          file + " is not a JSON diagnosis");
    auto diagnosis = diagnosis_from_json(j);
    if (!diagnosis.ok()) return detail::fail(kConfigError, diagnosis.error());
    predictions[diagnosis.value().trajectory_id] = diagnosis.take();
  }

  // group by env_name: each source environment is one dataset
  std::map<std::string, std::vector<std::pair<CriticalDiagnosis, GoldAnnotation>>> by_dataset;
  for (const auto& item : benchmark.value()) {
    auto it = predictions.find(item.annotation.trajectory_id);
    if (it == predictions.end())
      return detail::fail(kConfigError, Errc::id_mismatch,
                          "no prediction for " + item.annotation.trajectory_id);
    by_dataset[item.trajectory.env_name].push_back({it->second, item.annotation});
  }
  if (by_dataset.empty())
    return detail::fail(kConfigError, Errc::empty_set, "benchmark has no items");

  std::vector<std::pair<std::string, DetectionMetrics>> rows;
  std::vector<DetectionMetrics> per_dataset;
  for (const auto& [dataset, pairs] : by_dataset) {
    auto metrics = compute_detection_metrics(pairs);
    if (!metrics.ok()) return detail::fail(kRuntimeError, metrics.error());
    rows.push_back({dataset, metrics.value()});
    per_dataset.push_back(metrics.value());
  }
  auto average = config.micro ? micro_average(per_dataset) : macro_average(per_dataset);
  if (!average.ok()) return detail::fail(kRuntimeError, average.error());

  std::cout << render_metrics_table(rows, average.value());
  nlohmann::json report{{"average", to_json(average.value())},
                        {"averaging", config.micro ? "micro" : "macro"}};
  for (const auto& [dataset, metrics] : rows) report["datasets"][dataset] = to_json(metrics);
  auto written = detail::write_file(fs::path(config.output_dir) / "detection_metrics.json",
                                    report.dump(2) + "\n");
  if (!written.ok()) return detail::fail(kRuntimeError, written.error());
  return kOk;
}

inline int cmd_propagation(const RunConfig& config, const std::vector<std::string>& profile_files,
                           const std::vector<std::string>& diagnosis_files) {
  if (profile_files.empty())
    return detail::fail(kConfigError, Errc::precondition, "propagation needs --profile files");
  std::vector<ErrorProfile> profiles;
  for (const auto& file : profile_files) {
    auto text = read_text_file(file);
    if (!text.ok()) return detail::fail(kConfigError, text.error());
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded())
      return detail::fail(kConfigError, Errc::schema_violation, file + " is not JSON");
    auto profile = profile_from_json(j);
    if (!profile.ok()) return detail::fail(kConfigError, profile.error());
    profiles.push_back(profile.take());
  }
  std::vector<CriticalDiagnosis> diagnoses;
  for (const auto& file : diagnosis_files) {
    auto text = read_text_file(file);
    if (!text.ok()) return detail::fail(kConfigError, text.error());
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded())
      return detail::fail(kConfigError, Errc::schema_violation, file + " is not JSON");
    auto diagnosis = diagnosis_from_json(j);
    if (!diagnosis.ok()) return detail::fail(kConfigError, diagnosis.error());
    diagnoses.push_back(diagnosis.take());
  }

  auto matrix = propagation_matrix(profiles, diagnoses);
  if (!matrix.ok()) return detail::fail(kConfigError, matrix.error());
  auto written = detail::write_file(fs::path(config.output_dir) / "propagation.csv",
                                    to_csv(matrix.value()));
  if (!written.ok()) return detail::fail(kRuntimeError, written.error());
  std::cout << matrix.value().trajectory_ids.size() << " rows, " << matrix.value().columns
            << " step columns\n";
  return kOk;
}

inline int cmd_bench_validate(const std::string& benchmark_file) {
  auto benchmark = load_benchmark(benchmark_file);
  if (!benchmark.ok()) return detail::fail(kConfigError, benchmark.error());
  std::cout << "ok: " << benchmark.value().size() << " items\n";
  return kOk;
}

// argv-style entry point shared by the binary and the test suite.
inline int run(std::vector<std::string> args) {
  RunConfig config;
  config.prompts_dir = detail::default_prompts_dir();
  detail::apply_environment(config);

  // --config is fished out ahead of CLI11 so the file sits between env vars
  // and explicit flags in the precedence order
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      auto applied = detail::apply_config_file(config, args[i + 1]);
      if (!applied.ok()) return detail::fail(kConfigError, applied.error());
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
  }

  CLI::App app{"Trajectory debugging toolkit: rollout, per-module error detection, "
               "critical-step localization, and feedback-guided re-rollout."};
  app.require_subcommand(1);

  app.add_option("--backend", config.backend, "Model backend: scripted | live");
  app.add_option("--script", config.script_path, "Playback file for the scripted backend");
  app.add_option("--judge-script", config.judge_script_path,
                 "Separate playback file for judge calls");
  app.add_option("--model", config.model_id, "Model id");
  app.add_option("--temperature", config.temperature, "Sampling temperature");
  app.add_option("--env", config.env_name, "Environment: gridworld | replay");
  app.add_option("--strategy", config.strategy,
                 "Rollout strategy: modular|react|reflection|act_only|memory_react");
  app.add_option("--step-cap", config.step_cap, "Maximum steps per episode");
  app.add_option("--history-window", config.history_window, "Prompt history window K");
  app.add_option("--budget", config.budget, "Debug re-rollout budget I");
  app.add_option("--token-budget", config.token_budget, "Armed token budget (0 = unlimited)");
  app.add_option("--out", config.output_dir, "Output directory");
  app.add_option("--seed", config.seed, "Base seed; derived seeds count up from it");
  app.add_option("--jobs", config.jobs, "Task-level parallelism (default 1)");
  app.add_flag("--micro", config.micro, "Micro-average instead of macro");
  app.add_option("--prompts", config.prompts_dir, "Prompt template directory");
  app.add_option("--endpoint", config.endpoint, "Live backend base URL");
  app.add_option("--api-key", config.api_key, "Live backend credential");

  std::vector<std::string> world_files, trajectory_files, prediction_files, profile_files,
      diagnosis_files;
  std::string benchmark_file, worlds_dir, method = "holistic";

  auto* rollout = app.add_subcommand("rollout", "Run one episode per world file");
  rollout->add_option("--world", world_files, "Grid-world spec JSON (repeatable)");

  auto* debug = app.add_subcommand("debug", "Run the three-stage debug loop per trajectory");
  debug->add_option("--trajectory", trajectory_files, "Trajectory JSON (repeatable)");
  debug->add_option("--worlds-dir", worlds_dir, "Directory of {task_id}.world.json files");

  auto* detect = app.add_subcommand("detect", "Stage-1 per-module detection per trajectory");
  detect->add_option("--trajectory", trajectory_files, "Trajectory JSON (repeatable)");

  auto* analyze = app.add_subcommand("analyze", "Stage-2 critical-error diagnosis");
  analyze->add_option("--trajectory", trajectory_files, "Trajectory JSON (repeatable)");
  analyze->add_option("--method", method, "holistic | direct");

  auto* eval = app.add_subcommand("eval-detection", "Score diagnoses against a benchmark");
  eval->add_option("--pred", prediction_files, "Diagnosis JSON files (repeatable)");
  eval->add_option("--benchmark", benchmark_file, "Benchmark bundle JSON")->required();

  auto* propagation = app.add_subcommand("propagation", "Export the error-propagation CSV");
  propagation->add_option("--profile", profile_files, "Error profile JSON (repeatable)");
  propagation->add_option("--diagnosis", diagnosis_files, "Diagnosis JSON (repeatable)");

  auto* bench = app.add_subcommand("bench-validate", "Validate a benchmark bundle");
  bench->add_option("--benchmark", benchmark_file, "Benchmark bundle JSON")->required();

  std::vector<const char*> argv;
  argv.push_back("trajdebug");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return kOk;
    }
    std::cerr << "ERROR usage: " << e.what() << "\n";
    return kConfigError;
  }

  if (rollout->parsed()) return cmd_rollout(config, world_files);
  if (debug->parsed()) return cmd_debug(config, trajectory_files, worlds_dir);
  if (detect->parsed()) return cmd_detect(config, trajectory_files);
  if (analyze->parsed()) return cmd_analyze(config, trajectory_files, method);
  if (eval->parsed()) return cmd_eval_detection(config, prediction_files, benchmark_file);
  if (propagation->parsed()) return cmd_propagation(config, profile_files, diagnosis_files);
  if (bench->parsed()) return cmd_bench_validate(benchmark_file);
  return kConfigError;
}

}  // namespace trajdbg::cli
