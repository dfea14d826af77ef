#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "fixture_helpers.hpp"
#include "trajdebug/cli/app.hpp"

using namespace trajdbg;
using namespace trajdbg::testfix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

void write(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string slurp(const fs::path& p) {
  auto text = read_text_file(p);
  REQUIRE(text.ok());
  return text.value();
}

nlohmann::json script_json(const std::vector<ScriptEntry>& entries, bool repeat_last = false) {
  nlohmann::json out{{"repeat_last", repeat_last}, {"entries", nlohmann::json::array()}};
  for (const auto& e : entries) {
    nlohmann::json entry{{"response", e.response}};
    if (!e.match.empty()) entry["match"] = e.match;
    if (e.max_uses)
      entry["max_uses"] = *e.max_uses;
    else
      entry["max_uses"] = nullptr;
    out["entries"].push_back(entry);
  }
  return out;
}

// world + solving script reused across the CLI tests
void write_mug_fixture(const TempDir& dir) {
  write(dir.path / "mug-task.world.json", to_json(mug_task(12)).dump(2));
  std::vector<ScriptEntry> entries;
  for (const auto& c : mug_solution_completions()) entries.push_back(ScriptEntry::once(c));
  write(dir.path / "solve.script.json", script_json(entries).dump(2));
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  return files;
}

int run_cli(std::vector<std::string> args) { return cli::run(std::move(args)); }

}  // namespace

TEST_CASE("rollout writes a trajectory file and exits cleanly") {
  TempDir dir("trajdbg-cli-rollout");
  write_mug_fixture(dir);

  int code = run_cli({"--backend", "scripted", "--script", dir.str("solve.script.json"),
                      "--out", dir.str("out"), "rollout", "--world",
                      dir.str("mug-task.world.json")});
  CHECK(code == 0);
  REQUIRE(fs::exists(dir.path / "out" / "mug-task.0.json"));
  auto trajectory = deserialize(slurp(dir.path / "out" / "mug-task.0.json"));
  REQUIRE(trajectory.ok());
  CHECK(trajectory.value().outcome.is_success());
  CHECK(trajectory.value().length() == 6);
}

TEST_CASE("rollout with a missing world file exits 1") {
  TempDir dir("trajdbg-cli-missing");
  write_mug_fixture(dir);
  int code = run_cli({"--backend", "scripted", "--script", dir.str("solve.script.json"),
                      "--out", dir.str("out"), "rollout", "--world", dir.str("nope.json")});
  CHECK(code == 1);
}

TEST_CASE("scripted backend without a script exits 1; budget 0 rejected for debug") {
  TempDir dir("trajdbg-cli-noscript");
  write_mug_fixture(dir);
  CHECK(run_cli({"--backend", "scripted", "--out", dir.str("out"), "rollout", "--world",
                 dir.str("mug-task.world.json")}) == 1);
  CHECK(run_cli({"--backend", "scripted", "--script", dir.str("solve.script.json"), "--budget",
                 "0", "--out", dir.str("out"), "debug", "--trajectory",
                 dir.str("whatever.json")}) == 1);
}

TEST_CASE("detect then analyze then propagation produce joined artifacts") {
  TempDir dir("trajdbg-cli-pipeline");
  write_mug_fixture(dir);

  // a failing run: agent only ever examines the doorway-adjacent cabinet
  std::vector<ScriptEntry> wander = {
      ScriptEntry{{}, modular_completion("go to cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("examine cabinet 1"), std::nullopt}};
  write(dir.path / "wander.script.json", script_json(wander).dump(2));
  REQUIRE(run_cli({"--backend", "scripted", "--script", dir.str("wander.script.json"), "--out",
                   dir.str("out"), "rollout", "--world", dir.str("mug-task.world.json")}) == 0);
  const std::string trajectory_file = dir.str("out/mug-task.0.json");

  // judge script: clean detections everywhere, one analyzer verdict
  std::vector<ScriptEntry> judge = {
      ScriptEntry::keyed("MODULE TO ANALYZE",
                         R"({"error_detected": false, "error_type": "no_error"})"),
      ScriptEntry::keyed("identify the CRITICAL ERROR",
                         R"({"critical_step": 1, "critical_module": "planning",
                             "error_type": "inefficient_planning",
                             "correction_guidance": "go to the countertop"})")};
  write(dir.path / "judge.script.json", script_json(judge).dump(2));

  REQUIRE(run_cli({"--backend", "scripted", "--judge-script", dir.str("judge.script.json"),
                   "--script", dir.str("judge.script.json"), "--out", dir.str("out"), "detect",
                   "--trajectory", trajectory_file}) == 0);
  REQUIRE(fs::exists(dir.path / "out" / "mug-task.profile.json"));

  REQUIRE(run_cli({"--backend", "scripted", "--judge-script", dir.str("judge.script.json"),
                   "--script", dir.str("judge.script.json"), "--out", dir.str("out"), "analyze",
                   "--trajectory", trajectory_file}) == 0);
  REQUIRE(fs::exists(dir.path / "out" / "mug-task.diagnosis.json"));

  REQUIRE(run_cli({"--out", dir.str("out"), "propagation", "--profile",
                   dir.str("out/mug-task.profile.json"), "--diagnosis",
                   dir.str("out/mug-task.diagnosis.json")}) == 0);
  const std::string csv = slurp(dir.path / "out" / "propagation.csv");
  CHECK(csv.rfind("trajectory_id,step_1", 0) == 0);
  CHECK(csv.find("mug-task,2") != std::string::npos);  // first critical at step 1

  // duplicate diagnosis ids exit 1
  CHECK(run_cli({"--out", dir.str("out"), "propagation", "--profile",
                 dir.str("out/mug-task.profile.json"), "--diagnosis",
                 dir.str("out/mug-task.diagnosis.json"), "--diagnosis",
                 dir.str("out/mug-task.diagnosis.json")}) == 1);
}

TEST_CASE("debug flips the scripted fixture and prints the summary") {
  TempDir dir("trajdbg-cli-debug");
  // failing wander run on the mug world
  write(dir.path / "worlds" / "mug-task.world.json", to_json(mug_task(8)).dump(2));
  std::vector<ScriptEntry> wander = {
      ScriptEntry{{}, modular_completion("go to cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("open cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("examine cabinet 1"), std::nullopt}};
  write(dir.path / "wander.script.json", script_json(wander).dump(2));
  REQUIRE(run_cli({"--backend", "scripted", "--script", dir.str("wander.script.json"), "--out",
                   dir.str("out"), "rollout", "--world",
                   dir.str("worlds/mug-task.world.json")}) == 0);

  std::vector<ScriptEntry> judge = {
      ScriptEntry::keyed("MODULE TO ANALYZE",
                         R"({"error_detected": false, "error_type": "no_error"})"),
      ScriptEntry::keyed("identify the CRITICAL ERROR",
                         R"({"critical_step": 1, "critical_module": "planning",
                             "error_type": "inefficient_planning",
                             "correction_guidance": "Fetch the mug from countertop 1 first."})")};
  write(dir.path / "judge.script.json", script_json(judge).dump(2));

  std::vector<ScriptEntry> retry = {ScriptEntry::keyed_all(
      {"DEBUG FEEDBACK", "observation is: You are in the room"},
      modular_completion("go to countertop 1"))};
  for (auto& e : mug_recovery_policy()) retry.push_back(e);
  write(dir.path / "retry.script.json", script_json(retry).dump(2));

  int code = run_cli({"--backend", "scripted", "--judge-script", dir.str("judge.script.json"),
                      "--script", dir.str("retry.script.json"), "--budget", "3", "--out",
                      dir.str("out"), "debug", "--trajectory", dir.str("out/mug-task.0.json"),
                      "--worlds-dir", dir.str("worlds")});
  CHECK(code == 0);
  REQUIRE(fs::exists(dir.path / "out" / "mug-task.debug.json"));
  nlohmann::json result = nlohmann::json::parse(slurp(dir.path / "out" / "mug-task.debug.json"));
  CHECK(result["final_outcome"]["kind"] == "success");
  CHECK(result["initial"]["outcome"]["kind"] == "system_halt");
  CHECK(result["attempts"].size() == 1);
}

TEST_CASE("eval-detection prints the table layout and honors --micro") {
  TempDir dir("trajdbg-cli-eval");
  write_mug_fixture(dir);

  // build one benchmark item from a real failing run
  std::vector<ScriptEntry> wander = {
      ScriptEntry{{}, modular_completion("examine doorway"), std::nullopt}};
  write(dir.path / "wander.script.json", script_json(wander).dump(2));
  REQUIRE(run_cli({"--backend", "scripted", "--script", dir.str("wander.script.json"), "--out",
                   dir.str("out"), "rollout", "--world", dir.str("mug-task.world.json")}) == 0);
  auto trajectory = deserialize(slurp(dir.path / "out" / "mug-task.0.json")).take();

  GoldAnnotation gold;
  gold.trajectory_id = trajectory.task_id;
  gold.critical_step = 2;
  gold.module = ModuleKind::planning;
  gold.error_label = ErrorLabel{ModuleKind::planning, "inefficient_planning"};
  write(dir.path / "bench.json", benchmark_to_json({{trajectory, gold}}).dump(2));

  CriticalDiagnosis pred;
  pred.trajectory_id = trajectory.task_id;
  pred.critical_step = 2;
  pred.critical_module = ModuleKind::planning;
  pred.error_label = ErrorLabel{ModuleKind::planning, "inefficient_planning"};
  write(dir.path / "pred.json", to_json(pred).dump(2));

  REQUIRE(run_cli({"--out", dir.str("out"), "eval-detection", "--pred", dir.str("pred.json"),
                   "--benchmark", dir.str("bench.json")}) == 0);
  nlohmann::json report =
      nlohmann::json::parse(slurp(dir.path / "out" / "detection_metrics.json"));
  CHECK(report["average"]["step_acc"] == 1.0);
  CHECK(report["averaging"] == "macro");
  CHECK(report["datasets"].contains("gridworld"));

  REQUIRE(run_cli({"--out", dir.str("out"), "--micro", "eval-detection", "--pred",
                   dir.str("pred.json"), "--benchmark", dir.str("bench.json")}) == 0);
  nlohmann::json micro =
      nlohmann::json::parse(slurp(dir.path / "out" / "detection_metrics.json"));
  CHECK(micro["averaging"] == "micro");

  // disjoint prediction ids exit 1
  CriticalDiagnosis stranger = pred;
  stranger.trajectory_id = "stranger";
  write(dir.path / "stranger.json", to_json(stranger).dump(2));
  CHECK(run_cli({"--out", dir.str("out"), "eval-detection", "--pred", dir.str("stranger.json"),
                 "--benchmark", dir.str("bench.json")}) == 1);

  CHECK(run_cli({"bench-validate", "--benchmark", dir.str("bench.json")}) == 0);
  write(dir.path / "broken.json", "{\"schema_version\": 2, \"items\": []}");
  CHECK(run_cli({"bench-validate", "--benchmark", dir.str("broken.json")}) == 1);
}

TEST_CASE("identical scripted runs produce byte-identical output trees") {
  TempDir dir("trajdbg-cli-determinism");
  write_mug_fixture(dir);
  std::vector<ScriptEntry> wander = {
      ScriptEntry{{}, modular_completion("go to cabinet 1"), 1},
      ScriptEntry{{}, modular_completion("examine cabinet 1"), std::nullopt}};
  write(dir.path / "wander.script.json", script_json(wander).dump(2));
  std::vector<ScriptEntry> judge = {
      ScriptEntry::keyed("MODULE TO ANALYZE",
                         R"({"error_detected": false, "error_type": "no_error"})"),
      ScriptEntry::keyed("identify the CRITICAL ERROR",
                         R"({"critical_step": 1, "critical_module": "planning",
                             "error_type": "inefficient_planning",
                             "correction_guidance": "head to the countertop"})")};
  write(dir.path / "judge.script.json", script_json(judge).dump(2));

  auto run_all = [&](const std::string& out) {
    REQUIRE(run_cli({"--backend", "scripted", "--script", dir.str("wander.script.json"),
                     "--seed", "17", "--out", dir.str(out), "rollout", "--world",
                     dir.str("mug-task.world.json")}) == 0);
    REQUIRE(run_cli({"--backend", "scripted", "--judge-script", dir.str("judge.script.json"),
                     "--script", dir.str("judge.script.json"), "--out", dir.str(out), "detect",
                     "--trajectory", dir.str(out + "/mug-task.0.json")}) == 0);
    REQUIRE(run_cli({"--backend", "scripted", "--judge-script", dir.str("judge.script.json"),
                     "--script", dir.str("judge.script.json"), "--out", dir.str(out), "analyze",
                     "--trajectory", dir.str(out + "/mug-task.0.json")}) == 0);
    REQUIRE(run_cli({"--out", dir.str(out), "propagation", "--profile",
                     dir.str(out + "/mug-task.profile.json"), "--diagnosis",
                     dir.str(out + "/mug-task.diagnosis.json")}) == 0);
  };
  run_all("out_a");
  run_all("out_b");
  auto tree_a = read_tree(dir.path / "out_a");
  auto tree_b = read_tree(dir.path / "out_b");
  REQUIRE(tree_a.size() == tree_b.size());
  for (const auto& [name, content] : tree_a) {
    REQUIRE(tree_b.count(name) == 1);
    CHECK_MESSAGE(tree_b.at(name) == content, name);
  }
}

TEST_CASE("config precedence: flags > config file > environment > defaults") {
  TempDir dir("trajdbg-cli-config");
  write_mug_fixture(dir);

  // env var supplies a model id; the config file overrides it; a flag wins
  setenv("TRAJDBG_MODEL", "model-from-env", 1);
  write(dir.path / "config.json", R"({"model": "model-from-config"})");

  auto run_rollout_with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"--backend", "scripted", "--script",
                                     dir.str("solve.script.json"), "--out", dir.str("out")};
    for (auto& e : extra) args.push_back(e);
    args.insert(args.end(), {"rollout", "--world", dir.str("mug-task.world.json")});
    REQUIRE(run_cli(args) == 0);
    return deserialize(slurp(dir.path / "out" / "mug-task.0.json")).take().model_id;
  };

  CHECK(run_rollout_with({}) == "model-from-env");
  write_mug_fixture(dir);  // script is consumed per run
  CHECK(run_rollout_with({"--config", dir.str("config.json")}) == "model-from-config");
  write_mug_fixture(dir);
  CHECK(run_rollout_with({"--config", dir.str("config.json"), "--model", "model-from-flag"}) ==
        "model-from-flag");
  unsetenv("TRAJDBG_MODEL");
}
