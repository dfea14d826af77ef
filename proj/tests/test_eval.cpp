#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixture_helpers.hpp"
#include "trajdebug/eval/benchmark.hpp"
#include "trajdebug/eval/propagation.hpp"
#include "trajdebug/rollout/engine.hpp"

using namespace trajdbg;
using namespace trajdbg::testfix;

namespace {

CriticalDiagnosis make_pred(const std::string& id, int step, ModuleKind module,
                            const std::string& type) {
  CriticalDiagnosis d;
  d.trajectory_id = id;
  d.critical_step = step;
  d.critical_module = module;
  d.error_label = ErrorLabel{module, type};
  return d;
}

GoldAnnotation make_gold(const std::string& id, int step, ModuleKind module,
                         const std::string& type) {
  GoldAnnotation g;
  g.trajectory_id = id;
  g.critical_step = step;
  g.module = module;
  g.error_label = ErrorLabel{module, type};
  return g;
}

DetectionMetrics pct(double s, double sm, double all) {
  DetectionMetrics m;
  m.step_acc = s / 100.0;
  m.step_module_acc = sm / 100.0;
  m.all_acc = all / 100.0;
  m.n = 50;
  return m;
}

}  // namespace

TEST_CASE("match_prediction nests step > module > type") {
  auto gold = make_gold("t", 3, ModuleKind::planning, "inefficient_planning");
  CHECK(match_prediction(make_pred("t", 3, ModuleKind::planning, "inefficient_planning"), gold)
            .value() == MatchLevel::all);
  CHECK(match_prediction(make_pred("t", 3, ModuleKind::planning, "constraint_ignorance"), gold)
            .value() == MatchLevel::step_module);
  CHECK(match_prediction(make_pred("t", 3, ModuleKind::memory, "hallucination"), gold).value() ==
        MatchLevel::step);
  // step is the gate: right module/type at the wrong step scores none
  CHECK(match_prediction(make_pred("t", 4, ModuleKind::planning, "inefficient_planning"), gold)
            .value() == MatchLevel::none);

  auto mismatch = match_prediction(make_pred("other", 3, ModuleKind::planning, "x"), gold);
  REQUIRE(!mismatch.ok());
  CHECK(mismatch.code() == Errc::id_mismatch);
}

TEST_CASE("compute_detection_metrics counts nested levels") {
  auto gold = make_gold("t", 3, ModuleKind::planning, "inefficient_planning");
  std::vector<std::pair<CriticalDiagnosis, GoldAnnotation>> pairs = {
      {make_pred("t", 3, ModuleKind::planning, "inefficient_planning"), gold},  // all
      {make_pred("t", 3, ModuleKind::planning, "constraint_ignorance"), gold},  // step_module
      {make_pred("t", 3, ModuleKind::memory, "hallucination"), gold},           // step
      {make_pred("t", 5, ModuleKind::planning, "inefficient_planning"), gold},  // none
      {make_pred("t", 6, ModuleKind::others, "other"), gold},                   // none
  };
  auto m = compute_detection_metrics(pairs);
  REQUIRE(m.ok());
  CHECK(m.value().step_acc == doctest::Approx(0.6));
  CHECK(m.value().step_module_acc == doctest::Approx(0.4));
  CHECK(m.value().all_acc == doctest::Approx(0.2));
  // error-only is independent of the step: rows 1 and 4 share the type id
  CHECK(m.value().error_only_acc == doctest::Approx(0.4));
  CHECK(m.value().n == 5);

  std::vector<std::pair<CriticalDiagnosis, GoldAnnotation>> identical(
      3, {make_pred("t", 3, ModuleKind::planning, "inefficient_planning"), gold});
  auto perfect = compute_detection_metrics(identical);
  REQUIRE(perfect.ok());
  CHECK(perfect.value().step_acc == doctest::Approx(1.0));
  CHECK(perfect.value().all_acc == doctest::Approx(1.0));

  auto empty = compute_detection_metrics({});
  REQUIRE(!empty.ok());
  CHECK(empty.code() == Errc::empty_set);
}

TEST_CASE("macro_average of the reference per-dataset accuracies") {
  // per-dataset S / S+M / ALL triples
  std::vector<DetectionMetrics> datasets = {pct(35.0, 28.0, 21.0), pct(42.0, 22.0, 14.0),
                                            pct(58.0, 44.0, 38.0)};
  auto avg = macro_average(datasets);
  REQUIRE(avg.ok());
  CHECK(format_percent(avg.value().step_acc) == "45.0%");
  CHECK(format_percent(avg.value().step_module_acc) == "31.3%");
  CHECK(format_percent(avg.value().all_acc) == "24.3%");

  // permutation invariance
  std::vector<DetectionMetrics> shuffled = {datasets[2], datasets[0], datasets[1]};
  auto avg2 = macro_average(shuffled);
  REQUIRE(avg2.ok());
  CHECK(avg2.value().step_acc == doctest::Approx(avg.value().step_acc));

  auto missing = macro_average({});
  REQUIRE(!missing.ok());
  CHECK(missing.code() == Errc::empty_set);

  // micro pooling weights by n and differs when sizes differ
  std::vector<DetectionMetrics> uneven = {pct(100.0, 100.0, 100.0), pct(0.0, 0.0, 0.0)};
  uneven[0].n = 10;
  uneven[1].n = 90;
  CHECK(macro_average(uneven).value().step_acc == doctest::Approx(0.5));
  CHECK(micro_average(uneven).value().step_acc == doctest::Approx(0.1));
}

TEST_CASE("property: metric nesting holds over random prediction sets") {
  SplitMix64 rng(11);
  const auto& catalog = error_catalog();
  for (int trial = 0; trial < 1200; ++trial) {
    std::vector<std::pair<CriticalDiagnosis, GoldAnnotation>> pairs;
    const int n = rng.range(1, 12);
    for (int i = 0; i < n; ++i) {
      const auto& gold_type = catalog[rng.below(catalog.size())];
      const auto& pred_type = catalog[rng.below(catalog.size())];
      auto gold = make_gold("t", rng.range(1, 6), gold_type.module, gold_type.id);
      auto pred = make_pred("t", rng.range(1, 6), pred_type.module, pred_type.id);
      pairs.push_back({pred, gold});
    }
    auto m = compute_detection_metrics(pairs).take();
    CHECK(m.all_acc <= m.step_module_acc + 1e-12);
    CHECK(m.step_module_acc <= m.step_acc + 1e-12);
    CHECK(m.step_acc <= 1.0 + 1e-12);
  }
}

TEST_CASE("success_rate_curve counts cumulative flips") {
  std::vector<DebugResult> results;
  auto make_result = [](bool initial_success, std::vector<bool> attempts) {
    DebugResult r;
    r.initial.outcome = initial_success ? Outcome::success() : Outcome::failure();
    for (bool success : attempts) {
      DebugAttempt a;
      a.trajectory.outcome = success ? Outcome::success() : Outcome::failure();
      r.attempts.push_back(a);
    }
    r.final_outcome = r.attempts.empty() ? r.initial.outcome : r.attempts.back().trajectory.outcome;
    return r;
  };
  // 10 tasks: 4 initial successes, 2 flip at attempt 1, 1 flips at attempt 2
  for (int i = 0; i < 4; ++i) results.push_back(make_result(true, {}));
  for (int i = 0; i < 2; ++i) results.push_back(make_result(false, {true}));
  results.push_back(make_result(false, {false, true}));
  for (int i = 0; i < 3; ++i) results.push_back(make_result(false, {false, false}));

  auto curve = success_rate_curve(results, 3);
  REQUIRE(curve.ok());
  REQUIRE(curve.value().size() == 4);
  CHECK(curve.value()[0] == doctest::Approx(0.4));
  CHECK(curve.value()[1] == doctest::Approx(0.6));
  CHECK(curve.value()[2] == doctest::Approx(0.7));
  CHECK(curve.value()[3] == doctest::Approx(0.7));
  for (size_t i = 1; i < curve.value().size(); ++i)
    CHECK(curve.value()[i] >= curve.value()[i - 1]);

  // all initial successes: constant series
  std::vector<DebugResult> easy(3, make_result(true, {}));
  auto flat = success_rate_curve(easy, 2);
  REQUIRE(flat.ok());
  for (double point : flat.value()) CHECK(point == doctest::Approx(1.0));

  auto none = success_rate_curve({}, 2);
  REQUIRE(!none.ok());
  CHECK(none.code() == Errc::empty_set);
}

namespace {

ErrorProfile make_profile(const std::string& id, int length, std::vector<int> error_steps) {
  ErrorProfile p;
  p.trajectory_id = id;
  for (int t = 1; t <= length; ++t) {
    ErrorDetection d;
    d.step = t;
    d.module = ModuleKind::planning;
    d.error_detected =
        std::find(error_steps.begin(), error_steps.end(), t) != error_steps.end();
    d.error_label = d.error_detected ? ErrorLabel{ModuleKind::planning, "inefficient_planning"}
                                     : no_error_label(ModuleKind::planning);
    p.detections.push_back(d);
    ErrorDetection sys;
    sys.step = t;
    sys.module = ModuleKind::system;
    sys.error_label = no_error_label(ModuleKind::system);
    p.detections.push_back(sys);
  }
  return p;
}

}  // namespace

TEST_CASE("propagation matrix codes the first critical error and the cascade") {
  // first critical at 3, detections at 5 and 7, T=8
  auto profile = make_profile("traj-a", 8, {3, 5, 7});
  CriticalDiagnosis diag;
  diag.trajectory_id = "traj-a";
  diag.critical_step = 3;

  auto clean = make_profile("traj-b", 8, {});

  auto matrix = propagation_matrix({profile, clean}, {diag});
  REQUIRE(matrix.ok());
  REQUIRE(matrix.value().trajectory_ids.size() == 2);
  CHECK(matrix.value().columns == 8);
  // deterministic row order by id
  CHECK(matrix.value().trajectory_ids[0] == "traj-a");
  const auto& row = matrix.value().cells[0];
  CHECK(row == std::vector<int>{0, 0, 2, 3, 3, 3, 3, 3});
  CHECK(matrix.value().cells[1] == std::vector<int>(8, 0));

  // exactly one first_critical per row; post_critical only after it
  for (const auto& cells : matrix.value().cells) {
    int firsts = 0, first_at = -1;
    for (size_t c = 0; c < cells.size(); ++c)
      if (cells[c] == 2) {
        ++firsts;
        first_at = static_cast<int>(c);
      }
    CHECK(firsts <= 1);
    for (size_t c = 0; c < cells.size(); ++c)
      if (cells[c] == 3) CHECK(static_cast<int>(c) > first_at);
  }
}

TEST_CASE("propagation matrix rejects duplicate or dangling ids") {
  auto p = make_profile("traj-a", 4, {});
  CriticalDiagnosis d1;
  d1.trajectory_id = "traj-a";
  d1.critical_step = 2;
  auto dup = propagation_matrix({p}, {d1, d1});
  REQUIRE(!dup.ok());
  CHECK(dup.code() == Errc::inconsistent_ids);

  CriticalDiagnosis dangling;
  dangling.trajectory_id = "ghost";
  dangling.critical_step = 1;
  auto orphan = propagation_matrix({p}, {dangling});
  REQUIRE(!orphan.ok());
  CHECK(orphan.code() == Errc::inconsistent_ids);
}

TEST_CASE("propagation CSV round-trips") {
  auto profile = make_profile("traj-a", 5, {2});
  CriticalDiagnosis diag;
  diag.trajectory_id = "traj-a";
  diag.critical_step = 2;
  auto matrix = propagation_matrix({profile}, {diag}).take();
  const std::string csv = to_csv(matrix);
  CHECK(csv.rfind("trajectory_id,step_1,step_2,step_3,step_4,step_5\n", 0) == 0);
  auto back = propagation_from_csv(csv);
  REQUIRE(back.ok());
  CHECK(back.value().trajectory_ids == matrix.trajectory_ids);
  CHECK(back.value().cells == matrix.cells);
  CHECK(back.value().columns == matrix.columns);
}

TEST_CASE("bundled synthetic benchmark loads as 12 annotated pairs") {
  namespace fs = std::filesystem;
  const fs::path path = fs::path(TRAJDBG_FIXTURE_DIR) / "benchmark.json";

  if (std::getenv("TRAJDBG_WRITE_GOLDENS")) {
    // regenerate the bundle deterministically from the task specs
    auto store = PromptStore(TRAJDBG_PROMPT_DIR);
    std::vector<BenchmarkItem> items;
    for (const auto& spec : bundle_specs()) {
      GoldAnnotation gold;
      gold.trajectory_id = spec.task_id;
      gold.critical_step = BundleTaskSpec::kCriticalStep;
      gold.module = ModuleKind::planning;
      gold.error_label = ErrorLabel{ModuleKind::planning, "inefficient_planning"};
      gold.notes = "walked away from the open drawer holding " + spec.object;
      items.push_back({spec.initial_run(store), gold});
    }
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << benchmark_to_json(items).dump(2) << "\n";
  }

  auto loaded = load_benchmark(path);
  REQUIRE_MESSAGE(loaded.ok(), "bundled benchmark missing or invalid (set "
                               "TRAJDBG_WRITE_GOLDENS=1 to regenerate)");
  CHECK(loaded.value().size() == 12);
  for (const auto& item : loaded.value()) {
    CHECK(validate(item.trajectory).empty());
    CHECK(item.annotation.critical_step == 3);
    CHECK(label_valid(item.annotation.error_label));
    CHECK_FALSE(item.trajectory.outcome.is_success());
  }
}

TEST_CASE("benchmark loading validates items atomically") {
  auto store = PromptStore(TRAJDBG_PROMPT_DIR);
  GridWorldEnv env(mug_task(6));
  RolloutConfig config;
  config.template_set = "gridworld";
  config.step_cap = 6;
  ScriptedClient agent(std::vector<ScriptEntry>{
      ScriptEntry{{}, modular_completion("examine doorway"), std::nullopt}});
  auto t = run_rollout(config, store, env, agent, {"bench-1", 1}).take();

  GoldAnnotation gold = make_gold("bench-1", 2, ModuleKind::planning, "inefficient_planning");
  nlohmann::json good = benchmark_to_json({{t, gold}});

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "trajdbg-eval-test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "good.json");
    out << good.dump(2);
  }
  auto loaded = load_benchmark(dir / "good.json");
  REQUIRE(loaded.ok());
  CHECK(loaded.value().size() == 1);
  CHECK(loaded.value()[0].annotation.critical_step == 2);

  // annotation step beyond T rejects the whole file
  nlohmann::json bad = good;
  bad["items"][0]["annotation"]["critical_step"] = 99;
  {
    std::ofstream out(dir / "bad_step.json");
    out << bad.dump(2);
  }
  auto bad_step = load_benchmark(dir / "bad_step.json");
  REQUIRE(!bad_step.ok());
  CHECK(bad_step.code() == Errc::schema_violation);

  // unknown error type in the annotation
  nlohmann::json bad_type = good;
  bad_type["items"][0]["annotation"]["error_type"] = "imaginary_error";
  {
    std::ofstream out(dir / "bad_type.json");
    out << bad_type.dump(2);
  }
  auto rejected = load_benchmark(dir / "bad_type.json");
  REQUIRE(!rejected.ok());
  CHECK(rejected.code() == Errc::schema_violation);

  fs::remove_all(dir);
}
