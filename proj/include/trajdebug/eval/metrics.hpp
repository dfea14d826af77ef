#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "trajdebug/pipeline/debug_loop.hpp"

namespace trajdbg {

// Human-annotated critical error for one trajectory: a single root-cause
// point, which is what the localization metrics score against.
struct GoldAnnotation {
  std::string trajectory_id;
  int critical_step = 1;
  ModuleKind module = ModuleKind::others;
  ErrorLabel error_label;
  std::string notes;
};

// Nested match levels: step gates module, which gates the error type.
enum class MatchLevel { none, step, step_module, all };

struct DetectionMetrics {
  double step_acc = 0.0;
  double step_module_acc = 0.0;
  double all_acc = 0.0;
  double error_only_acc = 0.0;  // type-id equality, independent of the step
  int n = 0;
};

inline Result<MatchLevel> match_prediction(const CriticalDiagnosis& pred,
                                           const GoldAnnotation& gold) {
  if (!pred.trajectory_id.empty() && pred.trajectory_id != gold.trajectory_id)
    return err(Errc::id_mismatch,
               pred.trajectory_id + " scored against " + gold.trajectory_id);
  if (pred.critical_step != gold.critical_step) return MatchLevel::none;
  if (pred.critical_module != gold.module) return MatchLevel::step;
  if (pred.error_label.error_type != gold.error_label.error_type) return MatchLevel::step_module;
  return MatchLevel::all;
}

inline Result<DetectionMetrics> compute_detection_metrics(
    const std::vector<std::pair<CriticalDiagnosis, GoldAnnotation>>& pairs) {
  if (pairs.empty()) return err(Errc::empty_set, "no prediction/gold pairs");
  DetectionMetrics m;
  m.n = static_cast<int>(pairs.size());
  int step = 0, step_module = 0, all = 0, error_only = 0;
  for (const auto& [pred, gold] : pairs) {
    auto level = match_prediction(pred, gold);
    if (!level.ok()) return level.error();
    switch (level.value()) {
      case MatchLevel::all: ++all; [[fallthrough]];
      case MatchLevel::step_module: ++step_module; [[fallthrough]];
      case MatchLevel::step: ++step; break;
      case MatchLevel::none: break;
    }
    if (pred.error_label.error_type == gold.error_label.error_type) ++error_only;
  }
  m.step_acc = static_cast<double>(step) / m.n;
  m.step_module_acc = static_cast<double>(step_module) / m.n;
  m.all_acc = static_cast<double>(all) / m.n;
  m.error_only_acc = static_cast<double>(error_only) / m.n;
  return m;
}

// Display convention: one decimal percent, half-up.
inline double round_percent(double fraction) {
  return std::floor(fraction * 1000.0 + 0.5) / 10.0;
}

inline std::string format_percent(double fraction) {
  const double pct = round_percent(fraction);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  return buf;
}

// Unweighted per-dataset mean (the Average column of the detection table).
inline Result<DetectionMetrics> macro_average(const std::vector<DetectionMetrics>& per_dataset) {
  if (per_dataset.empty()) return err(Errc::empty_set, "no datasets");
  DetectionMetrics m;
  for (const auto& d : per_dataset) {
    m.step_acc += d.step_acc;
    m.step_module_acc += d.step_module_acc;
    m.all_acc += d.all_acc;
    m.error_only_acc += d.error_only_acc;
    m.n += d.n;
  }
  const double k = static_cast<double>(per_dataset.size());
  m.step_acc /= k;
  m.step_module_acc /= k;
  m.all_acc /= k;
  m.error_only_acc /= k;
  return m;
}

// Pooled per-trajectory mean, offered behind a flag for comparison.
inline Result<DetectionMetrics> micro_average(const std::vector<DetectionMetrics>& per_dataset) {
  if (per_dataset.empty()) return err(Errc::empty_set, "no datasets");
  DetectionMetrics m;
  int total = 0;
  for (const auto& d : per_dataset) {
    m.step_acc += d.step_acc * d.n;
    m.step_module_acc += d.step_module_acc * d.n;
    m.all_acc += d.all_acc * d.n;
    m.error_only_acc += d.error_only_acc * d.n;
    total += d.n;
  }
  if (total == 0) return err(Errc::empty_set, "datasets are empty");
  m.step_acc /= total;
  m.step_module_acc /= total;
  m.all_acc /= total;
  m.error_only_acc /= total;
  m.n = total;
  return m;
}

// Point k = fraction of tasks succeeding within k attempts; attempt 0 is the
// initial rollout. Non-decreasing by construction.
inline Result<std::vector<double>> success_rate_curve(const std::vector<DebugResult>& results,
                                                      int max_attempts) {
  if (results.empty()) return err(Errc::empty_set, "no results");
  std::vector<double> curve;
  for (int k = 0; k <= max_attempts; ++k) {
    int solved = 0;
    for (const auto& r : results) {
      if (r.initial.outcome.is_success()) {
        ++solved;
        continue;
      }
      bool within = false;
      for (int a = 0; a < std::min<int>(k, static_cast<int>(r.attempts.size())); ++a)
        if (r.attempts[a].trajectory.outcome.is_success()) within = true;
      if (within) ++solved;
    }
    curve.push_back(static_cast<double>(solved) / static_cast<double>(results.size()));
  }
  for (size_t i = 1; i < curve.size(); ++i)
    if (curve[i] < curve[i - 1])
      return err(Errc::precondition, "success curve decreased; results are inconsistent");
  return curve;
}

inline nlohmann::json to_json(const DetectionMetrics& m) {
  return {{"step_acc", m.step_acc},
          {"step_module_acc", m.step_module_acc},
          {"all_acc", m.all_acc},
          {"error_only_acc", m.error_only_acc},
          {"n", m.n}};
}

// Aligned plain-text table in the detection-results layout: one row per
// dataset plus the average row.
inline std::string render_metrics_table(
    const std::vector<std::pair<std::string, DetectionMetrics>>& rows,
    const DetectionMetrics& average) {
  std::string out = "Dataset          S        S+M      ALL      Error\n";
  auto line = [](const std::string& name, const DetectionMetrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-15s %-8s %-8s %-8s %-8s\n", name.c_str(),
                  format_percent(m.step_acc).c_str(), format_percent(m.step_module_acc).c_str(),
                  format_percent(m.all_acc).c_str(), format_percent(m.error_only_acc).c_str());
    return std::string(buf);
  };
  for (const auto& [name, metrics] : rows) out += line(name, metrics);
  out += line("Average", average);
  return out;
}

}  // namespace trajdbg
