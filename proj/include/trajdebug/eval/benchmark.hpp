#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trajdebug/core/json_io.hpp"
#include "trajdebug/eval/metrics.hpp"
#include "trajdebug/gateway/prompt_template.hpp"

namespace trajdbg {

inline nlohmann::json to_json(const GoldAnnotation& a) {
  return {{"trajectory_id", a.trajectory_id},
          {"critical_step", a.critical_step},
          {"module", std::string(to_string(a.module))},
          {"error_type", a.error_label.error_type},
          {"notes", a.notes}};
}

inline Result<GoldAnnotation> annotation_from_json(const nlohmann::json& j,
                                                   const std::string& path) {
  GoldAnnotation a;
  try {
    a.trajectory_id = j.at("trajectory_id").get<std::string>();
    a.critical_step = j.at("critical_step").get<int>();
    const std::string module_text = j.at("module").get<std::string>();
    auto module = module_kind_from_string(module_text);
    if (!module) return err(Errc::schema_violation, path + ".module: unknown module");
    a.module = *module;
    auto label = parse_error_label(module_text, j.at("error_type").get<std::string>());
    if (!label.ok())
      return err(Errc::schema_violation, path + ".error_type: " + label.error().message);
    a.error_label = label.value();
    a.notes = j.value("notes", "");
  } catch (const nlohmann::json::exception& e) {
    return err(Errc::schema_violation, path + ": " + e.what());
  }
  if (a.critical_step < 1)
    return err(Errc::schema_violation, path + ".critical_step: must be >= 1");
  return a;
}

struct BenchmarkItem {
  Trajectory trajectory;
  GoldAnnotation annotation;
};

// Benchmark file schema v1: {"schema_version": 1, "items": [{"trajectory":
// ..., "annotation": ...}]}. The whole file is validated before anything is
// returned; a single bad item rejects the load.
inline Result<std::vector<BenchmarkItem>> load_benchmark(const std::filesystem::path& path) {
  auto text = read_text_file(path);
  if (!text.ok()) return text.error();
  nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
  if (j.is_discarded()) return err(Errc::schema_violation, "benchmark: not valid JSON");
  if (!j.is_object() || j.value("schema_version", 0) != 1)
    return err(Errc::schema_violation, "benchmark.schema_version: expected 1");
  if (!j.contains("items") || !j["items"].is_array())
    return err(Errc::schema_violation, "benchmark.items: expected array");

  std::vector<BenchmarkItem> items;
  int index = 0;
  for (const auto& item_json : j["items"]) {
    const std::string item_path = "items[" + std::to_string(index) + "]";
    if (!item_json.is_object() || !item_json.contains("trajectory") ||
        !item_json.contains("annotation"))
      return err(Errc::schema_violation, item_path + ": needs trajectory and annotation");
    auto trajectory = trajectory_from_json(item_json["trajectory"]);
    if (!trajectory.ok())
      return err(Errc::schema_violation,
                 item_path + ".trajectory: " + trajectory.error().message);
    auto annotation = annotation_from_json(item_json["annotation"], item_path + ".annotation");
    if (!annotation.ok()) return annotation.error();
    if (annotation.value().trajectory_id != trajectory.value().task_id)
      return err(Errc::schema_violation, item_path + ": annotation id does not match task_id");
    if (annotation.value().critical_step > trajectory.value().length())
      return err(Errc::schema_violation,
                 item_path + ".annotation.critical_step: beyond the last step");
    items.push_back({trajectory.take(), annotation.take()});
    ++index;
  }
  return items;
}

inline nlohmann::json benchmark_to_json(const std::vector<BenchmarkItem>& items) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& item : items)
    arr.push_back({{"trajectory", to_json(item.trajectory)},
                   {"annotation", to_json(item.annotation)}});
  return {{"schema_version", 1}, {"items", arr}};
}

}  // namespace trajdbg
