#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "trajdebug/eval/metrics.hpp"

namespace trajdbg {

// Cell severity codes for the error-propagation export.
enum class PropagationCode { clean = 0, error = 1, first_critical = 2, post_critical = 3 };

// Rows = trajectories (sorted by id), columns = step indices 1..max T.
// One first_critical per row; every later column in that row darkens to
// post_critical, which is the rendering convention for cascades. Detections
// before the critical step show up as plain error cells.
struct PropagationMatrix {
  std::vector<std::string> trajectory_ids;
  std::vector<std::vector<int>> cells;  // codes as integers
  int columns = 0;
};

inline Result<PropagationMatrix> propagation_matrix(
    const std::vector<ErrorProfile>& profiles, const std::vector<CriticalDiagnosis>& diagnoses) {
  std::map<std::string, const ErrorProfile*> by_id;
  for (const auto& p : profiles) {
    if (!by_id.emplace(p.trajectory_id, &p).second)
      return err(Errc::inconsistent_ids, "duplicate profile for " + p.trajectory_id);
  }
  std::map<std::string, const CriticalDiagnosis*> diagnosis_by_id;
  for (const auto& d : diagnoses) {
    if (!diagnosis_by_id.emplace(d.trajectory_id, &d).second)
      return err(Errc::inconsistent_ids, "duplicate diagnosis for " + d.trajectory_id);
    if (!by_id.count(d.trajectory_id))
      return err(Errc::inconsistent_ids, "diagnosis without profile: " + d.trajectory_id);
  }

  PropagationMatrix matrix;
  for (const auto& [id, profile] : by_id) {
    matrix.trajectory_ids.push_back(id);
    for (const auto& d : profile->detections) matrix.columns = std::max(matrix.columns, d.step);
  }
  for (const auto& id : matrix.trajectory_ids) {
    const ErrorProfile& profile = *by_id.at(id);
    auto diag_it = diagnosis_by_id.find(id);
    const int critical =
        diag_it == diagnosis_by_id.end() ? 0 : diag_it->second->critical_step;
    std::vector<int> row(matrix.columns, static_cast<int>(PropagationCode::clean));
    for (const auto& d : profile.detections)
      if (d.error_detected && d.step >= 1 && d.step <= matrix.columns)
        row[d.step - 1] = static_cast<int>(PropagationCode::error);
    if (critical >= 1 && critical <= matrix.columns) {
      row[critical - 1] = static_cast<int>(PropagationCode::first_critical);
      int last_step = 0;
      for (const auto& d : profile.detections) last_step = std::max(last_step, d.step);
      for (int c = critical; c < last_step; ++c)
        row[c] = static_cast<int>(PropagationCode::post_critical);
    }
    matrix.cells.push_back(std::move(row));
  }
  return matrix;
}

inline std::string to_csv(const PropagationMatrix& matrix) {
  std::string out = "trajectory_id";
  for (int c = 1; c <= matrix.columns; ++c) out += ",step_" + std::to_string(c);
  out += "\n";
  for (size_t r = 0; r < matrix.trajectory_ids.size(); ++r) {
    out += matrix.trajectory_ids[r];
    for (int cell : matrix.cells[r]) out += "," + std::to_string(cell);
    out += "\n";
  }
  return out;
}

inline Result<PropagationMatrix> propagation_from_csv(const std::string& csv) {
  PropagationMatrix matrix;
  auto lines = split_lines(csv);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) return err(Errc::schema_violation, "empty CSV");
  // header: trajectory_id,step_1..step_N
  size_t commas = std::count(lines[0].begin(), lines[0].end(), ',');
  matrix.columns = static_cast<int>(commas);
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    size_t pos = line.find(',');
    if (pos == std::string::npos) return err(Errc::schema_violation, "row without cells");
    matrix.trajectory_ids.push_back(line.substr(0, pos));
    std::vector<int> row;
    while (pos != std::string::npos) {
      size_t next = line.find(',', pos + 1);
      const std::string cell = line.substr(pos + 1, next == std::string::npos
                                                        ? std::string::npos
                                                        : next - pos - 1);
      try {
        row.push_back(std::stoi(cell));
      } catch (...) {
        return err(Errc::schema_violation, "non-integer cell: " + cell);
      }
      pos = next;
    }
    if (static_cast<int>(row.size()) != matrix.columns)
      return err(Errc::schema_violation, "ragged CSV row");
    matrix.cells.push_back(std::move(row));
  }
  return matrix;
}

}  // namespace trajdbg
