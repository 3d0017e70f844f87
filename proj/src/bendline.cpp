#include "bendcell/bendline.hpp"

#include <sstream>

namespace bendcell::bendline {

namespace {

bool is_bend_phase(scene::Phase phase) {
  return phase == scene::Phase::BendPositionRelease || phase == scene::Phase::BendGraspRetrieve;
}

std::string fmt_mm(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

geom::Pose normalized_pose(const NormalizedPose& np) {
  geom::Pose pose = np.original.pose;
  pose.position.z() = np.updated_z;
  return pose;
}

std::optional<std::vector<NormalizedPose>> normalize_to_real_line(
    const std::vector<scene::ToolModelPose>& tools,
    const scene::PressBrakeSpec& brake,
    std::vector<Diagnostic>& diags) {
  const double lo = brake.pbh + brake.lwa;
  const double hi = brake.pbh + brake.uwa;
  const size_t errors_before = diags.size();

  std::vector<NormalizedPose> out;
  out.reserve(tools.size());
  for (const auto& tool : tools) {
    NormalizedPose np;
    np.original = tool;
    np.updated_z = tool.pose.position.z();
    np.ladder_index = 0;

    if (is_bend_phase(tool.label.phase)) {
      const double z = tool.pose.position.z();
      int matches = 0;
      for (int n = 0; n <= brake.nl; ++n) {
        const double candidate = z - n * brake.dbl;
        if (candidate > lo && candidate < hi) {
          ++matches;
          np.updated_z = candidate;
          np.ladder_index = n;
        }
      }
      if (matches == 0) {
        diags.push_back(make_error(
            "UnmappablePose",
            "tool '" + tool.name + "': no ladder index puts z=" + fmt_mm(z) +
                " inside the working window (" + fmt_mm(lo) + ", " + fmt_mm(hi) + ")"));
        continue;
      }
      if (matches > 1) {
        diags.push_back(make_error(
            "AmbiguousLadder",
            "tool '" + tool.name + "': " + std::to_string(matches) +
                " ladder indices land z=" + fmt_mm(z) + " inside the working window"));
        continue;
      }
    }
    out.push_back(np);
  }

  if (diags.size() > errors_before && has_errors(diags)) return std::nullopt;
  return out;
}

std::optional<std::string> assign_tooling_station(
    const NormalizedPose& pose,
    const std::vector<scene::ToolingStation>& stations,
    std::vector<Diagnostic>& diags) {
  const double x = pose.original.pose.position.x();
  for (const auto& s : stations) {
    if (x >= s.x_min && x < s.x_max) return s.id;
  }
  diags.push_back(make_error(
      "NoStation",
      "tool '" + pose.original.name + "': x=" + fmt_mm(x) + " lies outside every tooling station span"));
  return std::nullopt;
}

std::optional<std::vector<NormalizedPose>> normalize_scene(
    const scene::CellScene& cell, std::vector<Diagnostic>& diags) {
  auto normalized = normalize_to_real_line(scene::ordered_steps(cell), cell.brake, diags);
  if (!normalized) return std::nullopt;

  bool station_missing = false;
  for (auto& np : *normalized) {
    if (np.original.label.phase == scene::Phase::BendPositionRelease ||
        np.original.label.phase == scene::Phase::BendGraspRetrieve) {
      auto id = assign_tooling_station(np, cell.stations, diags);
      if (id) {
        np.station_id = *id;
      } else {
        station_missing = true;
      }
    }
  }
  if (station_missing) return std::nullopt;
  return normalized;
}

}  // namespace bendcell::bendline
