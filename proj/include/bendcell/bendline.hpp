#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bendcell/diagnostics.hpp"
#include "bendcell/scene.hpp"

namespace bendcell::bendline {

// A tool pose after ladder collapse. Only z moves; x, y and the rotation are
// carried through bitwise in `original`.
struct NormalizedPose {
  scene::ToolModelPose original;
  double updated_z = 0.0;             // mm, on the real bending line
  int ladder_index = 0;               // 0 = already on the real line
  std::optional<std::string> station_id;
};

// The pose with the updated z applied.
geom::Pose normalized_pose(const NormalizedPose& np);

// Collapses bend-phase (A/B) poses placed on virtual bending lines onto the
// real line: scans n = 1..nl for z - n*dbl strictly inside
// (pbh + lwa, pbh + uwa). Poses already inside the window, and all non-bend
// poses, pass through with ladder_index 0.
// Errors: UnmappablePose, AmbiguousLadder.
std::optional<std::vector<NormalizedPose>> normalize_to_real_line(
    const std::vector<scene::ToolModelPose>& tools,
    const scene::PressBrakeSpec& brake,
    std::vector<Diagnostic>& diags);

// Station whose half-open span [x_min, x_max) contains the pose's x.
// Errors: NoStation.
std::optional<std::string> assign_tooling_station(
    const NormalizedPose& pose,
    const std::vector<scene::ToolingStation>& stations,
    std::vector<Diagnostic>& diags);

// Full pipeline for a validated scene: orders the steps, normalizes them,
// and assigns a tooling station to every bend pose.
std::optional<std::vector<NormalizedPose>> normalize_scene(
    const scene::CellScene& cell, std::vector<Diagnostic>& diags);

}  // namespace bendcell::bendline
