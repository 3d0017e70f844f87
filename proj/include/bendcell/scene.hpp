#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bendcell/diagnostics.hpp"
#include "bendcell/geometry.hpp"

namespace bendcell::scene {

/// Role a tool model plays in the working sequence.
enum class Phase {
  Pickup,               // step_1
  MoveOnly,             // step_<g>F
  BendPositionRelease,  // step_<m>A: position on the die, release for forming
  BendGraspRetrieve,    // step_<m>B: grasp the formed piece, retreat
  Palletize,            // bare step_<last>
};

struct StepLabel {
  int index = 0;
  Phase phase = Phase::Pickup;

  friend bool operator==(const StepLabel&, const StepLabel&) = default;
};

/// Canonical spelling of a label, e.g. {2, BendPositionRelease} -> "step_2A".
std::string format_label(const StepLabel& label);

const char* phase_name(Phase phase);

/// Grammar: step_1 | step_<m>A | step_<m>B | step_<g>F | step_<n> (palletize,
/// n >= 2). The suffix letter is case-insensitive. Emits MalformedLabel or
/// ZeroIndex diagnostics on failure.
std::optional<StepLabel> parse_step_label(std::string_view name, std::vector<Diagnostic>& diags);

struct ToolModelPose {
  StepLabel label;
  std::string name;  // as written in the scene file
  geom::Pose pose;   // tool frame in world coordinates
};

/// Press-brake ladder: one real bending line plus nl virtual copies spaced
/// dbl apart. The robot working window on the real line is
/// (pbh + lwa, pbh + uwa), both bounds strict.
struct PressBrakeSpec {
  double pbh = 0.0;  // press-brake height, real bending-line reference (mm)
  double dbl = 0.0;  // distance between virtual bending lines (mm)
  int nl = 0;        // number of ladder steps
  double lwa = 0.0;  // lower working-area offset (mm)
  double uwa = 0.0;  // upper working-area offset (mm)
};

struct ToolingStation {
  std::string id;
  double x_min = 0.0;  // span along the bending line (mm)
  double x_max = 0.0;
  std::string punch_id;
  std::string die_id;
};

struct Box {
  std::string id;
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
};

struct ProcessParams {
  Eigen::Vector3d approach_offset = Eigen::Vector3d::Zero();  // mm
  Eigen::Vector3d retreat_offset = Eigen::Vector3d::Zero();   // mm
  double move_speed = 0.0;                                    // mm/s
  int press_command_port = 0;                                 // output index
  int gripper_port = 0;                                       // output index
  int press_done_port = 0;                                    // input index
  double press_wait = 0.0;                                    // s
  double gripper_settle = 0.0;                                // s
  Eigen::Vector3d pallet_increment = Eigen::Vector3d::Zero();  // stack pitch (mm)
  int piece_count = 1;
};

struct CellScene {
  std::vector<ToolModelPose> tools;
  PressBrakeSpec brake;
  std::vector<ToolingStation> stations;
  geom::Pose robot_base;
  geom::Pose pallet_input;
  geom::Pose pallet_output;
  std::vector<Box> collision_world;
  ProcessParams params;
};

/// Parses and validates a scene file (UTF-8 JSON). All diagnostics are
/// collected; the scene is returned only when no errors were found.
/// Tool poses are stored exactly as given -- no bending-line normalization.
std::optional<CellScene> parse_scene(std::string_view text, std::vector<Diagnostic>& diags);

/// Re-checks process parameters; used after command-line overrides.
void validate_params(const ProcessParams& p, std::vector<Diagnostic>& diags);

/// Execution order: ascending step index; within an index A before B.
std::vector<ToolModelPose> ordered_steps(const CellScene& scene);

/// Sort rank of a phase within one step index.
int phase_rank(Phase phase);

}  // namespace bendcell::scene
