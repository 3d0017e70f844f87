#pragma once

#include <string>
#include <vector>

#include "bendcell/geometry.hpp"
#include "bendcell/kinematics.hpp"
#include "bendcell/scene.hpp"
#include "bendcell/vm.hpp"

namespace bendcell::sim {

struct PathSample {
  double t = 0.0;
  geom::Pose pose;
};

struct TimedPath {
  std::vector<PathSample> samples;  // strictly increasing times
};

// Densely samples the trace: union of the dt grid and every move boundary.
// Position interpolates linearly, orientation along the shortest arc;
// the pose holds still through waits and IO. A trace that never moves
// carries no pose information and yields an empty path.
TimedPath sample_trace(const vm::ExecutionTrace& trace, double dt);

struct JointSample {
  double t = 0.0;
  kin::JointVector q{};
  bool converged = false;
  double pos_residual_mm = 0.0;
  double rot_residual_rad = 0.0;
};

struct JointPathResult {
  std::vector<JointSample> samples;  // one per path sample
};

// Chained-seed IK along the path: the home posture seeds the first sample,
// each solution seeds the next. Non-converged samples keep the last good
// seed so the path continues.
JointPathResult solve_joint_path(const TimedPath& path, const kin::ArmModel& arm);

// Negative inside the box, distance to the surface outside.
double signed_distance(const Eigen::Vector3d& p, const scene::Box& box);

struct CollisionEvent {
  double t = 0.0;      // first sample inside the clearance band
  double t_end = 0.0;  // last such sample
  std::string box_id;
  double penetration = 0.0;  // mm, deepest point past the surface (0 = near miss)
};

// Event whenever the TCP's signed distance drops strictly below the
// clearance; contiguous samples against the same box merge into one event.
std::vector<CollisionEvent> check_collisions(const TimedPath& path,
                                             const std::vector<scene::Box>& world,
                                             double clearance);

struct UnreachableSample {
  double t = 0.0;
  double pos_residual_mm = 0.0;
  double rot_residual_rad = 0.0;
};

struct LimitHit {
  double t = 0.0;
  int joint = 0;  // 1-based
  double value_deg = 0.0;
  double min_deg = 0.0;
  double max_deg = 0.0;
};

struct SimReport {
  std::vector<CollisionEvent> collisions;
  std::vector<UnreachableSample> unreachable;
  std::vector<LimitHit> limit_hits;
  double path_length_mm = 0.0;
  double cycle_time_s = 0.0;
  bool clean() const { return collisions.empty() && unreachable.empty() && limit_hits.empty(); }
};

SimReport build_report(const TimedPath& path, const JointPathResult& joints,
                       const kin::ArmModel& arm, const std::vector<scene::Box>& world,
                       double clearance, double final_clock);

std::string report_text(const SimReport& r);

// Machine-readable mirror of SimReport.
std::string report_json(const SimReport& r);

// Orthographic projection of the path onto two world axes (0=x, 1=y, 2=z),
// with the world boxes drawn and colliding samples highlighted.
std::string render_svg(const TimedPath& path, const std::vector<scene::Box>& world,
                       const std::vector<CollisionEvent>& collisions,
                       int axis_h, int axis_v);

}  // namespace bendcell::sim
