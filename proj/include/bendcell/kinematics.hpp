#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bendcell/diagnostics.hpp"
#include "bendcell/geometry.hpp"

namespace bendcell::kin {

using JointVector = std::array<double, 6>;  // degrees

struct DhRow {
  double a = 0.0;             // link length, mm
  double alpha = 0.0;         // link twist, deg
  double d = 0.0;             // link offset, mm
  double theta_offset = 0.0;  // joint angle offset, deg
};

struct JointLimit {
  double min_deg = 0.0;
  double max_deg = 0.0;
};

struct ArmModel {
  std::array<DhRow, 6> dh_rows{};
  std::array<JointLimit, 6> joint_limits{};
  geom::Pose base = geom::Pose::identity();
  geom::Pose tool = geom::Pose::identity();  // flange to TCP
  JointVector home{};
};

// Arm description file: JSON with dh_rows, joint_limits, base, tool, home.
std::optional<ArmModel> parse_arm(std::string_view text, std::vector<Diagnostic>& diags);

// base * product of DH rows * tool. Row transform:
// RotZ(theta_offset + q) * TransZ(d) * TransX(a) * RotX(alpha).
geom::Pose forward(const ArmModel& arm, const JointVector& q);

// Central differences, h = 1e-6 rad. Rows 0..2 position (mm per rad),
// rows 3..5 orientation (rad per rad, rotation-vector of the relative
// rotation between the perturbed poses).
Eigen::Matrix<double, 6, 6> numeric_jacobian(const ArmModel& arm, const JointVector& q);

struct IkResult {
  JointVector q{};
  bool converged = false;
  double pos_residual_mm = 0.0;
  double rot_residual_rad = 0.0;
  int iterations = 0;
};

// Damped least squares from the seed. Converged means position residual
// <= 1e-6 mm and orientation residual <= 1e-6 rad.
IkResult solve_ik(const ArmModel& arm, const geom::Pose& target, const JointVector& seed);

// solve_ik with diagnostics: NoConvergence yields no value; a converged
// solution outside the joint limits is still returned, with LimitViolation
// diagnostics attached.
std::optional<JointVector> inverse(const ArmModel& arm, const geom::Pose& target,
                                   const JointVector& seed, std::vector<Diagnostic>& diags);

// Empty iff every joint is inside its inclusive range.
std::vector<Diagnostic> within_limits(const ArmModel& arm, const JointVector& q);

}  // namespace bendcell::kin
