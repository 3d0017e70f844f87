#pragma once

#include <Eigen/Dense>
#include <optional>

namespace bendcell::geom {

/// Rigid transform: orthonormal rotation plus position in mm.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = position;
    return m;
  }
};

/// Extrinsic X-Y-Z Euler angles in degrees: R = Rz(rz) * Ry(ry) * Rx(rx).
/// Canonical ranges: rx, rz in (-180, 180], ry in [-90, 90].
struct EulerXYZ {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;
};

constexpr double kDegPerRad = 180.0 / 3.14159265358979323846;
constexpr double kRadPerDeg = 3.14159265358979323846 / 180.0;

inline double deg2rad(double deg) { return deg * kRadPerDeg; }
inline double rad2deg(double rad) { return rad * kDegPerRad; }

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// Target re-expressed in the base frame: invert(base) * target.
Pose relative_pose(const Pose& base, const Pose& target);

/// max |R^T R - I| over all entries.
double orthonormality_error(const Eigen::Matrix3d& r);

/// Nearest rotation matrix (polar decomposition via SVD, det forced to +1).
Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r);

/// Extracts Euler angles with R = Rz * Ry * Rx. Gimbal lock (|ry| = 90 deg
/// within 1e-7 rad) is resolved by fixing rx = 0 and folding the free angle
/// into rz. Returns nullopt when R is not orthonormal within 1e-6.
std::optional<EulerXYZ> euler_from_rotation(const Eigen::Matrix3d& r);

Eigen::Matrix3d rotation_from_euler(const EulerXYZ& e);

/// Rotation-vector (axis * angle, radians) of r, robust near identity and pi.
Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r);

}  // namespace bendcell::geom
