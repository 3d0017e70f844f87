#include "bendcell/geometry.hpp"

#include <cmath>

namespace bendcell::geom {

namespace {

// Maps degrees into (-180, 180]; exactly -180 becomes +180.
double canonical_deg(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

}  // namespace

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.position = a.rotation * b.position + a.position;
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.position = -(out.rotation * p.position);
  return out;
}

Pose relative_pose(const Pose& base, const Pose& target) {
  return compose(invert(base), target);
}

double orthonormality_error(const Eigen::Matrix3d& r) {
  Eigen::Matrix3d residual = r.transpose() * r - Eigen::Matrix3d::Identity();
  return residual.cwiseAbs().maxCoeff();
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d out = u * v.transpose();
  if (out.determinant() < 0.0) {
    u.col(2) *= -1.0;
    out = u * v.transpose();
  }
  return out;
}

std::optional<EulerXYZ> euler_from_rotation(const Eigen::Matrix3d& r_in) {
  if (orthonormality_error(r_in) > 1e-6 || r_in.determinant() < 0.0) return std::nullopt;
  Eigen::Matrix3d r = orthonormality_error(r_in) > 1e-9 ? orthonormalized(r_in) : r_in;

  // With R = Rz*Ry*Rx: R(2,0) = -sin(ry), R(2,1) = cos(ry)sin(rx),
  // R(2,2) = cos(ry)cos(rx), R(1,0) = sin(rz)cos(ry), R(0,0) = cos(rz)cos(ry).
  const double sy = -r(2, 0);
  const double cy = std::hypot(r(2, 1), r(2, 2));  // |cos(ry)|, >= 0

  EulerXYZ e;
  if (cy < 1e-7) {
    // Gimbal lock: ry = +-90 deg, rx and rz become coupled. Fix rx = 0.
    e.rx = 0.0;
    e.ry = sy > 0.0 ? 90.0 : -90.0;
    e.rz = canonical_deg(rad2deg(std::atan2(-r(0, 1), r(1, 1))));
  } else {
    e.rx = canonical_deg(rad2deg(std::atan2(r(2, 1), r(2, 2))));
    e.ry = rad2deg(std::atan2(sy, cy));  // atan2 with cy >= 0 lands in [-90, 90]
    e.rz = canonical_deg(rad2deg(std::atan2(r(1, 0), r(0, 0))));
  }
  return e;
}

Eigen::Matrix3d rotation_from_euler(const EulerXYZ& e) {
  const double rx = deg2rad(e.rx);
  const double ry = deg2rad(e.ry);
  const double rz = deg2rad(e.rz);
  Eigen::Matrix3d out;
  out = Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
        Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
        Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX());
  return out;
}

Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

}  // namespace bendcell::geom
