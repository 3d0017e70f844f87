#include "bendcell/kinematics.hpp"

#include <cmath>

#include "bendcell/format.hpp"
#include "json_util.hpp"

namespace bendcell::kin {

namespace {

Eigen::Matrix4d dh_matrix(const DhRow& row, double q_deg) {
  const double theta = geom::deg2rad(row.theta_offset + q_deg);
  const double alpha = geom::deg2rad(row.alpha);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  return m;
}

Eigen::Matrix<double, 6, 1> pose_error(const geom::Pose& target, const geom::Pose& actual) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.position - actual.position;
  e.tail<3>() = geom::rotation_vector(target.rotation * actual.rotation.transpose());
  return e;
}

}  // namespace

geom::Pose forward(const ArmModel& arm, const JointVector& q) {
  Eigen::Matrix4d m = arm.base.matrix();
  for (size_t i = 0; i < 6; ++i) {
    m = m * dh_matrix(arm.dh_rows[i], q[i]);
  }
  m = m * arm.tool.matrix();
  geom::Pose out;
  out.rotation = m.topLeftCorner<3, 3>();
  out.position = m.topRightCorner<3, 1>();
  return out;
}

Eigen::Matrix<double, 6, 6> numeric_jacobian(const ArmModel& arm, const JointVector& q) {
  constexpr double h_rad = 1e-6;
  const double h_deg = geom::rad2deg(h_rad);
  Eigen::Matrix<double, 6, 6> j;
  for (size_t col = 0; col < 6; ++col) {
    JointVector qp = q, qm = q;
    qp[col] += h_deg;
    qm[col] -= h_deg;
    const geom::Pose tp = forward(arm, qp);
    const geom::Pose tm = forward(arm, qm);
    j.col(col).head<3>() = (tp.position - tm.position) / (2.0 * h_rad);
    j.col(col).tail<3>() = geom::rotation_vector(tp.rotation * tm.rotation.transpose()) / (2.0 * h_rad);
  }
  return j;
}

IkResult solve_ik(const ArmModel& arm, const geom::Pose& target, const JointVector& seed) {
  IkResult result;
  result.q = seed;

  auto residual = [&](const JointVector& q) { return pose_error(target, forward(arm, q)); };

  Eigen::Matrix<double, 6, 1> e = residual(result.q);
  double pos_res = e.head<3>().norm();
  double rot_res = e.tail<3>().norm();
  constexpr double kTol = 1e-6;
  constexpr int kMaxIters = 200;
  double lambda = 1e-3;

  Eigen::Matrix<double, 6, 6> j = numeric_jacobian(arm, result.q);
  while (result.iterations < kMaxIters && (pos_res > kTol || rot_res > kTol)) {
    ++result.iterations;
    const Eigen::Matrix<double, 6, 6> jtj = j.transpose() * j;
    const Eigen::Matrix<double, 6, 6> damped =
        jtj + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 1> dq_rad = damped.ldlt().solve(j.transpose() * e);

    JointVector candidate = result.q;
    for (size_t i = 0; i < 6; ++i) candidate[i] += geom::rad2deg(dq_rad[i]);
    const Eigen::Matrix<double, 6, 1> e_new = residual(candidate);

    if (e_new.norm() < e.norm()) {
      result.q = candidate;
      e = e_new;
      pos_res = e.head<3>().norm();
      rot_res = e.tail<3>().norm();
      lambda = std::max(lambda / 10.0, 1e-12);
      j = numeric_jacobian(arm, result.q);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  result.pos_residual_mm = pos_res;
  result.rot_residual_rad = rot_res;
  result.converged = pos_res <= kTol && rot_res <= kTol;
  return result;
}

std::optional<JointVector> inverse(const ArmModel& arm, const geom::Pose& target,
                                   const JointVector& seed, std::vector<Diagnostic>& diags) {
  const IkResult result = solve_ik(arm, target, seed);
  if (!result.converged) {
    diags.push_back(make_error(
        "NoConvergence",
        strf("inverse kinematics stalled at %.3g mm / %.3g rad after %d iterations",
             result.pos_residual_mm, result.rot_residual_rad, result.iterations)));
    return std::nullopt;
  }
  auto limit_diags = within_limits(arm, result.q);
  diags.insert(diags.end(), limit_diags.begin(), limit_diags.end());
  return result.q;
}

std::vector<Diagnostic> within_limits(const ArmModel& arm, const JointVector& q) {
  std::vector<Diagnostic> out;
  for (size_t i = 0; i < 6; ++i) {
    const JointLimit& lim = arm.joint_limits[i];
    if (q[i] < lim.min_deg || q[i] > lim.max_deg) {
      out.push_back(make_error("LimitViolation",
                               strf("joint %zu at %.4f deg is outside [%.4f, %.4f]",
                                    i + 1, q[i], lim.min_deg, lim.max_deg)));
    }
  }
  return out;
}

std::optional<ArmModel> parse_arm(std::string_view text, std::vector<Diagnostic>& diags) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    jsonu::LineCol lc = jsonu::line_col_at(text, e.byte > 0 ? e.byte - 1 : 0);
    diags.push_back(make_error("SyntaxError", e.what(), lc.line, lc.col));
    return std::nullopt;
  }
  if (!doc.is_object()) {
    diags.push_back(make_error("SyntaxError", "arm document must be a JSON object", 1, 1));
    return std::nullopt;
  }

  ArmModel arm;
  bool ok = true;

  if (const json* rows = jsonu::require(doc, "dh_rows", "dh_rows", diags)) {
    if (!rows->is_array() || rows->size() != 6) {
      diags.push_back(make_error("InvariantViolation", "dh_rows must hold exactly 6 rows"));
      ok = false;
    } else {
      for (size_t i = 0; i < 6; ++i) {
        const json& row = (*rows)[i];
        const std::string path = "dh_rows[" + std::to_string(i) + "]";
        if (!row.is_array() || row.size() != 4) {
          diags.push_back(make_error("MissingField", "field '" + path + "' must be [a, alpha, d, theta_offset]"));
          ok = false;
          continue;
        }
        std::array<double, 4> v{};
        for (size_t k = 0; k < 4; ++k) {
          auto num = jsonu::as_number(row[k], path + "[" + std::to_string(k) + "]", diags);
          if (!num) {
            ok = false;
            break;
          }
          v[k] = *num;
        }
        arm.dh_rows[i] = DhRow{v[0], v[1], v[2], v[3]};
      }
    }
  } else {
    ok = false;
  }

  if (const json* limits = jsonu::require(doc, "joint_limits", "joint_limits", diags)) {
    if (!limits->is_array() || limits->size() != 6) {
      diags.push_back(make_error("InvariantViolation", "joint_limits must hold exactly 6 [min, max] pairs"));
      ok = false;
    } else {
      for (size_t i = 0; i < 6; ++i) {
        const json& pair = (*limits)[i];
        const std::string path = "joint_limits[" + std::to_string(i) + "]";
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
          diags.push_back(make_error("MissingField", "field '" + path + "' must be [min_deg, max_deg]"));
          ok = false;
          continue;
        }
        arm.joint_limits[i] = JointLimit{pair[0].get<double>(), pair[1].get<double>()};
        if (!(arm.joint_limits[i].min_deg < arm.joint_limits[i].max_deg)) {
          diags.push_back(make_error("InvariantViolation", "joint " + std::to_string(i + 1) + ": min must be < max"));
          ok = false;
        }
      }
    }
  } else {
    ok = false;
  }

  if (auto base = jsonu::require_pose(doc, "base", "base", diags)) {
    arm.base = *base;
  } else {
    ok = false;
  }
  if (auto tool = jsonu::require_pose(doc, "tool", "tool", diags)) {
    arm.tool = *tool;
  } else {
    ok = false;
  }

  if (const json* home = jsonu::require(doc, "home", "home", diags)) {
    if (!home->is_array() || home->size() != 6) {
      diags.push_back(make_error("MissingField", "field 'home' must be an array of 6 joint angles (deg)"));
      ok = false;
    } else {
      for (size_t i = 0; i < 6; ++i) {
        auto num = jsonu::as_number((*home)[i], "home[" + std::to_string(i) + "]", diags);
        if (!num) {
          ok = false;
          break;
        }
        arm.home[i] = *num;
      }
    }
  } else {
    ok = false;
  }

  if (!ok || has_errors(diags)) return std::nullopt;
  return arm;
}

}  // namespace bendcell::kin
