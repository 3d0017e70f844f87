#pragma once

// Internal JSON field helpers shared by the scene and arm parsers.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bendcell/diagnostics.hpp"
#include "bendcell/geometry.hpp"

namespace bendcell::jsonu {

using nlohmann::json;

struct LineCol {
  int line = 1;
  int col = 1;
};

inline LineCol line_col_at(std::string_view text, size_t byte) {
  LineCol lc;
  byte = std::min(byte, text.size());
  for (size_t i = 0; i < byte; ++i) {
    if (text[i] == '\n') {
      ++lc.line;
      lc.col = 1;
    } else {
      ++lc.col;
    }
  }
  return lc;
}

inline const json* require(const json& parent, const char* key, const std::string& path,
                           std::vector<Diagnostic>& diags) {
  auto it = parent.find(key);
  if (it == parent.end()) {
    diags.push_back(make_error("MissingField", "missing field '" + path + "'"));
    return nullptr;
  }
  return &*it;
}

inline std::optional<double> as_number(const json& node, const std::string& path,
                                       std::vector<Diagnostic>& diags) {
  if (!node.is_number()) {
    diags.push_back(make_error("MissingField", "field '" + path + "' must be a number"));
    return std::nullopt;
  }
  return node.get<double>();
}

inline std::optional<double> require_number(const json& parent, const char* key, const std::string& path,
                                            std::vector<Diagnostic>& diags) {
  const json* node = require(parent, key, path, diags);
  if (!node) return std::nullopt;
  return as_number(*node, path, diags);
}

inline std::optional<int> require_int(const json& parent, const char* key, const std::string& path,
                                      std::vector<Diagnostic>& diags) {
  const json* node = require(parent, key, path, diags);
  if (!node) return std::nullopt;
  if (!node->is_number_integer()) {
    diags.push_back(make_error("MissingField", "field '" + path + "' must be an integer"));
    return std::nullopt;
  }
  return node->get<int>();
}

inline std::optional<std::string> require_string(const json& parent, const char* key, const std::string& path,
                                                 std::vector<Diagnostic>& diags) {
  const json* node = require(parent, key, path, diags);
  if (!node) return std::nullopt;
  if (!node->is_string()) {
    diags.push_back(make_error("MissingField", "field '" + path + "' must be a string"));
    return std::nullopt;
  }
  return node->get<std::string>();
}

inline std::optional<Eigen::Vector3d> parse_vec3(const json& node, const std::string& path,
                                                 std::vector<Diagnostic>& diags) {
  if (!node.is_array() || node.size() != 3) {
    diags.push_back(make_error("MissingField", "field '" + path + "' must be an array of 3 numbers"));
    return std::nullopt;
  }
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    auto x = as_number(node[i], path + "[" + std::to_string(i) + "]", diags);
    if (!x) return std::nullopt;
    v[i] = *x;
  }
  return v;
}

inline std::optional<Eigen::Vector3d> require_vec3(const json& parent, const char* key, const std::string& path,
                                                   std::vector<Diagnostic>& diags) {
  const json* node = require(parent, key, path, diags);
  if (!node) return std::nullopt;
  return parse_vec3(*node, path, diags);
}

// pose = {position:[x,y,z], rotation:[[..]x3]} or {position, euler_xyz_deg:[rx,ry,rz]}.
// A rotation matrix wins when both are present. Matrices within 1e-6 of
// orthonormal are repaired by polar decomposition; worse ones are rejected.
inline std::optional<geom::Pose> parse_pose(const json& node, const std::string& path,
                                            std::vector<Diagnostic>& diags) {
  if (!node.is_object()) {
    diags.push_back(make_error("MissingField", "field '" + path + "' must be a pose object"));
    return std::nullopt;
  }
  geom::Pose pose;
  auto pos = require_vec3(node, "position", path + ".position", diags);
  if (!pos) return std::nullopt;
  pose.position = *pos;

  auto rot_it = node.find("rotation");
  auto euler_it = node.find("euler_xyz_deg");
  if (rot_it != node.end()) {
    const json& rows = *rot_it;
    if (!rows.is_array() || rows.size() != 3) {
      diags.push_back(make_error("MissingField", "field '" + path + ".rotation' must be a 3x3 row-major matrix"));
      return std::nullopt;
    }
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i) {
      auto row = parse_vec3(rows[i], path + ".rotation[" + std::to_string(i) + "]", diags);
      if (!row) return std::nullopt;
      r.row(i) = row->transpose();
    }
    const double err = geom::orthonormality_error(r);
    if (err > 1e-6) {
      diags.push_back(make_error("InvariantViolation",
                                 "pose '" + path + "': rotation is not orthonormal (max|R^T R - I| = " +
                                     std::to_string(err) + ", repair tolerance 1e-6)"));
      return std::nullopt;
    }
    if (err > 1e-9) r = geom::orthonormalized(r);
    if (r.determinant() < 0.0) {
      diags.push_back(make_error("InvariantViolation", "pose '" + path + "': rotation has det -1 (reflection)"));
      return std::nullopt;
    }
    pose.rotation = r;
  } else if (euler_it != node.end()) {
    auto e = parse_vec3(*euler_it, path + ".euler_xyz_deg", diags);
    if (!e) return std::nullopt;
    pose.rotation = geom::rotation_from_euler({(*e)[0], (*e)[1], (*e)[2]});
  } else {
    diags.push_back(make_error("MissingField", "pose '" + path + "' needs 'rotation' or 'euler_xyz_deg'"));
    return std::nullopt;
  }
  return pose;
}

inline std::optional<geom::Pose> require_pose(const json& parent, const char* key, const std::string& path,
                                              std::vector<Diagnostic>& diags) {
  const json* node = require(parent, key, path, diags);
  if (!node) return std::nullopt;
  return parse_pose(*node, path, diags);
}

}  // namespace bendcell::jsonu
