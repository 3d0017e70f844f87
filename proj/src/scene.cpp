#include "bendcell/scene.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"

namespace bendcell::scene {

using nlohmann::json;

std::string format_label(const StepLabel& label) {
  std::string out = "step_" + std::to_string(label.index);
  switch (label.phase) {
    case Phase::Pickup:
    case Phase::Palletize:
      break;
    case Phase::BendPositionRelease:
      out += 'A';
      break;
    case Phase::BendGraspRetrieve:
      out += 'B';
      break;
    case Phase::MoveOnly:
      out += 'F';
      break;
  }
  return out;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::Pickup: return "Pickup";
    case Phase::MoveOnly: return "MoveOnly";
    case Phase::BendPositionRelease: return "BendPositionRelease";
    case Phase::BendGraspRetrieve: return "BendGraspRetrieve";
    case Phase::Palletize: return "Palletize";
  }
  return "?";
}

std::optional<StepLabel> parse_step_label(std::string_view name, std::vector<Diagnostic>& diags) {
  constexpr std::string_view prefix = "step_";
  if (!name.starts_with(prefix)) {
    diags.push_back(make_error("MalformedLabel", "tool name '" + std::string(name) + "' does not start with 'step_'"));
    return std::nullopt;
  }
  std::string_view rest = name.substr(prefix.size());

  // Split into digits and an optional single suffix letter.
  size_t digits = 0;
  while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
  std::string_view number = rest.substr(0, digits);
  std::string_view suffix = rest.substr(digits);
  if (number.empty() || suffix.size() > 1) {
    diags.push_back(make_error("MalformedLabel", "tool name '" + std::string(name) + "' does not match step_<n>[A|B|F]"));
    return std::nullopt;
  }

  int index = 0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), index);
  if (ec != std::errc{} || ptr != number.data() + number.size()) {
    diags.push_back(make_error("MalformedLabel", "tool name '" + std::string(name) + "' has an unreadable step index"));
    return std::nullopt;
  }
  if (index < 1) {
    diags.push_back(make_error("ZeroIndex", "tool name '" + std::string(name) + "' uses step index " + std::to_string(index) + "; indices start at 1"));
    return std::nullopt;
  }

  Phase phase;
  if (suffix.empty()) {
    phase = index == 1 ? Phase::Pickup : Phase::Palletize;
  } else {
    switch (std::toupper(static_cast<unsigned char>(suffix[0]))) {
      case 'A': phase = Phase::BendPositionRelease; break;
      case 'B': phase = Phase::BendGraspRetrieve; break;
      case 'F': phase = Phase::MoveOnly; break;
      default:
        diags.push_back(make_error("MalformedLabel", "tool name '" + std::string(name) + "' has unknown suffix '" + std::string(suffix) + "'"));
        return std::nullopt;
    }
    if (index == 1) {
      // Index 1 is reserved for the pickup pose.
      diags.push_back(make_error("MalformedLabel", "tool name '" + std::string(name) + "' puts a suffixed phase at index 1, which is reserved for step_1"));
      return std::nullopt;
    }
  }
  return StepLabel{index, phase};
}

int phase_rank(Phase phase) {
  switch (phase) {
    case Phase::Pickup: return 0;
    case Phase::BendPositionRelease: return 1;
    case Phase::BendGraspRetrieve: return 2;
    case Phase::MoveOnly: return 3;
    case Phase::Palletize: return 4;
  }
  return 5;
}

std::vector<ToolModelPose> ordered_steps(const CellScene& scene) {
  std::vector<ToolModelPose> out = scene.tools;
  std::stable_sort(out.begin(), out.end(), [](const ToolModelPose& a, const ToolModelPose& b) {
    if (a.label.index != b.label.index) return a.label.index < b.label.index;
    return phase_rank(a.label.phase) < phase_rank(b.label.phase);
  });
  return out;
}

namespace {

void validate_tools(const CellScene& scene, std::vector<Diagnostic>& diags) {
  if (scene.tools.empty()) {
    diags.push_back(make_error("InvariantViolation", "scene has no tool models"));
    return;
  }

  std::map<std::pair<int, int>, std::string> seen;  // (index, phase_rank) -> name
  int max_index = 0;
  int pickup_count = 0;
  std::vector<const ToolModelPose*> palletize;
  std::set<int> a_indices, b_indices;

  for (const auto& tool : scene.tools) {
    max_index = std::max(max_index, tool.label.index);
    auto key = std::make_pair(tool.label.index, phase_rank(tool.label.phase));
    auto [it, inserted] = seen.emplace(key, tool.name);
    if (!inserted) {
      diags.push_back(make_error("InvariantViolation",
                                 "duplicate step label: '" + tool.name + "' repeats (index " + std::to_string(tool.label.index) +
                                     ", " + phase_name(tool.label.phase) + ") already used by '" + it->second + "'"));
    }
    switch (tool.label.phase) {
      case Phase::Pickup: ++pickup_count; break;
      case Phase::Palletize: palletize.push_back(&tool); break;
      case Phase::BendPositionRelease: a_indices.insert(tool.label.index); break;
      case Phase::BendGraspRetrieve: b_indices.insert(tool.label.index); break;
      case Phase::MoveOnly: break;
    }
  }

  if (pickup_count != 1) {
    diags.push_back(make_error("InvariantViolation", "scene must contain exactly one step_1 (found " + std::to_string(pickup_count) + ")"));
  }
  if (palletize.size() != 1) {
    diags.push_back(make_error("InvariantViolation", "scene must contain exactly one palletize step (found " + std::to_string(palletize.size()) + ")"));
  } else if (palletize[0]->label.index != max_index) {
    diags.push_back(make_error("InvariantViolation",
                               "palletize step '" + palletize[0]->name + "' must carry the highest index (" + std::to_string(max_index) + ")"));
  }

  for (int b : b_indices) {
    if (!a_indices.count(b)) {
      diags.push_back(make_error("InvariantViolation",
                                 "step_" + std::to_string(b) + "B has no matching step_" + std::to_string(b) + "A"));
    }
  }
  for (int a : a_indices) {
    if (!b_indices.count(a)) {
      diags.push_back(make_warning("MissingRegrasp",
                                   "step_" + std::to_string(a) + "A has no step_" + std::to_string(a) +
                                       "B; the bend cycle will omit the re-grasp block"));
    }
  }
}

void validate_brake(const PressBrakeSpec& brake, std::vector<Diagnostic>& diags) {
  if (!(brake.dbl > 0.0)) {
    diags.push_back(make_error("InvariantViolation", "brake.dbl must be > 0"));
  }
  if (brake.nl < 0) {
    diags.push_back(make_error("InvariantViolation", "brake.nl must be >= 0"));
  }
  if (!(brake.lwa < brake.uwa)) {
    diags.push_back(make_error("InvariantViolation", "brake.lwa must be < brake.uwa"));
  }
  if (brake.dbl < brake.uwa - brake.lwa) {
    diags.push_back(make_error("InvariantViolation",
                               "brake.dbl must be >= uwa - lwa so a pose matches at most one ladder line"));
  }
}

void validate_stations(const std::vector<ToolingStation>& stations, std::vector<Diagnostic>& diags) {
  for (const auto& s : stations) {
    if (!(s.x_min < s.x_max)) {
      diags.push_back(make_error("InvariantViolation", "station '" + s.id + "': x_min must be < x_max"));
    }
  }
  for (size_t i = 0; i < stations.size(); ++i) {
    for (size_t j = i + 1; j < stations.size(); ++j) {
      const auto& a = stations[i];
      const auto& b = stations[j];
      if (a.x_min < b.x_max && b.x_min < a.x_max) {
        diags.push_back(make_error("InvariantViolation", "stations '" + a.id + "' and '" + b.id + "' overlap"));
      }
    }
  }
}

}  // namespace

void validate_params(const ProcessParams& p, std::vector<Diagnostic>& diags) {
  if (!(p.move_speed > 0.0)) {
    diags.push_back(make_error("InvariantViolation", "params.move_speed must be > 0"));
  }
  if (p.press_wait < 0.0 || p.gripper_settle < 0.0) {
    diags.push_back(make_error("InvariantViolation", "params waits must be >= 0"));
  }
  if (p.press_command_port == p.gripper_port) {
    diags.push_back(make_error("InvariantViolation", "params.press_command_port and params.gripper_port must be distinct"));
  }
  if (p.press_command_port < 1 || p.gripper_port < 1 || p.press_done_port < 1) {
    diags.push_back(make_error("InvariantViolation", "params ports must be >= 1"));
  }
  if (p.piece_count < 1) {
    diags.push_back(make_error("InvariantViolation", "params.piece_count must be >= 1"));
  }
}

std::optional<CellScene> parse_scene(std::string_view text, std::vector<Diagnostic>& diags) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    jsonu::LineCol lc = jsonu::line_col_at(text, e.byte > 0 ? e.byte - 1 : 0);
    diags.push_back(make_error("SyntaxError", e.what(), lc.line, lc.col));
    return std::nullopt;
  }
  if (!doc.is_object()) {
    diags.push_back(make_error("SyntaxError", "scene document must be a JSON object", 1, 1));
    return std::nullopt;
  }

  CellScene scene;

  if (const json* brake = jsonu::require(doc, "brake", "brake", diags)) {
    auto pbh = jsonu::require_number(*brake, "pbh", "brake.pbh", diags);
    auto dbl = jsonu::require_number(*brake, "dbl", "brake.dbl", diags);
    auto nl = jsonu::require_int(*brake, "nl", "brake.nl", diags);
    auto lwa = jsonu::require_number(*brake, "lwa", "brake.lwa", diags);
    auto uwa = jsonu::require_number(*brake, "uwa", "brake.uwa", diags);
    if (pbh && dbl && nl && lwa && uwa) {
      scene.brake = PressBrakeSpec{*pbh, *dbl, *nl, *lwa, *uwa};
      validate_brake(scene.brake, diags);
    }
  }

  if (const json* stations = jsonu::require(doc, "stations", "stations", diags)) {
    if (!stations->is_array()) {
      diags.push_back(make_error("MissingField", "field 'stations' must be an array"));
    } else {
      for (size_t i = 0; i < stations->size(); ++i) {
        const std::string path = "stations[" + std::to_string(i) + "]";
        const json& s = (*stations)[i];
        auto id = jsonu::require_string(s, "id", path + ".id", diags);
        auto x_min = jsonu::require_number(s, "x_min", path + ".x_min", diags);
        auto x_max = jsonu::require_number(s, "x_max", path + ".x_max", diags);
        auto punch = jsonu::require_string(s, "punch_id", path + ".punch_id", diags);
        auto die = jsonu::require_string(s, "die_id", path + ".die_id", diags);
        if (id && x_min && x_max && punch && die) {
          scene.stations.push_back(ToolingStation{*id, *x_min, *x_max, *punch, *die});
        }
      }
      validate_stations(scene.stations, diags);
    }
  }

  if (const json* base = jsonu::require(doc, "robot_base", "robot_base", diags)) {
    if (auto pose = jsonu::require_pose(*base, "pose", "robot_base.pose", diags)) {
      scene.robot_base = *pose;
    }
  }

  if (const json* pallets = jsonu::require(doc, "pallets", "pallets", diags)) {
    if (auto in = jsonu::require_pose(*pallets, "input", "pallets.input", diags)) scene.pallet_input = *in;
    if (auto out = jsonu::require_pose(*pallets, "output", "pallets.output", diags)) scene.pallet_output = *out;
  }

  if (const json* tools = jsonu::require(doc, "tools", "tools", diags)) {
    if (!tools->is_array()) {
      diags.push_back(make_error("MissingField", "field 'tools' must be an array"));
    } else {
      for (size_t i = 0; i < tools->size(); ++i) {
        const std::string path = "tools[" + std::to_string(i) + "]";
        const json& t = (*tools)[i];
        auto name = jsonu::require_string(t, "name", path + ".name", diags);
        if (!name) continue;
        auto label = parse_step_label(*name, diags);
        auto pose = jsonu::require_pose(t, "pose", path + ".pose", diags);
        if (label && pose) {
          scene.tools.push_back(ToolModelPose{*label, *name, *pose});
        }
      }
    }
  }

  if (const json* world = jsonu::require(doc, "collision_world", "collision_world", diags)) {
    if (!world->is_array()) {
      diags.push_back(make_error("MissingField", "field 'collision_world' must be an array"));
    } else {
      for (size_t i = 0; i < world->size(); ++i) {
        const std::string path = "collision_world[" + std::to_string(i) + "]";
        const json& b = (*world)[i];
        auto id = jsonu::require_string(b, "id", path + ".id", diags);
        auto mn = jsonu::require_vec3(b, "min", path + ".min", diags);
        auto mx = jsonu::require_vec3(b, "max", path + ".max", diags);
        if (id && mn && mx) {
          if (((*mn).array() >= (*mx).array()).any()) {
            diags.push_back(make_error("InvariantViolation", "box '" + *id + "': min must be < max on every axis"));
          } else {
            scene.collision_world.push_back(Box{*id, *mn, *mx});
          }
        }
      }
    }
  }

  if (const json* params = jsonu::require(doc, "params", "params", diags)) {
    ProcessParams p;
    auto ao = jsonu::require_vec3(*params, "approach_offset", "params.approach_offset", diags);
    auto ro = jsonu::require_vec3(*params, "retreat_offset", "params.retreat_offset", diags);
    auto speed = jsonu::require_number(*params, "move_speed", "params.move_speed", diags);
    auto pcp = jsonu::require_int(*params, "press_command_port", "params.press_command_port", diags);
    auto gp = jsonu::require_int(*params, "gripper_port", "params.gripper_port", diags);
    auto pdp = jsonu::require_int(*params, "press_done_port", "params.press_done_port", diags);
    auto pw = jsonu::require_number(*params, "press_wait", "params.press_wait", diags);
    auto gs = jsonu::require_number(*params, "gripper_settle", "params.gripper_settle", diags);
    auto inc = jsonu::require_vec3(*params, "pallet_increment", "params.pallet_increment", diags);
    auto pc = jsonu::require_int(*params, "piece_count", "params.piece_count", diags);
    if (ao && ro && speed && pcp && gp && pdp && pw && gs && inc && pc) {
      p.approach_offset = *ao;
      p.retreat_offset = *ro;
      p.move_speed = *speed;
      p.press_command_port = *pcp;
      p.gripper_port = *gp;
      p.press_done_port = *pdp;
      p.press_wait = *pw;
      p.gripper_settle = *gs;
      p.pallet_increment = *inc;
      p.piece_count = *pc;
      scene.params = p;
      validate_params(scene.params, diags);
    }
  }

  validate_tools(scene, diags);

  if (has_errors(diags)) return std::nullopt;
  return scene;
}

}  // namespace bendcell::scene
