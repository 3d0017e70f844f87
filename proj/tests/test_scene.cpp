#include "doctest.h"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "bendcell/scene.hpp"
#include "json.hpp"

using namespace bendcell;
using nlohmann::json;
using scene::Phase;
using scene::StepLabel;

namespace {

json pose_json(double x, double y, double z) {
  return json{{"position", {x, y, z}}, {"euler_xyz_deg", {0.0, 0.0, 0.0}}};
}

// Smallest legal cell: pickup, one bend pair, palletize.
json minimal_scene() {
  json doc;
  doc["brake"] = {{"pbh", 800.0}, {"dbl", 600.0}, {"nl", 3}, {"lwa", 100.0}, {"uwa", 400.0}};
  doc["stations"] = json::array(
      {{{"id", "S1"}, {"x_min", 0.0}, {"x_max", 1000.0}, {"punch_id", "P1"}, {"die_id", "D1"}}});
  doc["robot_base"] = {{"pose", pose_json(0, 0, 0)}};
  doc["pallets"] = {{"input", pose_json(0, 0, 100)}, {"output", pose_json(900, 0, 100)}};
  doc["tools"] = json::array({
      {{"name", "step_1"}, {"pose", pose_json(0, 0, 120)}},
      {{"name", "step_2A"}, {"pose", pose_json(300, 500, 1050)}},
      {{"name", "step_2B"}, {"pose", pose_json(300, 450, 1080)}},
      {{"name", "step_3"}, {"pose", pose_json(900, 0, 120)}},
  });
  doc["collision_world"] = json::array();
  doc["params"] = {
      {"approach_offset", {0.0, 0.0, 80.0}},
      {"retreat_offset", {0.0, 100.0, -20.0}},
      {"move_speed", 169.0},
      {"press_command_port", 2},
      {"gripper_port", 1},
      {"press_done_port", 1},
      {"press_wait", 2.0},
      {"gripper_settle", 0.5},
      {"pallet_increment", {0.0, 0.0, -3.0}},
      {"piece_count", 1},
  };
  return doc;
}

std::optional<scene::CellScene> parse(const json& doc, std::vector<Diagnostic>& diags) {
  return scene::parse_scene(doc.dump(2), diags);
}

bool has_code(const std::vector<Diagnostic>& diags, const std::string& code) {
  return std::any_of(diags.begin(), diags.end(),
                     [&](const Diagnostic& d) { return d.code == code; });
}

std::optional<StepLabel> label(const std::string& name) {
  std::vector<Diagnostic> diags;
  return scene::parse_step_label(name, diags);
}

std::string first_code(const std::string& name) {
  std::vector<Diagnostic> diags;
  auto l = scene::parse_step_label(name, diags);
  if (l) return "";
  return diags.empty() ? "" : diags.front().code;
}

}  // namespace

TEST_CASE("step label grammar accepts the documented forms") {
  CHECK(*label("step_1") == StepLabel{1, Phase::Pickup});
  CHECK(*label("step_2A") == StepLabel{2, Phase::BendPositionRelease});
  CHECK(*label("step_2B") == StepLabel{2, Phase::BendGraspRetrieve});
  CHECK(*label("step_3F") == StepLabel{3, Phase::MoveOnly});
  CHECK(*label("step_4") == StepLabel{4, Phase::Palletize});
  CHECK(*label("step_10") == StepLabel{10, Phase::Palletize});

  // Suffix letter is case-insensitive.
  CHECK(*label("step_2a") == StepLabel{2, Phase::BendPositionRelease});
  CHECK(*label("step_7b") == StepLabel{7, Phase::BendGraspRetrieve});
  CHECK(*label("step_5f") == StepLabel{5, Phase::MoveOnly});
}

TEST_CASE("legal labels round trip through their canonical spelling") {
  for (const char* name : {"step_1", "step_2A", "step_2B", "step_3F", "step_4", "step_12B"}) {
    auto l = label(name);
    REQUIRE(l.has_value());
    CHECK(scene::format_label(*l) == name);
  }
  CHECK(scene::format_label(*label("step_2a")) == "step_2A");
}

TEST_CASE("step label grammar rejections") {
  CHECK(first_code("step_x") == "MalformedLabel");
  CHECK(first_code("step_") == "MalformedLabel");
  CHECK(first_code("step") == "MalformedLabel");
  CHECK(first_code("Step_2A") == "MalformedLabel");
  CHECK(first_code("step_2AB") == "MalformedLabel");
  CHECK(first_code("step_2.5") == "MalformedLabel");
  CHECK(first_code("step_-3") == "MalformedLabel");
  CHECK(first_code("step_1A") == "MalformedLabel");  // suffixed index 1 is reserved
  CHECK(first_code("step_0") == "ZeroIndex");
  CHECK(first_code("step_0A") == "ZeroIndex");
}

TEST_CASE("smallest legal cell parses with four tools") {
  std::vector<Diagnostic> diags;
  auto cell = parse(minimal_scene(), diags);
  REQUIRE(cell.has_value());
  CHECK_FALSE(has_errors(diags));
  CHECK(cell->tools.size() == 4);
  CHECK(cell->stations.size() == 1);

  // Poses are stored exactly as written; normalization happens later.
  bool found = false;
  for (const auto& t : cell->tools) {
    if (t.name == "step_2A") {
      found = true;
      CHECK(t.pose.position.z() == 1050.0);
    }
  }
  CHECK(found);
}

TEST_CASE("a bend without its regrasp is accepted with a warning") {
  json doc = minimal_scene();
  json tools = json::array();
  for (const auto& t : doc["tools"]) {
    if (t["name"] != "step_2B") tools.push_back(t);
  }
  doc["tools"] = tools;

  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  REQUIRE(cell.has_value());
  CHECK_FALSE(has_errors(diags));
  CHECK(has_code(diags, "MissingRegrasp"));
}

TEST_CASE("a regrasp without its bend is an error") {
  json doc = minimal_scene();
  json tools = json::array();
  for (const auto& t : doc["tools"]) {
    if (t["name"] != "step_2A") tools.push_back(t);
  }
  doc["tools"] = tools;

  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  CHECK_FALSE(cell.has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("duplicate step labels are rejected") {
  json doc = minimal_scene();
  doc["tools"].push_back({{"name", "step_2a"}, {"pose", pose_json(1, 2, 3)}});

  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  CHECK_FALSE(cell.has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("pickup and palletize must appear exactly once, palletize last") {
  std::vector<Diagnostic> diags;
  json doc = minimal_scene();
  json tools = json::array();
  for (const auto& t : doc["tools"]) {
    if (t["name"] != "step_1") tools.push_back(t);
  }
  doc["tools"] = tools;
  CHECK_FALSE(parse(doc, diags).has_value());

  // Palletize not at the highest index.
  doc = minimal_scene();
  doc["tools"].push_back({{"name", "step_4A"}, {"pose", pose_json(1, 2, 1050)}});
  doc["tools"].push_back({{"name", "step_4B"}, {"pose", pose_json(1, 2, 1050)}});
  diags.clear();
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("syntax errors carry a line and column") {
  std::vector<Diagnostic> diags;
  auto cell = scene::parse_scene("{\n  \"brake\": [,]\n}", diags);
  CHECK_FALSE(cell.has_value());
  REQUIRE(has_code(diags, "SyntaxError"));
  const Diagnostic& d = diags.front();
  CHECK(d.line == 2);
  CHECK(d.column >= 1);
}

TEST_CASE("missing fields are reported by name") {
  json doc = minimal_scene();
  doc.erase("brake");
  std::vector<Diagnostic> diags;
  CHECK_FALSE(parse(doc, diags).has_value());
  REQUIRE(has_code(diags, "MissingField"));
  bool names_brake = false;
  for (const auto& d : diags) {
    if (d.code == "MissingField" && d.message.find("brake") != std::string::npos)
      names_brake = true;
  }
  CHECK(names_brake);
}

TEST_CASE("brake invariants") {
  json doc = minimal_scene();
  doc["brake"]["dbl"] = 200.0;  // < uwa - lwa: ladder windows would overlap
  std::vector<Diagnostic> diags;
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));

  doc = minimal_scene();
  doc["brake"]["lwa"] = 500.0;  // >= uwa
  diags.clear();
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("station invariants") {
  json doc = minimal_scene();
  doc["stations"].push_back(
      {{"id", "S2"}, {"x_min", 900.0}, {"x_max", 1500.0}, {"punch_id", "P2"}, {"die_id", "D2"}});
  std::vector<Diagnostic> diags;
  CHECK_FALSE(parse(doc, diags).has_value());  // overlaps S1 = [0, 1000)
  CHECK(has_code(diags, "InvariantViolation"));

  doc = minimal_scene();
  doc["stations"][0]["x_max"] = -5.0;
  diags.clear();
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("process parameter invariants") {
  scene::ProcessParams good;
  good.move_speed = 100.0;
  good.press_command_port = 2;
  good.gripper_port = 1;
  good.press_done_port = 1;
  good.piece_count = 1;

  std::vector<Diagnostic> diags;
  scene::validate_params(good, diags);
  CHECK(diags.empty());

  scene::ProcessParams p = good;
  p.move_speed = 0.0;
  diags.clear();
  scene::validate_params(p, diags);
  CHECK(has_code(diags, "InvariantViolation"));

  p = good;
  p.gripper_port = p.press_command_port;  // output ports collide
  diags.clear();
  scene::validate_params(p, diags);
  CHECK(has_code(diags, "InvariantViolation"));

  p = good;
  p.press_wait = -1.0;
  diags.clear();
  scene::validate_params(p, diags);
  CHECK(has_code(diags, "InvariantViolation"));

  p = good;
  p.piece_count = 0;
  diags.clear();
  scene::validate_params(p, diags);
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("poses accept euler or matrix rotation, matrix wins") {
  json doc = minimal_scene();
  // Rz(90) as a row-major matrix, plus a contradictory euler field.
  doc["tools"][1]["pose"]["rotation"] =
      json::array({{0.0, -1.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
  doc["tools"][1]["pose"]["euler_xyz_deg"] = {45.0, 0.0, 0.0};

  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  REQUIRE(cell.has_value());
  for (const auto& t : cell->tools) {
    if (t.name == "step_3A" || t.name == doc["tools"][1]["name"]) {
      Eigen::Matrix3d expect;
      expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
      CHECK((t.pose.rotation - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("slightly dirty rotation matrices are repaired, garbage rejected") {
  json doc = minimal_scene();
  doc["tools"][1]["pose"].erase("euler_xyz_deg");
  doc["tools"][1]["pose"]["rotation"] =
      json::array({{1.0, 1e-8, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  REQUIRE(cell.has_value());
  for (const auto& t : cell->tools) {
    CHECK(geom::orthonormality_error(t.pose.rotation) <= 1e-9);
  }

  doc["tools"][1]["pose"]["rotation"] =
      json::array({{1.5, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  diags.clear();
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("bad collision boxes are rejected") {
  json doc = minimal_scene();
  doc["collision_world"].push_back(
      {{"id", "b"}, {"min", {0.0, 0.0, 10.0}}, {"max", {100.0, 100.0, 10.0}}});
  std::vector<Diagnostic> diags;
  CHECK_FALSE(parse(doc, diags).has_value());
  CHECK(has_code(diags, "InvariantViolation"));
}

TEST_CASE("ordered steps sorts by index with A before B") {
  std::vector<Diagnostic> diags;
  auto cell = parse(minimal_scene(), diags);
  REQUIRE(cell.has_value());

  // Scramble, then check the canonical order comes back.
  std::vector<std::string> want;
  for (const auto& t : scene::ordered_steps(*cell)) want.push_back(t.name);
  CHECK(want == std::vector<std::string>{"step_1", "step_2A", "step_2B", "step_3"});

  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    scene::CellScene shuffled = *cell;
    std::shuffle(shuffled.tools.begin(), shuffled.tools.end(), rng);
    std::vector<std::string> got;
    for (const auto& t : scene::ordered_steps(shuffled)) got.push_back(t.name);
    CHECK(got == want);
  }
}

TEST_CASE("ordered steps on a longer mixed sequence") {
  json doc = minimal_scene();
  doc["tools"] = json::array({
      {{"name", "step_4"}, {"pose", pose_json(0, 0, 0)}},
      {{"name", "step_3F"}, {"pose", pose_json(0, 0, 0)}},
      {{"name", "step_2B"}, {"pose", pose_json(0, 0, 1080)}},
      {{"name", "step_1"}, {"pose", pose_json(0, 0, 0)}},
      {{"name", "step_2A"}, {"pose", pose_json(0, 0, 1050)}},
  });
  std::vector<Diagnostic> diags;
  auto cell = parse(doc, diags);
  REQUIRE(cell.has_value());

  std::vector<std::string> got;
  for (const auto& t : scene::ordered_steps(*cell)) got.push_back(t.name);
  CHECK(got == std::vector<std::string>{"step_1", "step_2A", "step_2B", "step_3F", "step_4"});
}
