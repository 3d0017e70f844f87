#include "doctest.h"

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bendcell/bendline.hpp"
#include "bendcell/codegen.hpp"
#include "bendcell/scene.hpp"
#include "bendcell/vm.hpp"

using namespace bendcell;
using namespace bendcell::codegen;
using bendline::NormalizedPose;
using scene::Phase;
using scene::StepLabel;

namespace {

scene::ProcessParams fig_params() {
  scene::ProcessParams p;
  p.approach_offset = Eigen::Vector3d(0, 0, 80);
  p.retreat_offset = Eigen::Vector3d(0, 100, -20);
  p.move_speed = 169.0;
  p.press_command_port = 2;
  p.gripper_port = 1;
  p.press_done_port = 1;
  p.press_wait = 2.0;
  p.gripper_settle = 0.5;
  p.pallet_increment = Eigen::Vector3d(0, 0, -3);
  p.piece_count = 1;
  return p;
}

NormalizedPose make_step(int index, Phase phase, double x, double y, double z) {
  NormalizedPose np;
  np.original.label = StepLabel{index, phase};
  np.original.name = scene::format_label(np.original.label);
  np.original.pose.position = Eigen::Vector3d(x, y, z);
  np.updated_z = z;
  return np;
}

// pickup + n bend pairs + palletize, all poses trivially placed
std::vector<NormalizedPose> steps_with_bends(int bends) {
  std::vector<NormalizedPose> steps;
  steps.push_back(make_step(1, Phase::Pickup, 0, 0, 100));
  for (int i = 0; i < bends; ++i) {
    steps.push_back(make_step(2 + i, Phase::BendPositionRelease, 100.0 * i, 500, 1000));
    steps.push_back(make_step(2 + i, Phase::BendGraspRetrieve, 100.0 * i, 450, 1020));
  }
  steps.push_back(make_step(2 + bends, Phase::Palletize, 900, 0, 100));
  return steps;
}

scene::CellScene cell_for(const scene::ProcessParams& p) {
  scene::CellScene cell;
  cell.params = p;
  return cell;
}

std::vector<std::string> body_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  bool in_body = false;
  while (std::getline(in, line)) {
    if (line == "//INST") {
      in_body = true;
      continue;
    }
    if (in_body) lines.push_back(line);
  }
  return lines;
}

// Maximal off->on transitions of one output port, walking the body linearly.
int press_pulses(const ProgramIR& ir, int port) {
  int pulses = 0;
  bool level = false;
  for (const auto& inst : ir.body) {
    if (const auto* so = std::get_if<SetOutput>(&inst)) {
      if (so->port != port) continue;
      if (so->on && !level) ++pulses;
      level = so->on;
    }
  }
  return pulses;
}

int count_gripper_off(const ProgramIR& ir, int port) {
  int n = 0;
  for (const auto& inst : ir.body) {
    if (const auto* so = std::get_if<SetOutput>(&inst)) {
      if (so->port == port && !so->on) ++n;
    }
  }
  return n;
}

template <typename T>
int count_kind(const std::vector<Instruction>& body) {
  int n = 0;
  for (const auto& inst : body) {
    if (std::holds_alternative<T>(inst)) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("bend cycle emits the pendant block verbatim") {
  const char* golden =
      "ADD P0010 P0034\n"
      "SUB P0010 P0035\n"
      "MOVL P0010 V=169.00\n"
      "SUB P0010 P0034\n"
      "ADD P0010 P0035\n"
      "MOVL P0010 V=169.00\n"
      "DOUT OT#(2) ON\n"
      "TIMER T=2.00\n"
      "JUMP *STEPA10 IF IN#(1)=ON\n"
      "JUMP *STEPB10 IF IN#(1)=OFF\n"
      "*STEPA10\n"
      "DOUT OT#(1) OFF\n"
      "TIMER T=0.50";

  ProgramIR ir;
  ir.name = "GOLDEN";
  ir.registers = {
      {10, {0, 0, 0, 0, 0, 0}}, {34, {0, 0, 80, 0, 0, 0}}, {35, {0, 100, -20, 0, 0, 0}}};
  ir.body = expand_bend_cycle(10, std::nullopt, fig_params(), OffsetRegs{34, 35, 36}, 10, "");
  REQUIRE(verify_ir(ir).empty());

  auto lines = body_lines(emit_program(ir));
  REQUIRE(lines.size() >= 13);
  std::string got;
  for (int i = 0; i < 13; ++i) {
    got += lines[i];
    if (i < 12) got += "\n";
  }
  CHECK(got == golden);
}

TEST_CASE("the bend cycle without a regrasp pose omits the grasp and warns") {
  auto with = expand_bend_cycle(10, 3, fig_params(), OffsetRegs{34, 35, 36}, 10, "");
  auto without = expand_bend_cycle(10, std::nullopt, fig_params(), OffsetRegs{34, 35, 36}, 10, "");

  auto grasps = [](const std::vector<Instruction>& body) {
    int n = 0;
    for (const auto& inst : body) {
      if (const auto* so = std::get_if<SetOutput>(&inst)) {
        if (so->port == 1 && so->on) ++n;
      }
    }
    return n;
  };
  CHECK(grasps(with) == 1);
  CHECK(grasps(without) == 0);
  CHECK(count_kind<Comment>(without) > count_kind<Comment>(with));
}

TEST_CASE("press wait zero still emits the timer line") {
  scene::ProcessParams p = fig_params();
  p.press_wait = 0.0;
  ProgramIR ir;
  ir.name = "T0";
  ir.registers = {{10, {}}, {34, {}}, {35, {}}};
  ir.body = expand_bend_cycle(10, std::nullopt, p, OffsetRegs{34, 35, 36}, 10, "");
  std::string text = emit_program(ir);
  CHECK(text.find("TIMER T=0.00") != std::string::npos);
}

TEST_CASE("plan for one bend pair builds the expected register table") {
  scene::ProcessParams p = fig_params();
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps_with_bends(1), "JOB1", diags);
  REQUIRE(ir.has_value());
  CHECK(diags.empty());
  CHECK(verify_ir(*ir).empty());

  std::vector<int> ids;
  for (const auto& r : ir->registers) ids.push_back(r.id);
  CHECK(ids == std::vector<int>{1, 2, 3, 4, 34, 35, 36});

  CHECK(press_pulses(*ir, p.press_command_port) == 1);
  CHECK(count_gripper_off(*ir, p.gripper_port) == 2);  // release + palletize
}

TEST_CASE("a scene without bends carries no press IO") {
  scene::ProcessParams p = fig_params();
  std::vector<NormalizedPose> steps = {
      make_step(1, Phase::Pickup, 0, 0, 100),
      make_step(2, Phase::MoveOnly, 500, 300, 700),
      make_step(3, Phase::Palletize, 900, 0, 100),
  };
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps, "NOBEND", diags);
  REQUIRE(ir.has_value());

  for (const auto& inst : ir->body) {
    if (const auto* so = std::get_if<SetOutput>(&inst)) {
      CHECK(so->port != p.press_command_port);
    }
    CHECK_FALSE(std::holds_alternative<BranchIfInput>(inst));
  }

  // The free move is exactly one MOVL on its own register.
  int moves_to_2 = 0;
  for (const auto& inst : ir->body) {
    if (const auto* mv = std::get_if<LinearMove>(&inst)) {
      if (mv->reg == 2) ++moves_to_2;
    }
  }
  CHECK(moves_to_2 == 1);
}

TEST_CASE("four bend pairs pulse the press exactly four times") {
  scene::ProcessParams p = fig_params();
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps_with_bends(4), "JOB4", diags);
  REQUIRE(ir.has_value());
  CHECK(press_pulses(*ir, p.press_command_port) == 4);
  CHECK(count_gripper_off(*ir, p.gripper_port) == 5);
}

TEST_CASE("pickup applies the stack increment piece_index times") {
  scene::ProcessParams p = fig_params();
  OffsetRegs offs{34, 35, 36};

  auto count_inc = [&](const std::vector<Instruction>& body, PoseOp op) {
    int n = 0;
    for (const auto& inst : body) {
      if (const auto* mp = std::get_if<ModifyPose>(&inst)) {
        if (mp->operand_reg == offs.increment && mp->op == op) ++n;
      }
    }
    return n;
  };

  auto p0 = expand_pickup(1, p, offs, 0);
  CHECK(count_inc(p0, PoseOp::Add) == 0);
  CHECK(count_inc(p0, PoseOp::Sub) == 0);

  auto p2 = expand_pickup(1, p, offs, 2);
  CHECK(count_inc(p2, PoseOp::Add) == 2);
  CHECK(count_inc(p2, PoseOp::Sub) == 2);

  // Gripper closes before the retreat move.
  int grip_at = -1, last_move = -1;
  for (size_t i = 0; i < p0.size(); ++i) {
    if (const auto* so = std::get_if<SetOutput>(&p0[i])) {
      if (so->port == p.gripper_port && so->on) grip_at = static_cast<int>(i);
    }
    if (std::holds_alternative<LinearMove>(p0[i])) last_move = static_cast<int>(i);
  }
  REQUIRE(grip_at >= 0);
  CHECK(grip_at < last_move);
}

TEST_CASE("palletize releases before retreating") {
  scene::ProcessParams p = fig_params();
  auto body = expand_palletize(4, p, OffsetRegs{34, 35, 36}, 0);
  int release_at = -1, last_move = -1;
  for (size_t i = 0; i < body.size(); ++i) {
    if (const auto* so = std::get_if<SetOutput>(&body[i])) {
      if (so->port == p.gripper_port && !so->on) release_at = static_cast<int>(i);
    }
    if (std::holds_alternative<LinearMove>(body[i])) last_move = static_cast<int>(i);
  }
  REQUIRE(release_at >= 0);
  CHECK(release_at < last_move);
}

TEST_CASE("registers are re-expressed in the robot base frame") {
  scene::CellScene cell;
  cell.params = fig_params();
  cell.robot_base.position = Eigen::Vector3d(600, -350, 0);
  cell.robot_base.rotation = geom::rotation_from_euler({0, 0, 90});

  NormalizedPose np = make_step(1, Phase::Pickup, 150, 250, 120);
  np.original.pose.rotation = geom::rotation_from_euler({180, 0, 0});
  std::vector<NormalizedPose> steps = {np, make_step(2, Phase::Palletize, 1050, 250, 120)};

  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell, steps, "FRAME", diags);
  REQUIRE(ir.has_value());

  geom::Pose world = np.original.pose;
  geom::Pose in_base = geom::relative_pose(cell.robot_base, world);
  CartTuple expect = quantized(tuple_from_pose(in_base));
  CHECK(ir->registers[0].value == expect);

  // Sanity on the actual numbers: yaw-90 base turns (-450, 600) into (600, 450).
  CHECK(ir->registers[0].value[0] == doctest::Approx(600.0).epsilon(1e-9));
  CHECK(ir->registers[0].value[1] == doctest::Approx(450.0).epsilon(1e-9));
  CHECK(ir->registers[0].value[2] == doctest::Approx(120.0).epsilon(1e-9));
}

TEST_CASE("normalized z feeds the register, not the ladder z") {
  scene::CellScene cell;
  cell.params = fig_params();
  NormalizedPose np = make_step(2, Phase::BendPositionRelease, 300, 500, 1650);
  np.updated_z = 1050.0;  // ladder collapsed by one dbl
  std::vector<NormalizedPose> steps = {
      make_step(1, Phase::Pickup, 0, 0, 100),
      np,
      make_step(3, Phase::Palletize, 900, 0, 100),
  };
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell, steps, "LADDER", diags);
  REQUIRE(ir.has_value());
  CHECK(ir->registers[1].value[2] == 1050.0);
}

TEST_CASE("offset registers move out of the way of big pose tables") {
  scene::ProcessParams p = fig_params();
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps_with_bends(17), "BIG", diags);  // 1+34+1 poses
  REQUIRE(ir.has_value());
  CHECK(verify_ir(*ir).empty());

  int n_step_regs = 36;  // pickup + 17 A/B pairs + palletize
  std::vector<int> ids;
  for (const auto& r : ir->registers) ids.push_back(r.id);
  REQUIRE(static_cast<int>(ids.size()) == n_step_regs + 3);
  CHECK(ids[n_step_regs] == 37);      // approach shifted past the last step register
  CHECK(ids[n_step_regs + 1] == 38);
  CHECK(ids[n_step_regs + 2] == 39);
  std::string text = emit_program(*ir);
  CHECK(text.find("ADD P0002 P0037") != std::string::npos);
}

TEST_CASE("unrolled pieces get unique labels and per-piece banners") {
  scene::ProcessParams p = fig_params();
  p.piece_count = 3;
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps_with_bends(1), "PIECES", diags);
  REQUIRE(ir.has_value());
  CHECK(verify_ir(*ir).empty());

  std::vector<std::string> labels;
  int banners = 0;
  for (const auto& inst : ir->body) {
    if (const auto* l = std::get_if<Label>(&inst)) labels.push_back(l->name);
    if (const auto* c = std::get_if<Comment>(&inst)) {
      if (c->text.find("PIECE") == 0) ++banners;
    }
  }
  CHECK(banners == 3);
  CHECK(std::count(labels.begin(), labels.end(), "STEPA2") == 1);
  CHECK(std::count(labels.begin(), labels.end(), "STEPA2_2") == 1);
  CHECK(std::count(labels.begin(), labels.end(), "STEPA2_3") == 1);

  CHECK(press_pulses(*ir, p.press_command_port) == 3);  // one bend, three pieces
}

TEST_CASE("emitted text is deterministic and round trips through the parser") {
  scene::ProcessParams p = fig_params();
  std::vector<Diagnostic> diags;
  auto ir = plan_program(cell_for(p), steps_with_bends(2), "ROUND", diags);
  REQUIRE(ir.has_value());

  std::string text1 = emit_program(*ir);
  std::string text2 = emit_program(*ir);
  CHECK(text1 == text2);
  CHECK(text1.find('\r') == std::string::npos);

  std::vector<Diagnostic> parse_diags;
  auto back = vm::parse_program(text1, parse_diags);
  REQUIRE(back.has_value());
  CHECK(parse_diags.empty());
  CHECK(*back == *ir);

  // emit(parse(emit(ir))) is a fixed point.
  CHECK(emit_program(*back) == text1);
}

TEST_CASE("an empty program is a parseable header") {
  ProgramIR ir;
  ir.name = "EMPTY";
  std::string text = emit_program(ir);
  std::vector<Diagnostic> diags;
  auto back = vm::parse_program(text, diags);
  REQUIRE(back.has_value());
  CHECK(diags.empty());
  CHECK(back->registers.empty());
  CHECK(back->body.empty());
}

TEST_CASE("internal consistency checks catch broken IR") {
  ProgramIR ir;
  ir.name = "BROKEN";
  ir.registers = {{1, {}}, {1, {}}};
  ir.body = {LinearMove{9, 100.0}, BranchIfInput{1, true, "NOWHERE"}};

  auto issues = verify_ir(ir);
  bool dup_reg = false, missing_reg = false, missing_label = false;
  for (const auto& d : issues) {
    if (d.code == "MissingRegister" && d.message.find("twice") != std::string::npos) dup_reg = true;
    if (d.code == "MissingRegister" && d.message.find("P0009") != std::string::npos)
      missing_reg = true;
    if (d.code == "UnreachableLabel") missing_label = true;
  }
  CHECK(dup_reg);
  CHECK(missing_reg);
  CHECK(missing_label);

  ProgramIR dup_labels;
  dup_labels.name = "L";
  dup_labels.body = {Label{"X"}, Label{"X"}};
  bool twice = false;
  for (const auto& d : verify_ir(dup_labels)) {
    if (d.code == "UnreachableLabel") twice = true;
  }
  CHECK(twice);
}

TEST_CASE("speed renders with two decimals") {
  scene::ProcessParams p = fig_params();
  p.move_speed = 123.4;
  ProgramIR ir;
  ir.name = "SPEED";
  ir.registers = {{7, {}}};
  ir.body = expand_move(7, p);
  CHECK(emit_program(ir).find("MOVL P0007 V=123.40") != std::string::npos);
}
