#include "bendcell/codegen.hpp"

#include <cmath>
#include <map>
#include <set>

#include "bendcell/format.hpp"
#include "bendcell/geometry.hpp"

namespace bendcell::codegen {

CartTuple quantized(const CartTuple& v) {
  CartTuple out;
  for (size_t i = 0; i < 6; ++i) {
    out[i] = std::round(v[i] * 1e6) / 1e6 + 0.0;  // +0.0 clears negative zero
  }
  return out;
}

CartTuple tuple_from_pose(const geom::Pose& pose) {
  auto euler = geom::euler_from_rotation(pose.rotation);
  // parse-time validation guarantees an extractable rotation
  geom::EulerXYZ e = euler ? *euler : geom::EulerXYZ{0, 0, 0};
  return {pose.position.x(), pose.position.y(), pose.position.z(), e.rx, e.ry, e.rz};
}

geom::Pose pose_from_tuple(const CartTuple& v) {
  geom::Pose pose;
  pose.position = Eigen::Vector3d(v[0], v[1], v[2]);
  pose.rotation = geom::rotation_from_euler({v[3], v[4], v[5]});
  return pose;
}

namespace {

// poll interval while retrying the press-done handshake; the full
// press_wait was already spent before the first check
constexpr double kRetryPollSeconds = 0.10;

void repeat_modify(std::vector<Instruction>& out, int reg, PoseOp op, int operand, int times) {
  for (int i = 0; i < times; ++i) out.push_back(ModifyPose{reg, op, operand});
}

}  // namespace

std::vector<Instruction> expand_pickup(int reg, const scene::ProcessParams& p,
                                       const OffsetRegs& offs, int piece_index) {
  std::vector<Instruction> out;
  repeat_modify(out, reg, PoseOp::Add, offs.increment, piece_index);
  out.push_back(ModifyPose{reg, PoseOp::Add, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(ModifyPose{reg, PoseOp::Sub, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(SetOutput{p.gripper_port, true});
  out.push_back(Wait{p.gripper_settle});
  out.push_back(ModifyPose{reg, PoseOp::Add, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(ModifyPose{reg, PoseOp::Sub, offs.approach});
  repeat_modify(out, reg, PoseOp::Sub, offs.increment, piece_index);
  return out;
}

std::vector<Instruction> expand_move(int reg, const scene::ProcessParams& p) {
  return {LinearMove{reg, p.move_speed}};
}

std::vector<Instruction> expand_bend_cycle(int a_reg, std::optional<int> b_reg,
                                           const scene::ProcessParams& p,
                                           const OffsetRegs& offs, int m,
                                           const std::string& label_suffix) {
  const std::string tag = std::to_string(m) + label_suffix;
  const std::string position_lbl = "STEPA" + tag;
  const std::string retry_lbl = "STEPB" + tag;
  const std::string exit_lbl = "STEPE" + tag;

  std::vector<Instruction> out;
  // approach point, then down onto the bending line
  out.push_back(ModifyPose{a_reg, PoseOp::Add, offs.approach});
  out.push_back(ModifyPose{a_reg, PoseOp::Sub, offs.retreat});
  out.push_back(LinearMove{a_reg, p.move_speed});
  out.push_back(ModifyPose{a_reg, PoseOp::Sub, offs.approach});
  out.push_back(ModifyPose{a_reg, PoseOp::Add, offs.retreat});
  out.push_back(LinearMove{a_reg, p.move_speed});
  // press stroke handshake
  out.push_back(SetOutput{p.press_command_port, true});
  out.push_back(Wait{p.press_wait});
  out.push_back(BranchIfInput{p.press_done_port, true, position_lbl});
  out.push_back(BranchIfInput{p.press_done_port, false, retry_lbl});
  // sheet is clamped: release and let the stroke continue
  out.push_back(Label{position_lbl});
  out.push_back(SetOutput{p.gripper_port, false});
  out.push_back(Wait{p.gripper_settle});
  out.push_back(SetOutput{p.press_command_port, true});
  if (b_reg) {
    out.push_back(LinearMove{*b_reg, p.move_speed});
    out.push_back(SetOutput{p.gripper_port, true});
    out.push_back(Wait{p.gripper_settle});
    out.push_back(SetOutput{p.press_command_port, false});
    out.push_back(ModifyPose{*b_reg, PoseOp::Add, offs.approach});
    out.push_back(ModifyPose{*b_reg, PoseOp::Sub, offs.retreat});
    out.push_back(LinearMove{*b_reg, p.move_speed});
    out.push_back(ModifyPose{*b_reg, PoseOp::Sub, offs.approach});
    out.push_back(ModifyPose{*b_reg, PoseOp::Add, offs.retreat});
  } else {
    out.push_back(Comment{"NO GRASP POSE FOR STEP " + std::to_string(m) + ", RE-GRASP OMITTED"});
    out.push_back(SetOutput{p.press_command_port, false});
  }
  // the instruction set has no unconditional jump; this pair covers both states
  out.push_back(BranchIfInput{p.press_done_port, true, exit_lbl});
  out.push_back(BranchIfInput{p.press_done_port, false, exit_lbl});
  // wait-retry loop while the press has not reported the formed state
  out.push_back(Label{retry_lbl});
  out.push_back(Wait{kRetryPollSeconds});
  out.push_back(BranchIfInput{p.press_done_port, true, position_lbl});
  out.push_back(BranchIfInput{p.press_done_port, false, retry_lbl});
  out.push_back(Label{exit_lbl});
  return out;
}

std::vector<Instruction> expand_palletize(int reg, const scene::ProcessParams& p,
                                          const OffsetRegs& offs, int piece_index) {
  std::vector<Instruction> out;
  repeat_modify(out, reg, PoseOp::Add, offs.increment, piece_index);
  out.push_back(ModifyPose{reg, PoseOp::Add, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(ModifyPose{reg, PoseOp::Sub, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(SetOutput{p.gripper_port, false});
  out.push_back(Wait{p.gripper_settle});
  out.push_back(ModifyPose{reg, PoseOp::Add, offs.approach});
  out.push_back(LinearMove{reg, p.move_speed});
  out.push_back(ModifyPose{reg, PoseOp::Sub, offs.approach});
  repeat_modify(out, reg, PoseOp::Sub, offs.increment, piece_index);
  return out;
}

std::optional<ProgramIR> plan_program(const scene::CellScene& cell,
                                      const std::vector<bendline::NormalizedPose>& steps,
                                      const std::string& jobname,
                                      std::vector<Diagnostic>& diags) {
  const scene::ProcessParams& p = cell.params;

  ProgramIR ir;
  ir.name = jobname;

  // one register per step pose, ids 1..N in step order
  std::map<std::pair<int, int>, int> reg_of;  // (index, phase rank) -> register id
  for (size_t i = 0; i < steps.size(); ++i) {
    const auto& np = steps[i];
    geom::Pose in_base = geom::relative_pose(cell.robot_base, bendline::normalized_pose(np));
    PoseRegister reg;
    reg.id = static_cast<int>(i) + 1;
    reg.value = quantized(tuple_from_pose(in_base));
    ir.registers.push_back(reg);
    reg_of[{np.original.label.index, scene::phase_rank(np.original.label.phase)}] = reg.id;
  }

  const int n = static_cast<int>(steps.size());
  OffsetRegs offs;
  offs.approach = std::max(34, n + 1);
  offs.retreat = offs.approach + 1;
  offs.increment = offs.approach + 2;

  auto offset_reg = [](int id, const Eigen::Vector3d& v) {
    return PoseRegister{id, quantized({v.x(), v.y(), v.z(), 0.0, 0.0, 0.0})};
  };
  ir.registers.push_back(offset_reg(offs.approach, p.approach_offset));
  ir.registers.push_back(offset_reg(offs.retreat, p.retreat_offset));
  ir.registers.push_back(offset_reg(offs.increment, p.pallet_increment));

  ir.body.push_back(Comment{"POSES IN ROBOT BASE FRAME, MM AND DEG"});
  ir.body.push_back(Comment{"EULER XYZ EXTRINSIC, R = RZ*RY*RX"});

  for (int piece = 0; piece < p.piece_count; ++piece) {
    const std::string suffix = piece == 0 ? "" : "_" + std::to_string(piece + 1);
    if (p.piece_count > 1) {
      ir.body.push_back(Comment{strf("PIECE %d OF %d", piece + 1, p.piece_count)});
    }
    for (const auto& np : steps) {
      const scene::StepLabel& label = np.original.label;
      if (label.phase == scene::Phase::BendGraspRetrieve) continue;  // folded into the A cycle

      ir.body.push_back(Comment{strf("***** STEP %d *****", label.index)});
      const int reg = reg_of.at({label.index, scene::phase_rank(label.phase)});
      std::vector<Instruction> block;
      switch (label.phase) {
        case scene::Phase::Pickup:
          block = expand_pickup(reg, p, offs, piece);
          break;
        case scene::Phase::MoveOnly:
          block = expand_move(reg, p);
          break;
        case scene::Phase::BendPositionRelease: {
          std::optional<int> b_reg;
          auto it = reg_of.find({label.index, scene::phase_rank(scene::Phase::BendGraspRetrieve)});
          if (it != reg_of.end()) b_reg = it->second;
          block = expand_bend_cycle(reg, b_reg, p, offs, label.index, suffix);
          break;
        }
        case scene::Phase::Palletize:
          block = expand_palletize(reg, p, offs, piece);
          break;
        case scene::Phase::BendGraspRetrieve:
          break;
      }
      ir.body.insert(ir.body.end(), block.begin(), block.end());
    }
  }

  auto issues = verify_ir(ir);
  if (!issues.empty()) {
    diags.insert(diags.end(), issues.begin(), issues.end());
    return std::nullopt;
  }
  return ir;
}

std::vector<Diagnostic> verify_ir(const ProgramIR& ir) {
  std::vector<Diagnostic> out;

  std::set<int> reg_ids;
  for (const auto& reg : ir.registers) {
    if (!reg_ids.insert(reg.id).second) {
      out.push_back(make_error("MissingRegister", "register P" + strf("%04d", reg.id) + " declared twice"));
    }
  }
  auto check_reg = [&](int id) {
    if (!reg_ids.count(id)) {
      out.push_back(make_error("MissingRegister", "instruction references undeclared register P" + strf("%04d", id)));
    }
  };

  std::set<std::string> labels;
  for (const auto& inst : ir.body) {
    if (const auto* lbl = std::get_if<Label>(&inst)) {
      if (!labels.insert(lbl->name).second) {
        out.push_back(make_error("UnreachableLabel", "label *" + lbl->name + " defined twice"));
      }
    }
  }
  for (const auto& inst : ir.body) {
    if (const auto* mv = std::get_if<LinearMove>(&inst)) {
      check_reg(mv->reg);
    } else if (const auto* mod = std::get_if<ModifyPose>(&inst)) {
      check_reg(mod->reg);
      check_reg(mod->operand_reg);
    } else if (const auto* br = std::get_if<BranchIfInput>(&inst)) {
      if (!labels.count(br->label)) {
        out.push_back(make_error("UnreachableLabel", "branch targets undefined label *" + br->label));
      }
    }
  }
  return out;
}

namespace {

std::string render(const Instruction& inst) {
  if (const auto* mv = std::get_if<LinearMove>(&inst)) {
    return strf("MOVL P%04d V=%.2f", mv->reg, mv->speed);
  }
  if (const auto* mod = std::get_if<ModifyPose>(&inst)) {
    return strf("%s P%04d P%04d", mod->op == PoseOp::Add ? "ADD" : "SUB", mod->reg, mod->operand_reg);
  }
  if (const auto* so = std::get_if<SetOutput>(&inst)) {
    return strf("DOUT OT#(%d) %s", so->port, so->on ? "ON" : "OFF");
  }
  if (const auto* w = std::get_if<Wait>(&inst)) {
    return strf("TIMER T=%.2f", w->seconds);
  }
  if (const auto* br = std::get_if<BranchIfInput>(&inst)) {
    return strf("JUMP *%s IF IN#(%d)=%s", br->label.c_str(), br->port, br->state ? "ON" : "OFF");
  }
  if (const auto* lbl = std::get_if<Label>(&inst)) {
    return "*" + lbl->name;
  }
  const auto& c = std::get<Comment>(inst);
  return "'" + c.text;
}

}  // namespace

std::string emit_program(const ProgramIR& ir) {
  std::string out;
  out += "/JOB\n";
  out += "//NAME " + ir.name + "\n";
  out += "//POS\n";
  for (const auto& reg : ir.registers) {
    out += strf("C%05d=%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", reg.id, reg.value[0], reg.value[1],
                reg.value[2], reg.value[3], reg.value[4], reg.value[5]);
  }
  out += "//INST\n";
  for (const auto& inst : ir.body) {
    out += render(inst);
    out += '\n';
  }
  return out;
}

}  // namespace bendcell::codegen
