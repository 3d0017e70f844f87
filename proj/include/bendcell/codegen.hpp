#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bendcell/bendline.hpp"
#include "bendcell/diagnostics.hpp"
#include "bendcell/scene.hpp"

namespace bendcell::codegen {

// Cartesian register tuple: x, y, z in mm, rx, ry, rz in degrees,
// expressed in the robot base frame.
using CartTuple = std::array<double, 6>;

// Snaps every component to the 1e-6 grid the job text carries, so that
// emitting and re-parsing a register restores the exact same value.
CartTuple quantized(const CartTuple& v);

CartTuple tuple_from_pose(const geom::Pose& pose);
geom::Pose pose_from_tuple(const CartTuple& v);

struct PoseRegister {
  int id = 0;  // rendered P%04d
  CartTuple value{};
  bool operator==(const PoseRegister&) const = default;
};

struct LinearMove {
  int reg = 0;
  double speed = 0.0;  // mm/s
  bool operator==(const LinearMove&) const = default;
};

enum class PoseOp { Add, Sub };

struct ModifyPose {
  int reg = 0;
  PoseOp op = PoseOp::Add;
  int operand_reg = 0;
  bool operator==(const ModifyPose&) const = default;
};

struct SetOutput {
  int port = 0;
  bool on = false;
  bool operator==(const SetOutput&) const = default;
};

struct Wait {
  double seconds = 0.0;
  bool operator==(const Wait&) const = default;
};

struct BranchIfInput {
  int port = 0;
  bool state = false;
  std::string label;
  bool operator==(const BranchIfInput&) const = default;
};

struct Label {
  std::string name;
  bool operator==(const Label&) const = default;
};

struct Comment {
  std::string text;
  bool operator==(const Comment&) const = default;
};

using Instruction = std::variant<LinearMove, ModifyPose, SetOutput, Wait, BranchIfInput, Label, Comment>;

struct ProgramIR {
  std::string name;
  std::vector<PoseRegister> registers;
  std::vector<Instruction> body;
  bool operator==(const ProgramIR&) const = default;
};

// Shared offset registers: approach offset, retreat offset, pallet increment.
struct OffsetRegs {
  int approach = 34;
  int retreat = 35;
  int increment = 36;
};

std::vector<Instruction> expand_pickup(int reg, const scene::ProcessParams& p,
                                       const OffsetRegs& offs, int piece_index);

std::vector<Instruction> expand_move(int reg, const scene::ProcessParams& p);

// One full bend cycle: approach, position, press handshake, release, and
// (when b_reg is present) the re-grasp and retreat. label_suffix keeps
// labels unique when the body is unrolled per piece.
std::vector<Instruction> expand_bend_cycle(int a_reg, std::optional<int> b_reg,
                                           const scene::ProcessParams& p,
                                           const OffsetRegs& offs, int m,
                                           const std::string& label_suffix);

std::vector<Instruction> expand_palletize(int reg, const scene::ProcessParams& p,
                                          const OffsetRegs& offs, int piece_index);

// Expands the ordered, normalized steps into a complete program: one pose
// register per step (P0001..P000N in step order) plus the offset registers,
// and an unrolled body per piece.
std::optional<ProgramIR> plan_program(const scene::CellScene& cell,
                                      const std::vector<bendline::NormalizedPose>& steps,
                                      const std::string& jobname,
                                      std::vector<Diagnostic>& diags);

// Internal consistency checks: register references resolve, labels unique,
// branch targets defined. Empty result means the IR is sound.
std::vector<Diagnostic> verify_ir(const ProgramIR& ir);

// Deterministic serialization to the job text. One instruction per line,
// LF endings, fixed numeric precision.
std::string emit_program(const ProgramIR& ir);

}  // namespace bendcell::codegen
