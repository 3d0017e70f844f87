#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bendcell/codegen.hpp"
#include "bendcell/diagnostics.hpp"

namespace bendcell::vm {

using codegen::CartTuple;
using codegen::ProgramIR;

// Register arithmetic runs on micro-units (1e-6 mm, 1e-6 deg) so ADD/SUB
// pairs cancel exactly and declared values are restored bit-for-bit.
using MicroTuple = std::array<std::int64_t, 6>;

MicroTuple to_micros(const CartTuple& v);
CartTuple from_micros(const MicroTuple& m);

// Inverse of codegen::emit_program on its image.
std::optional<ProgramIR> parse_program(std::string_view text, std::vector<Diagnostic>& diags);

enum class EventKind { MoveStart, MoveEnd, OutputSet, InputChange, TimerWait, Branch, Halt };

struct TraceEvent {
  double t = 0.0;
  EventKind kind = EventKind::Halt;
  int reg = 0;            // MoveStart, MoveEnd
  CartTuple pose{};       // MoveStart: origin; MoveEnd: target
  double speed = 0.0;     // MoveStart
  double duration = 0.0;  // MoveStart, TimerWait
  int port = 0;           // OutputSet, InputChange, Branch
  bool state = false;     // OutputSet, InputChange; Branch: the tested state
  bool taken = false;     // Branch
  std::string label;      // Branch target
  bool operator==(const TraceEvent&) const = default;
};

struct Waypoint {
  double t = 0.0;
  CartTuple pose{};
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  std::vector<Waypoint> tcp_waypoints;  // poses at MoveStart/MoveEnd times
};

enum class PressState { Open, Closing, Formed, Opening };

// Timed press-brake emulation. The done input asserts only while Formed.
// A new stroke starts on a rising command edge while Open; the command
// level is otherwise ignored.
struct PlantConfig {
  double pinch_delay = 1.0;  // s, Open -> Formed after command edge
  double form_delay = 1.5;   // s, dwell in Formed
  double open_delay = 1.0;   // s, Opening -> Open
  int command_port = 2;      // output the program drives
  int done_port = 1;         // input the program polls
};

enum class RunStatus { Running, Completed, StepBudgetExceeded, InvalidSpeed };

const char* status_name(RunStatus s);

struct VmState {
  std::size_t pc = 0;
  bool halted = false;
  RunStatus status = RunStatus::Running;
  std::map<int, MicroTuple> registers;
  std::map<int, bool> outputs;
  std::map<int, bool> inputs;
  double clock = 0.0;
  std::optional<CartTuple> tcp;  // unset until the first move lands
  std::uint64_t steps = 0;
  PressState press = PressState::Open;
  double press_entered = 0.0;
  bool press_level = false;
};

VmState initial_state(const ProgramIR& ir, const PlantConfig& plant);

// Executes exactly one instruction, appending the events it produces
// (plant-driven input changes included). run() is a fold of this.
void step(VmState& state, const ProgramIR& ir, const PlantConfig& plant,
          std::vector<TraceEvent>& events);

struct RunResult {
  ExecutionTrace trace;
  RunStatus status = RunStatus::Completed;
  VmState final_state;
};

RunResult run(const ProgramIR& ir, const PlantConfig& plant, std::uint64_t max_steps,
              std::vector<Diagnostic>& diags);

// One JSON object per line, one line per event, summary record last.
std::string trace_to_jsonl(const RunResult& result);

}  // namespace bendcell::vm
