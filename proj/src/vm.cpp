#include "bendcell/vm.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "bendcell/format.hpp"

namespace bendcell::vm {

MicroTuple to_micros(const CartTuple& v) {
  MicroTuple m;
  for (size_t i = 0; i < 6; ++i) m[i] = std::llround(v[i] * 1e6);
  return m;
}

CartTuple from_micros(const MicroTuple& m) {
  CartTuple v;
  for (size_t i = 0; i < 6; ++i) v[i] = static_cast<double>(m[i]) / 1e6;
  return v;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && !buf.empty();
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  int value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

// P%04d
bool parse_preg(std::string_view s, int& out) {
  if (s.size() < 2 || s[0] != 'P') return false;
  return parse_int(s.substr(1), out);
}

// OT#(%d)
bool parse_out_port(std::string_view s, int& out) {
  if (!s.starts_with("OT#(") || !s.ends_with(")")) return false;
  return parse_int(s.substr(4, s.size() - 5), out);
}

// IN#(%d)=ON|OFF
bool parse_in_cond(std::string_view s, int& port, bool& state) {
  if (!s.starts_with("IN#(")) return false;
  size_t close = s.find(')');
  if (close == std::string_view::npos) return false;
  if (!parse_int(s.substr(4, close - 4), port)) return false;
  std::string_view rest = s.substr(close + 1);
  if (rest == "=ON") state = true;
  else if (rest == "=OFF") state = false;
  else return false;
  return true;
}

bool valid_label(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

struct BodyLine {
  codegen::Instruction inst;
  int line = 0;
};

}  // namespace

std::optional<ProgramIR> parse_program(std::string_view text, std::vector<Diagnostic>& diags) {
  const size_t errors_at_entry = diags.size();

  // split into (line number, trimmed content), skipping blanks
  std::vector<std::pair<int, std::string_view>> lines;
  {
    int number = 0;
    size_t start = 0;
    while (start <= text.size()) {
      size_t nl = text.find('\n', start);
      std::string_view raw = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
      ++number;
      std::string_view t = trim(raw);
      if (!t.empty()) lines.emplace_back(number, t);
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  }

  size_t cursor = 0;
  auto expect = [&](std::string_view token) -> bool {
    if (cursor >= lines.size()) {
      diags.push_back(make_error("SyntaxError", "unexpected end of file, expected '" + std::string(token) + "'",
                                 lines.empty() ? 1 : lines.back().first));
      return false;
    }
    if (lines[cursor].second != token && !(token == "//NAME" && lines[cursor].second.starts_with("//NAME "))) {
      diags.push_back(make_error("SyntaxError", "expected '" + std::string(token) + "'", lines[cursor].first));
      return false;
    }
    return true;
  };

  ProgramIR ir;
  if (!expect("/JOB")) return std::nullopt;
  ++cursor;
  if (!expect("//NAME")) return std::nullopt;
  ir.name = std::string(trim(lines[cursor].second.substr(6)));
  ++cursor;
  if (!expect("//POS")) return std::nullopt;
  ++cursor;

  std::set<int> reg_ids;
  while (cursor < lines.size() && lines[cursor].second != "//INST") {
    auto [line, s] = lines[cursor];
    ++cursor;
    size_t eq = s.find('=');
    if (s.empty() || s[0] != 'C' || eq == std::string_view::npos) {
      diags.push_back(make_error("SyntaxError", "expected a C#####= register line or //INST", line));
      continue;
    }
    int id = 0;
    if (!parse_int(s.substr(1, eq - 1), id)) {
      diags.push_back(make_error("SyntaxError", "unreadable register id", line));
      continue;
    }
    std::string_view values = s.substr(eq + 1);
    CartTuple v{};
    size_t field = 0;
    size_t pos = 0;
    bool ok = true;
    while (field < 6) {
      size_t comma = values.find(',', pos);
      std::string_view item = comma == std::string_view::npos ? values.substr(pos) : values.substr(pos, comma - pos);
      if (!parse_double(trim(item), v[field])) {
        ok = false;
        break;
      }
      ++field;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!ok || field != 6) {
      diags.push_back(make_error("SyntaxError", "register line needs 6 comma-separated numbers", line));
      continue;
    }
    if (!reg_ids.insert(id).second) {
      diags.push_back(make_error("SyntaxError", strf("register P%04d declared twice", id), line));
      continue;
    }
    ir.registers.push_back(codegen::PoseRegister{id, from_micros(to_micros(v))});
  }
  if (cursor >= lines.size()) {
    diags.push_back(make_error("SyntaxError", "missing //INST section", lines.empty() ? 1 : lines.back().first));
    return std::nullopt;
  }
  ++cursor;  // //INST

  std::vector<BodyLine> body;
  for (; cursor < lines.size(); ++cursor) {
    auto [line, s] = lines[cursor];
    if (s[0] == '\'') {
      body.push_back({codegen::Comment{std::string(s.substr(1))}, line});
      continue;
    }
    if (s[0] == '*') {
      std::string_view name = s.substr(1);
      if (!valid_label(name)) {
        diags.push_back(make_error("SyntaxError", "malformed label", line));
        continue;
      }
      body.push_back({codegen::Label{std::string(name)}, line});
      continue;
    }
    auto tokens = split_ws(s);
    const std::string_view op = tokens.empty() ? std::string_view{} : tokens[0];
    if (op == "MOVL") {
      int reg = 0;
      double speed = 0.0;
      if (tokens.size() == 3 && parse_preg(tokens[1], reg) && tokens[2].starts_with("V=") &&
          parse_double(tokens[2].substr(2), speed)) {
        body.push_back({codegen::LinearMove{reg, speed}, line});
      } else {
        diags.push_back(make_error("SyntaxError", "malformed MOVL, expected 'MOVL P#### V=<speed>'", line));
      }
    } else if (op == "ADD" || op == "SUB") {
      int reg = 0, operand = 0;
      if (tokens.size() == 3 && parse_preg(tokens[1], reg) && parse_preg(tokens[2], operand)) {
        body.push_back({codegen::ModifyPose{reg, op == "ADD" ? codegen::PoseOp::Add : codegen::PoseOp::Sub, operand}, line});
      } else {
        diags.push_back(make_error("SyntaxError", "malformed " + std::string(op) + ", expected '" + std::string(op) + " P#### P####'", line));
      }
    } else if (op == "DOUT") {
      int port = 0;
      if (tokens.size() == 3 && parse_out_port(tokens[1], port) && (tokens[2] == "ON" || tokens[2] == "OFF")) {
        body.push_back({codegen::SetOutput{port, tokens[2] == "ON"}, line});
      } else {
        diags.push_back(make_error("SyntaxError", "malformed DOUT, expected 'DOUT OT#(n) ON|OFF'", line));
      }
    } else if (op == "TIMER") {
      double seconds = 0.0;
      if (tokens.size() == 2 && tokens[1].starts_with("T=") && parse_double(tokens[1].substr(2), seconds)) {
        body.push_back({codegen::Wait{seconds}, line});
      } else {
        diags.push_back(make_error("SyntaxError", "malformed TIMER, expected 'TIMER T=<seconds>'", line));
      }
    } else if (op == "JUMP") {
      int port = 0;
      bool state = false;
      if (tokens.size() == 4 && tokens[1].size() > 1 && tokens[1][0] == '*' && valid_label(tokens[1].substr(1)) &&
          tokens[2] == "IF" && parse_in_cond(tokens[3], port, state)) {
        body.push_back({codegen::BranchIfInput{port, state, std::string(tokens[1].substr(1))}, line});
      } else {
        diags.push_back(make_error("SyntaxError", "malformed JUMP, expected 'JUMP *LABEL IF IN#(n)=ON|OFF'", line));
      }
    } else {
      diags.push_back(make_error("SyntaxError", "unrecognized instruction '" + std::string(s) + "'", line));
    }
  }

  // reference checks
  std::set<std::string> labels;
  for (const auto& bl : body) {
    if (const auto* lbl = std::get_if<codegen::Label>(&bl.inst)) {
      if (!labels.insert(lbl->name).second) {
        diags.push_back(make_error("SyntaxError", "label *" + lbl->name + " defined twice", bl.line));
      }
    }
  }
  for (const auto& bl : body) {
    auto check_reg = [&](int id) {
      if (!reg_ids.count(id)) {
        diags.push_back(make_error("UndefinedRegister", strf("register P%04d is not declared in //POS", id), bl.line));
      }
    };
    if (const auto* mv = std::get_if<codegen::LinearMove>(&bl.inst)) {
      check_reg(mv->reg);
    } else if (const auto* mod = std::get_if<codegen::ModifyPose>(&bl.inst)) {
      check_reg(mod->reg);
      check_reg(mod->operand_reg);
    } else if (const auto* br = std::get_if<codegen::BranchIfInput>(&bl.inst)) {
      if (!labels.count(br->label)) {
        diags.push_back(make_error("UndefinedLabel", "jump target *" + br->label + " is not defined", bl.line));
      }
    }
  }

  if (diags.size() > errors_at_entry && has_errors(diags)) return std::nullopt;
  for (auto& bl : body) ir.body.push_back(std::move(bl.inst));
  return ir;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Completed: return "completed";
    case RunStatus::StepBudgetExceeded: return "step_budget_exceeded";
    case RunStatus::InvalidSpeed: return "invalid_speed";
  }
  return "?";
}

namespace {

// Applies every plant transition due at or before `to`, recording the done
// input's edges at their exact times.
void advance_plant(VmState& st, const PlantConfig& plant, double to, std::vector<TraceEvent>& events) {
  while (st.press != PressState::Open) {
    double due = 0.0;
    PressState next = PressState::Open;
    switch (st.press) {
      case PressState::Closing:
        due = st.press_entered + plant.pinch_delay;
        next = PressState::Formed;
        break;
      case PressState::Formed:
        due = st.press_entered + plant.form_delay;
        next = PressState::Opening;
        break;
      case PressState::Opening:
        due = st.press_entered + plant.open_delay;
        next = PressState::Open;
        break;
      case PressState::Open:
        return;
    }
    if (due > to) return;
    st.press = next;
    st.press_entered = due;
    if (next == PressState::Formed) {
      st.inputs[plant.done_port] = true;
      TraceEvent e;
      e.t = due;
      e.kind = EventKind::InputChange;
      e.port = plant.done_port;
      e.state = true;
      events.push_back(e);
    } else if (next == PressState::Opening) {
      st.inputs[plant.done_port] = false;
      TraceEvent e;
      e.t = due;
      e.kind = EventKind::InputChange;
      e.port = plant.done_port;
      e.state = false;
      events.push_back(e);
    }
  }
}

std::size_t find_label(const ProgramIR& ir, const std::string& name) {
  for (std::size_t i = 0; i < ir.body.size(); ++i) {
    if (const auto* lbl = std::get_if<codegen::Label>(&ir.body[i])) {
      if (lbl->name == name) return i;
    }
  }
  throw std::logic_error("vm: jump to unknown label *" + name);
}

void halt(VmState& st, RunStatus status, std::vector<TraceEvent>& events) {
  st.halted = true;
  st.status = status;
  TraceEvent e;
  e.t = st.clock;
  e.kind = EventKind::Halt;
  events.push_back(e);
}

}  // namespace

VmState initial_state(const ProgramIR& ir, const PlantConfig& plant) {
  VmState st;
  for (const auto& reg : ir.registers) st.registers[reg.id] = to_micros(reg.value);
  st.inputs[plant.done_port] = false;
  return st;
}

void step(VmState& st, const ProgramIR& ir, const PlantConfig& plant, std::vector<TraceEvent>& events) {
  if (st.halted) return;
  if (st.pc >= ir.body.size()) {
    halt(st, RunStatus::Completed, events);
    return;
  }
  const codegen::Instruction& inst = ir.body[st.pc];
  ++st.steps;

  if (std::holds_alternative<codegen::Label>(inst) || std::holds_alternative<codegen::Comment>(inst)) {
    ++st.pc;
  } else if (const auto* mod = std::get_if<codegen::ModifyPose>(&inst)) {
    MicroTuple& reg = st.registers.at(mod->reg);
    const MicroTuple& operand = st.registers.at(mod->operand_reg);
    for (size_t i = 0; i < 6; ++i) {
      reg[i] += mod->op == codegen::PoseOp::Add ? operand[i] : -operand[i];
    }
    ++st.pc;
  } else if (const auto* so = std::get_if<codegen::SetOutput>(&inst)) {
    TraceEvent e;
    e.t = st.clock;
    e.kind = EventKind::OutputSet;
    e.port = so->port;
    e.state = so->on;
    events.push_back(e);
    st.outputs[so->port] = so->on;
    if (so->port == plant.command_port) {
      const bool rising = so->on && !st.press_level;
      st.press_level = so->on;
      if (rising && st.press == PressState::Open) {
        st.press = PressState::Closing;
        st.press_entered = st.clock;
      }
    }
    ++st.pc;
  } else if (const auto* w = std::get_if<codegen::Wait>(&inst)) {
    TraceEvent e;
    e.t = st.clock;
    e.kind = EventKind::TimerWait;
    e.duration = w->seconds;
    events.push_back(e);
    advance_plant(st, plant, st.clock + w->seconds, events);
    st.clock += w->seconds;
    ++st.pc;
  } else if (const auto* mv = std::get_if<codegen::LinearMove>(&inst)) {
    if (!(mv->speed > 0.0)) {
      halt(st, RunStatus::InvalidSpeed, events);
      return;
    }
    const CartTuple target = from_micros(st.registers.at(mv->reg));
    CartTuple origin = target;
    double duration = 0.0;
    if (st.tcp) {
      origin = *st.tcp;
      const double dx = target[0] - origin[0];
      const double dy = target[1] - origin[1];
      const double dz = target[2] - origin[2];
      duration = std::sqrt(dx * dx + dy * dy + dz * dz) / mv->speed;
    }
    TraceEvent start;
    start.t = st.clock;
    start.kind = EventKind::MoveStart;
    start.reg = mv->reg;
    start.pose = origin;
    start.speed = mv->speed;
    start.duration = duration;
    events.push_back(start);
    advance_plant(st, plant, st.clock + duration, events);
    st.clock += duration;
    TraceEvent end;
    end.t = st.clock;
    end.kind = EventKind::MoveEnd;
    end.reg = mv->reg;
    end.pose = target;
    events.push_back(end);
    st.tcp = target;
    ++st.pc;
  } else if (const auto* br = std::get_if<codegen::BranchIfInput>(&inst)) {
    advance_plant(st, plant, st.clock, events);
    const bool value = st.inputs.count(br->port) ? st.inputs.at(br->port) : false;
    const bool taken = value == br->state;
    TraceEvent e;
    e.t = st.clock;
    e.kind = EventKind::Branch;
    e.port = br->port;
    e.state = br->state;
    e.taken = taken;
    e.label = br->label;
    events.push_back(e);
    st.pc = taken ? find_label(ir, br->label) : st.pc + 1;
  }

  if (!st.halted && st.pc >= ir.body.size()) {
    halt(st, RunStatus::Completed, events);
  }
}

RunResult run(const ProgramIR& ir, const PlantConfig& plant, std::uint64_t max_steps,
              std::vector<Diagnostic>& diags) {
  VmState st = initial_state(ir, plant);
  std::vector<TraceEvent> events;
  if (ir.body.empty()) {
    halt(st, RunStatus::Completed, events);
  }
  while (!st.halted) {
    if (st.steps >= max_steps) {
      halt(st, RunStatus::StepBudgetExceeded, events);
      diags.push_back(make_error("StepBudgetExceeded",
                                 strf("no halt after %llu instructions, the handshake likely never completes",
                                      static_cast<unsigned long long>(max_steps))));
      break;
    }
    step(st, ir, plant, events);
  }
  if (st.status == RunStatus::InvalidSpeed) {
    diags.push_back(make_error("InvalidSpeed", "MOVL speed must be positive"));
  }

  RunResult result;
  result.status = st.status;
  result.trace.events = std::move(events);
  for (const auto& e : result.trace.events) {
    if (e.kind == EventKind::MoveStart || e.kind == EventKind::MoveEnd) {
      result.trace.tcp_waypoints.push_back(Waypoint{e.t, e.pose});
    }
  }
  result.final_state = std::move(st);
  return result;
}

std::string trace_to_jsonl(const RunResult& result) {
  using nlohmann::json;
  std::string out;
  std::uint64_t moves = 0;
  for (const auto& e : result.trace.events) {
    json j;
    j["t"] = e.t;
    switch (e.kind) {
      case EventKind::MoveStart:
        j["kind"] = "move_start";
        j["reg"] = e.reg;
        j["pose"] = e.pose;
        j["speed"] = e.speed;
        j["duration"] = e.duration;
        break;
      case EventKind::MoveEnd:
        j["kind"] = "move_end";
        j["reg"] = e.reg;
        j["pose"] = e.pose;
        ++moves;
        break;
      case EventKind::OutputSet:
        j["kind"] = "output_set";
        j["port"] = e.port;
        j["state"] = e.state;
        break;
      case EventKind::InputChange:
        j["kind"] = "input_change";
        j["port"] = e.port;
        j["state"] = e.state;
        break;
      case EventKind::TimerWait:
        j["kind"] = "timer_wait";
        j["duration"] = e.duration;
        break;
      case EventKind::Branch:
        j["kind"] = "branch";
        j["port"] = e.port;
        j["state"] = e.state;
        j["taken"] = e.taken;
        j["target"] = e.label;
        break;
      case EventKind::Halt:
        j["kind"] = "halt";
        break;
    }
    out += j.dump();
    out += '\n';
  }
  json summary;
  summary["kind"] = "summary";
  summary["status"] = status_name(result.status);
  summary["final_clock"] = result.final_state.clock;
  summary["event_count"] = result.trace.events.size();
  summary["move_count"] = moves;
  out += summary.dump();
  out += '\n';
  return out;
}

}  // namespace bendcell::vm
