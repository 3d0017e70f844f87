#include "bendcell/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "bendcell/bendline.hpp"
#include "bendcell/codegen.hpp"
#include "bendcell/diagnostics.hpp"
#include "bendcell/kinematics.hpp"
#include "bendcell/scene.hpp"
#include "bendcell/simulator.hpp"
#include "bendcell/vm.hpp"

namespace bendcell::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string scene_path;
  std::string arm_path;
  std::string out_dir = "out";
  double dt = 0.01;
  double clearance = 5.0;
  std::uint64_t max_steps = 1000000;
  std::vector<std::string> overrides;
};

void print_diags(const std::vector<Diagnostic>& diags, std::ostream& err) {
  for (const auto& d : diags) err << format_diagnostic(d) << "\n";
}

bool has_io_error(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error && (d.code == "FileRead" || d.code == "FileWrite");
  });
}

// 1 beats 2: an unreadable file explains every downstream diagnostic.
int exit_for(const std::vector<Diagnostic>& diags) {
  if (has_io_error(diags)) return 1;
  if (has_errors(diags)) return 2;
  return 0;
}

std::optional<std::string> read_file(const std::string& path, std::vector<Diagnostic>& diags) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    diags.push_back(make_error("FileRead", "cannot open '" + path + "' for reading"));
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, const std::string& content, std::vector<Diagnostic>& diags) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    diags.push_back(make_error("FileWrite", "cannot open '" + path.string() + "' for writing"));
    return false;
  }
  out << content;
  out.flush();
  if (!out) {
    diags.push_back(make_error("FileWrite", "failed while writing '" + path.string() + "'"));
    return false;
  }
  return true;
}

bool ensure_out_dir(const std::string& dir, std::vector<Diagnostic>& diags) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    diags.push_back(make_error("FileWrite", "cannot create output directory '" + dir + "': " + ec.message()));
    return false;
  }
  return true;
}

std::string jobname_from(const std::string& scene_path) {
  const std::string stem = fs::path(scene_path).stem().string();
  std::string out;
  for (char c : stem) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else {
      out += '_';
    }
  }
  return out.empty() ? "JOB" : out;
}

bool parse_double_value(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && !s.empty();
}

bool parse_vec3_value(const std::string& s, Eigen::Vector3d& out) {
  std::stringstream ss(s);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3 || !parse_double_value(item, out[i])) return false;
    ++i;
  }
  return i == 3;
}

bool parse_int_value(const std::string& s, int& out) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty()) return false;
  out = static_cast<int>(v);
  return true;
}

// Accepted keys: process parameters (optionally prefixed "params.") and the
// plant delays "plant.pinch_delay", "plant.form_delay", "plant.open_delay".
void apply_overrides(scene::CellScene& cell, vm::PlantConfig& plant,
                     const std::vector<std::string>& overrides,
                     std::vector<Diagnostic>& diags) {
  for (const std::string& item : overrides) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      diags.push_back(make_error("BadOverride", "override '" + item + "' is not of the form key=value"));
      continue;
    }
    std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key.rfind("params.", 0) == 0) key = key.substr(7);

    auto bad = [&](const char* expected) {
      diags.push_back(make_error("BadOverride", "override '" + item + "': expected " + expected));
    };
    scene::ProcessParams& p = cell.params;
    if (key == "move_speed") {
      if (!parse_double_value(value, p.move_speed)) bad("a number");
    } else if (key == "press_wait") {
      if (!parse_double_value(value, p.press_wait)) bad("a number");
    } else if (key == "gripper_settle") {
      if (!parse_double_value(value, p.gripper_settle)) bad("a number");
    } else if (key == "approach_offset") {
      if (!parse_vec3_value(value, p.approach_offset)) bad("x,y,z");
    } else if (key == "retreat_offset") {
      if (!parse_vec3_value(value, p.retreat_offset)) bad("x,y,z");
    } else if (key == "pallet_increment") {
      if (!parse_vec3_value(value, p.pallet_increment)) bad("x,y,z");
    } else if (key == "press_command_port") {
      if (!parse_int_value(value, p.press_command_port)) bad("an integer");
    } else if (key == "gripper_port") {
      if (!parse_int_value(value, p.gripper_port)) bad("an integer");
    } else if (key == "press_done_port") {
      if (!parse_int_value(value, p.press_done_port)) bad("an integer");
    } else if (key == "piece_count") {
      if (!parse_int_value(value, p.piece_count)) bad("an integer");
    } else if (key == "plant.pinch_delay") {
      if (!parse_double_value(value, plant.pinch_delay) || plant.pinch_delay < 0) bad("a non-negative number");
    } else if (key == "plant.form_delay") {
      if (!parse_double_value(value, plant.form_delay) || plant.form_delay < 0) bad("a non-negative number");
    } else if (key == "plant.open_delay") {
      if (!parse_double_value(value, plant.open_delay) || plant.open_delay < 0) bad("a non-negative number");
    } else {
      diags.push_back(make_error("BadOverride", "unknown override key '" + key + "'"));
    }
  }
  scene::validate_params(cell.params, diags);
}

struct ScenePipeline {
  scene::CellScene cell;
  vm::PlantConfig plant;
  std::string jobname;
};

std::optional<ScenePipeline> load_scene(const Options& opt, std::vector<Diagnostic>& diags) {
  auto text = read_file(opt.scene_path, diags);
  if (!text) return std::nullopt;
  auto cell = scene::parse_scene(*text, diags);
  if (!cell) return std::nullopt;

  ScenePipeline pipe;
  pipe.cell = std::move(*cell);
  const size_t before = diags.size();
  apply_overrides(pipe.cell, pipe.plant, opt.overrides, diags);
  if (diags.size() > before && has_errors(diags)) return std::nullopt;
  pipe.plant.command_port = pipe.cell.params.press_command_port;
  pipe.plant.done_port = pipe.cell.params.press_done_port;
  pipe.jobname = jobname_from(opt.scene_path);
  return pipe;
}

std::optional<std::string> compile_text(const ScenePipeline& pipe, std::vector<Diagnostic>& diags) {
  auto normalized = bendline::normalize_scene(pipe.cell, diags);
  if (!normalized) return std::nullopt;
  auto ir = codegen::plan_program(pipe.cell, *normalized, pipe.jobname, diags);
  if (!ir) return std::nullopt;
  return codegen::emit_program(*ir);
}

int cmd_compile(const Options& opt, std::ostream& out, std::ostream& err) {
  std::vector<Diagnostic> diags;
  auto pipe = load_scene(opt, diags);
  if (!pipe) {
    print_diags(diags, err);
    return exit_for(diags);
  }
  auto text = compile_text(*pipe, diags);
  if (!text) {
    print_diags(diags, err);
    // planner inconsistencies are bugs, not scene problems
    const bool internal = std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
      return d.code == "UnreachableLabel" || d.code == "MissingRegister";
    });
    return internal ? 3 : exit_for(diags);
  }
  if (!ensure_out_dir(opt.out_dir, diags)) {
    print_diags(diags, err);
    return 1;
  }
  const fs::path jbi = fs::path(opt.out_dir) / (pipe->jobname + ".JBI");
  if (!write_file(jbi, *text, diags)) {
    print_diags(diags, err);
    return 1;
  }
  print_diags(diags, err);
  out << "wrote " << jbi.string() << "\n";
  return exit_for(diags);
}

int cmd_check(const Options& opt, std::ostream& out, std::ostream& err) {
  std::vector<Diagnostic> diags;
  auto pipe = load_scene(opt, diags);
  if (pipe) {
    bendline::normalize_scene(pipe->cell, diags);
  }
  print_diags(diags, err);
  const int code = exit_for(diags);
  if (code == 0) out << "OK\n";
  return code;
}

// Shared by simulate and plot: obtain job text (reusing an existing .JBI in
// the output directory, else compiling the scene), run the interpreter.
struct SimRun {
  codegen::ProgramIR ir;
  vm::RunResult result;
  std::vector<Diagnostic> run_diags;  // livelock/speed problems, not scene errors
  fs::path jbi;
};

std::optional<SimRun> run_job(const ScenePipeline& pipe, const Options& opt,
                              std::vector<Diagnostic>& diags) {
  if (!ensure_out_dir(opt.out_dir, diags)) return std::nullopt;
  SimRun sim;
  sim.jbi = fs::path(opt.out_dir) / (pipe.jobname + ".JBI");

  std::string text;
  if (fs::exists(sim.jbi)) {
    auto existing = read_file(sim.jbi.string(), diags);
    if (!existing) return std::nullopt;
    text = std::move(*existing);
  } else {
    auto compiled = compile_text(pipe, diags);
    if (!compiled) return std::nullopt;
    if (!write_file(sim.jbi, *compiled, diags)) return std::nullopt;
    text = std::move(*compiled);
  }

  auto ir = vm::parse_program(text, diags);
  if (!ir) return std::nullopt;
  sim.ir = std::move(*ir);
  sim.result = vm::run(sim.ir, pipe.plant, opt.max_steps, sim.run_diags);
  return sim;
}

// Registers and trace poses live in the robot base frame; the collision
// world and plots live in the cell frame. One transform, applied once.
sim::TimedPath path_in_cell_frame(const sim::TimedPath& path, const geom::Pose& robot_base) {
  sim::TimedPath out = path;
  for (auto& s : out.samples) s.pose = geom::compose(robot_base, s.pose);
  return out;
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  std::vector<Diagnostic> diags;
  auto pipe = load_scene(opt, diags);
  if (!pipe) {
    print_diags(diags, err);
    return exit_for(diags);
  }
  auto arm_text = read_file(opt.arm_path, diags);
  std::optional<kin::ArmModel> arm;
  if (arm_text) arm = kin::parse_arm(*arm_text, diags);
  if (!arm) {
    print_diags(diags, err);
    return exit_for(diags);
  }

  auto sim = run_job(*pipe, opt, diags);
  if (!sim) {
    print_diags(diags, err);
    return exit_for(diags);
  }

  const sim::TimedPath path =
      path_in_cell_frame(sim::sample_trace(sim->result.trace, opt.dt), pipe->cell.robot_base);
  kin::ArmModel mounted = *arm;
  mounted.base = geom::compose(pipe->cell.robot_base, arm->base);
  const sim::JointPathResult joints = sim::solve_joint_path(path, mounted);
  const sim::SimReport report = sim::build_report(path, joints, mounted, pipe->cell.collision_world,
                                                  opt.clearance, sim->result.final_state.clock);

  const fs::path out_dir(opt.out_dir);
  write_file(out_dir / "trace.jsonl", vm::trace_to_jsonl(sim->result), diags);
  write_file(out_dir / "report.txt", sim::report_text(report), diags);
  write_file(out_dir / "sim.json", sim::report_json(report), diags);
  write_file(out_dir / "path_xy.svg", sim::render_svg(path, pipe->cell.collision_world, report.collisions, 0, 1), diags);
  write_file(out_dir / "path_xz.svg", sim::render_svg(path, pipe->cell.collision_world, report.collisions, 0, 2), diags);

  out << sim::report_text(report);
  print_diags(diags, err);
  print_diags(sim->run_diags, err);

  const int code = exit_for(diags);
  if (code != 0) return code;
  const bool abnormal = !report.clean() || sim->result.status != vm::RunStatus::Completed;
  return abnormal ? 4 : 0;
}

int cmd_plot(const Options& opt, std::ostream& out, std::ostream& err) {
  std::vector<Diagnostic> diags;
  auto pipe = load_scene(opt, diags);
  if (!pipe) {
    print_diags(diags, err);
    return exit_for(diags);
  }
  auto sim = run_job(*pipe, opt, diags);
  if (!sim) {
    print_diags(diags, err);
    return exit_for(diags);
  }
  const sim::TimedPath path =
      path_in_cell_frame(sim::sample_trace(sim->result.trace, opt.dt), pipe->cell.robot_base);
  const auto collisions = sim::check_collisions(path, pipe->cell.collision_world, opt.clearance);

  const fs::path out_dir(opt.out_dir);
  write_file(out_dir / "path_xy.svg", sim::render_svg(path, pipe->cell.collision_world, collisions, 0, 1), diags);
  write_file(out_dir / "path_xz.svg", sim::render_svg(path, pipe->cell.collision_world, collisions, 0, 2), diags);

  out << "wrote " << (out_dir / "path_xy.svg").string() << " and " << (out_dir / "path_xz.svg").string() << "\n";
  print_diags(diags, err);
  print_diags(sim->run_diags, err);
  return exit_for(diags);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"robot job compiler and simulator for a sheet metal bending cell"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scene", opt.scene_path, "cell scene JSON file")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--override", opt.overrides, "parameter override key=value (repeatable)");
  };
  auto add_sim = [&](CLI::App* cmd) {
    cmd->add_option("--dt", opt.dt, "path sampling interval, s");
    cmd->add_option("--clearance", opt.clearance, "collision clearance, mm");
    cmd->add_option("--max-steps", opt.max_steps, "interpreter instruction budget");
  };

  CLI::App* compile = app.add_subcommand("compile", "generate the robot job file from a scene");
  add_common(compile);
  CLI::App* check = app.add_subcommand("check", "validate a scene, write nothing");
  add_common(check);
  CLI::App* simulate = app.add_subcommand("simulate", "execute the job against the plant model and report");
  add_common(simulate);
  add_sim(simulate);
  simulate->add_option("--arm", opt.arm_path, "arm description JSON file")->required();
  CLI::App* plot = app.add_subcommand("plot", "write path projection plots");
  add_common(plot);
  add_sim(plot);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (compile->parsed()) return cmd_compile(opt, out, err);
    if (check->parsed()) return cmd_check(opt, out, err);
    if (simulate->parsed()) return cmd_simulate(opt, out, err);
    if (plot->parsed()) return cmd_plot(opt, out, err);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}

}  // namespace bendcell::cli
