#include "bendcell/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "bendcell/codegen.hpp"
#include "bendcell/format.hpp"

namespace bendcell::sim {

namespace {

struct MotionSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  geom::Pose from;
  geom::Pose to;
};

geom::Pose interpolate(const MotionSegment& seg, double t) {
  const double span = seg.t1 - seg.t0;
  const double s = span > 0.0 ? std::clamp((t - seg.t0) / span, 0.0, 1.0) : 1.0;
  geom::Pose out;
  out.position = seg.from.position + s * (seg.to.position - seg.from.position);
  const Eigen::AngleAxisd arc(seg.from.rotation.transpose() * seg.to.rotation);
  out.rotation = seg.from.rotation * Eigen::AngleAxisd(s * arc.angle(), arc.axis()).toRotationMatrix();
  return out;
}

}  // namespace

TimedPath sample_trace(const vm::ExecutionTrace& trace, double dt) {
  TimedPath path;
  if (dt <= 0.0) return path;

  std::vector<MotionSegment> segments;
  double final_clock = 0.0;
  {
    const vm::TraceEvent* open = nullptr;
    for (const auto& e : trace.events) {
      final_clock = std::max(final_clock, e.t);
      if (e.kind == vm::EventKind::MoveStart) {
        open = &e;
      } else if (e.kind == vm::EventKind::MoveEnd && open) {
        MotionSegment seg;
        seg.t0 = open->t;
        seg.t1 = e.t;
        seg.from = codegen::pose_from_tuple(open->pose);
        seg.to = codegen::pose_from_tuple(e.pose);
        segments.push_back(seg);
        open = nullptr;
      }
    }
  }
  if (segments.empty()) return path;

  std::vector<double> times;
  for (size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t > final_clock + 1e-9) break;
    times.push_back(std::min(t, final_clock));
  }
  for (const auto& seg : segments) {
    times.push_back(seg.t0);
    times.push_back(seg.t1);
  }
  times.push_back(final_clock);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              times.end());

  size_t seg_idx = 0;
  for (double t : times) {
    while (seg_idx + 1 < segments.size() && t >= segments[seg_idx + 1].t0) ++seg_idx;
    const MotionSegment& seg = segments[seg_idx];
    geom::Pose pose;
    if (t <= seg.t0) {
      pose = seg.from;
    } else if (t >= seg.t1) {
      pose = seg.to;
    } else {
      pose = interpolate(seg, t);
    }
    path.samples.push_back(PathSample{t, pose});
  }
  return path;
}

JointPathResult solve_joint_path(const TimedPath& path, const kin::ArmModel& arm) {
  JointPathResult out;
  out.samples.reserve(path.samples.size());
  kin::JointVector seed = arm.home;
  for (const auto& sample : path.samples) {
    const kin::IkResult ik = kin::solve_ik(arm, sample.pose, seed);
    JointSample js;
    js.t = sample.t;
    js.q = ik.q;
    js.converged = ik.converged;
    js.pos_residual_mm = ik.pos_residual_mm;
    js.rot_residual_rad = ik.rot_residual_rad;
    out.samples.push_back(js);
    if (ik.converged) seed = ik.q;
  }
  return out;
}

double signed_distance(const Eigen::Vector3d& p, const scene::Box& box) {
  Eigen::Vector3d outside = Eigen::Vector3d::Zero();
  double inside = -std::numeric_limits<double>::infinity();
  bool is_inside = true;
  for (int i = 0; i < 3; ++i) {
    if (p[i] < box.min[i]) {
      outside[i] = box.min[i] - p[i];
      is_inside = false;
    } else if (p[i] > box.max[i]) {
      outside[i] = p[i] - box.max[i];
      is_inside = false;
    } else {
      inside = std::max(inside, std::max(box.min[i] - p[i], p[i] - box.max[i]));
    }
  }
  if (!is_inside) return outside.norm();
  return inside;  // negative: depth to the nearest face
}

std::vector<CollisionEvent> check_collisions(const TimedPath& path,
                                             const std::vector<scene::Box>& world,
                                             double clearance) {
  std::vector<CollisionEvent> events;
  for (const auto& box : world) {
    bool open = false;
    CollisionEvent current;
    for (const auto& sample : path.samples) {
      const double sd = signed_distance(sample.pose.position, box);
      if (sd < clearance) {
        const double pen = std::max(0.0, -sd);
        if (!open) {
          open = true;
          current = CollisionEvent{sample.t, sample.t, box.id, pen};
        } else {
          current.t_end = sample.t;
          current.penetration = std::max(current.penetration, pen);
        }
      } else if (open) {
        events.push_back(current);
        open = false;
      }
    }
    if (open) events.push_back(current);
  }
  std::sort(events.begin(), events.end(), [](const CollisionEvent& a, const CollisionEvent& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.box_id < b.box_id;
  });
  return events;
}

SimReport build_report(const TimedPath& path, const JointPathResult& joints,
                       const kin::ArmModel& arm, const std::vector<scene::Box>& world,
                       double clearance, double final_clock) {
  SimReport report;
  report.cycle_time_s = final_clock;
  for (size_t i = 1; i < path.samples.size(); ++i) {
    report.path_length_mm += (path.samples[i].pose.position - path.samples[i - 1].pose.position).norm();
  }
  report.collisions = check_collisions(path, world, clearance);
  for (const auto& js : joints.samples) {
    if (!js.converged) {
      report.unreachable.push_back(UnreachableSample{js.t, js.pos_residual_mm, js.rot_residual_rad});
      continue;
    }
    for (size_t i = 0; i < 6; ++i) {
      const kin::JointLimit& lim = arm.joint_limits[i];
      if (js.q[i] < lim.min_deg || js.q[i] > lim.max_deg) {
        report.limit_hits.push_back(LimitHit{js.t, static_cast<int>(i) + 1, js.q[i], lim.min_deg, lim.max_deg});
      }
    }
  }
  return report;
}

std::string report_text(const SimReport& r) {
  std::string out;
  out += "bend cell simulation report\n";
  out += strf("cycle time: %.6f s\n", r.cycle_time_s);
  out += strf("path length: %.6f mm\n", r.path_length_mm);
  for (const auto& c : r.collisions) {
    out += strf("collision: t=%.6f..%.6f box=%s penetration=%.6f mm\n", c.t, c.t_end,
                c.box_id.c_str(), c.penetration);
  }
  for (const auto& u : r.unreachable) {
    out += strf("unreachable: t=%.6f pos_residual=%.6g mm rot_residual=%.6g rad\n", u.t,
                u.pos_residual_mm, u.rot_residual_rad);
  }
  for (const auto& l : r.limit_hits) {
    out += strf("limit hit: t=%.6f joint=%d value=%.4f deg range=[%.4f, %.4f]\n", l.t, l.joint,
                l.value_deg, l.min_deg, l.max_deg);
  }
  out += strf("summary: %zu collisions, %zu unreachable, %zu limit hits\n", r.collisions.size(),
              r.unreachable.size(), r.limit_hits.size());
  return out;
}

std::string report_json(const SimReport& r) {
  using nlohmann::json;
  json j;
  j["clean"] = r.clean();
  j["cycle_time_s"] = r.cycle_time_s;
  j["path_length_mm"] = r.path_length_mm;
  j["collisions"] = json::array();
  for (const auto& c : r.collisions) {
    j["collisions"].push_back({{"t", c.t}, {"t_end", c.t_end}, {"box_id", c.box_id}, {"penetration_mm", c.penetration}});
  }
  j["unreachable"] = json::array();
  for (const auto& u : r.unreachable) {
    j["unreachable"].push_back({{"t", u.t}, {"pos_residual_mm", u.pos_residual_mm}, {"rot_residual_rad", u.rot_residual_rad}});
  }
  j["limit_hits"] = json::array();
  for (const auto& l : r.limit_hits) {
    j["limit_hits"].push_back({{"t", l.t}, {"joint", l.joint}, {"value_deg", l.value_deg}, {"min_deg", l.min_deg}, {"max_deg", l.max_deg}});
  }
  return j.dump(2) + "\n";
}

std::string render_svg(const TimedPath& path, const std::vector<scene::Box>& world,
                       const std::vector<CollisionEvent>& collisions,
                       int axis_h, int axis_v) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 600.0;
  constexpr double kMargin = 40.0;

  double lo_h = 0.0, hi_h = 1.0, lo_v = 0.0, hi_v = 1.0;
  bool first = true;
  auto grow = [&](double h, double v) {
    if (first) {
      lo_h = hi_h = h;
      lo_v = hi_v = v;
      first = false;
    } else {
      lo_h = std::min(lo_h, h);
      hi_h = std::max(hi_h, h);
      lo_v = std::min(lo_v, v);
      hi_v = std::max(hi_v, v);
    }
  };
  for (const auto& s : path.samples) grow(s.pose.position[axis_h], s.pose.position[axis_v]);
  for (const auto& b : world) {
    grow(b.min[axis_h], b.min[axis_v]);
    grow(b.max[axis_h], b.max[axis_v]);
  }
  if (hi_h - lo_h < 1.0) hi_h = lo_h + 1.0;
  if (hi_v - lo_v < 1.0) hi_v = lo_v + 1.0;

  const double scale = std::min((kWidth - 2 * kMargin) / (hi_h - lo_h),
                                (kHeight - 2 * kMargin) / (hi_v - lo_v));
  auto sx = [&](double h) { return kMargin + (h - lo_h) * scale; };
  auto sy = [&](double v) { return kHeight - kMargin - (v - lo_v) * scale; };

  const char* axis_names = "xyz";
  std::string out;
  out += strf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
              "viewBox=\"0 0 %.0f %.0f\">\n",
              kWidth, kHeight, kWidth, kHeight);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const auto& b : world) {
    const double x = sx(b.min[axis_h]);
    const double y = sy(b.max[axis_v]);
    const double w = (b.max[axis_h] - b.min[axis_h]) * scale;
    const double h = (b.max[axis_v] - b.min[axis_v]) * scale;
    out += strf("<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\" fill=\"#9aa0a6\" "
                "fill-opacity=\"0.35\" stroke=\"#5f6368\"/>\n",
                x, y, w, h);
    out += strf("<text x=\"%.3f\" y=\"%.3f\" font-size=\"11\" fill=\"#5f6368\">%s</text>\n",
                x + 3.0, y + 13.0, b.id.c_str());
  }
  if (!path.samples.empty()) {
    out += "<polyline fill=\"none\" stroke=\"#1a73e8\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < path.samples.size(); ++i) {
      const auto& p = path.samples[i].pose.position;
      out += strf(i == 0 ? "%.3f,%.3f" : " %.3f,%.3f", sx(p[axis_h]), sy(p[axis_v]));
    }
    out += "\"/>\n";
    for (const auto& s : path.samples) {
      bool hit = false;
      for (const auto& c : collisions) {
        if (s.t >= c.t - 1e-9 && s.t <= c.t_end + 1e-9) {
          hit = true;
          break;
        }
      }
      if (hit) {
        out += strf("<circle cx=\"%.3f\" cy=\"%.3f\" r=\"3\" fill=\"#d93025\"/>\n",
                    sx(s.pose.position[axis_h]), sy(s.pose.position[axis_v]));
      }
    }
  }
  out += strf("<text x=\"%.3f\" y=\"%.3f\" font-size=\"12\" fill=\"#202124\">%c [mm]</text>\n",
              kWidth - kMargin, kHeight - 10.0, axis_names[axis_h]);
  out += strf("<text x=\"%.3f\" y=\"%.3f\" font-size=\"12\" fill=\"#202124\">%c [mm]</text>\n",
              10.0, kMargin, axis_names[axis_v]);
  out += "</svg>\n";
  return out;
}

}  // namespace bendcell::sim
