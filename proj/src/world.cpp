#include "quadnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

#include "json.hpp"
#include "quadnav/rng.hpp"

namespace quadnav::world {
namespace {

using json = nlohmann::json;

constexpr double kCliffSegmentLen = 5.0;
constexpr int kCliffSegments = 10;
constexpr double kCliffDs = 0.05;
constexpr double kCliffKappaMax = 0.2;

constexpr double kPillarGridPitch = 2.0;
constexpr double kPillarGridMax = 6.0;
constexpr double kPillarJitter = 0.3;
constexpr double kPillarCenterMax = 6.2;  // keeps pillar edge strictly inside walls
constexpr double kPillarRadius = 0.25;
constexpr double kClearRadius = 1.5;      // around start and goal corners
constexpr double kCornerCoord = 5.5;

constexpr std::array<Vec2, 4> kCorners{{{kCornerCoord, kCornerCoord},
                                        {-kCornerCoord, kCornerCoord},
                                        {-kCornerCoord, -kCornerCoord},
                                        {kCornerCoord, -kCornerCoord}}};

double norm2(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }
double dist2(Vec2 a, Vec2 b) { return norm2({a.x - b.x, a.y - b.y}); }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double apx = p.x - a.x, apy = p.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = a.x + t * abx, cy = a.y + t * aby;
  return std::hypot(p.x - cx, p.y - cy);
}

Terrain make_cliff_terrain(Rng& rng) {
  Terrain t;
  t.kind = Terrain::Kind::CurvedCliff;
  t.half_width = 2.0;
  std::array<double, kCliffSegments> kappa{};
  for (auto& k : kappa) k = rng.uniform(-kCliffKappaMax, kCliffKappaMax);

  double x = 0.0, y = 0.0, heading = 0.0;
  t.centerline.push_back({x, y});
  const int steps_per_segment = static_cast<int>(kCliffSegmentLen / kCliffDs);
  for (int seg = 0; seg < kCliffSegments; ++seg) {
    for (int i = 0; i < steps_per_segment; ++i) {
      x += std::cos(heading) * kCliffDs;
      y += std::sin(heading) * kCliffDs;
      heading += kappa[seg] * kCliffDs;
      t.centerline.push_back({x, y});
    }
  }
  return t;
}

Terrain make_maze_terrain(Rng& rng) {
  Terrain t;
  t.kind = Terrain::Kind::Maze;
  t.wall_half_extent = 6.5;
  for (double gx = -kPillarGridMax; gx <= kPillarGridMax + 1e-9; gx += kPillarGridPitch) {
    for (double gy = -kPillarGridMax; gy <= kPillarGridMax + 1e-9; gy += kPillarGridPitch) {
      const double jx = rng.uniform(-kPillarJitter, kPillarJitter);
      const double jy = rng.uniform(-kPillarJitter, kPillarJitter);
      Vec2 c{std::clamp(gx + jx, -kPillarCenterMax, kPillarCenterMax),
             std::clamp(gy + jy, -kPillarCenterMax, kPillarCenterMax)};
      bool blocked = dist2(c, {0.0, 0.0}) < kClearRadius;
      for (const auto& corner : kCorners) blocked = blocked || dist2(c, corner) < kClearRadius;
      if (!blocked) t.pillars.push_back({c, kPillarRadius});
    }
  }
  return t;
}

struct Ray {
  std::array<double, 3> o;
  std::array<double, 3> d;
};

// nearest intersection with the z = 0 ground; cliff ground exists only
// inside the corridor
bool hit_ground(const Terrain& terrain, const Ray& r, double t_max, double& t_hit) {
  if (std::abs(r.d[2]) < 1e-12) return false;
  const double t = -r.o[2] / r.d[2];
  if (t <= 1e-9 || t >= t_max) return false;
  if (terrain.kind == Terrain::Kind::CurvedCliff) {
    const Vec2 p{r.o[0] + t * r.d[0], r.o[1] + t * r.d[1]};
    if (distance_to_centerline(terrain, p) > terrain.half_width) return false;
  }
  t_hit = t;
  return true;
}

bool hit_walls(const Terrain& terrain, const Ray& r, double t_max, double& t_hit) {
  if (terrain.kind != Terrain::Kind::Maze) return false;
  const double e = terrain.wall_half_extent;
  const double h = terrain.wall_height;
  bool hit = false;
  double best = t_max;
  for (int axis = 0; axis < 2; ++axis) {
    for (double side : {-e, e}) {
      if (std::abs(r.d[axis]) < 1e-12) continue;
      const double t = (side - r.o[axis]) / r.d[axis];
      if (t <= 1e-9 || t >= best) continue;
      const double other = r.o[1 - axis] + t * r.d[1 - axis];
      const double z = r.o[2] + t * r.d[2];
      if (std::abs(other) <= e && z >= 0.0 && z <= h) {
        best = t;
        hit = true;
      }
    }
  }
  if (hit) t_hit = best;
  return hit;
}

bool hit_pillar(const Pillar& p, double height, const Ray& r, double t_max, double& t_hit) {
  bool hit = false;
  double best = t_max;
  // lateral surface
  const double ox = r.o[0] - p.center.x, oy = r.o[1] - p.center.y;
  const double a = r.d[0] * r.d[0] + r.d[1] * r.d[1];
  if (a > 1e-12) {
    const double b = ox * r.d[0] + oy * r.d[1];
    const double c = ox * ox + oy * oy - p.radius * p.radius;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t <= 1e-9 || t >= best) continue;
        const double z = r.o[2] + t * r.d[2];
        if (z >= 0.0 && z <= height) {
          best = t;
          hit = true;
        }
      }
    }
  }
  // caps
  if (std::abs(r.d[2]) > 1e-12) {
    for (double zc : {0.0, height}) {
      const double t = (zc - r.o[2]) / r.d[2];
      if (t <= 1e-9 || t >= best) continue;
      const double hx = ox + t * r.d[0], hy = oy + t * r.d[1];
      if (hx * hx + hy * hy <= p.radius * p.radius) {
        best = t;
        hit = true;
      }
    }
  }
  if (hit) t_hit = best;
  return hit;
}

json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::Cliff: return "cliff";
    case Task::MazeTraversal: return "maze_traversal";
    case Task::GoalFinding: return "goal_finding";
  }
  return "?";
}

std::optional<Task> task_from_name(const std::string& name) {
  if (name == "cliff") return Task::Cliff;
  if (name == "maze_traversal") return Task::MazeTraversal;
  if (name == "goal_finding") return Task::GoalFinding;
  return std::nullopt;
}

const char* reason_name(StepReason r) {
  switch (r) {
    case StepReason::Running: return "running";
    case StepReason::Fall: return "fall";
    case StepReason::Collision: return "collision";
    case StepReason::CliffEdge: return "cliff_edge";
    case StepReason::GoalReached: return "goal_reached";
    case StepReason::TimeLimit: return "time_limit";
  }
  return "?";
}

double f_vcap(double r, double v_cap) { return std::clamp(r, -v_cap, v_cap); }

double reward_cliff(double x_t, double x_prev) { return f_vcap(x_t - x_prev); }

double reward_maze_traversal(Vec2 pos_t, Vec2 pos_prev) {
  return f_vcap(norm2(pos_t) - norm2(pos_prev));
}

double reward_goal_finding(Vec2 pos_t, Vec2 pos_prev, Vec2 goal) {
  const double r_gf = f_vcap(dist2(pos_prev, goal) - dist2(pos_t, goal));
  const double r_mt = reward_maze_traversal(pos_t, pos_prev);
  const double w = std::clamp(norm2(pos_t) / norm2(goal), 0.0, 1.0);
  return w * r_gf + (1.0 - w) * r_mt;
}

double distance_to_centerline(const Terrain& terrain, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < terrain.centerline.size(); ++i) {
    best = std::min(best, point_segment_distance(p, terrain.centerline[i], terrain.centerline[i + 1]));
  }
  return best;
}

double cast_ray(const Terrain& terrain, const std::array<double, 3>& origin,
                const std::array<double, 3>& dir) {
  const Ray r{origin, dir};
  double best = kRangeMax;
  double t = 0.0;
  if (hit_ground(terrain, r, best, t)) best = t;
  if (hit_walls(terrain, r, best, t)) best = t;
  for (const auto& p : terrain.pillars) {
    // prune pillars whose bounding circle can't beat the current best
    const double dx = p.center.x - origin[0], dy = p.center.y - origin[1];
    if (std::sqrt(dx * dx + dy * dy) - p.radius >= best) continue;
    if (hit_pillar(p, terrain.pillar_height, r, best, t)) best = t;
  }
  return best;
}

DepthImage render_depth(const RobotState& state, const Terrain& terrain, int n) {
  const double cam_pitch =
      terrain.kind == Terrain::Kind::CurvedCliff ? kCliffCameraPitch : 0.0;
  const double cy = std::cos(state.yaw), sy = std::sin(state.yaw);
  const double cp = std::cos(cam_pitch), sp = std::sin(cam_pitch);
  const std::array<double, 3> origin{state.x, state.y, kCameraHeight};
  const std::array<double, 3> fwd{cp * cy, cp * sy, sp};
  const std::array<double, 3> right{sy, -cy, 0.0};
  const std::array<double, 3> up{right[1] * fwd[2] - right[2] * fwd[1],
                                 right[2] * fwd[0] - right[0] * fwd[2],
                                 right[0] * fwd[1] - right[1] * fwd[0]};
  const double half_w = std::tan(kHorizontalFov / 2.0);
  const double half_h = std::tan(kVerticalFov / 2.0);

  DepthImage img(n, n, 1);
  for (int row = 0; row < n; ++row) {
    const double v = (1.0 - 2.0 * (row + 0.5) / n) * half_h;
    for (int col = 0; col < n; ++col) {
      const double u = (2.0 * (col + 0.5) / n - 1.0) * half_w;
      std::array<double, 3> d{fwd[0] + u * right[0] + v * up[0],
                              fwd[1] + u * right[1] + v * up[1],
                              fwd[2] + u * right[2] + v * up[2]};
      const double inv = 1.0 / std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      for (auto& c : d) c *= inv;
      img.at(row, col, 0) = static_cast<float>(cast_ray(terrain, origin, d) / kRangeMax);
    }
  }
  return img;
}

RobotState dynamics_step(const RobotState& state, const tg::MotorCommand& command, double dt) {
  for (double c : command) {
    if (!std::isfinite(c)) throw NumericalError("non-finite motor command");
  }

  RobotState ns = state;
  const double max_delta = kMotorRateMax * dt;
  for (int m = 0; m < tg::kNumMotors; ++m) {
    ns.motor_angles[m] =
        state.motor_angles[m] + std::clamp(command[m] - state.motor_angles[m], -max_delta, max_delta);
  }

  // stance legs propel the body; swing motion maps to horizontal foot speed
  double sum_u = 0.0, sum_left = 0.0, sum_right = 0.0;
  int n_stance = 0, n_left = 0, n_right = 0;
  for (int leg = 0; leg < tg::kNumLegs; ++leg) {
    const double phase = tg::wrap_2pi(ns.tg.phase + tg::kTrotOffsets[leg]);
    if (phase < tg::kPi) continue;  // swing phase
    const int swing_idx = leg * 3 + tg::kSwing;
    const double delta = ns.motor_angles[swing_idx] - state.motor_angles[swing_idx];
    const double u = -kLegLength * delta / dt;
    sum_u += u;
    ++n_stance;
    const bool left = (leg == tg::kFrontLeft || leg == tg::kHindLeft);
    if (left) {
      sum_left += u;
      ++n_left;
    } else {
      sum_right += u;
      ++n_right;
    }
  }
  const double v = n_stance > 0 ? sum_u / n_stance : 0.0;
  const double omega_z =
      (n_left > 0 && n_right > 0) ? (sum_left / n_left - sum_right / n_right) / kTrackWidth : 0.0;

  ns.x = state.x + v * std::cos(state.yaw) * dt;
  ns.y = state.y + v * std::sin(state.yaw) * dt;
  ns.yaw = state.yaw + omega_z * dt;

  auto ext = [&](int leg) { return ns.motor_angles[leg * 3 + tg::kExtension]; };
  ns.roll = kRollGain * ((ext(tg::kFrontLeft) + ext(tg::kHindLeft)) / 2.0 -
                         (ext(tg::kFrontRight) + ext(tg::kHindRight)) / 2.0);
  ns.pitch = kPitchGain * ((ext(tg::kFrontLeft) + ext(tg::kFrontRight)) / 2.0 -
                           (ext(tg::kHindLeft) + ext(tg::kHindRight)) / 2.0);
  ns.roll_rate = (ns.roll - state.roll) / dt;
  ns.pitch_rate = (ns.pitch - state.pitch) / dt;
  return ns;
}

StepResult check_termination(const RobotState& state, const Terrain& terrain) {
  if (std::abs(state.roll) > kFallThreshold || std::abs(state.pitch) > kFallThreshold) {
    return {0.0, true, StepReason::Fall};
  }
  const Vec2 pos{state.x, state.y};
  if (terrain.kind == Terrain::Kind::CurvedCliff) {
    if (distance_to_centerline(terrain, pos) > terrain.half_width) {
      return {0.0, true, StepReason::CliffEdge};
    }
  } else {
    const double wall_gap = terrain.wall_half_extent - std::max(std::abs(pos.x), std::abs(pos.y));
    bool collided = wall_gap < kBodyRadius;
    for (const auto& p : terrain.pillars) {
      if (collided) break;
      collided = dist2(pos, p.center) - p.radius < kBodyRadius;
    }
    if (collided) return {0.0, true, StepReason::Collision};
  }
  if (terrain.goal && dist2(pos, *terrain.goal) < kGoalRadius) {
    return {0.0, true, StepReason::GoalReached};
  }
  if (state.step_count >= kMaxSteps) return {0.0, true, StepReason::TimeLimit};
  return {0.0, false, StepReason::Running};
}

std::pair<RobotState, Terrain> reset(Task task, std::uint64_t seed) {
  Rng rng(seed);
  RobotState state;
  Terrain terrain;
  if (task == Task::Cliff) {
    terrain = make_cliff_terrain(rng);
    state.yaw = 0.0;
  } else {
    terrain = make_maze_terrain(rng);
    state.yaw = rng.uniform(-tg::kPi, tg::kPi);
    if (task == Task::GoalFinding) {
      terrain.goal = kCorners[static_cast<std::size_t>(rng.uniform_int(4))];
    }
  }
  return {state, terrain};
}

void Environment::reset(std::uint64_t seed) {
  auto [state, terrain] = world::reset(task_, seed);
  state_ = state;
  terrain_ = std::move(terrain);
}

StepResult Environment::step(const tg::MotorCommand& command, tg::TgState new_tg) {
  const RobotState prev = state_;
  state_.tg = new_tg;
  state_ = dynamics_step(state_, command, tg::kDt);
  state_.step_count = prev.step_count + 1;

  double reward = 0.0;
  switch (task_) {
    case Task::Cliff:
      reward = reward_cliff(state_.x, prev.x);
      break;
    case Task::MazeTraversal:
      reward = reward_maze_traversal({state_.x, state_.y}, {prev.x, prev.y});
      break;
    case Task::GoalFinding:
      reward = reward_goal_finding({state_.x, state_.y}, {prev.x, prev.y}, *terrain_.goal);
      break;
  }

  StepResult result = check_termination(state_, terrain_);
  result.reward = reward;
  return result;
}

void export_trace_jsonl(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace output: " + path);
  json header{{"task", task_name(trace.task)},
              {"seed", trace.seed},
              {"start", json::array({trace.start_x, trace.start_y, trace.start_yaw})},
              {"return", trace.episode_return},
              {"end_reason", reason_name(trace.end_reason)},
              {"hl_activations", trace.hl_activations}};
  if (trace.goal) header["goal"] = vec2_json(*trace.goal);
  out << header.dump() << "\n";
  for (const auto& s : trace.steps) {
    json rec{{"step", s.step},     {"x", s.x},
             {"y", s.y},           {"yaw", s.yaw},
             {"reward", s.reward}, {"hl_active", s.hl_active},
             {"d", s.duration}};
    rec["latent"] = s.latent;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("failed writing trace: " + path);
}

void export_terrain_jsonl(const Terrain& terrain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open terrain output: " + path);
  if (terrain.kind == Terrain::Kind::CurvedCliff) {
    json rec{{"kind", "curved_cliff"}, {"half_width", terrain.half_width}};
    out << rec.dump() << "\n";
    for (const auto& p : terrain.centerline) {
      out << json{{"centerline", vec2_json(p)}}.dump() << "\n";
    }
  } else {
    json rec{{"kind", "maze"},
             {"wall_half_extent", terrain.wall_half_extent},
             {"wall_height", terrain.wall_height}};
    if (terrain.goal) rec["goal"] = vec2_json(*terrain.goal);
    out << rec.dump() << "\n";
    for (const auto& p : terrain.pillars) {
      out << json{{"pillar", vec2_json(p.center)}, {"radius", p.radius}}.dump() << "\n";
    }
  }
  if (!out) throw IoError("failed writing terrain: " + path);
}

}  // namespace quadnav::world
