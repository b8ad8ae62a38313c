#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/nnet.hpp"
#include "quadnav/tg.hpp"

namespace quadnav::world {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Task { Cliff, MazeTraversal, GoalFinding };

const char* task_name(Task t);
std::optional<Task> task_from_name(const std::string& name);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Pillar {
  Vec2 center;
  double radius = 0.25;
};

struct Terrain {
  enum class Kind { CurvedCliff, Maze };
  Kind kind = Kind::Maze;

  // cliff: walkable ribbon around a curving centerline; beyond it, the drop
  std::vector<Vec2> centerline;
  double half_width = 2.0;

  // maze: square arena with wall boxes and scattered pillars
  double wall_half_extent = 6.5;
  double wall_height = 2.0;
  double pillar_height = 2.0;
  std::vector<Pillar> pillars;

  std::optional<Vec2> goal;
};

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double roll_rate = 0.0;
  double pitch_rate = 0.0;
  std::array<double, tg::kNumMotors> motor_angles{};
  tg::TgState tg;
  int step_count = 0;
};

enum class StepReason { Running, Fall, Collision, CliffEdge, GoalReached, TimeLimit };

const char* reason_name(StepReason r);

struct StepResult {
  double reward = 0.0;
  bool done = false;
  StepReason reason = StepReason::Running;
};

// task constants
inline constexpr double kVcap = 0.002;          // reward cap per step, meters
inline constexpr int kMaxSteps = 6000;          // 12 s at 500 Hz
inline constexpr double kFallThreshold = 0.4;   // rad, roll/pitch
inline constexpr double kBodyRadius = 0.35;     // collision disc
inline constexpr double kGoalRadius = 0.5;

// reduced-order dynamics constants
inline constexpr double kMotorRateMax = 10.0;   // rad/s slew limit
inline constexpr double kLegLength = 0.25;      // m
inline constexpr double kTrackWidth = 0.35;     // m, left-right foot spacing
inline constexpr double kRollGain = 2.0;
inline constexpr double kPitchGain = 2.0;

// camera
inline constexpr double kCameraHeight = 0.5;    // m above body origin
inline constexpr double kCliffCameraPitch = -30.0 * tg::kPi / 180.0;
inline constexpr double kHorizontalFov = 90.0 * tg::kPi / 180.0;
inline constexpr double kVerticalFov = 60.0 * tg::kPi / 180.0;
inline constexpr double kRangeMax = 10.0;       // m

using DepthImage = nnet::Tensor3;  // n x n x 1, values in [0, 1]

// rewards
double f_vcap(double r, double v_cap = kVcap);
double reward_cliff(double x_t, double x_prev);
double reward_maze_traversal(Vec2 pos_t, Vec2 pos_prev);
double reward_goal_finding(Vec2 pos_t, Vec2 pos_prev, Vec2 goal);

// geometry
double distance_to_centerline(const Terrain& terrain, Vec2 p);

// Casts one ray from `origin` (z up) along unit `dir`; returns the distance
// to the nearest terrain surface, or kRangeMax if nothing is hit in range.
double cast_ray(const Terrain& terrain, const std::array<double, 3>& origin,
                const std::array<double, 3>& dir);

// n x n depth image from the body pose; camera pitch is -30 deg on the
// cliff and level in the maze.
DepthImage render_depth(const RobotState& state, const Terrain& terrain, int n);

// One step of the reduced-order body model. `state.tg` must already hold
// the phase the command was generated from. Does not touch step_count.
RobotState dynamics_step(const RobotState& state, const tg::MotorCommand& command, double dt);

StepResult check_termination(const RobotState& state, const Terrain& terrain);

std::pair<RobotState, Terrain> reset(Task task, std::uint64_t seed);

class Environment {
 public:
  explicit Environment(Task task) : task_(task) {}

  void reset(std::uint64_t seed);

  // Applies the final motor command with the already-advanced TG state:
  // dynamics, per-step reward, termination.
  StepResult step(const tg::MotorCommand& command, tg::TgState new_tg);

  DepthImage render(int n) const { return render_depth(state_, terrain_, n); }

  Task task() const { return task_; }
  const RobotState& state() const { return state_; }
  const Terrain& terrain() const { return terrain_; }

 private:
  Task task_;
  Terrain terrain_;
  RobotState state_;
};

// per-step trace record; observations/actions are kept so episodes can be
// replayed and rewards recomputed exactly
struct TraceStep {
  int step = 0;
  double x = 0.0, y = 0.0, yaw = 0.0, roll = 0.0, pitch = 0.0;
  double reward = 0.0;
  bool hl_active = false;
  int duration = 0;                  // duration emitted at the last HL activation
  std::vector<float> latent;
  std::vector<float> ll_observation;
  std::array<double, tg::kNumMotors> command{};
  double tg_phase = 0.0;
};

struct EpisodeTrace {
  Task task = Task::MazeTraversal;
  std::uint64_t seed = 0;
  double start_x = 0.0, start_y = 0.0, start_yaw = 0.0;
  std::optional<Vec2> goal;
  std::vector<TraceStep> steps;
  double episode_return = 0.0;
  StepReason end_reason = StepReason::Running;
  int hl_activations = 0;
};

// line-delimited JSON exports for external plotting
void export_trace_jsonl(const EpisodeTrace& trace, const std::string& path);
void export_terrain_jsonl(const Terrain& terrain, const std::string& path);

}  // namespace quadnav::world
