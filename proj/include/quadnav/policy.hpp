#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/nnet.hpp"
#include "quadnav/tg.hpp"
#include "quadnav/world.hpp"

namespace quadnav::policy {

struct TransferError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// how often the high level runs: from its own duration head, or at a
// fixed interval (ablation configs)
enum class HlMode { Variable, Every1, Every50, Every150, Every300 };

int fixed_interval(HlMode mode);  // 0 for Variable
const char* hl_mode_name(HlMode mode);
std::optional<HlMode> hl_mode_from_name(const std::string& name);

inline constexpr int kDurationMin = 50;
inline constexpr int kDurationMax = 300;
inline constexpr double kResidualScale = 0.3;  // rad per unit of clipped output
inline constexpr int kSensorDim = 2 + 4 + tg::kNumMotors;  // tg obs + imu + motors
inline constexpr int kLlOutputDim = tg::kNumMotors + 3;    // residuals + tg params

struct HlArch {
  int image_size = 16;       // 16 or 32
  int latent_dim = 2;        // 1, 2, 4 or 8
  bool use_pool = true;
  nnet::PoolMode pool_mode = nnet::PoolMode::Max;
  bool extra_fc = false;     // two 32-wide hidden layers after the flatten
  int feature_dim = 10;
  int task_input_dim = 0;    // 0 cliff, 3 maze/goal

  int output_dim() const { return 1 + latent_dim; }
};

// image -> clipped feature vector (feature_dim)
std::vector<nnet::LayerSpec> hl_trunk_layers(const HlArch& arch);

std::size_t hl_param_count(const HlArch& arch);
std::size_t ll_param_count(int latent_dim);
std::size_t flat_param_count(const HlArch& arch);  // single-level baseline

int task_input_dim(world::Task task);

struct PolicySpec {
  world::Task task = world::Task::MazeTraversal;
  HlArch arch;
  HlMode hl_mode = HlMode::Variable;
  bool flat_baseline = false;

  std::size_t hl_size() const;
  std::size_t ll_size() const;  // 0 for the flat baseline
};

struct PolicyParams {
  std::vector<float> theta_hl;
  std::vector<float> theta_ll;
  bool freeze_ll = false;
};

PolicyParams zero_params(const PolicySpec& spec);

// hl_init: "zeros" or "uniform" (small uniform noise, deterministic in seed)
PolicyParams init_params(const PolicySpec& spec, const std::string& hl_init, std::uint64_t seed);

// concatenated [theta_hl | theta_ll] view used by the optimizer
std::vector<float> concat_params(const PolicyParams& p);
PolicyParams split_params(const PolicySpec& spec, std::span<const float> flat, bool freeze_ll);
std::vector<std::uint8_t> frozen_mask(const PolicySpec& spec, bool freeze_ll);

struct HlOutput {
  int duration = 0;
  std::vector<float> latent;
};

HlOutput hl_forward(const HlArch& arch, std::span<const float> theta_hl,
                    const nnet::Tensor3& image, std::span<const float> task_input);

struct LlObservation {
  std::vector<float> values;  // [latent | tg sin,cos | roll,pitch,rates | motors]
};

LlObservation make_ll_observation(std::span<const float> latent, const world::RobotState& state);

struct LlOutput {
  std::array<double, tg::kNumMotors> residual{};  // radians, pre-scaled
  tg::TgParams tg_params;
};

LlOutput ll_forward(std::span<const float> theta_ll, const LlObservation& obs);

// single-level baseline: trunk feature + all sensors -> one network, run
// every control step
LlOutput flat_forward(const HlArch& arch, std::span<const float> theta,
                      const nnet::Tensor3& image, const world::RobotState& state,
                      std::span<const float> task_input);

struct InferenceStats {
  long long steps = 0;
  double policy_seconds = 0.0;  // render + network time, summed per step
};

// Executes one episode: resets env with `seed`, runs the HL/LL loop at
// 500 Hz until termination, returns the undiscounted return.
double run_episode(const PolicySpec& spec, const PolicyParams& params, world::Environment& env,
                   std::uint64_t seed, world::EpisodeTrace* trace = nullptr,
                   InferenceStats* stats = nullptr);

// LL transferred and frozen; HL freshly initialized for the new task
PolicyParams make_transfer_policy(const PolicySpec& src_spec, const PolicyParams& src,
                                  const PolicySpec& dst_spec, const std::string& hl_init,
                                  std::uint64_t seed);

}  // namespace quadnav::policy
