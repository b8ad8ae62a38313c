#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace quadnav::ars {

struct IterationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArsConfig {
  int num_directions = 32;
  int top_k = 16;
  double step_size = 0.02;
  double noise_std = 0.03;
  int episodes_per_eval = 3;
  std::uint64_t seed = 0;

  bool operator==(const ArsConfig&) const = default;
};

struct ArsState {
  std::vector<float> theta;
  std::uint64_t iteration = 0;
  std::uint64_t rng_seed = 0;
  double best_return = -1e300;
};

// Standard-Gaussian direction, reproducible from ids alone so workers can
// regenerate it without shipping vectors. Frozen coordinates are zeroed.
std::vector<float> make_direction(std::uint64_t seed, std::uint64_t iteration, int direction_id,
                                  std::size_t dim, const std::vector<std::uint8_t>& frozen);

struct Perturbation {
  int direction_id = 0;
  std::vector<float> delta;
};

std::vector<Perturbation> propose_perturbations(const ArsState& state, const ArsConfig& config,
                                                const std::vector<std::uint8_t>& frozen);

struct DirectionResult {
  int direction_id = 0;
  double r_plus = 0.0;
  double r_minus = 0.0;
};

// Reward std over the 2b returns of the selected directions (population
// form); the update normalizer.
double selection_sigma(std::vector<DirectionResult> results, const ArsConfig& config);

// One optimizer step: top-k selection by max(r+, r-), sigma-normalized
// ascent along the selected directions. Requires exactly one result per
// direction id; frozen coordinates are never written.
ArsState update(const ArsState& state, const ArsConfig& config,
                const std::vector<DirectionResult>& results,
                const std::vector<std::uint8_t>& frozen);

// Degenerate-spread guard: below this, the update is skipped.
inline constexpr double kSigmaFloor = 1e-8;

// Picks the config with the best mean trial score over 3 seeds; evaluates
// at most `budget` points of the space, in order. budget 0 falls back to
// the defaults.
ArsConfig tune_grid(const std::vector<ArsConfig>& space, int budget,
                    const std::function<double(const ArsConfig&, std::uint64_t seed)>& run_trial);

}  // namespace quadnav::ars
