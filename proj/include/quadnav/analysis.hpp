#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/ars.hpp"
#include "quadnav/policy.hpp"

namespace quadnav::analysis {

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LatentSweepCell {
  std::array<float, 2> latent{};
  double dx = 0.0;  // endpoint - start over the rollout
  double dy = 0.0;
  double dyaw = 0.0;
  std::vector<world::Vec2> path;  // one point per control step
};

// Holds the latent constant and runs the low level alone on open flat
// ground from the standard start state; grid x grid cells over [-1,1]^2,
// row-major with the first latent axis outermost. Requires latent_dim == 2.
std::vector<LatentSweepCell> latent_sweep(const policy::PolicySpec& spec,
                                          const policy::PolicyParams& params, int grid,
                                          double duration_s = 1.0);

void export_latent_sweep_csv(const std::vector<LatentSweepCell>& cells, const std::string& path);

struct FrequencyReport {
  policy::HlMode mode = policy::HlMode::Variable;
  double mean_inference_time = 0.0;    // seconds per control step, policy side
  double hl_evals_per_episode = 0.0;
  double effective_policy_size = 0.0;  // LL + HL weighted by activation fraction
  double training_speed = 0.0;         // control steps per wall-clock second
};

struct FrequencyOptions {
  long long min_inference_steps = 100000;
  int train_iterations = 2;            // for the training-speed column
  ars::ArsConfig train_config{4, 2, 0.02, 0.03, 1, 0};
  std::uint64_t seed = 0;
};

std::vector<FrequencyReport> frequency_report(const policy::PolicySpec& spec,
                                              const policy::PolicyParams& params,
                                              const std::vector<policy::HlMode>& modes,
                                              const FrequencyOptions& options = {});

void export_frequency_report(const std::vector<FrequencyReport>& rows, const std::string& path);

// CSV of per-step rows across episodes, stable across re-export
void export_trajectories(const std::vector<world::EpisodeTrace>& traces, const std::string& path);

}  // namespace quadnav::analysis
