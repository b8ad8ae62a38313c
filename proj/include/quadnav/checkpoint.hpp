#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadnav/config.hpp"
#include "quadnav/policy.hpp"

namespace quadnav::checkpoint {

using nnet::CheckpointError;

inline constexpr std::uint16_t kFormatVersion = 1;

// wall_seconds goes to the on-disk training log only; the checkpoint
// container must stay bit-identical across reruns of the same (config, seed)
struct TrainLogRow {
  std::uint64_t iteration = 0;
  double mean_return = 0.0;
  double max_return = 0.0;
  double min_return = 0.0;
  double sigma = 0.0;
  std::uint64_t episodes_so_far = 0;
  double wall_seconds = 0.0;
};

struct Checkpoint {
  std::uint16_t version = kFormatVersion;
  config::RunConfig config;
  policy::PolicySpec spec;
  policy::PolicyParams params;
  std::uint64_t iteration = 0;
  std::uint64_t rng_seed = 0;
  double best_return = -1e300;
  std::vector<TrainLogRow> log;
};

// Atomic write (tmp + rename) of the binary container plus a
// human-readable ".meta" sidecar next to it.
void save(const Checkpoint& ckpt, const std::string& path);

Checkpoint load(const std::string& path);

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::string& bytes);

}  // namespace quadnav::checkpoint
