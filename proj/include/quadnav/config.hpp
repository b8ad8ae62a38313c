#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadnav/ars.hpp"
#include "quadnav/policy.hpp"

namespace quadnav::config {

using nnet::ConfigError;

struct RunConfig {
  // [run]
  world::Task task = world::Task::MazeTraversal;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/out";

  // [arch]
  int image_size = 16;
  int latent_dim = 2;
  bool use_pool = true;
  std::string pool_mode = "max";
  bool extra_fc = false;
  std::string hl_init = "zeros";
  std::string hl_mode = "variable";
  bool flat_baseline = false;

  // [ars]
  ars::ArsConfig ars;
  int iterations = 100;
  int checkpoint_every = 25;

  // [runner]
  int workers = 1;
  std::vector<std::string> endpoints;

  bool operator==(const RunConfig&) const = default;
};

// Strict parse: unknown section/key, duplicate key, or malformed value is
// a ConfigError naming the offender.
RunConfig parse_config_text(const std::string& text);

RunConfig load_config(const std::string& path, bool apply_env = true);

// QUADNAV_<SECTION>_<KEY>=value overrides; unknown QUADNAV_ variables are
// rejected so typos cannot silently no-op.
void apply_env_overrides(RunConfig& config);

// Stable round-trippable serialization (checkpoint embeds this).
std::string canonical_text(const RunConfig& config);

void validate(const RunConfig& config);

policy::PolicySpec make_spec(const RunConfig& config);

}  // namespace quadnav::config
