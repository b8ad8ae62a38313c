#include <cstdlib>
#include <string>

#include "doctest.h"
#include "quadnav/config.hpp"

using namespace quadnav;
using namespace quadnav::config;

namespace {

const char* kFull = R"(# full example
[run]
task = "goal_finding"
seed = 42
output_dir = "/tmp/qn_out"

[arch]
image_size = 32
latent_dim = 4
use_pool = false
pool_mode = "mean"
extra_fc = true
hl_init = "uniform"
hl_mode = "every_150"
flat_baseline = false

[ars]
num_directions = 8
top_k = 4
step_size = 0.01
noise_std = 0.02
episodes_per_eval = 2
iterations = 50
checkpoint_every = 10

[runner]
workers = 4
endpoints = "127.0.0.1:9000,127.0.0.1:9001"
)";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const RunConfig c = parse_config_text("[run]\ntask = maze_traversal\n");
  CHECK(c.task == world::Task::MazeTraversal);
  CHECK(c.seed == 0u);
  CHECK(c.image_size == 16);
  CHECK(c.latent_dim == 2);
  CHECK(c.use_pool);
  CHECK(c.pool_mode == "max");
  CHECK_FALSE(c.extra_fc);
  CHECK(c.hl_init == "zeros");
  CHECK(c.hl_mode == "variable");
  CHECK_FALSE(c.flat_baseline);
  CHECK(c.ars.num_directions == 32);
  CHECK(c.ars.top_k == 16);
  CHECK(c.ars.step_size == 0.02);
  CHECK(c.ars.noise_std == 0.03);
  CHECK(c.ars.episodes_per_eval == 3);
  CHECK(c.iterations == 100);
  CHECK(c.checkpoint_every == 25);
  CHECK(c.workers == 1);
  CHECK(c.endpoints.empty());
}

TEST_CASE("full file parses") {
  const RunConfig c = parse_config_text(kFull);
  CHECK(c.task == world::Task::GoalFinding);
  CHECK(c.seed == 42u);
  CHECK(c.output_dir == "/tmp/qn_out");
  CHECK(c.image_size == 32);
  CHECK(c.latent_dim == 4);
  CHECK_FALSE(c.use_pool);
  CHECK(c.pool_mode == "mean");
  CHECK(c.extra_fc);
  CHECK(c.hl_init == "uniform");
  CHECK(c.hl_mode == "every_150");
  CHECK(c.ars.num_directions == 8);
  CHECK(c.ars.top_k == 4);
  CHECK(c.ars.step_size == 0.01);
  CHECK(c.ars.noise_std == 0.02);
  CHECK(c.ars.episodes_per_eval == 2);
  CHECK(c.iterations == 50);
  CHECK(c.checkpoint_every == 10);
  CHECK(c.workers == 4);
  REQUIRE(c.endpoints.size() == 2u);
  CHECK(c.endpoints[0] == "127.0.0.1:9000");
  CHECK(c.endpoints[1] == "127.0.0.1:9001");
}

TEST_CASE("strictness") {
  CHECK_THROWS_AS(parse_config_text("[run]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[nope]\ntask = cliff\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("task = cliff\n"), ConfigError);  // outside a section
  CHECK_THROWS_AS(parse_config_text("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nseed = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\ntask = flying\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run\ntask = cliff\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nno equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[arch]\nimage_size = 24\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[arch]\nlatent_dim = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[arch]\npool_mode = median\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[arch]\nhl_mode = sometimes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[ars]\ntop_k = 64\n"), ConfigError);   // b > N
  CHECK_THROWS_AS(parse_config_text("[ars]\nstep_size = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[ars]\nnoise_std = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[runner]\nworkers = 0\n"), ConfigError);
}

TEST_CASE("error messages name the offender") {
  try {
    parse_config_text("[run]\nbogus = 1\n");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  try {
    parse_config_text("[run]\nseed = 1\nseed = 2\n");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("canonical text round-trips") {
  const RunConfig c = parse_config_text(kFull);
  const std::string text = canonical_text(c);
  const RunConfig back = parse_config_text(text);
  CHECK(back == c);
  CHECK(canonical_text(back) == text);

  const RunConfig d = parse_config_text("[run]\ntask = cliff\n");
  CHECK(parse_config_text(canonical_text(d)) == d);
}

TEST_CASE("environment overrides") {
  RunConfig c = parse_config_text(kFull);
  ::setenv("QUADNAV_ARS_NUM_DIRECTIONS", "64", 1);
  ::setenv("QUADNAV_ARS_TOP_K", "32", 1);
  ::setenv("QUADNAV_RUN_OUTPUT_DIR", "/tmp/elsewhere", 1);
  ::setenv("QUADNAV_ARCH_LATENT_DIM", "8", 1);
  apply_env_overrides(c);
  ::unsetenv("QUADNAV_ARS_NUM_DIRECTIONS");
  ::unsetenv("QUADNAV_ARS_TOP_K");
  ::unsetenv("QUADNAV_RUN_OUTPUT_DIR");
  ::unsetenv("QUADNAV_ARCH_LATENT_DIM");
  CHECK(c.ars.num_directions == 64);
  CHECK(c.ars.top_k == 32);
  CHECK(c.output_dir == "/tmp/elsewhere");
  CHECK(c.latent_dim == 8);

  // unknown QUADNAV_ variables are rejected, not ignored
  RunConfig d = parse_config_text(kFull);
  ::setenv("QUADNAV_ARS_TYPO", "1", 1);
  CHECK_THROWS_AS(apply_env_overrides(d), ConfigError);
  ::unsetenv("QUADNAV_ARS_TYPO");

  RunConfig e = parse_config_text(kFull);
  ::setenv("QUADNAV_BOGUS_SECTION", "1", 1);
  CHECK_THROWS_AS(apply_env_overrides(e), ConfigError);
  ::unsetenv("QUADNAV_BOGUS_SECTION");

  // invalid values go through the same validation
  RunConfig f = parse_config_text(kFull);
  ::setenv("QUADNAV_ARCH_IMAGE_SIZE", "17", 1);
  CHECK_THROWS_AS(apply_env_overrides(f), ConfigError);
  ::unsetenv("QUADNAV_ARCH_IMAGE_SIZE");
}

TEST_CASE("spec construction") {
  RunConfig c = parse_config_text(kFull);
  const policy::PolicySpec spec = make_spec(c);
  CHECK(spec.task == world::Task::GoalFinding);
  CHECK(spec.arch.image_size == 32);
  CHECK(spec.arch.latent_dim == 4);
  CHECK_FALSE(spec.arch.use_pool);
  CHECK(spec.arch.pool_mode == nnet::PoolMode::Mean);
  CHECK(spec.arch.extra_fc);
  CHECK(spec.arch.task_input_dim == 3);
  CHECK(spec.hl_mode == policy::HlMode::Every150);
  CHECK_FALSE(spec.flat_baseline);

  c.task = world::Task::Cliff;
  CHECK(make_spec(c).arch.task_input_dim == 0);
}

}  // TEST_SUITE
