#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "quadnav/checkpoint.hpp"
#include "quadnav/config.hpp"
#include "quadnav/policy.hpp"

using namespace quadnav;
namespace fs = std::filesystem;

namespace {

checkpoint::Checkpoint make_ckpt(std::uint64_t seed = 3) {
  checkpoint::Checkpoint c;
  c.config = config::parse_config_text("[run]\ntask = goal_finding\nseed = 9\n");
  c.config.task = world::Task::GoalFinding;
  c.spec = config::make_spec(c.config);
  c.params = policy::init_params(c.spec, "uniform", seed);
  c.params.freeze_ll = true;
  c.iteration = 17;
  c.rng_seed = 9;
  c.best_return = 3.25;
  for (std::uint64_t i = 0; i < 3; ++i) {
    checkpoint::TrainLogRow row;
    row.iteration = i;
    row.mean_return = 0.5 * static_cast<double>(i);
    row.max_return = row.mean_return + 1.0;
    row.min_return = row.mean_return - 1.0;
    row.sigma = 0.25;
    row.episodes_so_far = (i + 1) * 192;
    row.wall_seconds = 12.5 * static_cast<double>(i + 1);  // must NOT be serialized
    c.log.push_back(row);
  }
  return c;
}

bool same_ckpt(const checkpoint::Checkpoint& a, const checkpoint::Checkpoint& b) {
  if (a.version != b.version) return false;
  if (!(a.config == b.config)) return false;
  if (a.params.theta_hl != b.params.theta_hl) return false;
  if (a.params.theta_ll != b.params.theta_ll) return false;
  if (a.params.freeze_ll != b.params.freeze_ll) return false;
  if (a.iteration != b.iteration || a.rng_seed != b.rng_seed) return false;
  if (a.best_return != b.best_return) return false;
  if (a.log.size() != b.log.size()) return false;
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    const auto& x = a.log[i];
    const auto& y = b.log[i];
    if (x.iteration != y.iteration || x.mean_return != y.mean_return ||
        x.max_return != y.max_return || x.min_return != y.min_return || x.sigma != y.sigma ||
        x.episodes_so_far != y.episodes_so_far)
      return false;
  }
  return true;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qn_ckpt_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("serialize and deserialize round-trip") {
  const checkpoint::Checkpoint c = make_ckpt();
  const std::string bytes = checkpoint::serialize(c);
  const checkpoint::Checkpoint back = checkpoint::deserialize(bytes);
  CHECK(same_ckpt(c, back));
  CHECK(back.spec.task == world::Task::GoalFinding);
  CHECK(back.params.theta_hl.size() == c.spec.hl_size());

  // re-serializing the loaded copy is bit-identical
  CHECK(checkpoint::serialize(back) == bytes);

  // same inputs, fresh objects: identical bytes (no timestamps, no wall clock)
  CHECK(checkpoint::serialize(make_ckpt()) == bytes);

  // wall_seconds is log-file-only state and must not leak into the container
  checkpoint::Checkpoint d = make_ckpt();
  d.log[1].wall_seconds = 9999.0;
  CHECK(checkpoint::serialize(d) == bytes);
}

TEST_CASE("different contents change the bytes") {
  const std::string base = checkpoint::serialize(make_ckpt());

  checkpoint::Checkpoint c1 = make_ckpt();
  c1.iteration = 18;
  CHECK(checkpoint::serialize(c1) != base);

  checkpoint::Checkpoint c2 = make_ckpt();
  c2.params.theta_hl[100] += 1.0f;
  CHECK(checkpoint::serialize(c2) != base);

  CHECK(checkpoint::serialize(make_ckpt(4)) != base);
}

TEST_CASE("save and load through a file") {
  TempDir dir;
  const fs::path file = dir.path / "sub" / "model.ckpt";  // parent dir is created
  const checkpoint::Checkpoint c = make_ckpt();
  checkpoint::save(c, file.string());
  REQUIRE(fs::exists(file));
  CHECK_FALSE(fs::exists(file.string() + ".tmp"));
  CHECK(same_ckpt(c, checkpoint::load(file.string())));

  // human-readable sidecar exists and mentions the essentials
  const fs::path meta = file.string() + ".meta";
  REQUIRE(fs::exists(meta));
  std::ifstream in(meta);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("task: goal_finding") != std::string::npos);
  CHECK(text.find("iteration: 17") != std::string::npos);
  CHECK(text.find("freeze_ll: true") != std::string::npos);
  CHECK(text.find("log_rows: 3") != std::string::npos);

  CHECK_THROWS_AS((void)checkpoint::load((dir.path / "missing.ckpt").string()),
                  checkpoint::CheckpointError);
}

TEST_CASE("corrupt containers are rejected") {
  const std::string bytes = checkpoint::serialize(make_ckpt());

  // bad magic
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS((void)checkpoint::deserialize(bad), checkpoint::CheckpointError);

  // unsupported format version
  std::string vers = bytes;
  vers[6] = static_cast<char>(0x7f);
  CHECK_THROWS_AS((void)checkpoint::deserialize(vers), checkpoint::CheckpointError);
  try {
    (void)checkpoint::deserialize(vers);
    FAIL("expected a version error");
  } catch (const checkpoint::CheckpointError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // truncation anywhere is caught
  CHECK_THROWS_AS((void)checkpoint::deserialize(bytes.substr(0, 3)),
                  checkpoint::CheckpointError);
  CHECK_THROWS_AS((void)checkpoint::deserialize(bytes.substr(0, bytes.size() / 2)),
                  checkpoint::CheckpointError);
  CHECK_THROWS_AS((void)checkpoint::deserialize(bytes.substr(0, bytes.size() - 1)),
                  checkpoint::CheckpointError);

  // trailing garbage is caught
  CHECK_THROWS_AS((void)checkpoint::deserialize(bytes + "zz"), checkpoint::CheckpointError);

  CHECK_THROWS_AS((void)checkpoint::deserialize(""), checkpoint::CheckpointError);
  CHECK_THROWS_AS((void)checkpoint::deserialize("not a checkpoint at all"),
                  checkpoint::CheckpointError);
}

TEST_CASE("parameter sizes must match the stored architecture") {
  checkpoint::Checkpoint c = make_ckpt();
  c.params.theta_ll.pop_back();
  CHECK_THROWS_AS((void)checkpoint::deserialize(checkpoint::serialize(c)),
                  checkpoint::CheckpointError);

  checkpoint::Checkpoint d = make_ckpt();
  d.params.theta_hl.push_back(0.0f);
  CHECK_THROWS_AS((void)checkpoint::deserialize(checkpoint::serialize(d)),
                  checkpoint::CheckpointError);
}

TEST_CASE("save overwrites atomically") {
  TempDir dir;
  const fs::path file = dir.path / "model.ckpt";
  checkpoint::save(make_ckpt(), file.string());
  checkpoint::Checkpoint second = make_ckpt();
  second.iteration = 99;
  checkpoint::save(second, file.string());
  CHECK(checkpoint::load(file.string()).iteration == 99u);
  CHECK_FALSE(fs::exists(file.string() + ".tmp"));
}

}  // TEST_SUITE
