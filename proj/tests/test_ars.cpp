#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "quadnav/ars.hpp"
#include "quadnav/nnet.hpp"
#include "quadnav/rng.hpp"

using namespace quadnav;
using namespace quadnav::ars;

namespace {

double sphere(const std::vector<float>& theta, double target) {
  double s = 0.0;
  for (float t : theta) s += (double(t) - target) * (double(t) - target);
  return -s;
}

// full optimization loop against an analytic objective
struct SphereRun {
  double best = -1e300;
  int iters_to_tol = -1;
  // objective non-decrease, counted only while descending toward the
  // tolerance: once inside the basin, sigma-normalized steps have constant
  // length and the iterate orbits the optimum by design
  double pre_tol_non_decreasing = 0.0;
  int iterations = 0;
};

SphereRun run_sphere(ArsConfig cfg, int dim, int max_iters, double tol, double target = 0.5) {
  ArsState state;
  state.theta.assign(dim, 0.0f);
  state.rng_seed = cfg.seed;
  const std::vector<std::uint8_t> frozen(dim, 0);
  SphereRun out;
  double prev_f = sphere(state.theta, target);
  int non_decreasing = 0;
  for (int it = 0; it < max_iters; ++it) {
    const auto perts = propose_perturbations(state, cfg, frozen);
    std::vector<DirectionResult> results;
    for (const auto& p : perts) {
      std::vector<float> plus = state.theta, minus = state.theta;
      for (int i = 0; i < dim; ++i) {
        plus[i] += float(cfg.noise_std * p.delta[i]);
        minus[i] -= float(cfg.noise_std * p.delta[i]);
      }
      results.push_back({p.direction_id, sphere(plus, target), sphere(minus, target)});
    }
    state = update(state, cfg, results, frozen);
    const double f = sphere(state.theta, target);
    if (out.iters_to_tol < 0 && f >= prev_f) ++non_decreasing;
    prev_f = f;
    out.best = std::max(out.best, f);
    ++out.iterations;
    if (out.iters_to_tol < 0 && -f <= tol) {
      out.iters_to_tol = it + 1;
      out.pre_tol_non_decreasing = double(non_decreasing) / out.iters_to_tol;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("ars") {

TEST_CASE("directions are reproducible and zero on frozen coordinates") {
  std::vector<std::uint8_t> frozen(10, 0);
  frozen[3] = frozen[7] = 1;
  const auto a = make_direction(5, 2, 1, 10, frozen);
  const auto b = make_direction(5, 2, 1, 10, frozen);
  CHECK(a == b);
  CHECK(a[3] == 0.0f);
  CHECK(a[7] == 0.0f);
  int nonzero = 0;
  for (float v : a) nonzero += v != 0.0f;
  CHECK(nonzero == 8);

  // distinct ids, iterations, seeds all decorrelate
  CHECK(make_direction(5, 2, 2, 10, frozen) != a);
  CHECK(make_direction(5, 3, 1, 10, frozen) != a);
  CHECK(make_direction(6, 2, 1, 10, frozen) != a);
}

TEST_CASE("freezing is independent of the random stream") {
  // same ids with and without freezing: unfrozen coordinates identical
  const std::vector<std::uint8_t> none(10, 0);
  std::vector<std::uint8_t> some(10, 0);
  some[0] = some[9] = 1;
  const auto full = make_direction(11, 4, 0, 10, none);
  const auto masked = make_direction(11, 4, 0, 10, some);
  for (int i = 1; i < 9; ++i) CHECK(full[i] == masked[i]);
  CHECK(masked[0] == 0.0f);
  CHECK(masked[9] == 0.0f);
}

TEST_CASE("propose returns N deterministic directions") {
  ArsConfig cfg;
  cfg.num_directions = 8;
  cfg.top_k = 4;
  ArsState state;
  state.theta.assign(6, 0.0f);
  state.iteration = 3;
  state.rng_seed = 9;
  const std::vector<std::uint8_t> frozen(6, 0);
  const auto p1 = propose_perturbations(state, cfg, frozen);
  const auto p2 = propose_perturbations(state, cfg, frozen);
  REQUIRE(p1.size() == 8u);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].direction_id == int(i));
    CHECK(p1[i].delta == p2[i].delta);
    CHECK(p1[i].delta.size() == 6u);
  }
}

TEST_CASE("equal antithetic returns leave theta unchanged") {
  ArsConfig cfg;
  cfg.num_directions = 4;
  cfg.top_k = 2;
  ArsState state;
  state.theta.assign(5, 1.5f);
  const std::vector<std::uint8_t> frozen(5, 0);
  std::vector<DirectionResult> results;
  for (int j = 0; j < 4; ++j) results.push_back({j, double(j), double(j)});
  const ArsState next = update(state, cfg, results, frozen);
  CHECK(next.theta == state.theta);
  CHECK(next.iteration == state.iteration + 1);
}

TEST_CASE("single direction moves along plus delta when r+ wins") {
  ArsConfig cfg;
  cfg.num_directions = 1;
  cfg.top_k = 1;
  cfg.step_size = 0.1;
  ArsState state;
  state.theta.assign(4, 0.0f);
  state.iteration = 7;
  state.rng_seed = 3;
  const std::vector<std::uint8_t> frozen(4, 0);
  const auto delta = make_direction(3, 7, 0, 4, frozen);
  const ArsState next = update(state, cfg, {{0, 2.0, 1.0}}, frozen);
  // sigma over {2, 1} is 0.5 -> theta' = 0.1/(1*0.5) * (2-1) * delta
  for (int i = 0; i < 4; ++i)
    CHECK(next.theta[i] == doctest::Approx(0.2 * delta[i]).epsilon(1e-6));

  const ArsState rev = update(state, cfg, {{0, 1.0, 2.0}}, frozen);
  for (int i = 0; i < 4; ++i)
    CHECK(rev.theta[i] == doctest::Approx(-0.2 * delta[i]).epsilon(1e-6));
}

TEST_CASE("only the top directions contribute") {
  ArsConfig cfg;
  cfg.num_directions = 3;
  cfg.top_k = 1;
  cfg.step_size = 0.05;
  ArsState state;
  state.theta.assign(6, 0.0f);
  state.rng_seed = 21;
  const std::vector<std::uint8_t> frozen(6, 0);
  const auto d1 = make_direction(21, 0, 1, 6, frozen);
  // direction 1 has max return 5; the others lose
  const ArsState next = update(state, cfg, {{0, 1.0, 0.0}, {1, 5.0, 0.0}, {2, 0.5, 0.4}}, frozen);
  // sigma over {5, 0} is 2.5 -> step = 0.05/(1*2.5) * 5 * d1 = 0.1 * d1
  for (int i = 0; i < 6; ++i)
    CHECK(next.theta[i] == doctest::Approx(0.1 * d1[i]).epsilon(1e-6));
}

TEST_CASE("update is invariant to result ordering") {
  ArsConfig cfg;
  cfg.num_directions = 8;
  cfg.top_k = 4;
  ArsState state;
  state.theta.assign(12, 0.25f);
  state.iteration = 2;
  state.rng_seed = 17;
  const std::vector<std::uint8_t> frozen(12, 0);
  Rng rng(33);
  std::vector<DirectionResult> results;
  for (int j = 0; j < 8; ++j) results.push_back({j, rng.uniform(-1, 1), rng.uniform(-1, 1)});

  const ArsState base = update(state, cfg, results, frozen);
  std::mt19937 shuffler(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = results;
    std::shuffle(shuffled.begin(), shuffled.end(), shuffler);
    const ArsState next = update(state, cfg, shuffled, frozen);
    CHECK(next.theta == base.theta);
  }
}

TEST_CASE("missing or duplicate directions are refused") {
  ArsConfig cfg;
  cfg.num_directions = 3;
  cfg.top_k = 2;
  ArsState state;
  state.theta.assign(4, 0.0f);
  const std::vector<std::uint8_t> frozen(4, 0);
  CHECK_THROWS_AS(update(state, cfg, {{0, 1, 0}, {1, 1, 0}}, frozen), IterationError);
  CHECK_THROWS_AS(update(state, cfg, {{0, 1, 0}, {1, 1, 0}, {1, 1, 0}}, frozen), IterationError);
  CHECK_THROWS_AS(update(state, cfg, {{0, 1, 0}, {1, 1, 0}, {5, 1, 0}}, frozen), IterationError);
}

TEST_CASE("degenerate reward spread skips the update but advances") {
  ArsConfig cfg;
  cfg.num_directions = 2;
  cfg.top_k = 2;
  ArsState state;
  state.theta.assign(3, 0.5f);
  const std::vector<std::uint8_t> frozen(3, 0);
  const ArsState next = update(state, cfg, {{0, 1.0, 1.0}, {1, 1.0, 1.0}}, frozen);
  CHECK(next.theta == state.theta);
  CHECK(next.iteration == 1u);
  CHECK(next.best_return == 1.0);
}

TEST_CASE("best return tracks the max observed") {
  ArsConfig cfg;
  cfg.num_directions = 2;
  cfg.top_k = 1;
  ArsState state;
  state.theta.assign(3, 0.0f);
  const std::vector<std::uint8_t> frozen(3, 0);
  ArsState next = update(state, cfg, {{0, 0.7, -0.3}, {1, 0.1, 0.9}}, frozen);
  CHECK(next.best_return == 0.9);
  next = update(next, cfg, {{0, 0.2, 0.1}, {1, 0.0, 0.3}}, frozen);
  CHECK(next.best_return == 0.9);  // never regresses
}

TEST_CASE("frozen coordinates survive a thousand updates bit for bit") {
  ArsConfig cfg;
  cfg.num_directions = 4;
  cfg.top_k = 2;
  ArsState state;
  state.theta = {1.0f, -0.5f, 0.25f, 2.0f, -1.25f, 0.125f};
  state.rng_seed = 77;
  std::vector<std::uint8_t> frozen(6, 0);
  frozen[1] = frozen[4] = frozen[5] = 1;
  const std::vector<float> pinned = {state.theta[1], state.theta[4], state.theta[5]};
  Rng rng(900);
  for (int it = 0; it < 1000; ++it) {
    std::vector<DirectionResult> results;
    for (int j = 0; j < 4; ++j) results.push_back({j, rng.uniform(-2, 2), rng.uniform(-2, 2)});
    state = update(state, cfg, results, frozen);
  }
  CHECK(state.iteration == 1000u);
  CHECK(state.theta[1] == pinned[0]);
  CHECK(state.theta[4] == pinned[1]);
  CHECK(state.theta[5] == pinned[2]);
  // unfrozen coordinates did move
  CHECK(state.theta[0] != 1.0f);
}

TEST_CASE("sigma is the population std of the selected returns") {
  ArsConfig cfg;
  cfg.num_directions = 2;
  cfg.top_k = 2;
  // selected returns: {3, 1, -1, 1}: mean 1, var (4+0+4+0)/4 = 2
  const double sigma = selection_sigma({{0, 3.0, 1.0}, {1, -1.0, 1.0}}, cfg);
  CHECK(sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  // top-1 of the same set keeps only direction 0
  cfg.top_k = 1;
  const double sigma1 = selection_sigma({{0, 3.0, 1.0}, {1, -1.0, 1.0}}, cfg);
  CHECK(sigma1 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sphere objective converges with the default config") {
  // 20-dim quadratic bowl, defaults (32 directions, top 16, step 0.02,
  // noise 0.03): inside 1e-3 well within 500 iterations, with a clean
  // monotone descent on the way there
  ArsConfig cfg;
  cfg.seed = 2;
  const SphereRun run = run_sphere(cfg, 20, 500, 1e-3);
  CHECK(run.iters_to_tol > 0);
  CHECK(run.iters_to_tol <= 100);  // measured ~47
  CHECK(run.pre_tol_non_decreasing >= 0.95);
}

TEST_CASE("sphere objective converges with the larger-step trial config") {
  // the bigger step size buys speed at the cost of a wider terminal orbit:
  // it reaches 1e-2 in ~30 iterations but plateaus around 5e-3
  ArsConfig cfg;
  cfg.num_directions = 16;
  cfg.top_k = 8;
  cfg.noise_std = 0.05;
  cfg.step_size = 0.05;
  cfg.seed = 1;
  const SphereRun run = run_sphere(cfg, 20, 500, 1e-2);
  CHECK(run.iters_to_tol > 0);
  CHECK(run.iters_to_tol <= 50);  // measured ~27
  CHECK(run.pre_tol_non_decreasing >= 0.75);
  CHECK(run.best >= -1e-2);
}

TEST_CASE("grid tuner") {
  const auto trial = [](const ArsConfig& cfg, std::uint64_t seed) {
    ArsConfig c = cfg;
    c.seed = seed;
    return run_sphere(c, 8, 40, 1e-9).best;
  };

  // empty space is an error
  CHECK_THROWS_AS(tune_grid({}, 4, trial), nnet::ConfigError);

  // budget 0: documented fallback to defaults
  ArsConfig probe;
  probe.num_directions = 5;
  probe.top_k = 3;
  const ArsConfig def = tune_grid({probe}, 0, trial);
  CHECK(def.num_directions == ArsConfig{}.num_directions);

  // single point: that point
  const ArsConfig single = tune_grid({probe}, 3, trial);
  CHECK(single.num_directions == 5);

  // a sane config beats one with a wildly divergent step size
  ArsConfig good;
  good.num_directions = 8;
  good.top_k = 4;
  good.noise_std = 0.05;
  good.step_size = 0.05;
  ArsConfig bad = good;
  bad.step_size = 500.0;
  const ArsConfig chosen = tune_grid({bad, good}, 2, trial);
  CHECK(chosen.step_size == 0.05);
}

}  // TEST_SUITE
