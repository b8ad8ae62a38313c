// Compares the OpenMP batch evaluator against the serial reference on the
// same job set, reporting wall time, speedup, and result agreement.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "quadnav/config.hpp"
#include "quadnav/runner.hpp"

using namespace quadnav;

namespace {

double time_batch(const runner::BatchContext& ctx, const std::vector<runner::EvalJob>& jobs,
                  int workers, std::vector<runner::EvalResult>& out) {
  const auto t0 = std::chrono::steady_clock::now();
  out = workers <= 0 ? runner::evaluate_batch_serial(ctx, jobs)
                     : runner::evaluate_batch(ctx, jobs, workers);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel batch evaluator benchmark"};
  std::string task_name = "maze_traversal";
  int directions = 8;
  int episodes = 1;
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  int repeats = 1;
  std::uint64_t seed = 7;
  app.add_option("--task", task_name, "cliff | maze_traversal | goal_finding");
  app.add_option("--directions", directions, "perturbation count (2x this many jobs)");
  app.add_option("--episodes", episodes, "episodes per job");
  app.add_option("--workers", workers, "threads for the parallel run");
  app.add_option("--repeats", repeats, "timing repetitions (best is reported)");
  app.add_option("--seed", seed, "base seed");
  CLI11_PARSE(app, argc, argv);

  config::RunConfig cfg;
  const auto task = world::task_from_name(task_name);
  if (!task) {
    std::fprintf(stderr, "unknown task '%s'\n", task_name.c_str());
    return 2;
  }
  cfg.task = *task;
  cfg.seed = seed;
  cfg.ars.noise_std = 0.03;

  runner::BatchContext ctx;
  ctx.spec = config::make_spec(cfg);
  ctx.base_params = policy::concat_params(policy::init_params(ctx.spec, cfg.hl_init, cfg.seed));
  ctx.frozen = policy::frozen_mask(ctx.spec, false);
  ctx.noise_std = cfg.ars.noise_std;
  ctx.ars_seed = cfg.seed;

  std::vector<runner::EvalJob> jobs;
  for (int d = 0; d < directions; ++d) {
    for (int sign : {+1, -1}) {
      runner::EvalJob job;
      job.job_id = jobs.size();
      job.direction_id = d;
      job.sign = sign;
      job.episodes = episodes;
      job.seed_base = seed;
      jobs.push_back(job);
    }
  }

  std::vector<runner::EvalResult> serial, parallel;
  double t_serial = 1e300, t_parallel = 1e300;
  for (int r = 0; r < repeats; ++r) {
    t_serial = std::min(t_serial, time_batch(ctx, jobs, 0, serial));
    t_parallel = std::min(t_parallel, time_batch(ctx, jobs, workers, parallel));
  }

  double max_diff = 0.0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(serial[i].mean_return - parallel[i].mean_return));
  }

  std::printf("jobs:            %zu (%d directions x 2 signs, %d episode(s) each)\n", jobs.size(),
              directions, episodes);
  std::printf("serial:          %.3f s\n", t_serial);
  std::printf("parallel (x%d):  %.3f s\n", workers, t_parallel);
  std::printf("speedup:         %.2fx\n", t_serial / t_parallel);
  std::printf("max return diff: %.17g\n", max_diff);
  return max_diff == 0.0 ? 0 : 1;
}
