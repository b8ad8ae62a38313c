#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quadnav/ars.hpp"
#include "quadnav/policy.hpp"
#include "quadnav/wire.hpp"

namespace quadnav::runner {

// One evaluation work unit. direction_id -1 evaluates the base parameters
// as-is; otherwise the worker rebuilds base + sign*noise_std*delta from the
// ids, so jobs stay small on the wire.
struct EvalJob {
  std::uint64_t job_id = 0;
  int direction_id = -1;
  int sign = 1;
  std::uint64_t iteration = 0;
  int episodes = 1;
  std::uint64_t seed_base = 0;
  std::uint64_t params_id = 0;
};

struct EvalResult {
  std::uint64_t job_id = 0;
  double mean_return = 0.0;
  std::vector<double> episode_returns;
  long long total_steps = 0;
};

// Broadcast once per iteration; immutable while jobs run.
struct BatchContext {
  policy::PolicySpec spec;
  std::vector<float> base_params;  // concat [theta_hl | theta_ll]
  bool freeze_ll = false;
  std::vector<std::uint8_t> frozen;
  double noise_std = 0.0;
  std::uint64_t ars_seed = 0;
  std::uint64_t params_id = 0;
};

// Fully deterministic per-episode seed; unique within an iteration.
std::uint64_t episode_seed(std::uint64_t seed_base, std::uint64_t iteration, int direction_id,
                           int sign, int episode);

std::vector<float> job_params(const BatchContext& ctx, const EvalJob& job);
EvalResult run_job(const BatchContext& ctx, const EvalJob& job);

// test hook, invoked before each job runs (delay/fault injection)
using JobHook = std::function<void(const EvalJob&)>;

// Reference implementation: plain loop, one environment, no threads.
std::vector<EvalResult> evaluate_batch_serial(const BatchContext& ctx,
                                              const std::vector<EvalJob>& jobs,
                                              const JobHook& pre_job = {});

// OpenMP fan-out over jobs. Results land in input order regardless of
// worker count or completion order; a failing job is retried once.
std::vector<EvalResult> evaluate_batch(const BatchContext& ctx, const std::vector<EvalJob>& jobs,
                                       int workers, const JobHook& pre_job = {});

struct RemoteOptions {
  int job_timeout_ms = 60000;
  int connect_timeout_ms = 5000;
};

// Serves evaluation jobs on a listening socket until should_stop() (polled
// between connections) returns true. Blocks.
void remote_worker_serve(const std::string& endpoint,
                         const std::function<bool()>& should_stop = {});

// Same contract as evaluate_batch, but jobs go to remote workers. Straggler
// jobs are re-dispatched after the timeout; duplicate or mislabeled result
// frames are discarded.
std::vector<EvalResult> remote_dispatch(const BatchContext& ctx, const std::vector<EvalJob>& jobs,
                                        const std::vector<std::string>& endpoints,
                                        const RemoteOptions& options = {});

}  // namespace quadnav::runner
