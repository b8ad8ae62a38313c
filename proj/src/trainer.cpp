#include "quadnav/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace quadnav::trainer {
namespace {

using json = nlohmann::json;
using clock = std::chrono::steady_clock;

// fields that define the parameter space and the random streams; a resumed
// run must agree on these or determinism is silently lost
void check_resume_compatible(const config::RunConfig& a, const config::RunConfig& b) {
  const bool ok = a.task == b.task && a.seed == b.seed && a.image_size == b.image_size &&
                  a.latent_dim == b.latent_dim && a.use_pool == b.use_pool &&
                  a.pool_mode == b.pool_mode && a.extra_fc == b.extra_fc &&
                  a.hl_init == b.hl_init && a.hl_mode == b.hl_mode &&
                  a.flat_baseline == b.flat_baseline &&
                  a.ars.num_directions == b.ars.num_directions && a.ars.top_k == b.ars.top_k &&
                  a.ars.step_size == b.ars.step_size && a.ars.noise_std == b.ars.noise_std &&
                  a.ars.episodes_per_eval == b.ars.episodes_per_eval;
  if (!ok)
    throw config::ConfigError(
        "resume: config disagrees with the checkpoint on task/arch/seed/optimizer fields");
}

}  // namespace

TrainResult train(const config::RunConfig& config, const TrainOptions& options) {
  namespace fs = std::filesystem;
  config::validate(config);
  const policy::PolicySpec spec = config::make_spec(config);

  ars::ArsConfig ars_cfg = config.ars;
  ars_cfg.seed = config.seed;

  policy::PolicyParams params;
  ars::ArsState state;
  std::vector<checkpoint::TrainLogRow> log;
  std::uint64_t episodes_so_far = 0;

  if (!options.resume_path.empty()) {
    checkpoint::Checkpoint ckpt = checkpoint::load(options.resume_path);
    check_resume_compatible(config, ckpt.config);
    params = ckpt.params;
    state.iteration = ckpt.iteration;
    state.rng_seed = ckpt.rng_seed;
    state.best_return = ckpt.best_return;
    log = ckpt.log;
    if (!log.empty()) episodes_so_far = log.back().episodes_so_far;
  } else if (options.initial_params) {
    params = *options.initial_params;
    state.rng_seed = config.seed;
  } else {
    params = policy::init_params(spec, config.hl_init, config.seed);
    state.rng_seed = config.seed;
  }

  if (params.theta_hl.size() != spec.hl_size() || params.theta_ll.size() != spec.ll_size())
    throw config::ConfigError("initial parameters do not match the configured architecture");

  state.theta = policy::concat_params(params);
  const std::vector<std::uint8_t> frozen = policy::frozen_mask(spec, params.freeze_ll);

  fs::create_directories(config.output_dir);
  const std::string ckpt_path = (fs::path(config.output_dir) / "checkpoint.ckpt").string();
  std::ofstream log_file(fs::path(config.output_dir) / "train_log.jsonl", std::ios::app);

  const auto save_now = [&](const ars::ArsState& s) {
    checkpoint::Checkpoint ckpt;
    ckpt.config = config;
    ckpt.spec = spec;
    ckpt.params = policy::split_params(spec, s.theta, params.freeze_ll);
    ckpt.iteration = s.iteration;
    ckpt.rng_seed = s.rng_seed;
    ckpt.best_return = s.best_return;
    ckpt.log = log;
    checkpoint::save(ckpt, ckpt_path);
    return ckpt;
  };

  checkpoint::Checkpoint latest = save_now(state);  // budget 0 still leaves a checkpoint

  while (state.iteration < static_cast<std::uint64_t>(config.iterations)) {
    const auto t0 = clock::now();
    const std::uint64_t it = state.iteration;

    runner::BatchContext ctx;
    ctx.spec = spec;
    ctx.base_params = state.theta;
    ctx.freeze_ll = params.freeze_ll;
    ctx.frozen = frozen;
    ctx.noise_std = ars_cfg.noise_std;
    ctx.ars_seed = config.seed;
    ctx.params_id = it;

    std::vector<runner::EvalJob> jobs;
    jobs.reserve(2 * static_cast<std::size_t>(ars_cfg.num_directions));
    std::uint64_t job_id = it * 2 * ars_cfg.num_directions;
    for (int j = 0; j < ars_cfg.num_directions; ++j) {
      for (int sign : {1, -1}) {
        runner::EvalJob job;
        job.job_id = job_id++;
        job.direction_id = j;
        job.sign = sign;
        job.iteration = it;
        job.episodes = ars_cfg.episodes_per_eval;
        job.seed_base = config.seed;
        job.params_id = it;
        jobs.push_back(job);
      }
    }

    const std::vector<runner::EvalResult> results =
        config.endpoints.empty()
            ? runner::evaluate_batch(ctx, jobs, config.workers, options.pre_job)
            : runner::remote_dispatch(ctx, jobs, config.endpoints);

    std::vector<ars::DirectionResult> dir_results(ars_cfg.num_directions);
    double mean = 0.0, mx = -1e300, mn = 1e300;
    for (int j = 0; j < ars_cfg.num_directions; ++j) {
      dir_results[j] = {j, results[2 * j].mean_return, results[2 * j + 1].mean_return};
      for (double v : {dir_results[j].r_plus, dir_results[j].r_minus}) {
        mean += v;
        mx = std::max(mx, v);
        mn = std::min(mn, v);
      }
    }
    mean /= 2.0 * ars_cfg.num_directions;

    const double sigma = ars::selection_sigma(dir_results, ars_cfg);
    state = ars::update(state, ars_cfg, dir_results, frozen);
    episodes_so_far += 2ull * ars_cfg.num_directions * ars_cfg.episodes_per_eval;

    checkpoint::TrainLogRow row;
    row.iteration = it;
    row.mean_return = mean;
    row.max_return = mx;
    row.min_return = mn;
    row.sigma = sigma;
    row.episodes_so_far = episodes_so_far;
    row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    log.push_back(row);

    if (log_file) {
      log_file << json{{"iteration", row.iteration},
                       {"mean_return", row.mean_return},
                       {"max_return", row.max_return},
                       {"min_return", row.min_return},
                       {"sigma", row.sigma},
                       {"episodes", row.episodes_so_far},
                       {"best_return", state.best_return},
                       {"wall_seconds", row.wall_seconds}}
                      .dump()
               << "\n";
      log_file.flush();
    }
    if (options.progress) {
      *options.progress << "iter " << row.iteration << "  mean " << row.mean_return << "  max "
                        << row.max_return << "  best " << state.best_return << "\n";
    }

    const bool done = state.iteration >= static_cast<std::uint64_t>(config.iterations);
    if (done || state.iteration % static_cast<std::uint64_t>(config.checkpoint_every) == 0) {
      latest = save_now(state);
    }
    if (options.stop_after && options.stop_after(row)) break;
  }

  latest = save_now(state);
  return {std::move(latest), ckpt_path};
}

}  // namespace quadnav::trainer
