#include "quadnav/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "quadnav/runner.hpp"

namespace quadnav::analysis {
namespace {

using json = nlohmann::json;
using clock = std::chrono::steady_clock;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(float v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

std::vector<LatentSweepCell> latent_sweep(const policy::PolicySpec& spec,
                                          const policy::PolicyParams& params, int grid,
                                          double duration_s) {
  if (spec.flat_baseline)
    throw AnalysisError("latent sweep needs a hierarchical policy (no latent interface)");
  if (spec.arch.latent_dim != 2)
    throw AnalysisError("latent sweep is 2D only; latent_dim = " +
                        std::to_string(spec.arch.latent_dim));
  if (grid < 2) throw AnalysisError("latent sweep grid must be >= 2 per axis");

  const int steps = static_cast<int>(std::llround(duration_s / tg::kDt));
  std::vector<LatentSweepCell> cells;
  cells.reserve(static_cast<std::size_t>(grid) * grid);

  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      LatentSweepCell cell;
      cell.latent = {static_cast<float>(-1.0 + 2.0 * i / (grid - 1)),
                     static_cast<float>(-1.0 + 2.0 * j / (grid - 1))};
      world::RobotState s;
      cell.path.reserve(steps);
      for (int t = 0; t < steps; ++t) {
        const auto obs = policy::make_ll_observation(cell.latent, s);
        const auto out = policy::ll_forward(params.theta_ll, obs);
        auto [tg_cmd, new_tg] = tg::tg_step(s.tg, out.tg_params, tg::kDt);
        tg::MotorCommand command;
        for (int m = 0; m < tg::kNumMotors; ++m) command[m] = tg_cmd[m] + out.residual[m];
        s.tg = new_tg;
        s = world::dynamics_step(s, command, tg::kDt);
        ++s.step_count;
        cell.path.push_back({s.x, s.y});
      }
      cell.dx = s.x;
      cell.dy = s.y;
      cell.dyaw = s.yaw;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void export_latent_sweep_csv(const std::vector<LatentSweepCell>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw world::IoError("cannot open sweep output: " + path);
  out << "l0,l1,dx,dy,dyaw\n";
  for (const auto& c : cells) {
    out << fmt(c.latent[0]) << ',' << fmt(c.latent[1]) << ',' << fmt(c.dx) << ',' << fmt(c.dy)
        << ',' << fmt(c.dyaw) << '\n';
  }
  if (!out) throw world::IoError("failed writing sweep: " + path);
}

std::vector<FrequencyReport> frequency_report(const policy::PolicySpec& spec,
                                              const policy::PolicyParams& params,
                                              const std::vector<policy::HlMode>& modes,
                                              const FrequencyOptions& options) {
  std::vector<FrequencyReport> rows;
  for (const policy::HlMode mode : modes) {
    policy::PolicySpec sp = spec;
    sp.hl_mode = mode;
    FrequencyReport row;
    row.mode = mode;

    world::Environment env(sp.task);

    // activation accounting from one traced episode
    world::EpisodeTrace trace;
    policy::run_episode(sp, params, env, runner::episode_seed(options.seed, 0, -1, 1, 0), &trace);
    const auto episode_steps = static_cast<double>(trace.steps.size());
    row.hl_evals_per_episode = trace.hl_activations;
    row.effective_policy_size =
        static_cast<double>(sp.ll_size()) +
        static_cast<double>(sp.hl_size()) * (trace.hl_activations / episode_steps);

    // per-step policy cost, averaged over enough steps to be stable
    policy::InferenceStats stats;
    for (int e = 1; stats.steps < options.min_inference_steps; ++e) {
      policy::run_episode(sp, params, env, runner::episode_seed(options.seed, 0, -1, 1, e),
                          nullptr, &stats);
    }
    row.mean_inference_time = stats.policy_seconds / static_cast<double>(stats.steps);

    // optimizer throughput including environment time
    runner::BatchContext ctx;
    ctx.spec = sp;
    ctx.base_params = policy::concat_params(params);
    ctx.freeze_ll = params.freeze_ll;
    ctx.frozen = policy::frozen_mask(sp, params.freeze_ll);
    ctx.noise_std = options.train_config.noise_std;
    ctx.ars_seed = options.seed;

    long long train_steps = 0;
    const auto t0 = clock::now();
    for (int it = 0; it < options.train_iterations; ++it) {
      std::vector<runner::EvalJob> jobs;
      std::uint64_t job_id = 0;
      for (int j = 0; j < options.train_config.num_directions; ++j) {
        for (int sign : {1, -1}) {
          runner::EvalJob job;
          job.job_id = job_id++;
          job.direction_id = j;
          job.sign = sign;
          job.iteration = static_cast<std::uint64_t>(it);
          job.episodes = options.train_config.episodes_per_eval;
          job.seed_base = options.seed;
          job.params_id = ctx.params_id;
          jobs.push_back(job);
        }
      }
      for (const auto& r : runner::evaluate_batch_serial(ctx, jobs)) train_steps += r.total_steps;
    }
    const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
    row.training_speed = seconds > 0.0 ? train_steps / seconds : 0.0;

    rows.push_back(row);
  }
  return rows;
}

void export_frequency_report(const std::vector<FrequencyReport>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw world::IoError("cannot open report output: " + path);
  for (const auto& r : rows) {
    out << json{{"mode", policy::hl_mode_name(r.mode)},
                {"mean_inference_time", r.mean_inference_time},
                {"hl_evals_per_episode", r.hl_evals_per_episode},
                {"effective_policy_size", r.effective_policy_size},
                {"training_speed", r.training_speed}}
               .dump()
        << "\n";
  }
  if (!out) throw world::IoError("failed writing report: " + path);
}

void export_trajectories(const std::vector<world::EpisodeTrace>& traces, const std::string& path) {
  if (traces.empty()) throw AnalysisError("export_trajectories: no traces given");
  std::ofstream out(path);
  if (!out) throw world::IoError("cannot open trajectory output: " + path);

  const std::size_t k = traces.front().steps.empty() ? 0 : traces.front().steps.front().latent.size();
  out << "episode,step,x,y,yaw,reward,hl_active,d";
  for (std::size_t i = 0; i < k; ++i) out << ",latent_" << i;
  out << "\n";

  for (std::size_t e = 0; e < traces.size(); ++e) {
    for (const auto& s : traces[e].steps) {
      out << e << ',' << s.step << ',' << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(s.yaw) << ','
          << fmt(s.reward) << ',' << (s.hl_active ? 1 : 0) << ',' << s.duration;
      for (std::size_t i = 0; i < k; ++i)
        out << ',' << (i < s.latent.size() ? fmt(s.latent[i]) : std::string("0"));
      out << '\n';
    }
  }
  if (!out) throw world::IoError("failed writing trajectories: " + path);
}

}  // namespace quadnav::analysis
