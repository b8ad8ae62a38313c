#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quadnav/analysis.hpp"
#include "quadnav/checkpoint.hpp"
#include "quadnav/config.hpp"
#include "quadnav/runner.hpp"
#include "quadnav/trainer.hpp"

namespace {

using namespace quadnav;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;
constexpr int kExitTransfer = 4;
constexpr int kExitNetwork = 5;

std::vector<policy::HlMode> parse_modes(const std::string& csv) {
  std::vector<policy::HlMode> modes;
  std::string token;
  std::stringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (token == "1") modes.push_back(policy::HlMode::Every1);
    else if (token == "50") modes.push_back(policy::HlMode::Every50);
    else if (token == "150") modes.push_back(policy::HlMode::Every150);
    else if (token == "300") modes.push_back(policy::HlMode::Every300);
    else if (token == "var" || token == "variable") modes.push_back(policy::HlMode::Variable);
    else throw config::ConfigError("unknown bench mode '" + token + "' (use 1,50,150,300,var)");
  }
  if (modes.empty()) throw config::ConfigError("no bench modes given");
  return modes;
}

int cmd_train(const std::string& config_path, const std::string& resume, bool no_env) {
  const config::RunConfig cfg = config::load_config(config_path, !no_env);
  trainer::TrainOptions opts;
  opts.resume_path = resume;
  opts.progress = &std::cout;
  const trainer::TrainResult result = trainer::train(cfg, opts);
  std::cout << "checkpoint: " << result.checkpoint_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, int episodes, std::uint64_t seed,
             const std::string& trace_out, const std::string& terrain_out) {
  const checkpoint::Checkpoint ckpt = checkpoint::load(ckpt_path);
  world::Environment env(ckpt.spec.task);

  std::vector<world::EpisodeTrace> traces;
  std::vector<double> returns;
  std::map<std::string, int> reasons;
  for (int e = 0; e < episodes; ++e) {
    world::EpisodeTrace trace;
    const double ret = policy::run_episode(ckpt.spec, ckpt.params, env,
                                           runner::episode_seed(seed, 0, -1, 1, e), &trace);
    returns.push_back(ret);
    ++reasons[world::reason_name(trace.end_reason)];
    traces.push_back(std::move(trace));
  }

  double mean = 0.0, var = 0.0;
  for (double r : returns) mean += r;
  if (!returns.empty()) mean /= static_cast<double>(returns.size());
  for (double r : returns) var += (r - mean) * (r - mean);
  if (!returns.empty()) var /= static_cast<double>(returns.size());

  std::cout << "episodes: " << episodes << "\n";
  std::cout << "mean_return: " << mean << "\n";
  std::cout << "std_return: " << std::sqrt(var) << "\n";
  for (const auto& [reason, count] : reasons) std::cout << "end." << reason << ": " << count << "\n";

  if (!trace_out.empty() && !traces.empty()) analysis::export_trajectories(traces, trace_out);
  if (!terrain_out.empty() && !traces.empty()) {
    env.reset(runner::episode_seed(seed, 0, -1, 1, 0));
    world::export_terrain_jsonl(env.terrain(), terrain_out);
  }
  return kExitOk;
}

int cmd_transfer(const std::string& src_path, const std::string& config_path, bool no_env) {
  const checkpoint::Checkpoint src = checkpoint::load(src_path);
  const config::RunConfig cfg = config::load_config(config_path, !no_env);
  const policy::PolicySpec dst_spec = config::make_spec(cfg);

  trainer::TrainOptions opts;
  opts.initial_params =
      policy::make_transfer_policy(src.spec, src.params, dst_spec, cfg.hl_init, cfg.seed);
  opts.progress = &std::cout;
  std::cout << "transfer: low level from " << src_path << " ("
            << src.params.theta_ll.size() << " params, frozen)\n";
  const trainer::TrainResult result = trainer::train(cfg, opts);
  std::cout << "checkpoint: " << result.checkpoint_path << "\n";
  return kExitOk;
}

int cmd_analyze_sweep(const std::string& ckpt_path, int grid, const std::string& out) {
  const checkpoint::Checkpoint ckpt = checkpoint::load(ckpt_path);
  const auto cells = analysis::latent_sweep(ckpt.spec, ckpt.params, grid);
  analysis::export_latent_sweep_csv(cells, out);
  std::cout << "cells: " << cells.size() << "\n";
  return kExitOk;
}

int cmd_analyze_traj(const std::string& ckpt_path, int episodes, std::uint64_t seed,
                     const std::string& out) {
  const checkpoint::Checkpoint ckpt = checkpoint::load(ckpt_path);
  world::Environment env(ckpt.spec.task);
  std::vector<world::EpisodeTrace> traces(episodes);
  for (int e = 0; e < episodes; ++e) {
    policy::run_episode(ckpt.spec, ckpt.params, env, runner::episode_seed(seed, 0, -1, 1, e),
                        &traces[e]);
  }
  analysis::export_trajectories(traces, out);
  std::cout << "episodes: " << episodes << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& ckpt_path,
              const std::string& modes_csv, int train_iters, long long min_steps,
              const std::string& out) {
  policy::PolicySpec spec;
  policy::PolicyParams params;
  std::uint64_t seed = 0;
  if (!ckpt_path.empty()) {
    const checkpoint::Checkpoint ckpt = checkpoint::load(ckpt_path);
    spec = ckpt.spec;
    params = ckpt.params;
    seed = ckpt.config.seed;
  } else if (!config_path.empty()) {
    const config::RunConfig cfg = config::load_config(config_path);
    spec = config::make_spec(cfg);
    params = policy::init_params(spec, cfg.hl_init, cfg.seed);
    seed = cfg.seed;
  } else {
    throw config::ConfigError("bench needs --config or --checkpoint");
  }

  analysis::FrequencyOptions opts;
  opts.train_iterations = train_iters;
  opts.min_inference_steps = min_steps;
  opts.seed = seed;
  const auto rows = analysis::frequency_report(spec, params, parse_modes(modes_csv), opts);

  std::printf("%-10s %16s %10s %14s %14s\n", "mode", "inference_s", "hl_evals", "eff_size",
              "train_sps");
  for (const auto& r : rows) {
    std::printf("%-10s %16.9f %10.1f %14.1f %14.1f\n", policy::hl_mode_name(r.mode),
                r.mean_inference_time, r.hl_evals_per_episode, r.effective_policy_size,
                r.training_speed);
  }
  if (!out.empty()) analysis::export_frequency_report(rows, out);
  return kExitOk;
}

int cmd_worker(const std::string& listen) {
  std::cout << "worker listening on " << listen << "\n";
  runner::remote_worker_serve(listen);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical visual-navigation policy trainer"};
  app.require_subcommand(1);

  std::string config_path, resume, ckpt_path, out, trace_out, terrain_out, listen;
  std::string modes_csv = "1,50,150,300,var";
  int episodes = 10, grid = 21, train_iters = 2;
  long long min_steps = 100000;
  std::uint64_t seed = 0;
  bool no_env = false;

  auto* train = app.add_subcommand("train", "run the optimizer per a config file");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_flag("--no-env", no_env, "ignore QUADNAV_* environment overrides");

  auto* eval = app.add_subcommand("eval", "run and summarize episodes from a checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "episode count");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--trace-out", trace_out, "per-step CSV export path");
  eval->add_option("--terrain-out", terrain_out, "terrain JSONL export path (first episode)");

  auto* transfer = app.add_subcommand("transfer", "train a new task reusing a frozen low level");
  transfer->add_option("--checkpoint", ckpt_path, "source checkpoint")->required();
  transfer->add_option("--config", config_path, "config for the new run")->required();
  transfer->add_flag("--no-env", no_env, "ignore QUADNAV_* environment overrides");

  auto* analyze = app.add_subcommand("analyze", "post-hoc studies");
  analyze->require_subcommand(1);
  auto* sweep = analyze->add_subcommand("latent-sweep", "grid over the 2D latent space");
  sweep->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  sweep->add_option("--grid", grid, "cells per axis");
  sweep->add_option("--out", out, "CSV output")->required();
  auto* traj = analyze->add_subcommand("trajectories", "per-step CSV across episodes");
  traj->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  traj->add_option("--episodes", episodes, "episode count");
  traj->add_option("--seed", seed, "evaluation seed");
  traj->add_option("--out", out, "CSV output")->required();

  auto* bench = app.add_subcommand("bench", "high-level frequency cost study");
  bench->add_option("--config", config_path, "config file (fresh policy)");
  bench->add_option("--checkpoint", ckpt_path, "checkpoint file");
  bench->add_option("--modes", modes_csv, "comma list of 1,50,150,300,var");
  bench->add_option("--train-iters", train_iters, "iterations for the training-speed column");
  bench->add_option("--min-steps", min_steps, "minimum steps for inference timing");
  bench->add_option("--out", out, "JSONL report output");

  auto* worker = app.add_subcommand("worker", "serve rollout jobs over the wire");
  worker->add_option("--listen", listen, "host:port to bind")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, resume, no_env);
    if (eval->parsed()) return cmd_eval(ckpt_path, episodes, seed, trace_out, terrain_out);
    if (transfer->parsed()) return cmd_transfer(ckpt_path, config_path, no_env);
    if (analyze->parsed()) {
      if (sweep->parsed()) return cmd_analyze_sweep(ckpt_path, grid, out);
      return cmd_analyze_traj(ckpt_path, episodes, seed, out);
    }
    if (bench->parsed())
      return cmd_bench(config_path, ckpt_path, modes_csv, train_iters, min_steps, out);
    if (worker->parsed()) return cmd_worker(listen);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const checkpoint::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const policy::TransferError& e) {
    std::cerr << "transfer error: " << e.what() << "\n";
    return kExitTransfer;
  } catch (const analysis::AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wire::DispatchError& e) {
    std::cerr << "network error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const wire::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
