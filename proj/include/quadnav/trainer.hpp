#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "quadnav/checkpoint.hpp"
#include "quadnav/config.hpp"
#include "quadnav/runner.hpp"

namespace quadnav::trainer {

struct TrainOptions {
  std::string resume_path;  // continue from this checkpoint (same seed stream)
  std::optional<policy::PolicyParams> initial_params;  // e.g. transfer output
  std::function<bool(const checkpoint::TrainLogRow&)> stop_after;  // early stop
  std::ostream* progress = nullptr;
  runner::JobHook pre_job;  // test instrumentation
};

struct TrainResult {
  checkpoint::Checkpoint final_checkpoint;
  std::string checkpoint_path;
};

// Runs ARS until the iteration budget (or stop_after fires), writing a
// rolling checkpoint plus train_log.jsonl under config.output_dir.
TrainResult train(const config::RunConfig& config, const TrainOptions& options = {});

}  // namespace quadnav::trainer
