#include "quadnav/serial.hpp"

namespace quadnav::serial {

using nlohmann::json;

json spec_to_json(const policy::PolicySpec& spec) {
  return json{{"task", world::task_name(spec.task)},
              {"image_size", spec.arch.image_size},
              {"latent_dim", spec.arch.latent_dim},
              {"use_pool", spec.arch.use_pool},
              {"pool_mode", spec.arch.pool_mode == nnet::PoolMode::Max ? "max" : "mean"},
              {"extra_fc", spec.arch.extra_fc},
              {"feature_dim", spec.arch.feature_dim},
              {"task_input_dim", spec.arch.task_input_dim},
              {"hl_mode", policy::hl_mode_name(spec.hl_mode)},
              {"flat_baseline", spec.flat_baseline}};
}

policy::PolicySpec spec_from_json(const json& j) {
  policy::PolicySpec spec;
  const auto task = world::task_from_name(j.at("task").get<std::string>());
  if (!task) throw nnet::ConfigError("unknown task in policy descriptor");
  spec.task = *task;
  spec.arch.image_size = j.at("image_size").get<int>();
  spec.arch.latent_dim = j.at("latent_dim").get<int>();
  spec.arch.use_pool = j.at("use_pool").get<bool>();
  const auto pool = j.at("pool_mode").get<std::string>();
  if (pool != "max" && pool != "mean") throw nnet::ConfigError("unknown pool_mode: " + pool);
  spec.arch.pool_mode = pool == "max" ? nnet::PoolMode::Max : nnet::PoolMode::Mean;
  spec.arch.extra_fc = j.at("extra_fc").get<bool>();
  spec.arch.feature_dim = j.at("feature_dim").get<int>();
  spec.arch.task_input_dim = j.at("task_input_dim").get<int>();
  const auto mode = policy::hl_mode_from_name(j.at("hl_mode").get<std::string>());
  if (!mode) throw nnet::ConfigError("unknown hl_mode in policy descriptor");
  spec.hl_mode = *mode;
  spec.flat_baseline = j.at("flat_baseline").get<bool>();
  return spec;
}

}  // namespace quadnav::serial
