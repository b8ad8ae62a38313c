#include "quadnav/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "quadnav/rng.hpp"

namespace quadnav::policy {
namespace {

constexpr std::uint64_t kHlInitTag = 0x48494e49;  // distinct stream for weight init
constexpr float kUniformInitScale = 0.1f;

nnet::LayerSpec conv(int c_out) {
  nnet::LayerSpec l;
  l.kind = nnet::LayerKind::Conv3x3;
  l.out_shape.c = c_out;
  return l;
}

nnet::LayerSpec dense_layer(int n_out) {
  nnet::LayerSpec l;
  l.kind = nnet::LayerKind::Dense;
  l.out_shape.c = n_out;
  return l;
}

nnet::LayerSpec act(nnet::LayerKind kind) {
  nnet::LayerSpec l;
  l.kind = kind;
  return l;
}

// fills in_shapes sequentially so chain_layers only validates
std::vector<nnet::LayerSpec> chain_from(nnet::Shape3 in, std::vector<nnet::LayerSpec> layers) {
  for (auto& l : layers) {
    l.in_shape = in;
    switch (l.kind) {
      case nnet::LayerKind::Conv3x3:
        in = {in.h - 2, in.w - 2, l.out_shape.c};
        break;
      case nnet::LayerKind::MaxPool2x2s2:
        in = {in.h / 2, in.w / 2, in.c};
        break;
      case nnet::LayerKind::Dense:
        in = {1, 1, l.out_shape.c};
        break;
      case nnet::LayerKind::Tanh:
      case nnet::LayerKind::Clip:
        break;
    }
  }
  return nnet::chain_layers(std::move(layers));
}

LlOutput outputs_from_raw(std::span<const float> raw) {
  LlOutput out;
  for (int m = 0; m < tg::kNumMotors; ++m) out.residual[m] = kResidualScale * raw[m];
  const auto unit = [](float v) { return (static_cast<double>(v) + 1.0) / 2.0; };
  out.tg_params.frequency = tg::kFreqMin + unit(raw[12]) * (tg::kFreqMax - tg::kFreqMin);
  out.tg_params.swing_amplitude = unit(raw[13]) * tg::kSwingAmpMax;
  out.tg_params.extension_amplitude = unit(raw[14]) * tg::kExtAmpMax;
  return out;
}

void check_finite(std::span<const float> v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw world::NumericalError(std::string("non-finite ") + what);
  }
}

std::vector<float> task_input_for(world::Task task, const world::RobotState& s,
                                  const world::Terrain& terrain) {
  if (task == world::Task::Cliff) return {};
  world::Vec2 target{0.0, 0.0};
  if (task == world::Task::GoalFinding) target = *terrain.goal;
  const double dx = target.x - s.x, dy = target.y - s.y;
  const double c = std::cos(s.yaw), sn = std::sin(s.yaw);
  const double bx = c * dx + sn * dy;
  const double by = -sn * dx + c * dy;
  return {static_cast<float>(bx), static_cast<float>(by),
          static_cast<float>(std::atan2(by, bx))};
}

}  // namespace

int fixed_interval(HlMode mode) {
  switch (mode) {
    case HlMode::Variable: return 0;
    case HlMode::Every1: return 1;
    case HlMode::Every50: return 50;
    case HlMode::Every150: return 150;
    case HlMode::Every300: return 300;
  }
  return 0;
}

const char* hl_mode_name(HlMode mode) {
  switch (mode) {
    case HlMode::Variable: return "variable";
    case HlMode::Every1: return "every_1";
    case HlMode::Every50: return "every_50";
    case HlMode::Every150: return "every_150";
    case HlMode::Every300: return "every_300";
  }
  return "?";
}

std::optional<HlMode> hl_mode_from_name(const std::string& name) {
  for (HlMode m : {HlMode::Variable, HlMode::Every1, HlMode::Every50, HlMode::Every150,
                   HlMode::Every300}) {
    if (name == hl_mode_name(m)) return m;
  }
  return std::nullopt;
}

std::vector<nnet::LayerSpec> hl_trunk_layers(const HlArch& arch) {
  std::vector<nnet::LayerSpec> layers{conv(4), conv(8), conv(8)};
  if (arch.use_pool) {
    nnet::LayerSpec pool = act(nnet::LayerKind::MaxPool2x2s2);
    pool.pool_mode = arch.pool_mode;
    layers.push_back(pool);
  }
  if (arch.extra_fc) {
    layers.push_back(dense_layer(32));
    layers.push_back(act(nnet::LayerKind::Tanh));
    layers.push_back(dense_layer(32));
    layers.push_back(act(nnet::LayerKind::Tanh));
  }
  layers.push_back(dense_layer(arch.feature_dim));
  layers.push_back(act(nnet::LayerKind::Tanh));
  return chain_from({arch.image_size, arch.image_size, 1}, std::move(layers));
}

std::size_t hl_param_count(const HlArch& arch) {
  const std::size_t head_in = arch.feature_dim + arch.task_input_dim;
  return nnet::layers_param_count(hl_trunk_layers(arch)) +
         head_in * arch.output_dim() + arch.output_dim();
}

std::size_t ll_param_count(int latent_dim) {
  const std::size_t n_in = latent_dim + kSensorDim;
  return n_in * kLlOutputDim + kLlOutputDim;
}

std::size_t flat_param_count(const HlArch& arch) {
  const std::size_t h1_in = arch.feature_dim + kSensorDim + arch.task_input_dim;
  return nnet::layers_param_count(hl_trunk_layers(arch)) + h1_in * 10 + 10 +
         10 * kLlOutputDim + kLlOutputDim;
}

int task_input_dim(world::Task task) { return task == world::Task::Cliff ? 0 : 3; }

std::size_t PolicySpec::hl_size() const {
  return flat_baseline ? flat_param_count(arch) : hl_param_count(arch);
}

std::size_t PolicySpec::ll_size() const {
  return flat_baseline ? 0 : ll_param_count(arch.latent_dim);
}

PolicyParams zero_params(const PolicySpec& spec) {
  PolicyParams p;
  p.theta_hl.assign(spec.hl_size(), 0.0f);
  p.theta_ll.assign(spec.ll_size(), 0.0f);
  return p;
}

PolicyParams init_params(const PolicySpec& spec, const std::string& hl_init, std::uint64_t seed) {
  PolicyParams p = zero_params(spec);
  if (hl_init == "zeros") return p;
  if (hl_init == "uniform") {
    Rng r(hash_combine(seed, kHlInitTag));
    for (float& v : p.theta_hl)
      v = static_cast<float>(r.uniform(-kUniformInitScale, kUniformInitScale));
    return p;
  }
  throw nnet::ConfigError("unknown hl_init mode: " + hl_init);
}

std::vector<float> concat_params(const PolicyParams& p) {
  std::vector<float> out;
  out.reserve(p.theta_hl.size() + p.theta_ll.size());
  out.insert(out.end(), p.theta_hl.begin(), p.theta_hl.end());
  out.insert(out.end(), p.theta_ll.begin(), p.theta_ll.end());
  return out;
}

PolicyParams split_params(const PolicySpec& spec, std::span<const float> flat, bool freeze_ll) {
  const std::size_t nh = spec.hl_size(), nl = spec.ll_size();
  if (flat.size() != nh + nl)
    throw nnet::ConfigError("split_params: flat vector length " + std::to_string(flat.size()) +
                            " != " + std::to_string(nh + nl));
  PolicyParams p;
  p.theta_hl.assign(flat.begin(), flat.begin() + nh);
  p.theta_ll.assign(flat.begin() + nh, flat.end());
  p.freeze_ll = freeze_ll;
  return p;
}

std::vector<std::uint8_t> frozen_mask(const PolicySpec& spec, bool freeze_ll) {
  std::vector<std::uint8_t> mask(spec.hl_size() + spec.ll_size(), 0);
  if (freeze_ll) std::fill(mask.begin() + spec.hl_size(), mask.end(), 1);
  return mask;
}

HlOutput hl_forward(const HlArch& arch, std::span<const float> theta_hl,
                    const nnet::Tensor3& image, std::span<const float> task_input) {
  if (image.height != arch.image_size || image.width != arch.image_size || image.channels != 1)
    throw nnet::ConfigError("hl_forward: image shape does not match architecture");
  if (static_cast<int>(task_input.size()) != arch.task_input_dim)
    throw nnet::ConfigError("hl_forward: task input length does not match architecture");
  if (theta_hl.size() != hl_param_count(arch))
    throw nnet::ConfigError("hl_forward: parameter vector length mismatch");

  const auto trunk = hl_trunk_layers(arch);
  const std::size_t trunk_n = nnet::layers_param_count(trunk);
  std::vector<float> feature = nnet::forward_layers(trunk, theta_hl.subspan(0, trunk_n), image);
  feature.insert(feature.end(), task_input.begin(), task_input.end());

  const int n_out = arch.output_dim();
  const std::size_t wn = feature.size() * n_out;
  std::vector<float> o = nnet::dense(feature, theta_hl.subspan(trunk_n, wn),
                                     theta_hl.subspan(trunk_n + wn), n_out);
  nnet::clip_unit_inplace(o);

  HlOutput out;
  out.duration = static_cast<int>(std::llround(
      kDurationMin + (static_cast<double>(o[0]) + 1.0) / 2.0 * (kDurationMax - kDurationMin)));
  out.latent.assign(o.begin() + 1, o.end());
  return out;
}

LlObservation make_ll_observation(std::span<const float> latent, const world::RobotState& state) {
  LlObservation obs;
  obs.values.reserve(latent.size() + kSensorDim);
  obs.values.assign(latent.begin(), latent.end());
  const auto tg_obs = tg::tg_observe(state.tg);
  obs.values.push_back(static_cast<float>(tg_obs[0]));
  obs.values.push_back(static_cast<float>(tg_obs[1]));
  obs.values.push_back(static_cast<float>(state.roll));
  obs.values.push_back(static_cast<float>(state.pitch));
  obs.values.push_back(static_cast<float>(state.roll_rate));
  obs.values.push_back(static_cast<float>(state.pitch_rate));
  for (double a : state.motor_angles) obs.values.push_back(static_cast<float>(a));
  return obs;
}

LlOutput ll_forward(std::span<const float> theta_ll, const LlObservation& obs) {
  const std::size_t expect = obs.values.size() * kLlOutputDim + kLlOutputDim;
  if (theta_ll.size() != expect)
    throw nnet::ConfigError("ll_forward: parameter vector length " +
                            std::to_string(theta_ll.size()) + " != " + std::to_string(expect));
  const std::size_t wn = obs.values.size() * kLlOutputDim;
  std::vector<float> raw =
      nnet::dense(obs.values, theta_ll.subspan(0, wn), theta_ll.subspan(wn), kLlOutputDim);
  nnet::clip_unit_inplace(raw);
  return outputs_from_raw(raw);
}

LlOutput flat_forward(const HlArch& arch, std::span<const float> theta,
                      const nnet::Tensor3& image, const world::RobotState& state,
                      std::span<const float> task_input) {
  if (theta.size() != flat_param_count(arch))
    throw nnet::ConfigError("flat_forward: parameter vector length mismatch");
  const auto trunk = hl_trunk_layers(arch);
  const std::size_t trunk_n = nnet::layers_param_count(trunk);
  std::vector<float> h = nnet::forward_layers(trunk, theta.subspan(0, trunk_n), image);

  const LlObservation sensors = make_ll_observation({}, state);
  h.insert(h.end(), sensors.values.begin(), sensors.values.end());
  h.insert(h.end(), task_input.begin(), task_input.end());

  std::size_t off = trunk_n;
  const std::size_t w1 = h.size() * 10;
  std::vector<float> h1 = nnet::dense(h, theta.subspan(off, w1), theta.subspan(off + w1, 10), 10);
  nnet::tanh_inplace(h1);
  off += w1 + 10;
  const std::size_t w2 = h1.size() * kLlOutputDim;
  std::vector<float> raw = nnet::dense(h1, theta.subspan(off, w2),
                                       theta.subspan(off + w2, kLlOutputDim), kLlOutputDim);
  nnet::clip_unit_inplace(raw);
  return outputs_from_raw(raw);
}

double run_episode(const PolicySpec& spec, const PolicyParams& params, world::Environment& env,
                   std::uint64_t seed, world::EpisodeTrace* trace, InferenceStats* stats) {
  using clock = std::chrono::steady_clock;
  env.reset(seed);

  if (trace) {
    *trace = world::EpisodeTrace{};
    trace->task = spec.task;
    trace->seed = seed;
    trace->start_x = env.state().x;
    trace->start_y = env.state().y;
    trace->start_yaw = env.state().yaw;
    trace->goal = env.terrain().goal;
  }

  double ret = 0.0;
  int d = 0;
  int last_d = 0;
  std::vector<float> latent(spec.flat_baseline ? 0 : spec.arch.latent_dim, 0.0f);
  int hl_count = 0;
  bool done = false;

  while (!done) {
    const clock::time_point t0 = stats ? clock::now() : clock::time_point{};
    bool hl_active = false;
    LlOutput out;
    LlObservation obs;

    if (spec.flat_baseline) {
      const auto image = env.render(spec.arch.image_size);
      const auto ti = task_input_for(spec.task, env.state(), env.terrain());
      check_finite(ti, "task input");
      out = flat_forward(spec.arch, params.theta_hl, image, env.state(), ti);
      hl_active = true;
      ++hl_count;
      last_d = 1;
    } else {
      if (d == 0) {
        const auto image = env.render(spec.arch.image_size);
        const auto ti = task_input_for(spec.task, env.state(), env.terrain());
        check_finite(ti, "task input");
        const HlOutput ho = hl_forward(spec.arch, params.theta_hl, image, ti);
        const int interval = fixed_interval(spec.hl_mode);
        d = interval > 0 ? interval : ho.duration;
        latent = ho.latent;
        last_d = d;
        hl_active = true;
        ++hl_count;
      }
      obs = make_ll_observation(latent, env.state());
      check_finite(obs.values, "observation");
      out = ll_forward(params.theta_ll, obs);
    }

    auto [tg_cmd, new_tg] = tg::tg_step(env.state().tg, out.tg_params, tg::kDt);
    tg::MotorCommand command;
    for (int m = 0; m < tg::kNumMotors; ++m) command[m] = tg_cmd[m] + out.residual[m];

    if (stats) {
      stats->policy_seconds += std::chrono::duration<double>(clock::now() - t0).count();
      ++stats->steps;
    }

    const world::StepResult r = env.step(command, new_tg);
    ret += r.reward;
    if (!spec.flat_baseline) --d;
    done = r.done;

    if (trace) {
      world::TraceStep ts;
      ts.step = env.state().step_count - 1;
      ts.x = env.state().x;
      ts.y = env.state().y;
      ts.yaw = env.state().yaw;
      ts.roll = env.state().roll;
      ts.pitch = env.state().pitch;
      ts.reward = r.reward;
      ts.hl_active = hl_active;
      ts.duration = last_d;
      ts.latent.assign(latent.begin(), latent.end());
      ts.ll_observation = obs.values;
      ts.command = command;
      ts.tg_phase = new_tg.phase;
      trace->steps.push_back(std::move(ts));
      trace->end_reason = r.reason;
    }
  }

  if (trace) {
    trace->episode_return = ret;
    trace->hl_activations = hl_count;
  }
  return ret;
}

PolicyParams make_transfer_policy(const PolicySpec& src_spec, const PolicyParams& src,
                                  const PolicySpec& dst_spec, const std::string& hl_init,
                                  std::uint64_t seed) {
  if (src_spec.flat_baseline || dst_spec.flat_baseline)
    throw TransferError("transfer requires hierarchical policies on both sides");
  if (src_spec.arch.latent_dim != dst_spec.arch.latent_dim)
    throw TransferError("latent dimension mismatch: source k=" +
                        std::to_string(src_spec.arch.latent_dim) + ", target k=" +
                        std::to_string(dst_spec.arch.latent_dim));
  if (src.theta_ll.size() != dst_spec.ll_size())
    throw TransferError("source LL parameter vector does not match target architecture");

  PolicyParams out = init_params(dst_spec, hl_init, seed);
  out.theta_ll = src.theta_ll;
  out.freeze_ll = true;
  return out;
}

}  // namespace quadnav::policy
