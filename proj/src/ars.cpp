#include "quadnav/ars.hpp"

#include <algorithm>
#include <cmath>

#include "quadnav/nnet.hpp"
#include "quadnav/rng.hpp"

namespace quadnav::ars {
namespace {

constexpr std::uint64_t kDirectionTag = 0x44495245;  // direction stream label

// selection order: best max(r+, r-) first, ties by id for reproducibility
std::vector<DirectionResult> top_directions(std::vector<DirectionResult> results,
                                            const ArsConfig& config) {
  if (static_cast<int>(results.size()) != config.num_directions)
    throw IterationError("expected " + std::to_string(config.num_directions) +
                         " direction results, got " + std::to_string(results.size()));
  std::vector<std::uint8_t> seen(results.size(), 0);
  for (const auto& r : results) {
    if (r.direction_id < 0 || r.direction_id >= config.num_directions ||
        seen[r.direction_id]++)
      throw IterationError("missing or duplicate direction result id " +
                           std::to_string(r.direction_id));
  }
  std::sort(results.begin(), results.end(), [](const DirectionResult& a, const DirectionResult& b) {
    const double ma = std::max(a.r_plus, a.r_minus), mb = std::max(b.r_plus, b.r_minus);
    if (ma != mb) return ma > mb;
    return a.direction_id < b.direction_id;
  });
  results.resize(std::min<std::size_t>(results.size(), config.top_k));
  return results;
}

}  // namespace

std::vector<float> make_direction(std::uint64_t seed, std::uint64_t iteration, int direction_id,
                                  std::size_t dim, const std::vector<std::uint8_t>& frozen) {
  std::uint64_t h = hash_combine(seed, kDirectionTag);
  h = hash_combine(h, iteration);
  h = hash_combine(h, static_cast<std::uint64_t>(direction_id));
  Rng r(h);
  std::vector<float> delta(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const float g = static_cast<float>(r.normal());
    delta[i] = (!frozen.empty() && frozen[i]) ? 0.0f : g;
  }
  return delta;
}

std::vector<Perturbation> propose_perturbations(const ArsState& state, const ArsConfig& config,
                                                const std::vector<std::uint8_t>& frozen) {
  if (config.num_directions < 1 || config.top_k < 1 || config.top_k > config.num_directions)
    throw nnet::ConfigError("ars: need 1 <= top_k <= num_directions");
  std::vector<Perturbation> out;
  out.reserve(config.num_directions);
  for (int j = 0; j < config.num_directions; ++j) {
    out.push_back({j, make_direction(state.rng_seed, state.iteration, j, state.theta.size(), frozen)});
  }
  return out;
}

double selection_sigma(std::vector<DirectionResult> results, const ArsConfig& config) {
  const auto top = top_directions(std::move(results), config);
  double sum = 0.0, sum2 = 0.0;
  const double n = 2.0 * static_cast<double>(top.size());
  for (const auto& r : top) {
    sum += r.r_plus + r.r_minus;
    sum2 += r.r_plus * r.r_plus + r.r_minus * r.r_minus;
  }
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sum2 / n - mean * mean));
}

ArsState update(const ArsState& state, const ArsConfig& config,
                const std::vector<DirectionResult>& results,
                const std::vector<std::uint8_t>& frozen) {
  auto top = top_directions(results, config);
  // fixed accumulation order regardless of caller's result order
  std::sort(top.begin(), top.end(), [](const DirectionResult& a, const DirectionResult& b) {
    return a.direction_id < b.direction_id;
  });

  ArsState next = state;
  next.iteration = state.iteration + 1;
  for (const auto& r : results) {
    next.best_return = std::max({next.best_return, r.r_plus, r.r_minus});
  }

  const double sigma = selection_sigma(results, config);
  if (sigma < kSigmaFloor) return next;  // all selected returns identical

  const std::size_t dim = state.theta.size();
  std::vector<double> step(dim, 0.0);
  for (const auto& r : top) {
    const auto delta = make_direction(state.rng_seed, state.iteration, r.direction_id, dim, frozen);
    const double w = r.r_plus - r.r_minus;
    for (std::size_t i = 0; i < dim; ++i) step[i] += w * delta[i];
  }
  const double scale = config.step_size / (static_cast<double>(top.size()) * sigma);
  for (std::size_t i = 0; i < dim; ++i) {
    if (!frozen.empty() && frozen[i]) continue;  // bit-identical across updates
    next.theta[i] = static_cast<float>(static_cast<double>(state.theta[i]) + scale * step[i]);
  }
  return next;
}

ArsConfig tune_grid(const std::vector<ArsConfig>& space, int budget,
                    const std::function<double(const ArsConfig&, std::uint64_t seed)>& run_trial) {
  if (space.empty()) throw nnet::ConfigError("tune_grid: empty config space");
  if (budget <= 0) return ArsConfig{};

  ArsConfig best;
  double best_score = -1e300;
  const int n = std::min<int>(budget, static_cast<int>(space.size()));
  for (int i = 0; i < n; ++i) {
    double score = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) score += run_trial(space[i], seed);
    score /= 3.0;
    if (score > best_score) {
      best_score = score;
      best = space[i];
    }
  }
  return best;
}

}  // namespace quadnav::ars
