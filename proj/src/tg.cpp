#include "quadnav/tg.hpp"

#include <cmath>

namespace quadnav::tg {

double wrap_2pi(double phase) {
  double p = std::fmod(phase, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  return p;
}

std::pair<MotorCommand, TgState> tg_step(TgState state, const TgParams& params, double dt) {
  TgState next;
  next.phase = wrap_2pi(state.phase + 2.0 * kPi * params.frequency * dt);

  MotorCommand cmd{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double leg_phase = next.phase + kTrotOffsets[leg];
    cmd[leg * 3 + kAbduction] = 0.0;
    cmd[leg * 3 + kSwing] = params.swing_amplitude * std::sin(leg_phase);
    cmd[leg * 3 + kExtension] = params.extension_amplitude * std::cos(leg_phase);
  }
  return {cmd, next};
}

std::array<double, 2> tg_observe(TgState state) {
  return {std::sin(state.phase), std::cos(state.phase)};
}

}  // namespace quadnav::tg
