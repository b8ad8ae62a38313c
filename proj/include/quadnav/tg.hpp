#pragma once

#include <array>
#include <utility>

namespace quadnav::tg {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDt = 0.002;  // 500 Hz control rate

inline constexpr int kNumLegs = 4;
inline constexpr int kNumMotors = 12;

// Leg order: front-left, front-right, hind-left, hind-right; three motors
// per leg: abduction, hip swing, knee extension.
enum LegIndex { kFrontLeft = 0, kFrontRight = 1, kHindLeft = 2, kHindRight = 3 };
enum JointIndex { kAbduction = 0, kSwing = 1, kExtension = 2 };

// Trot: diagonal pairs in phase, the two pairs half a cycle apart.
inline constexpr std::array<double, kNumLegs> kTrotOffsets = {0.0, kPi, kPi, 0.0};

inline constexpr double kFreqMin = 1.0;
inline constexpr double kFreqMax = 4.0;
inline constexpr double kSwingAmpMax = 0.5;
inline constexpr double kExtAmpMax = 0.3;

struct TgState {
  double phase = 0.0;  // [0, 2pi)
};

struct TgParams {
  double frequency = 2.5;          // Hz, [kFreqMin, kFreqMax]
  double swing_amplitude = 0.25;   // rad, [0, kSwingAmpMax]
  double extension_amplitude = 0.15;  // rad, [0, kExtAmpMax]
};

using MotorCommand = std::array<double, kNumMotors>;

double wrap_2pi(double phase);

// Advances the phase by 2*pi*f*dt and emits the cyclic leg commands for the
// new phase. Abduction joints are left at zero; steering comes from learned
// residuals.
std::pair<MotorCommand, TgState> tg_step(TgState state, const TgParams& params, double dt);

// (sin phase, cos phase), the state observation fed to the low level.
std::array<double, 2> tg_observe(TgState state);

}  // namespace quadnav::tg
