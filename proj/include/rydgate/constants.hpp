#pragma once

namespace rydgate {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Engine version recorded in run manifests; bump on changes that affect
// numerical results or file formats.
inline constexpr const char* kEngineVersion = "0.1.0";

// CODATA / standard atomic data used by the thermal-motion model.
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K
inline constexpr double kMassRb87 = 1.44316060e-25;  // kg
inline constexpr double kLambda1 = 420e-9;           // m, blue excitation laser
inline constexpr double kLambda2 = 1013e-9;          // m, infrared excitation laser

// Single-atom basis ordering used everywhere: |0>, |1>, |e>, |r>.
inline constexpr int kState0 = 0;
inline constexpr int kState1 = 1;
inline constexpr int kStateE = 2;
inline constexpr int kStateR = 3;

// Frequencies are stored angular, in rad/us. "X MHz" enters as 2*pi*X.
inline constexpr double mhz_to_rad_us(double mhz) { return kTwoPi * mhz; }
inline constexpr double khz_to_rad_us(double khz) { return kTwoPi * 1e-3 * khz; }

}  // namespace rydgate
