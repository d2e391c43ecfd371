#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rydgate/gate_env.hpp"

namespace rydgate {

enum class ThermalEffect { Doppler, Interaction, Both };

inline std::string to_string(ThermalEffect e) {
  switch (e) {
    case ThermalEffect::Doppler: return "doppler";
    case ThermalEffect::Interaction: return "interaction";
    case ThermalEffect::Both: return "both";
  }
  throw std::logic_error("unknown thermal effect");
}

/// Sweep settings. Physical constants (mass, wavenumbers, trap frequency,
/// interatomic distance) come from PhysicalParams.
struct ThermalConfig {
  std::vector<double> temperatures_uK = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  bool counter_propagating = false;  // flips the sign of k2 in the Doppler sum
  int monte_carlo_shots = 0;         // 0 = deterministic rms evaluation
  std::uint64_t seed = 0;

  void validate() const {
    if (temperatures_uK.empty())
      throw std::invalid_argument("temperature list must not be empty");
    for (double t : temperatures_uK)
      if (t < 0.0) throw std::invalid_argument("temperatures must be >= 0");
  }
};

/// Root-mean-square 1D thermal velocity in m/s.
inline double v_rms_m_per_s(double t_uK, const PhysicalParams& p) {
  if (t_uK < 0.0) throw std::invalid_argument("temperature must be >= 0");
  return std::sqrt(kBoltzmann * t_uK * 1e-6 / p.mass);
}

/// Two-photon Doppler shift of the Rydberg level, rad/us.
inline double doppler_shift(double t_uK, const PhysicalParams& p,
                            bool counter_propagating = false) {
  const double dk = counter_propagating ? p.k1 + p.k2 : p.k1 - p.k2;  // rad/m
  return dk * v_rms_m_per_s(t_uK, p) * 1e-6;
}

/// Interaction strength softened by thermal position spread in the trap:
/// V' = (r0 / r_rms)^6 V0 with r_rms^2 = r0^2 + 2 sigma_x^2.
inline double fluctuated_interaction(double t_uK, const PhysicalParams& p,
                                     double v0 = -1.0) {
  if (v0 < 0.0) v0 = p.v0;
  const double omega_si = p.trap_omega * 1e6;            // rad/s
  const double sigma_x = v_rms_m_per_s(t_uK, p) / omega_si;  // m
  const double r0_m = p.r0 * 1e-6;
  const double r_rms = std::sqrt(r0_m * r0_m + 2.0 * sigma_x * sigma_x);
  return std::pow(r0_m / r_rms, 6) * v0;
}

struct ThermalPoint {
  double t_uK = 0.0;
  ThermalEffect effect = ThermalEffect::Doppler;
  double delta_d = 0.0;   // rad/us (rms value)
  double v_prime = 0.0;   // rad/us
  double f_avg = 0.0;
  double delta_f = 0.0;
  double delta_f_stderr = 0.0;  // only set in Monte Carlo mode
};

namespace detail {

inline double f_avg_replay(const PulseSchedule& s, const PhysicalParams& p, int n_run,
                           double v, double doppler_c, double doppler_t) {
  CnotChannels ch(p, v, doppler_c, doppler_t);
  for (int i = 0; i < n_run; ++i)
    ch.step(s.omega_c[i], s.omega_t[i], s.phi_c[i], s.phi_t[i]);
  return ch.f_avg();
}

}  // namespace detail

/// Re-evaluate a trained schedule at its detected cutoff under thermal
/// perturbations, one row per (temperature, effect). With monte_carlo_shots > 0
/// the Doppler shift is sampled per atom from the thermal velocity distribution
/// instead of using the coherent rms value.
inline std::vector<ThermalPoint> thermal_sweep(const PulseSchedule& s,
                                               const PhysicalParams& p,
                                               const ThermalConfig& cfg,
                                               ThermalEffect effect) {
  cfg.validate();
  s.validate(p);
  const int n_run = static_cast<int>(std::lround(detect_cutoff(s, p) / p.dt()));
  const double f0 = detail::f_avg_replay(s, p, n_run, p.v0, 0.0, 0.0);
  const bool use_doppler =
      effect == ThermalEffect::Doppler || effect == ThermalEffect::Both;
  const bool use_interaction =
      effect == ThermalEffect::Interaction || effect == ThermalEffect::Both;

  std::vector<ThermalPoint> out;
  for (double t : cfg.temperatures_uK) {
    ThermalPoint row;
    row.t_uK = t;
    row.effect = effect;
    row.delta_d = use_doppler ? doppler_shift(t, p, cfg.counter_propagating) : 0.0;
    row.v_prime = use_interaction ? fluctuated_interaction(t, p) : p.v0;
    if (use_doppler && cfg.monte_carlo_shots > 0) {
      const double dk = (cfg.counter_propagating ? p.k1 + p.k2 : p.k1 - p.k2) * 1e-6;
      const double sigma_v = v_rms_m_per_s(t, p);
      std::mt19937_64 rng(cfg.seed);
      std::normal_distribution<double> gauss(0.0, sigma_v);
      double sum = 0.0, sum_sq = 0.0;
      for (int shot = 0; shot < cfg.monte_carlo_shots; ++shot) {
        const double f = detail::f_avg_replay(s, p, n_run, row.v_prime,
                                              dk * gauss(rng), dk * gauss(rng));
        sum += f;
        sum_sq += f * f;
      }
      const int m = cfg.monte_carlo_shots;
      row.f_avg = sum / m;
      const double var = std::max(0.0, sum_sq / m - row.f_avg * row.f_avg);
      row.delta_f_stderr = std::sqrt(var / m);
    } else {
      row.f_avg = detail::f_avg_replay(s, p, n_run, row.v_prime, row.delta_d, row.delta_d);
    }
    row.delta_f = f0 - row.f_avg;
    out.push_back(row);
  }
  return out;
}

inline void write_thermal_csv(const std::vector<ThermalPoint>& rows,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "T_uK,effect,delta_D_rad_per_us,V_prime_rad_per_us,f_avg,delta_f\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", r.t_uK,
                  to_string(r.effect).c_str(), r.delta_d, r.v_prime, r.f_avg, r.delta_f);
    out << buf;
  }
}

}  // namespace rydgate
