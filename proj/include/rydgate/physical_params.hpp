#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "rydgate/constants.hpp"

namespace rydgate {

/// Physical constants of the two-Rydberg-atom CNOT model. Defaults reproduce
/// the reference parameter set (Omega_gl/2pi = 250 MHz, Delta/2pi = 7.3 GHz,
/// V0/2pi = 450 MHz, caps (250, 230) MHz, gamma_e/2pi = 1 MHz,
/// gamma_r/2pi = 0.5 kHz, eta_e = 5000, eta_r = 2000).
struct PhysicalParams {
  double omega_gl = mhz_to_rad_us(250.0);   // global |e>-|r> coupling
  double delta = mhz_to_rad_us(7300.0);     // intermediate-state detuning
  double v0 = mhz_to_rad_us(450.0);         // vdW interaction on |rr>
  double gamma_e = mhz_to_rad_us(1.0);      // |e> decay rate
  double gamma_r = khz_to_rad_us(0.5);      // |r> decay rate
  double omega_c_max = mhz_to_rad_us(250.0);
  double omega_t_max = mhz_to_rad_us(230.0);
  double eta_e = 5000.0;                    // penalty weight on gamma_e*T_e
  double eta_r = 2000.0;                    // penalty weight on gamma_r*T_r
  double t_total = 0.4;                     // us
  int n_steps = 100;
  double xi_omega = 0.1;                    // per-step amplitude smoothing
  double xi_phi = 0.1;                      // per-step phase smoothing

  // Thermal-motion model.
  double r0 = 2.0;                               // um, interatomic distance
  double trap_omega = khz_to_rad_us(100.0);      // trap frequency, rad/us
  double mass = kMassRb87;                       // kg
  double k1 = kTwoPi / kLambda1;                 // rad/m
  double k2 = kTwoPi / kLambda2;                 // rad/m

  double dt() const { return t_total / n_steps; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be strictly positive");
    };
    positive(omega_gl, "omega_gl");
    positive(delta, "delta");
    positive(v0, "v0");
    positive(gamma_e, "gamma_e");
    positive(gamma_r, "gamma_r");
    positive(omega_c_max, "omega_c_max");
    positive(omega_t_max, "omega_t_max");
    positive(t_total, "t_total");
    positive(r0, "r0");
    positive(trap_omega, "trap_omega");
    positive(mass, "mass");
    if (eta_e < 0.0 || eta_r < 0.0)
      throw std::invalid_argument("penalty weights must be non-negative");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(xi_omega > 0.0 && xi_omega <= 1.0))
      throw std::invalid_argument("xi_omega must be in (0, 1]");
    if (!(xi_phi > 0.0 && xi_phi <= 1.0))
      throw std::invalid_argument("xi_phi must be in (0, 1]");
  }
};

}  // namespace rydgate
