#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <complex>
#include <stdexcept>
#include <utility>

#include "rydgate/physical_params.hpp"
#include "rydgate/pulse_schedule.hpp"

namespace rydgate {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Cplx = std::complex<double>;

enum class AtomRole { Control, Target };

/// Single-atom Hamiltonian in the basis |0>,|1>,|e>,|r>.
/// Control: (Omega_c e^{i phi}/2)|1><e|; target: (Omega_t e^{i phi}/2) on both
/// |0><e| and |1><e|. Both atoms carry (Omega_gl/2)|e><r| + h.c.,
/// -Delta |e><e| and the Doppler shift on |r><r|.
inline Mat single_atom_hamiltonian(const PhysicalParams& p, AtomRole role,
                                   double omega, double phi, double doppler = 0.0) {
  if (omega < 0.0) throw std::invalid_argument("Rabi amplitude must be non-negative");
  Mat h = Mat::Zero(4, 4);
  const Cplx half_drive = 0.5 * omega * std::exp(Cplx(0.0, phi));
  if (role == AtomRole::Control) {
    h(kState1, kStateE) = half_drive;
  } else {
    h(kState0, kStateE) = half_drive;
    h(kState1, kStateE) = half_drive;
  }
  h(kStateE, kStateR) = 0.5 * p.omega_gl;
  h = (h + h.adjoint()).eval();
  h(kStateE, kStateE) = -p.delta;
  h(kStateR, kStateR) = doppler;
  return h;
}

/// Two-atom Hamiltonian H_c (x) I + I (x) H_t + v |rr><rr|, control (x) target
/// ordering (two-atom index = 4*control + target).
inline Mat two_atom_hamiltonian(const PhysicalParams& p, double omega_c,
                                double omega_t, double phi_c, double phi_t,
                                double v, double doppler_c = 0.0,
                                double doppler_t = 0.0) {
  if (v < 0.0) throw std::invalid_argument("interaction strength must be non-negative");
  const Mat hc = single_atom_hamiltonian(p, AtomRole::Control, omega_c, phi_c, doppler_c);
  const Mat ht = single_atom_hamiltonian(p, AtomRole::Target, omega_t, phi_t, doppler_t);
  const Mat id = Mat::Identity(4, 4);
  Mat h = Eigen::kroneckerProduct(hc, id).eval() + Eigen::kroneckerProduct(id, ht).eval();
  h(15, 15) += v;
  return h;
}

/// EIT dark states of the target atom, Eq.-(3)/(4) form with
/// x = sqrt(2) Omega_t / Omega_gl. Returned as (|d1>, |d2>).
inline std::pair<Vec, Vec> dark_states(double omega_t, double omega_gl, double phi_t) {
  if (!(omega_gl > 0.0)) throw std::invalid_argument("omega_gl must be positive");
  const double x = std::sqrt(2.0) * omega_t / omega_gl;
  Vec d1 = Vec::Zero(4), d2 = Vec::Zero(4);
  d1(kState1) = 1.0 / std::sqrt(2.0);
  d1(kState0) = -1.0 / std::sqrt(2.0);
  const double norm = std::sqrt(1.0 + x * x);
  d2(kState1) = 1.0 / (std::sqrt(2.0) * norm);
  d2(kState0) = 1.0 / (std::sqrt(2.0) * norm);
  d2(kStateR) = -x * std::exp(Cplx(0.0, -phi_t)) / norm;
  return {d1, d2};
}

/// Per-step ratio |dOmega_t/dt| / (Omega_gl^3 / (4 Delta)). Values well below
/// one indicate the adiabatic regime. The first step compares against itself
/// (margin 0) so a constant schedule reports 0 everywhere.
inline Eigen::VectorXd adiabaticity_margin(const PulseSchedule& s, const PhysicalParams& p) {
  const double ref = std::pow(p.omega_gl, 3) / (4.0 * p.delta);
  const double dt = p.dt();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(s.size());
  for (int i = 1; i < s.size(); ++i)
    m(i) = std::abs(s.omega_t[i] - s.omega_t[i - 1]) / dt / ref;
  return m;
}

}  // namespace rydgate
