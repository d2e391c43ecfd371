#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "rydgate/channels.hpp"
#include "rydgate/env_base.hpp"
#include "rydgate/gate_env.hpp"

namespace rydgate {

enum class PiecewiseMode { AdiabaticI, AdiabaticII, NonAdiabatic };

/// Settings for the sequential protocols: square pi-pulses on the control atom
/// bracket an optimized Raman pulse on the target atom.
struct PiecewiseConfig {
  PiecewiseMode mode = PiecewiseMode::NonAdiabatic;
  double xi_omega = 0.1;
  double xi_phi = 0.1;        // unused in the adiabatic modes (phase fixed to 0)
  double omega_t_max = 0.0;   // rad/us
  double omega_c = 0.0;       // square-pulse amplitude, rad/us
  double t_total = 0.4;       // Raman-pulse horizon, us
  int n_steps = 100;

  static PiecewiseConfig defaults(PiecewiseMode m, const PhysicalParams& p) {
    PiecewiseConfig c;
    c.mode = m;
    c.omega_c = p.omega_c_max;  // 2pi * 250 MHz
    switch (m) {
      case PiecewiseMode::AdiabaticI:
        c.xi_omega = 0.025;
        c.xi_phi = 0.0;
        c.omega_t_max = p.omega_gl / 2.5;
        c.t_total = 3.0;
        break;
      case PiecewiseMode::AdiabaticII:
        c.xi_omega = 0.05;
        c.xi_phi = 0.0;
        c.omega_t_max = p.omega_gl / 2.5;
        c.t_total = 2.0;
        break;
      case PiecewiseMode::NonAdiabatic:
        c.xi_omega = 0.1;
        c.xi_phi = 0.1;
        c.omega_t_max = p.omega_gl;
        c.t_total = 0.4;
        break;
    }
    return c;
  }

  bool amplitude_only() const { return mode != PiecewiseMode::NonAdiabatic; }

  void validate() const {
    if (!(xi_omega > 0.0 && xi_omega <= 1.0))
      throw std::invalid_argument("xi_omega must be in (0, 1]");
    if (!(omega_t_max > 0.0 && omega_c > 0.0))
      throw std::invalid_argument("piecewise amplitudes must be positive");
    if (!(t_total > 0.0) || n_steps < 1)
      throw std::invalid_argument("piecewise time grid invalid");
  }
};

/// Result of calibrating the control-atom square pi-pulse by brute-force scan.
struct SquarePulseCalibration {
  double t_pi = 0.0;          // us
  double t_sq = 0.0;          // 2 * t_pi
  double peak_transfer = 0.0; // |1>_c -> |r>_c population at t_pi
};

/// Scan the |1>_c -> |r>_c transfer under a constant square drive and return
/// the duration maximizing the Rydberg population. The two-photon estimate
/// 2*pi*Delta/(Omega_c*Omega_gl) brackets the scan.
inline SquarePulseCalibration square_pi_schedule(const PhysicalParams& p,
                                                 double omega_c = -1.0,
                                                 double min_peak = 0.99) {
  if (omega_c < 0.0) omega_c = p.omega_c_max;
  const double analytic = 2.0 * M_PI * p.delta / (omega_c * p.omega_gl);
  const double t_max = 1.6 * analytic;
  const double dt_scan = analytic / 2000.0;
  const Mat h = single_atom_hamiltonian(p, AtomRole::Control, omega_c, 0.0);
  const Mat step = expm(liouvillian(h, jump_operators(p, 4)) * dt_scan);
  Eigen::VectorXcd rho = Eigen::VectorXcd::Zero(16);
  rho(kState1 * 5) = 1.0;  // |1><1|
  SquarePulseCalibration cal;
  for (double t = 0.0; t <= t_max; t += dt_scan) {
    const double pr = rho(kStateR * 5).real();
    if (pr > cal.peak_transfer) {
      cal.peak_transfer = pr;
      cal.t_pi = t;
    }
    rho = step * rho;
  }
  if (cal.peak_transfer < min_peak)
    throw std::runtime_error("square-pulse scan failed: peak transfer " +
                             std::to_string(cal.peak_transfer));
  cal.t_sq = 2.0 * cal.t_pi;
  return cal;
}

/// Round-trip error of the lone control atom: square pi-pulse up, idle with
/// only the global field on, square pi-pulse down. Returns 1 minus the
/// population returned to |1>_c.
inline double epsilon_control(const PhysicalParams& p, double idle_time,
                              double omega_c = -1.0) {
  if (idle_time < 0.0) throw std::invalid_argument("idle_time must be >= 0");
  if (omega_c < 0.0) omega_c = p.omega_c_max;
  const SquarePulseCalibration cal = square_pi_schedule(p, omega_c);
  const auto jumps = jump_operators(p, 4);
  const Mat h_on = single_atom_hamiltonian(p, AtomRole::Control, omega_c, 0.0);
  const Mat h_off = single_atom_hamiltonian(p, AtomRole::Control, 0.0, 0.0);
  const Mat u_pi = expm(liouvillian(h_on, jumps) * cal.t_pi);
  Eigen::VectorXcd rho = Eigen::VectorXcd::Zero(16);
  rho(kState1 * 5) = 1.0;
  rho = u_pi * rho;
  if (idle_time > 0.0) rho = expm(liouvillian(h_off, jumps) * idle_time) * rho;
  rho = u_pi * rho;
  return 1.0 - rho(kState1 * 5).real();
}

/// Average fidelity of the full piecewise gate given the two target-channel
/// fidelities and the control-atom round-trip error.
inline double piecewise_f_avg(double f00, double f10, double eps_control) {
  if (f00 < 0.0 || f00 > 1.0 || f10 < 0.0 || f10 > 1.0)
    throw std::invalid_argument("fidelities must lie in [0, 1]");
  return 0.25 * (2.0 * f00 + 2.0 * (f10 - eps_control));
}

struct PiecewiseMetrics {
  double tau_min = 0.0;  // us, cutoff of the target amplitude
  double f00 = 0.0;      // unblocked channel stays in |0>
  double f10 = 0.0;      // blockaded channel transfers to |1>
  double f_t = 0.0;      // (f00 + f10) / 2
  double gamma_e_te = 0.0;
  double gamma_r_tr = 0.0;
};

/// Replay a target-atom schedule deterministically through both piecewise
/// channels up to stop_at (default: the full horizon) and report fidelities.
inline PiecewiseMetrics evaluate_piecewise_schedule(const PulseSchedule& s,
                                                    const PhysicalParams& base,
                                                    const PiecewiseConfig& cfg,
                                                    double stop_at = -1.0,
                                                    double cutoff_threshold = 0.02) {
  cfg.validate();
  PhysicalParams p = base;
  p.omega_t_max = cfg.omega_t_max;
  p.xi_omega = cfg.xi_omega;
  p.xi_phi = std::max(cfg.xi_phi, 1e-6);
  p.t_total = cfg.t_total;
  p.n_steps = cfg.n_steps;
  s.validate(p);
  if (stop_at < 0.0) stop_at = p.t_total;
  if (stop_at > p.t_total + 1e-12)
    throw std::invalid_argument("stop_at exceeds the schedule horizon");
  const int n_run = static_cast<int>(std::lround(stop_at / p.dt()));

  const Mat dissipator = liouvillian(Mat::Zero(4, 4), jump_operators(p, 4));
  Eigen::MatrixXcd weights = Eigen::MatrixXcd::Zero(2, 16);
  weights(0, kStateE * 5) = 1.0;
  weights(1, kStateR * 5) = 1.0;
  Eigen::VectorXcd rho00 = Eigen::VectorXcd::Zero(16);
  Eigen::VectorXcd rho10 = Eigen::VectorXcd::Zero(16);
  rho00(kState0 * 5) = 1.0;
  rho10(kState0 * 5) = 1.0;

  PiecewiseMetrics m;
  std::unique_ptr<StepPropagator> prop00, prop10;
  Cplx cached{0.0, 0.0};
  for (int i = 0; i < n_run; ++i) {
    const Cplx drive = s.omega_t[i] * std::exp(Cplx(0.0, s.phi_t[i]));
    if (!prop00 || drive != cached) {
      const Mat ht = single_atom_hamiltonian(p, AtomRole::Target, s.omega_t[i], s.phi_t[i]);
      Mat ht_blocked = ht;
      ht_blocked(kStateR, kStateR) += p.v0;
      prop00 = std::make_unique<StepPropagator>(liouvillian_hamiltonian_part(ht) + dissipator,
                                                weights, p.dt());
      prop10 = std::make_unique<StepPropagator>(
          liouvillian_hamiltonian_part(ht_blocked) + dissipator, weights, p.dt());
      cached = drive;
    }
    double e0 = 0, r0 = 0, e1 = 0, r1 = 0;
    prop00->apply(rho00, e0, r0);
    prop10->apply(rho10, e1, r1);
    m.gamma_e_te += p.gamma_e * (e0 + e1) / 2.0;
    m.gamma_r_tr += p.gamma_r * (r0 + r1) / 2.0;
  }
  int k = p.n_steps;
  for (int i = p.n_steps - 1; i >= 0; --i) {
    if (s.omega_t[i] / cfg.omega_t_max < cutoff_threshold)
      k = i;
    else
      break;
  }
  m.tau_min = k * p.dt();
  m.f00 = rho00(kState0 * 5).real();
  m.f10 = rho10(kState1 * 5).real();
  m.f_t = 0.5 * (m.f00 + m.f10);
  return m;
}

/// Target-atom MDP of the sequential protocols. Two 4-dim channels share the
/// target initial state |0>: the unblocked one evolves under the bare Raman
/// Hamiltonian and must stay, the blockaded one carries an extra V0 shift on
/// |r> and must transfer to |1>.
class PiecewiseEnv : public EnvBase {
 public:
  PiecewiseEnv(const PhysicalParams& base, const PiecewiseConfig& cfg,
               double cutoff_threshold = 0.02)
      : p_(base), cfg_(cfg), cutoff_threshold_(cutoff_threshold) {
    cfg_.validate();
    p_.omega_t_max = cfg_.omega_t_max;
    p_.xi_omega = cfg_.xi_omega;
    p_.xi_phi = cfg_.xi_phi;
    p_.t_total = cfg_.t_total;
    p_.n_steps = cfg_.n_steps;
    dissipator_ = liouvillian(Mat::Zero(4, 4), jump_operators(p_, 4));
    weights_ = Eigen::MatrixXcd::Zero(2, 16);
    weights_(0, kStateE * 5) = 1.0;
    weights_(1, kStateR * 5) = 1.0;
    reset();
  }

  Eigen::VectorXd reset() override {
    rho00_ = Eigen::VectorXcd::Zero(16);
    rho10_ = Eigen::VectorXcd::Zero(16);
    rho00_(kState0 * 5) = 1.0;
    rho10_(kState0 * 5) = 1.0;
    omega_t_ = phi_t_ = 0.0;
    step_index_ = 0;
    done_ = false;
    t_e_ = t_r_ = 0.0;
    schedule_ = PulseSchedule(p_.n_steps);
    f_t_history_.assign(1, f_t());
    have_cached_ = false;
    return observation();
  }

  std::tuple<Eigen::VectorXd, double, bool> step(const Eigen::VectorXd& action) override {
    if (done_) throw std::logic_error("step() called on a finished episode");
    if (action.size() != action_dim())
      throw std::invalid_argument("piecewise action dimension mismatch");
    const double a0 = std::clamp(action(0), -1.0, 1.0);
    omega_t_ = std::clamp(omega_t_ + a0 * cfg_.xi_omega * cfg_.omega_t_max, 0.0,
                          cfg_.omega_t_max);
    if (!cfg_.amplitude_only()) {
      const double a1 = std::clamp(action(1), -1.0, 1.0);
      phi_t_ = wrap_phase(phi_t_ + a1 * cfg_.xi_phi * M_PI);
    }
    schedule_.omega_t[step_index_] = omega_t_;
    schedule_.phi_t[step_index_] = phi_t_;

    const Cplx drive = omega_t_ * std::exp(Cplx(0.0, phi_t_));
    if (!have_cached_ || drive != cached_drive_) {
      const Mat ht = single_atom_hamiltonian(p_, AtomRole::Target, omega_t_, phi_t_);
      Mat ht_blocked = ht;
      ht_blocked(kStateR, kStateR) += p_.v0;
      prop00_ = std::make_unique<StepPropagator>(
          liouvillian_hamiltonian_part(ht) + dissipator_, weights_, p_.dt());
      prop10_ = std::make_unique<StepPropagator>(
          liouvillian_hamiltonian_part(ht_blocked) + dissipator_, weights_, p_.dt());
      cached_drive_ = drive;
      have_cached_ = true;
    }
    double e00 = 0, r00 = 0, e10 = 0, r10 = 0;
    prop00_->apply(rho00_, e00, r00);
    prop10_->apply(rho10_, e10, r10);
    step_int_e_ = (e00 + e10) / 2.0;
    step_int_r_ = (r00 + r10) / 2.0;
    t_e_ += step_int_e_;
    t_r_ += step_int_r_;

    ++step_index_;
    done_ = step_index_ == p_.n_steps;
    double reward = -(p_.eta_e * p_.gamma_e * step_int_e_ + p_.eta_r * p_.gamma_r * step_int_r_);
    if (done_) reward += -std::log10(1.0 - f_t());
    f_t_history_.push_back(f_t());
    return {observation(), reward, done_};
  }

  Eigen::VectorXd observation() const {
    Eigen::VectorXd obs(obs_dim());
    for (int i = 0; i < 4; ++i) obs(i) = rho00_(i * 5).real();
    for (int i = 0; i < 4; ++i) obs(4 + i) = rho10_(i * 5).real();
    obs(8) = omega_t_ / cfg_.omega_t_max;
    if (!cfg_.amplitude_only()) obs(9) = phi_t_ / M_PI;
    return obs;
  }

  /// Target fidelity (F00 + F10)/2: stay in |0> unblocked, reach |1> blockaded.
  double f_t() const {
    return 0.5 * (rho00_(kState0 * 5).real() + rho10_(kState1 * 5).real());
  }

  int obs_dim() const override { return cfg_.amplitude_only() ? 9 : 10; }
  int action_dim() const override { return cfg_.amplitude_only() ? 1 : 2; }
  int horizon() const override { return p_.n_steps; }
  const PulseSchedule& schedule() const override { return schedule_; }
  double grid_dt() const override { return p_.dt(); }

  double tau_min() const override {
    int k = p_.n_steps;
    for (int i = p_.n_steps - 1; i >= 0; --i) {
      if (schedule_.omega_t[i] / cfg_.omega_t_max < cutoff_threshold_)
        k = i;
      else
        break;
    }
    return k * p_.dt();
  }

  double fidelity_at_cutoff() const override {
    const int k = static_cast<int>(std::lround(tau_min() / p_.dt()));
    return f_t_history_.at(std::min<size_t>(k, f_t_history_.size() - 1));
  }

  const PhysicalParams& params() const { return p_; }
  const PiecewiseConfig& config() const { return cfg_; }
  double t_e() const { return t_e_; }
  double t_r() const { return t_r_; }
  Mat rho00() const { return Eigen::Map<const Mat>(rho00_.data(), 4, 4); }
  Mat rho10() const { return Eigen::Map<const Mat>(rho10_.data(), 4, 4); }

 private:
  PhysicalParams p_;
  PiecewiseConfig cfg_;
  double cutoff_threshold_;
  Mat dissipator_;
  Eigen::MatrixXcd weights_;
  std::unique_ptr<StepPropagator> prop00_, prop10_;
  Cplx cached_drive_{0.0, 0.0};
  bool have_cached_ = false;
  Eigen::VectorXcd rho00_, rho10_;
  PulseSchedule schedule_;
  double omega_t_ = 0.0, phi_t_ = 0.0;
  int step_index_ = 0;
  bool done_ = false;
  double t_e_ = 0.0, t_r_ = 0.0, step_int_e_ = 0.0, step_int_r_ = 0.0;
  std::vector<double> f_t_history_;
};

}  // namespace rydgate
