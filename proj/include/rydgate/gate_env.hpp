#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <tuple>

#include "rydgate/channels.hpp"
#include "rydgate/env_base.hpp"
#include "rydgate/pulse_schedule.hpp"

namespace rydgate {

enum class ActionMode { IU, TU };

/// Earliest time from which both amplitudes stay below threshold * cap for the
/// rest of the schedule. Returns t_total when no such point exists.
inline double detect_cutoff(const PulseSchedule& s, const PhysicalParams& p,
                            double threshold = 0.02) {
  if (!(threshold > 0.0 && threshold <= 0.1))
    throw std::invalid_argument("cutoff threshold must be in (0, 0.1]");
  int k = s.size();
  for (int i = s.size() - 1; i >= 0; --i) {
    if (std::max(s.omega_c[i] / p.omega_c_max, s.omega_t[i] / p.omega_t_max) < threshold)
      k = i;
    else
      break;
  }
  return k * p.dt();
}

/// Episodic MDP around the four-channel simulator. Actions are either
/// incremental updates (IU, bounded by the smoothing coefficients) or direct
/// parameter values (TU). Observation is 24-dim: stay-channel target diagonals,
/// transfer-channel two-atom diagonals, and the previous step's normalized
/// controls.
class GateEnv : public EnvBase {
 public:
  static constexpr int kObsDim = 24;
  static constexpr int kActionDim = 4;

  GateEnv(const PhysicalParams& p, ActionMode mode, double cutoff_threshold = 0.02)
      : p_(p), mode_(mode), cutoff_threshold_(cutoff_threshold), channels_(p) {
    p_.validate();
    reset();
  }

  Eigen::VectorXd reset() override {
    channels_.reset();
    omega_c_ = omega_t_ = phi_c_ = phi_t_ = 0.0;
    step_index_ = 0;
    done_ = false;
    schedule_ = PulseSchedule(p_.n_steps);
    f_avg_history_.assign(1, channels_.f_avg());
    trace_rows_.clear();
    return observation();
  }

  /// Returns (observation, reward, done).
  std::tuple<Eigen::VectorXd, double, bool> step(const Eigen::VectorXd& action) override {
    if (done_) throw std::logic_error("step() called on a finished episode");
    if (action.size() != kActionDim) throw std::invalid_argument("action must be 4-dim");
    apply_action(action);
    schedule_.omega_c[step_index_] = omega_c_;
    schedule_.omega_t[step_index_] = omega_t_;
    schedule_.phi_c[step_index_] = phi_c_;
    schedule_.phi_t[step_index_] = phi_t_;
    channels_.step(omega_c_, omega_t_, phi_c_, phi_t_);
    ++step_index_;
    done_ = step_index_ == p_.n_steps;

    const double penalty = p_.eta_e * p_.gamma_e * channels_.step_int_e() +
                           p_.eta_r * p_.gamma_r * channels_.step_int_r();
    double reward = -penalty;
    if (done_) reward += -std::log10(1.0 - channels_.f_avg());
    f_avg_history_.push_back(channels_.f_avg());
    trace_rows_.push_back({step_index_, step_index_ * p_.dt(), reward, channels_.f_avg(),
                           channels_.step_int_e() / p_.dt(), channels_.step_int_r() / p_.dt()});
    return {observation(), reward, done_};
  }

  Eigen::VectorXd observation() const {
    Eigen::VectorXd obs(kObsDim);
    obs.segment<4>(0) = channels_.stay00_diag();
    obs.segment<16>(4) = channels_.transfer10_diag();
    obs(20) = omega_c_ / p_.omega_c_max;
    obs(21) = omega_t_ / p_.omega_t_max;
    obs(22) = phi_c_ / M_PI;
    obs(23) = phi_t_ / M_PI;
    return obs;
  }

  bool done() const { return done_; }
  int step_index() const { return step_index_; }
  const PulseSchedule& schedule() const override { return schedule_; }
  const PhysicalParams& params() const { return p_; }
  const CnotChannels& channels() const { return channels_; }
  int obs_dim() const override { return kObsDim; }
  int action_dim() const override { return kActionDim; }
  int horizon() const override { return p_.n_steps; }
  double grid_dt() const override { return p_.dt(); }

  double tau_min() const override { return detect_cutoff(schedule_, p_, cutoff_threshold_); }

  /// F_avg recorded at the cutoff step of the episode's own trajectory.
  double f_avg_at_cutoff() const {
    const int k = static_cast<int>(std::lround(tau_min() / p_.dt()));
    return f_avg_history_.at(std::min<size_t>(k, f_avg_history_.size() - 1));
  }

  double fidelity_at_cutoff() const override { return f_avg_at_cutoff(); }

  void write_trace_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "step,t_us,reward,f_avg_running,pop_e_bar,pop_r_bar\n";
    char buf[256];
    for (const auto& r : trace_rows_) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                    r.t, r.reward, r.f_avg, r.pop_e, r.pop_r);
      out << buf;
    }
  }

 private:
  void apply_action(const Eigen::VectorXd& raw) {
    Eigen::Vector4d a = raw.cwiseMax(-1.0).cwiseMin(1.0);
    if (mode_ == ActionMode::IU) {
      omega_c_ = std::clamp(omega_c_ + a(0) * p_.xi_omega * p_.omega_c_max, 0.0, p_.omega_c_max);
      omega_t_ = std::clamp(omega_t_ + a(1) * p_.xi_omega * p_.omega_t_max, 0.0, p_.omega_t_max);
      phi_c_ = wrap_phase(phi_c_ + a(2) * p_.xi_phi * M_PI);
      phi_t_ = wrap_phase(phi_t_ + a(3) * p_.xi_phi * M_PI);
    } else {
      omega_c_ = (a(0) + 1.0) / 2.0 * p_.omega_c_max;
      omega_t_ = (a(1) + 1.0) / 2.0 * p_.omega_t_max;
      phi_c_ = wrap_phase(a(2) * M_PI);
      phi_t_ = wrap_phase(a(3) * M_PI);
    }
  }

  struct TraceRow {
    int step;
    double t, reward, f_avg, pop_e, pop_r;
  };

  PhysicalParams p_;
  ActionMode mode_;
  double cutoff_threshold_;
  CnotChannels channels_;
  PulseSchedule schedule_;
  double omega_c_ = 0.0, omega_t_ = 0.0, phi_c_ = 0.0, phi_t_ = 0.0;
  int step_index_ = 0;
  bool done_ = false;
  std::vector<double> f_avg_history_;
  std::vector<TraceRow> trace_rows_;
};

/// Replay a schedule deterministically up to stop_at (truncated at a step
/// boundary) and report gate metrics. v and doppler allow thermal analysis.
inline GateMetrics evaluate_schedule(const PulseSchedule& s, const PhysicalParams& p,
                                     double stop_at = -1.0, double v = -1.0,
                                     double doppler = 0.0, double cutoff_threshold = 0.02) {
  s.validate(p);
  if (stop_at < 0.0) stop_at = p.t_total;
  if (stop_at > p.t_total + 1e-12)
    throw std::invalid_argument("stop_at exceeds the schedule horizon");
  const int n_run = static_cast<int>(std::lround(stop_at / p.dt()));
  CnotChannels ch(p, v, doppler);
  double reward_total = 0.0;
  for (int i = 0; i < n_run; ++i) {
    ch.step(s.omega_c[i], s.omega_t[i], s.phi_c[i], s.phi_t[i]);
    reward_total -= p.eta_e * p.gamma_e * ch.step_int_e() + p.eta_r * p.gamma_r * ch.step_int_r();
  }
  GateMetrics m;
  m.tau_min = detect_cutoff(s, p, cutoff_threshold);
  m.f_channel = ch.channel_fidelities();
  m.f_avg = ch.f_avg();
  m.gamma_e_te = p.gamma_e * ch.t_e();
  m.gamma_r_tr = p.gamma_r * ch.t_r();
  m.reward_total = reward_total + (n_run == p.n_steps ? -std::log10(1.0 - m.f_avg) : 0.0);
  return m;
}

}  // namespace rydgate
