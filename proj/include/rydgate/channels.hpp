#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "rydgate/density_matrix.hpp"
#include "rydgate/propagator.hpp"

namespace rydgate {

/// One Lindblad step with constant controls over dt, full-space reference path.
inline Mat propagate_step(const Mat& rho, const Mat& h, const std::vector<Mat>& jumps,
                          double dt) {
  if (hermiticity_error(h) > 1e-9 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("propagate_step: Hamiltonian is not Hermitian");
  const int d = static_cast<int>(h.rows());
  Mat e = expm(liouvillian(h, jumps) * dt);
  Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho.data(), d * d);
  Eigen::VectorXcd w = e * v;
  return Eigen::Map<const Mat>(w.data(), d, d);
}

/// Fidelity against a pure computational basis state after projecting rho onto
/// the computational subspace without renormalizing. For a pure ideal state
/// this is <psi|rho_com|psi>, i.e. a single diagonal entry.
inline double state_fidelity(const Mat& rho, int ideal_index) {
  if (ideal_index < 0 || ideal_index >= rho.rows())
    throw std::invalid_argument("state_fidelity: index out of range");
  return rho(ideal_index, ideal_index).real();
}

struct GateMetrics {
  double tau_min = 0.0;
  double f_avg = 0.0;
  std::array<double, 4> f_channel{};  // F00, F01, F10, F11
  double gamma_e_te = 0.0;
  double gamma_r_tr = 0.0;
  double reward_total = 0.0;
};

/// The four computational-basis channels of the CNOT under synchronous
/// controls. Stay channels (control a ground-state spectator) evolve in the
/// 4-dim target subspace; transfer channels evolve in the two-atom space,
/// reduced to the 160 sector coordinates reachable from control |1>.
class CnotChannels {
 public:
  explicit CnotChannels(const PhysicalParams& p, double v = -1.0, double doppler_c = 0.0,
                        double doppler_t = std::numeric_limits<double>::quiet_NaN())
      : p_(p), v_(v < 0.0 ? p.v0 : v), doppler_c_(doppler_c),
        doppler_t_(std::isnan(doppler_t) ? doppler_c : doppler_t),
        sector_(transfer_sector_indices()) {
    sector_pos_.assign(256, -1);
    for (size_t k = 0; k < sector_.size(); ++k) sector_pos_[sector_[k]] = static_cast<int>(k);

    const auto jumps4 = jump_operators(p_, 4);
    stay_dissipator_ = liouvillian(Mat::Zero(4, 4), jumps4);
    const auto jumps16 = jump_operators(p_, 16);
    transfer_dissipator_ = restrict_matrix(liouvillian(Mat::Zero(16, 16), jumps16), sector_);

    stay_weights_ = Eigen::MatrixXcd::Zero(2, 16);
    stay_weights_(0, kStateE * 5) = 1.0;
    stay_weights_(1, kStateR * 5) = 1.0;
    Eigen::MatrixXcd wfull = Eigen::MatrixXcd::Zero(2, 256);
    for (int i = 0; i < 16; ++i) {
      wfull(0, i * 17) = (i / 4 == kStateE) + (i % 4 == kStateE);
      wfull(1, i * 17) = (i / 4 == kStateR) + (i % 4 == kStateR);
    }
    transfer_weights_ = restrict_cols(wfull, sector_);
    reset();
  }

  void reset() {
    stay00_ = Eigen::VectorXcd::Zero(16);
    stay01_ = Eigen::VectorXcd::Zero(16);
    stay00_(vec_index(kState0, 4)) = 1.0;  // target |0>
    stay01_(vec_index(kState1, 4)) = 1.0;  // target |1>
    tr10_ = Eigen::VectorXcd::Zero(sector_.size());
    tr11_ = Eigen::VectorXcd::Zero(sector_.size());
    tr10_(sector_pos_[vec_index(4, 16)]) = 1.0;  // |1>_c |0>_t
    tr11_(sector_pos_[vec_index(5, 16)]) = 1.0;  // |1>_c |1>_t
    t_e_ = t_r_ = 0.0;
    step_int_e_ = step_int_r_ = 0.0;
    have_cached_ = false;
  }

  /// Advance all four channels over one control interval of length dt.
  void step(double omega_c, double omega_t, double phi_c, double phi_t) {
    const Cplx drive_c = omega_c * std::exp(Cplx(0.0, phi_c));
    const Cplx drive_t = omega_t * std::exp(Cplx(0.0, phi_t));
    if (!have_cached_ || drive_c != cached_drive_c_ || drive_t != cached_drive_t_) {
      const Mat ht = single_atom_hamiltonian(p_, AtomRole::Target, omega_t, phi_t, doppler_t_);
      stay_prop_ = std::make_unique<StepPropagator>(
          liouvillian_hamiltonian_part(ht) + stay_dissipator_, stay_weights_, p_.dt());
      const Mat h2 =
          two_atom_hamiltonian(p_, omega_c, omega_t, phi_c, phi_t, v_, doppler_c_, doppler_t_);
      transfer_prop_ = std::make_unique<StepPropagator>(
          restrict_matrix(liouvillian_hamiltonian_part(h2), sector_) + transfer_dissipator_,
          transfer_weights_, p_.dt());
      cached_drive_c_ = drive_c;
      cached_drive_t_ = drive_t;
      have_cached_ = true;
    }
    double e00 = 0, r00 = 0, e01 = 0, r01 = 0, e10 = 0, r10 = 0, e11 = 0, r11 = 0;
    stay_prop_->apply(stay00_, e00, r00);
    stay_prop_->apply(stay01_, e01, r01);
    transfer_prop_->apply(tr10_, e10, r10);
    transfer_prop_->apply(tr11_, e11, r11);
    step_int_e_ = (e00 + e01 + e10 + e11) / 4.0;
    step_int_r_ = (r00 + r01 + r10 + r11) / 4.0;
    t_e_ += step_int_e_;
    t_r_ += step_int_r_;
  }

  Eigen::Vector4d stay00_diag() const {
    Eigen::Vector4d d;
    for (int i = 0; i < 4; ++i) d(i) = stay00_(vec_index(i, 4)).real();
    return d;
  }

  Eigen::VectorXd transfer10_diag() const {
    Eigen::VectorXd d(16);
    for (int i = 0; i < 16; ++i) d(i) = tr10_(sector_pos_[vec_index(i, 16)]).real();
    return d;
  }

  /// CNOT truth-table fidelities: |00>->|00>, |01>->|01>, |10>->|11>, |11>->|10>.
  std::array<double, 4> channel_fidelities() const {
    return {stay00_(vec_index(kState0, 4)).real(), stay01_(vec_index(kState1, 4)).real(),
            tr10_(sector_pos_[vec_index(5, 16)]).real(),
            tr11_(sector_pos_[vec_index(4, 16)]).real()};
  }

  double f_avg() const {
    const auto f = channel_fidelities();
    return (f[0] + f[1] + f[2] + f[3]) / 4.0;
  }

  double t_e() const { return t_e_; }
  double t_r() const { return t_r_; }
  double step_int_e() const { return step_int_e_; }
  double step_int_r() const { return step_int_r_; }

  Mat stay00_rho() const { return Eigen::Map<const Mat>(stay00_.data(), 4, 4); }
  Mat stay01_rho() const { return Eigen::Map<const Mat>(stay01_.data(), 4, 4); }
  Mat transfer10_rho() const { return unpack_sector(tr10_); }
  Mat transfer11_rho() const { return unpack_sector(tr11_); }

 private:
  static int vec_index(int hilbert, int dim) { return hilbert * (dim + 1); }

  Mat unpack_sector(const Eigen::VectorXcd& v) const {
    Mat rho = Mat::Zero(16, 16);
    for (size_t k = 0; k < sector_.size(); ++k)
      rho(sector_[k] % 16, sector_[k] / 16) = v(k);
    return rho;
  }

  PhysicalParams p_;
  double v_, doppler_c_, doppler_t_;
  std::vector<int> sector_;
  std::vector<int> sector_pos_;
  Mat stay_dissipator_, transfer_dissipator_;
  Eigen::MatrixXcd stay_weights_, transfer_weights_;
  std::unique_ptr<StepPropagator> stay_prop_, transfer_prop_;
  Cplx cached_drive_c_{0.0, 0.0}, cached_drive_t_{0.0, 0.0};
  bool have_cached_ = false;
  Eigen::VectorXcd stay00_, stay01_, tr10_, tr11_;
  double t_e_ = 0.0, t_r_ = 0.0, step_int_e_ = 0.0, step_int_r_ = 0.0;
};

}  // namespace rydgate
