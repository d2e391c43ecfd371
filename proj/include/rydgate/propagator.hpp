#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <stdexcept>
#include <vector>

#include "rydgate/dissipator.hpp"
#include "rydgate/expm.hpp"
#include "rydgate/hamiltonian.hpp"

namespace rydgate {

/// Lindblad generator as a dense superoperator on column-major vec(rho).
/// L[rho] = -i[H, rho] + sum_j (L_j rho L_j^+ - 1/2 {L_j^+ L_j, rho}).
inline Mat liouvillian(const Mat& h, const std::vector<Mat>& jumps) {
  const int d = static_cast<int>(h.rows());
  const Mat id = Mat::Identity(d, d);
  const Cplx mi(0.0, -1.0);
  Mat l = mi * (Eigen::kroneckerProduct(id, h).eval() -
                Eigen::kroneckerProduct(h.transpose(), id).eval());
  Mat acc = Mat::Zero(d, d);
  for (const Mat& lj : jumps) {
    l += Eigen::kroneckerProduct(lj.conjugate(), lj);
    acc.noalias() += lj.adjoint() * lj;
  }
  l -= 0.5 * (Eigen::kroneckerProduct(id, acc).eval() +
              Eigen::kroneckerProduct(acc.transpose(), id).eval());
  return l;
}

/// Coherent-only variant (jumps enter the anti-commutator but not the refill).
inline Mat liouvillian_hamiltonian_part(const Mat& h) {
  const int d = static_cast<int>(h.rows());
  const Mat id = Mat::Identity(d, d);
  const Cplx mi(0.0, -1.0);
  return mi * (Eigen::kroneckerProduct(id, h).eval() -
               Eigen::kroneckerProduct(h.transpose(), id).eval());
}

/// Exact one-step propagator for a constant-control interval. The generator is
/// augmented with accumulator rows (Van Loan block form) so the step also
/// yields the exact time integrals of the |e> and |r> populations.
class StepPropagator {
 public:
  /// weight_rows is 2 x n: row 0 weights for n_e, row 1 for n_r, acting on the
  /// (possibly sector-restricted) vec(rho) coordinates.
  StepPropagator(const Mat& generator, const Eigen::MatrixXcd& weight_rows, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    const int n = static_cast<int>(generator.rows());
    Mat aug = Mat::Zero(n + 2, n + 2);
    aug.topLeftCorner(n, n) = generator * dt;
    aug.block(n, 0, 2, n) = weight_rows * dt;
    Mat e = expm(aug);
    step_ = e.topLeftCorner(n, n);
    integ_ = e.block(n, 0, 2, n);
  }

  /// Advance vec(rho) by one step; adds the step's exact population integrals.
  void apply(Eigen::VectorXcd& state, double& int_e, double& int_r) const {
    Eigen::Vector2cd integrals = integ_ * state;
    state = (step_ * state).eval();
    int_e += integrals(0).real();
    int_r += integrals(1).real();
  }

  const Mat& step_matrix() const { return step_; }

 private:
  Mat step_;
  Eigen::MatrixXcd integ_;
};

/// Index set of vec(rho) coordinates whose row and column both lie inside the
/// subspace reachable from a control atom prepared in |1>: control factor in
/// {1,e,r} for both indices, or exactly |0> for both (populated by decay).
/// Coherences between the two sectors are never generated and are dropped.
inline std::vector<int> transfer_sector_indices() {
  std::vector<int> idx;
  auto in_a = [](int hilbert) { return hilbert / 4 != 0; };
  for (int col = 0; col < 16; ++col)
    for (int row = 0; row < 16; ++row)
      if ((in_a(row) && in_a(col)) || (row / 4 == 0 && col / 4 == 0))
        idx.push_back(row + 16 * col);
  return idx;
}

inline Mat restrict_matrix(const Mat& m, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Mat out(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = m(idx[i], idx[j]);
  return out;
}

inline Eigen::MatrixXcd restrict_cols(const Eigen::MatrixXcd& m, const std::vector<int>& idx) {
  Eigen::MatrixXcd out(m.rows(), idx.size());
  for (size_t j = 0; j < idx.size(); ++j) out.col(j) = m.col(idx[j]);
  return out;
}

}  // namespace rydgate
