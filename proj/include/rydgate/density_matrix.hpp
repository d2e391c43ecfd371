#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "rydgate/hamiltonian.hpp"

namespace rydgate {

inline double hermiticity_error(const Mat& rho) {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  return es.eigenvalues().minCoeff();
}

/// Validate the physical-state contract: Hermitian to 1e-10, real trace in
/// [0, 1 + 1e-9], minimum eigenvalue >= -1e-8.
inline void check_density_matrix(const Mat& rho, bool with_spectrum = false) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("density matrix not square");
  if (hermiticity_error(rho) > 1e-10)
    throw std::runtime_error("density matrix lost hermiticity");
  const Cplx tr = rho.trace();
  if (std::abs(tr.imag()) > 1e-10 || tr.real() > 1.0 + 1e-9 || tr.real() < -1e-9)
    throw std::runtime_error("density matrix trace out of bounds");
  if (with_spectrum && min_eigenvalue(rho) < -1e-8)
    throw std::runtime_error("density matrix lost positivity");
}

inline Mat basis_state_density(int dim, int index) {
  Mat rho = Mat::Zero(dim, dim);
  rho(index, index) = 1.0;
  return rho;
}

}  // namespace rydgate
