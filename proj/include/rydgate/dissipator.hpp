#pragma once

#include <stdexcept>
#include <vector>

#include "rydgate/hamiltonian.hpp"

namespace rydgate {

/// Jump operators sqrt(gamma_k/2) |j><k| for k in {e,r}, j in {0,1}, per atom.
/// dim=4 returns the 4 single-atom operators; dim=16 returns 8 operators, each
/// acting on one atom's tensor factor.
inline std::vector<Mat> jump_operators(const PhysicalParams& p, int dim) {
  std::vector<Mat> single;
  for (int k : {kStateE, kStateR}) {
    const double rate = (k == kStateE) ? p.gamma_e : p.gamma_r;
    for (int j : {kState0, kState1}) {
      Mat l = Mat::Zero(4, 4);
      l(j, k) = std::sqrt(rate / 2.0);
      single.push_back(l);
    }
  }
  if (dim == 4) return single;
  if (dim != 16) throw std::invalid_argument("jump_operators: dim must be 4 or 16");
  std::vector<Mat> out;
  const Mat id = Mat::Identity(4, 4);
  for (const Mat& l : single) out.push_back(Eigen::kroneckerProduct(l, id).eval());
  for (const Mat& l : single) out.push_back(Eigen::kroneckerProduct(id, l).eval());
  return out;
}

}  // namespace rydgate
