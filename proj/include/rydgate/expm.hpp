#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "rydgate/hamiltonian.hpp"

namespace rydgate {
namespace detail {

inline void pade3(const Mat& a, const Mat& a2, Mat& u, Mat& v) {
  const double b[] = {120., 60., 12., 1.};
  const Mat id = Mat::Identity(a.rows(), a.cols());
  u.noalias() = a * (b[3] * a2 + b[1] * id);
  v = b[2] * a2 + b[0] * id;
}

inline void pade5(const Mat& a, const Mat& a2, const Mat& a4, Mat& u, Mat& v) {
  const double b[] = {30240., 15120., 3360., 420., 30., 1.};
  const Mat id = Mat::Identity(a.rows(), a.cols());
  u.noalias() = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
  v = b[4] * a4 + b[2] * a2 + b[0] * id;
}

inline void pade7(const Mat& a, const Mat& a2, const Mat& a4, const Mat& a6,
                  Mat& u, Mat& v) {
  const double b[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
  const Mat id = Mat::Identity(a.rows(), a.cols());
  u.noalias() = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

inline void pade13(const Mat& a, const Mat& a2, const Mat& a4, const Mat& a6,
                   Mat& u, Mat& v) {
  const double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                      1187353796428800.,  129060195264000.,   10559470521600.,
                      670442572800.,      33522128640.,       1323241920.,
                      40840800.,          960960.,            16380.,
                      182.,               1.};
  const Mat id = Mat::Identity(a.rows(), a.cols());
  Mat tmp = b[13] * a6 + b[11] * a4 + b[9] * a2;
  Mat w;
  w.noalias() = a6 * tmp;
  w += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  u.noalias() = a * w;
  tmp = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v.noalias() = a6 * tmp;
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace detail

/// Dense matrix exponential by Pade approximation with scaling and squaring
/// (Higham 2005 degree/scale selection, 1-norm based).
inline Mat expm(const Mat& m) {
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  Mat a = m;
  int squarings = 0;
  Mat u, v;
  if (norm < 1.495585217958292e-2) {
    const Mat a2 = a * a;
    detail::pade3(a, a2, u, v);
  } else if (norm < 2.539398330063230e-1) {
    const Mat a2 = a * a;
    detail::pade5(a, a2, a2 * a2, u, v);
  } else if (norm < 9.504178996162932e-1) {
    const Mat a2 = a * a;
    const Mat a4 = a2 * a2;
    detail::pade7(a, a2, a4, a4 * a2, u, v);
  } else {
    const double theta13 = 5.371920351148152;
    if (norm > theta13) {
      squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
      a /= std::pow(2.0, squarings);
    }
    const Mat a2 = a * a;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    detail::pade13(a, a2, a4, a6, u, v);
  }
  Mat numer = v + u;
  Mat denom = v - u;
  Mat r = denom.partialPivLu().solve(numer);
  for (int i = 0; i < squarings; ++i) r = (r * r).eval();
  return r;
}

}  // namespace rydgate
