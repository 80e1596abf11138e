#ifndef FPT_KERNELS_HPP
#define FPT_KERNELS_HPP

// Free-space heat kernel of standard Brownian motion (generator 1/2 Laplacian):
// variance (t - s) per coordinate, so G = (2 pi (t - s))^{-d/2} exp(-|x - r|^2 / (2 (t - s))).

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fpt/common.hpp"

namespace fpt {

struct HeatKernelParams {
  int dimension = 2;
};

namespace detail {

template <typename Scalar>
void require_order(Scalar s, Scalar t) {
  if (!(t > s)) throw InvalidTimeOrder("heat kernel needs t > s");
}

template <typename DerivedA, typename DerivedB>
void require_dim(const HeatKernelParams& p, const Eigen::MatrixBase<DerivedA>& a,
                 const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != p.dimension || b.size() != p.dimension)
    throw std::invalid_argument("heat kernel: point dimension does not match params");
}

template <typename Scalar>
Scalar normalisation(int d, Scalar sigma) {
  using std::pow;
  return pow(Scalar(2) * Scalar(kPi) * sigma, -Scalar(d) / Scalar(2));
}

}  // namespace detail

template <typename DerivedR, typename DerivedX>
typename DerivedR::Scalar gauss(const HeatKernelParams& p, const Eigen::MatrixBase<DerivedR>& r,
                                typename DerivedR::Scalar s, const Eigen::MatrixBase<DerivedX>& x,
                                typename DerivedR::Scalar t) {
  using Scalar = typename DerivedR::Scalar;
  using std::exp;
  detail::require_order(s, t);
  detail::require_dim(p, r, x);
  const Scalar sigma = t - s;
  return detail::normalisation(p.dimension, sigma) * exp(-(x - r).squaredNorm() / (Scalar(2) * sigma));
}

template <typename DerivedR, typename DerivedX>
Eigen::Matrix<typename DerivedR::Scalar, Eigen::Dynamic, 1> grad_x_gauss(
    const HeatKernelParams& p, const Eigen::MatrixBase<DerivedR>& r, typename DerivedR::Scalar s,
    const Eigen::MatrixBase<DerivedX>& x, typename DerivedR::Scalar t) {
  const auto g = gauss(p, r, s, x, t);
  return -((x - r) / (t - s)) * g;
}

/// Second derivative d^2 G / dx_i^2.
template <typename DerivedR, typename DerivedX>
typename DerivedR::Scalar hessian_diag_gauss(const HeatKernelParams& p, const Eigen::MatrixBase<DerivedR>& r,
                                             typename DerivedR::Scalar s, const Eigen::MatrixBase<DerivedX>& x,
                                             typename DerivedR::Scalar t, int i) {
  const auto sigma = t - s;
  const auto dx = x(i) - r(i);
  return (dx * dx / (sigma * sigma) - 1 / sigma) * gauss(p, r, s, x, t);
}

/// K(x,t;y,s) = <n, grad_x G(x,t;y,s)>, n the outward unit normal at (x, t).
template <typename DerivedX, typename DerivedN, typename DerivedY>
typename DerivedX::Scalar normal_kernel(const HeatKernelParams& p, const Eigen::MatrixBase<DerivedX>& x,
                                        typename DerivedX::Scalar t, const Eigen::MatrixBase<DerivedN>& n,
                                        const Eigen::MatrixBase<DerivedY>& y, typename DerivedX::Scalar s) {
  using std::abs;
  if (abs(n.norm() - 1) > 1e-10) throw std::invalid_argument("normal_kernel: normal is not a unit vector");
  const auto g = gauss(p, y, s, x, t);
  return -((x - y).dot(n) / (t - s)) * g;
}

/// Normal-derivative kernel evaluated at the interior offset point x - h n.
template <typename DerivedX, typename DerivedN, typename DerivedY>
typename DerivedX::Scalar offset_normal_kernel(const HeatKernelParams& p, const Eigen::MatrixBase<DerivedX>& x,
                                               typename DerivedX::Scalar t, const Eigen::MatrixBase<DerivedN>& n,
                                               typename DerivedX::Scalar h, const Eigen::MatrixBase<DerivedY>& y,
                                               typename DerivedX::Scalar s) {
  if (!(h > 0)) throw std::invalid_argument("offset_normal_kernel: offset must be positive");
  const auto shifted = (x - h * n).eval();
  const auto g = gauss(p, y, s, shifted, t);
  return -((shifted - y).dot(n) / (t - s)) * g;
}

/// Batched K for one target (x, t, n) against a block of planar sources at a common time s.
/// Entries underflow to exact zero far from the target.
template <typename DerivedY>
Eigen::ArrayXd normal_kernel_row(const Vec2& x, double t, const Vec2& n, const Eigen::MatrixBase<DerivedY>& ys,
                                 double s) {
  const double sigma = t - s;
  const Eigen::ArrayXd dx = x(0) - ys.row(0).array().transpose();
  const Eigen::ArrayXd dy = x(1) - ys.row(1).array().transpose();
  const double scale = -1.0 / (kTwoPi * sigma * sigma);
  return scale * (n(0) * dx + n(1) * dy) * (-(dx.square() + dy.square()) / (2.0 * sigma)).exp();
}

/// Batched planar G for one target against a block of sources at time s.
template <typename DerivedY>
Eigen::ArrayXd gauss_row(const Vec2& x, double t, const Eigen::MatrixBase<DerivedY>& ys, double s) {
  const double sigma = t - s;
  const Eigen::ArrayXd dx = x(0) - ys.row(0).array().transpose();
  const Eigen::ArrayXd dy = x(1) - ys.row(1).array().transpose();
  return (1.0 / (kTwoPi * sigma)) * (-(dx.square() + dy.square()) / (2.0 * sigma)).exp();
}

}  // namespace fpt

#endif  // FPT_KERNELS_HPP
