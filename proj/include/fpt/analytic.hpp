#ifndef FPT_ANALYTIC_HPP
#define FPT_ANALYTIC_HPP

#include <cmath>
#include <vector>

#include "fpt/common.hpp"

namespace fpt {

namespace detail {

template <typename Scalar>
Scalar bessel_series(int order, Scalar x) {
  // sum_k (-1)^k (x/2)^(2k+order) / (k! (k+order)!)
  const Scalar q = x * x / Scalar(4);
  Scalar term = order == 0 ? Scalar(1) : x / Scalar(2);
  Scalar sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (Scalar(k) * Scalar(k + order));
    sum += term;
    if (std::abs(term) < std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3)) break;
  }
  return sum;
}

template <typename Scalar>
Scalar bessel_hankel(int order, Scalar x) {
  // J_nu(x) ~ sqrt(2 / (pi x)) (P cos chi - Q sin chi), chi = x - (nu/2 + 1/4) pi,
  // summed until the terms stop decreasing.
  const Scalar mu = Scalar(4 * order * order);
  const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  Scalar p = 1, q = 0;
  Scalar term = 1;
  Scalar last = std::numeric_limits<Scalar>::infinity();
  for (int k = 1; k < 60; ++k) {
    const Scalar odd = Scalar(2 * k - 1);
    term *= (mu - odd * odd) / (Scalar(k) * Scalar(8) * x);
    if (std::abs(term) >= last) break;
    last = std::abs(term);
    // k odd feeds Q with sign (-1)^((k-1)/2); k even feeds P with sign (-1)^(k/2)
    if (k % 2 == 1) {
      q += ((k / 2) % 2 == 0 ? term : -term);
    } else {
      p += ((k / 2) % 2 == 0 ? term : -term);
    }
    if (last < std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3)) break;
  }
  const Scalar chi = x - (Scalar(order) / Scalar(2) + Scalar(0.25)) * pi;
  return std::sqrt(Scalar(2) / (pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

/// Bessel function of the first kind, order 0.
template <typename Scalar>
Scalar bessel_j0(Scalar x) {
  x = std::abs(x);
  return x < Scalar(12) ? detail::bessel_series(0, x) : detail::bessel_hankel(0, x);
}

/// Bessel function of the first kind, order 1.
template <typename Scalar>
Scalar bessel_j1(Scalar x) {
  const Scalar ax = std::abs(x);
  const Scalar v = ax < Scalar(12) ? detail::bessel_series(1, ax) : detail::bessel_hankel(1, ax);
  return x < 0 ? -v : v;
}

/// k-th positive zero of J0 (k >= 1): bracket from the McMahon estimate, bisect, polish by Newton.
template <typename Scalar>
Scalar bessel_j0_zero(int k) {
  const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  const Scalar beta = (Scalar(k) - Scalar(0.25)) * pi;
  Scalar lo = beta - Scalar(0.5), hi = beta + Scalar(0.5);
  if (k == 1) {
    lo = Scalar(2);
    hi = Scalar(3);
  }
  Scalar flo = bessel_j0(lo);
  for (int it = 0; it < 60; ++it) {
    const Scalar mid = (lo + hi) / Scalar(2);
    const Scalar fmid = bessel_j0(mid);
    if ((fmid < 0) == (flo < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  Scalar x = (lo + hi) / Scalar(2);
  for (int it = 0; it < 3; ++it) x += bessel_j0(x) / bessel_j1(x);  // J0' = -J1
  return x;
}

/// Zeros j_{0,k} of J0 and the values J1(j_{0,k}).
class BesselTable {
 public:
  explicit BesselTable(int n = 400);

  int size() const { return static_cast<int>(zeros_.size()); }
  double zero(int k) const { return zeros_[k]; }
  double j1_at_zero(int k) const { return j1_[k]; }

  static const BesselTable& standard();

 private:
  std::vector<double> zeros_;
  std::vector<double> j1_;
};

/// P[tau > t] for Brownian motion started at the centre of a static disk of radius R.
double disk_survival(double R, double t, const BesselTable& table = BesselTable::standard());
/// Exit-time density f = -dS/dt for the same problem.
double disk_fpt_density(double R, double t, const BesselTable& table = BesselTable::standard());

/// Joint density in (x, t) of the first hit of the line {y = 0} from (0, y0).
double halfplane_joint_density(double y0, double x, double t);
/// Density in t of the first hit of the line from height y0.
double halfplane_level_density(double y0, double t);

}  // namespace fpt

#endif  // FPT_ANALYTIC_HPP
