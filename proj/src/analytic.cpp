#include "fpt/analytic.hpp"

namespace fpt {

BesselTable::BesselTable(int n) {
  zeros_.reserve(n);
  j1_.reserve(n);
  for (int k = 1; k <= n; ++k) {
    const long double z = bessel_j0_zero<long double>(k);
    zeros_.push_back(static_cast<double>(z));
    j1_.push_back(static_cast<double>(bessel_j1<long double>(z)));
  }
}

const BesselTable& BesselTable::standard() {
  static const BesselTable table(400);
  return table;
}

namespace {

template <typename Term>
double disk_series(double t, const BesselTable& table, Term term) {
  if (!(t > 0.0)) throw std::invalid_argument("disk series needs t > 0");
  double sum = 0.0;
  for (int k = 0; k < table.size(); ++k) {
    const double value = term(k);
    sum += value;
    if (k + 1 < table.size() && std::abs(term(k + 1)) < 1e-14) return sum;
  }
  throw MoreTermsNeeded("disk series: t below the floor supported by the Bessel table");
}

}  // namespace

double disk_survival(double R, double t, const BesselTable& table) {
  return disk_series(t, table, [&](int k) {
    const double j = table.zero(k);
    return 2.0 / (j * table.j1_at_zero(k)) * std::exp(-j * j * t / (2.0 * R * R));
  });
}

double disk_fpt_density(double R, double t, const BesselTable& table) {
  return disk_series(t, table, [&](int k) {
    const double j = table.zero(k);
    return j / (R * R * table.j1_at_zero(k)) * std::exp(-j * j * t / (2.0 * R * R));
  });
}

double halfplane_joint_density(double y0, double x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("halfplane_joint_density needs t > 0");
  return y0 / (kTwoPi * t * t) * std::exp(-(x * x + y0 * y0) / (2.0 * t));
}

double halfplane_level_density(double y0, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("halfplane_level_density needs t > 0");
  return y0 / (t * std::sqrt(kTwoPi * t)) * std::exp(-y0 * y0 / (2.0 * t));
}

}  // namespace fpt
