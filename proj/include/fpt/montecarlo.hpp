#ifndef FPT_MONTECARLO_HPP
#define FPT_MONTECARLO_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "fpt/geometry.hpp"

namespace fpt {

struct McConfig {
  int paths = 10000;
  double step = 1e-4;  // delta, variance per coordinate of one increment
  std::uint64_t seed = 1;
  bool bridge_correction = false;
  double horizon = 1.0;
  int threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  int steps() const;
};

struct McHit {
  int path = 0;
  double time = 0.0;  // midpoint of the straddling step
  double u = 0.0;     // reference parameter of the nearest boundary point
};

struct McResult {
  int paths = 0;
  int survivors = 0;
  std::vector<McHit> hits;  // ordered by path index

  int hit_count() const { return static_cast<int>(hits.size()); }
  /// Hit times in increasing order.
  std::vector<double> sorted_times() const;
  /// Fraction of all paths that hit by time t.
  double ecdf(double t) const;
  /// Half-width of the two-sided DKW band over `paths` samples at level 1 - alpha.
  double dkw_band(double alpha = 0.01) const;
};

/// Euler paths of standard Brownian motion from r0 at t = 0 until they leave Omega_t or reach
/// the horizon. Path i draws from its own generator seeded by (seed, i), so the result does not
/// depend on the thread count.
McResult simulate(const MovingDomain& domain, const Vec2& r0, const McConfig& cfg);

struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;  // DKW 99% band
  int samples = 0;
  bool pass = false;
};

/// sup_t |F_hat(t) - model(t)| over the hit times, both one-sided limits of F_hat.
/// Throws TooFewHits below 1000 hits.
KsResult ks_compare(const McResult& mc, const std::function<double(double)>& model_cdf);

struct AccessibilityRow {
  double offset = 0.0;
  double survival = 0.0;  // estimate of P[tau > s]
  double std_error = 0.0;
};

/// P[tau > s] for starts xi0 - h n at boundary parameter u0 of Omega_0, one row per offset.
std::vector<AccessibilityRow> accessibility_probe(const MovingDomain& domain, double u0,
                                                  const std::vector<double>& offsets, double s, McConfig cfg);

}  // namespace fpt

#endif  // FPT_MONTECARLO_HPP
