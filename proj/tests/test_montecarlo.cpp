#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fpt/analytic.hpp"
#include "fpt/montecarlo.hpp"
#include "support.hpp"

using namespace fpt;
using namespace fpt::testing;

namespace {

McConfig mc_config(int paths, double step, double horizon, bool bridge, std::uint64_t seed = 7) {
  McConfig cfg;
  cfg.paths = paths;
  cfg.step = step;
  cfg.horizon = horizon;
  cfg.bridge_correction = bridge;
  cfg.seed = seed;
  return cfg;
}

const McResult& disk_run() {
  static const McResult r = simulate(static_disk(3.0), Vec2::Zero(), mc_config(20000, 4e-4, 3.0, true));
  return r;
}

double median_hit(const McResult& r) {
  std::vector<double> t = r.sorted_times();
  REQUIRE(2 * t.size() > static_cast<std::size_t>(r.paths));
  // the (N/2)-th smallest over all paths; survivors sit above every hit
  return t[static_cast<std::size_t>(r.paths / 2)];
}

}  // namespace

TEST_CASE("Monte Carlo config validation") {
  McConfig cfg = mc_config(10, 1e-3, 1.0, false);
  CHECK_NOTHROW(cfg.validate());
  cfg.paths = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = mc_config(10, -1.0, 1.0, false);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(simulate(static_disk(1.0), Vec2(2.0, 0.0), mc_config(10, 1e-3, 1.0, false)), PreconditionError);
}

TEST_CASE("nothing escapes a huge domain") {
  const McResult r = simulate(static_disk(1.0, 50.0), Vec2::Zero(), mc_config(2000, 1e-2, 1.0, true));
  CHECK(r.survivors == r.paths);
  CHECK(r.hit_count() == 0);
}

TEST_CASE("disk exit times follow the Bessel series") {
  const McResult& r = disk_run();
  CHECK(r.hit_count() + r.survivors == r.paths);
  for (const McHit& h : r.hits) {
    CHECK(h.time > 0.0);
    CHECK(h.time <= 3.0);
  }
  const KsResult ks = ks_compare(r, [](double t) { return 1.0 - disk_survival(1.0, t); });
  CHECK(ks.threshold == doctest::Approx(std::sqrt(std::log(200.0) / 40000.0)));
  CHECK(ks.pass);
}

TEST_CASE("hit locations on the centred disk are uniform") {
  const McResult& r = disk_run();
  std::vector<int> bins(16, 0);
  for (const McHit& h : r.hits) ++bins[std::min(15, static_cast<int>(h.u / kTwoPi * 16))];
  const double expected = static_cast<double>(r.hit_count()) / 16;
  double chi2 = 0.0;
  for (int b : bins) chi2 += (b - expected) * (b - expected) / expected;
  CHECK(chi2 < 30.578);  // chi-square, 15 degrees of freedom, 99%
}

TEST_CASE("Monte Carlo is reproducible") {
  const MovingDomain domain = rotating_ellipse(1.0);
  McConfig cfg = mc_config(3000, 1e-3, 1.0, true, 11);
  const McResult a = simulate(domain, Vec2(0.3, 0.2), cfg);
  const McResult b = simulate(domain, Vec2(0.3, 0.2), cfg);
  cfg.threads = 3;
  const McResult c = simulate(domain, Vec2(0.3, 0.2), cfg);
  REQUIRE(a.hit_count() == b.hit_count());
  REQUIRE(a.hit_count() == c.hit_count());
  for (int i = 0; i < a.hit_count(); ++i) {
    CHECK(a.hits[i].path == b.hits[i].path);
    CHECK(a.hits[i].time == b.hits[i].time);
    CHECK(a.hits[i].u == b.hits[i].u);
    CHECK(a.hits[i].time == c.hits[i].time);
  }
  // another seed: a different sample of the same law
  cfg.seed = 12;
  const McResult d = simulate(domain, Vec2(0.3, 0.2), cfg);
  double gap = 0.0;
  for (double t = 0.0; t <= 1.0; t += 1e-3) gap = std::max(gap, std::abs(a.ecdf(t) - d.ecdf(t)));
  CHECK(gap > 0.0);
  CHECK(gap < 2.0 * a.dkw_band());
}

TEST_CASE("halving the step barely moves the median exit time") {
  const MovingDomain disk = static_disk(3.0);
  for (bool bridge : {false, true}) {
    const double coarse = median_hit(simulate(disk, Vec2::Zero(), mc_config(100000, 2e-3, 3.0, bridge, 3)));
    const double fine = median_hit(simulate(disk, Vec2::Zero(), mc_config(100000, 1e-3, 3.0, bridge, 3)));
    CHECK(std::abs(coarse - fine) < (bridge ? 5e-3 : 2e-2) * fine);
  }
}

TEST_CASE("KS comparison") {
  const McResult& r = disk_run();
  // against its own step function only the left limits at tied hit times differ
  const std::vector<double> times = r.sorted_times();
  std::size_t largest_tie = 1;
  for (std::size_t i = 0, j = 0; i < times.size(); i = j) {
    while (j < times.size() && times[j] == times[i]) ++j;
    largest_tie = std::max(largest_tie, j - i);
  }
  const double n = r.paths;
  auto self = [&](double t) {
    return static_cast<double>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) / n;
  };
  const KsResult same = ks_compare(r, self);
  CHECK(same.statistic <= largest_tie / n + 1e-15);
  const KsResult uniform = ks_compare(r, [](double t) { return t / 3.0; });
  CHECK_FALSE(uniform.pass);
  McResult few = r;
  few.hits.resize(999);
  CHECK_THROWS_AS(ks_compare(few, self), TooFewHits);
}

TEST_CASE("starts near the boundary escape quickly") {
  const MovingDomain disk = static_disk(1.0);
  const double diam = disk.diameter();
  const McConfig cfg = mc_config(4000, 1e-4, 1.0, true, 5);
  const std::vector<AccessibilityRow> deep = accessibility_probe(disk, 0.0, {0.5 * diam}, 1e-3, cfg);
  CHECK(deep[0].survival > 0.999);
  const std::vector<AccessibilityRow> rows =
      accessibility_probe(disk, 0.0, {0.5 * diam, 0.1 * diam, 1e-2 * diam, 1e-3 * diam}, 0.1, cfg);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].survival <= rows[i - 1].survival + 3.0 * std::hypot(rows[i].std_error, rows[i - 1].std_error));
  CHECK(rows.back().survival <= 0.1);
}
