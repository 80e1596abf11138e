#include "fpt/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "fpt/parallel.hpp"

namespace fpt {

void McConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("montecarlo." + field + ": " + why); };
  if (paths < 1) fail("paths", "must be at least 1");
  if (!(step > 0.0)) fail("step", "must be positive");
  if (!(horizon > 0.0)) fail("horizon", "must be positive");
  if (step > horizon) fail("step", "must not exceed the horizon");
  if (threads < 0) fail("threads", "must be non-negative");
}

int McConfig::steps() const { return static_cast<int>(std::ceil(horizon / step - 1e-9)); }

std::vector<double> McResult::sorted_times() const {
  std::vector<double> t;
  t.reserve(hits.size());
  for (const McHit& h : hits) t.push_back(h.time);
  std::sort(t.begin(), t.end());
  return t;
}

double McResult::ecdf(double t) const {
  int count = 0;
  for (const McHit& h : hits) count += h.time <= t;
  return static_cast<double>(count) / paths;
}

double McResult::dkw_band(double alpha) const { return std::sqrt(std::log(2.0 / alpha) / (2.0 * paths)); }

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// a crossing chance exp(-2 d1 d2 / delta) below exp(-40) is not worth a projection
constexpr double kBridgeCut = 40.0;

struct StepMap {
  AffineMap inverse;        // Omega_t -> reference
  AffineMap forward;        // reference -> Omega_t
  double singular_min = 0;  // smallest singular value of forward.linear
};

// Lower bounds on the reference-frame distance to the curve, tabulated on a cell grid.
// For a cell with centre c: d(z) >= d(c) - |z - c| and d(c) >= (distance from c to the
// nearest of a dense vertex set) - (half the longest arc between neighbouring vertices).
class DistanceBound {
 public:
  explicit DistanceBound(const ReferenceBoundary& ref, int vertices = 4096, int cells = 128) : cells_(cells) {
    Eigen::ArrayXd vx(vertices), vy(vertices);
    for (int i = 0; i < vertices; ++i) {
      const Vec2 p = ref.point(kTwoPi * i / vertices);
      vx(i) = p(0);
      vy(i) = p(1);
    }
    double chord = 0.0;
    for (int i = 0; i < vertices; ++i) {
      const int j = (i + 1) % vertices;
      chord = std::max(chord, std::hypot(vx(j) - vx(i), vy(j) - vy(i)));
    }
    lo_ = Vec2(vx.minCoeff(), vy.minCoeff());
    const Vec2 hi(vx.maxCoeff(), vy.maxCoeff());
    size_ = (hi - lo_) / cells;
    const double half_diag = 0.5 * size_.norm();
    bound_.resize(cells * cells);
    for (int a = 0; a < cells; ++a)
      for (int b = 0; b < cells; ++b) {
        const double cx = lo_(0) + (a + 0.5) * size_(0);
        const double cy = lo_(1) + (b + 0.5) * size_(1);
        const double d = std::sqrt(((vx - cx).square() + (vy - cy).square()).minCoeff());
        bound_[a * cells + b] = std::max(0.0, d - 0.51 * chord - half_diag);
      }
  }

  double operator()(const Vec2& z) const {
    const int a = static_cast<int>(std::floor((z(0) - lo_(0)) / size_(0)));
    const int b = static_cast<int>(std::floor((z(1) - lo_(1)) / size_(1)));
    if (a < 0 || b < 0 || a >= cells_ || b >= cells_) return 0.0;
    return bound_[a * cells_ + b];
  }

 private:
  int cells_;
  Vec2 lo_, size_;
  std::vector<double> bound_;
};

// Physical distance from x to the boundary at one step, through the reference projection.
double boundary_distance(const MovingDomain& domain, const StepMap& map, const Vec2& x, const Vec2& z) {
  const ReferenceProjection proj = domain.project_reference(z);
  return (x - map.forward(domain.boundary().point(proj.u))).norm();
}

}  // namespace

McResult simulate(const MovingDomain& domain, const Vec2& r0, const McConfig& cfg) {
  cfg.validate();
  if (cfg.horizon > domain.horizon() * (1.0 + 1e-12))
    throw ConfigError("montecarlo.horizon: exceeds the domain horizon");
  if (!domain.contains(r0, 0.0)) throw PreconditionError("start point lies outside the initial domain");
  const int n = cfg.steps();
  std::vector<double> times(n + 1);
  std::vector<StepMap> maps(n + 1);
  AffineMap to_t;
  for (int k = 0; k <= n; ++k) {
    times[k] = std::min(k * cfg.step, cfg.horizon);
    if (k > 0) to_t = domain.flow().affine(times[k - 1], times[k]).after(to_t);
    maps[k].forward = to_t;
    maps[k].inverse = to_t.inverse();
    maps[k].singular_min = Eigen::JacobiSVD<Mat2>(to_t.linear).singularValues()(1);
  }

  const DistanceBound bound(domain.boundary());
  auto lower = [&](const Vec2& z) { return std::max(bound(z), domain.reference_distance_lower_bound(z)); };

  std::vector<McHit> record(cfg.paths);
  std::vector<char> hit(cfg.paths, 0);
  parallel_for(cfg.paths, resolve_threads(cfg.threads), [&](int begin, int end) {
    // ziggurat normals; several times faster than the standard library's polar method here
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> uniform;
    for (int i = begin; i < end; ++i) {
      // increments and bridge draws use separate streams, so the paths do not depend on how
      // often the bridge test runs
      const std::uint64_t key = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(i)));
      boost::random::mt19937_64 rng(key);
      boost::random::mt19937_64 bridge_rng(splitmix64(key ^ 0x6a09e667f3bcc909ULL));
      normal.reset();
      Vec2 x = r0;
      double d_prev = -1.0;  // distance at the previous step, < 0 when unknown
      for (int k = 1; k <= n; ++k) {
        const double h = times[k] - times[k - 1];
        const double scale = std::sqrt(h);
        const Vec2 prev = x;
        x(0) += scale * normal(rng);
        x(1) += scale * normal(rng);
        const StepMap& map = maps[k];
        const Vec2 z = map.inverse(x);
        const double when = times[k] - 0.5 * h;
        if (!domain.contains_reference(z)) {
          record[i] = {i, when, domain.project_reference(z).u};
          hit[i] = 1;
          break;
        }
        if (!cfg.bridge_correction) continue;
        const StepMap& before = maps[k - 1];
        const double lb_now = lower(z) * map.singular_min;
        const double lb_prev = d_prev >= 0.0 ? d_prev : lower(before.inverse(prev)) * before.singular_min;
        if (2.0 * lb_now * lb_prev > kBridgeCut * h) {
          d_prev = -1.0;
          continue;
        }
        const double d1 = d_prev >= 0.0 ? d_prev : boundary_distance(domain, before, prev, before.inverse(prev));
        const double d2 = boundary_distance(domain, map, x, z);
        d_prev = d2;
        if (uniform(bridge_rng) < std::exp(-2.0 * d1 * d2 / h)) {
          record[i] = {i, when, domain.project_reference(z).u};
          hit[i] = 1;
          break;
        }
      }
    }
  });

  McResult result;
  result.paths = cfg.paths;
  for (int i = 0; i < cfg.paths; ++i)
    if (hit[i]) result.hits.push_back(record[i]);
  result.survivors = cfg.paths - result.hit_count();
  return result;
}

KsResult ks_compare(const McResult& mc, const std::function<double(double)>& model_cdf) {
  if (mc.hit_count() < 1000)
    throw TooFewHits("KS comparison needs at least 1000 hits, got " + std::to_string(mc.hit_count()));
  const std::vector<double> t = mc.sorted_times();
  const double n = mc.paths;
  KsResult out;
  out.samples = mc.paths;
  for (std::size_t i = 0; i < t.size(); ++i) {
    // skip to the last of a run of equal times
    if (i + 1 < t.size() && t[i + 1] == t[i]) continue;
    const double model = model_cdf(t[i]);
    std::size_t first = i;
    while (first > 0 && t[first - 1] == t[i]) --first;
    out.statistic = std::max({out.statistic, std::abs((i + 1) / n - model), std::abs(first / n - model)});
  }
  out.threshold = mc.dkw_band(0.01);
  out.pass = out.statistic <= out.threshold;
  return out;
}

std::vector<AccessibilityRow> accessibility_probe(const MovingDomain& domain, double u0,
                                                  const std::vector<double>& offsets, double s, McConfig cfg) {
  const ReferenceBoundary& ref = domain.boundary();
  const AffineMap at0 = domain.flow().affine(0.0, 0.0);
  const Vec2 xi0 = at0(ref.point(u0));
  const Vec2 tangent = at0.linear * ref.d1(u0);
  const Vec2 outward = Vec2(tangent(1), -tangent(0)) / tangent.norm();
  cfg.horizon = s;
  std::vector<AccessibilityRow> rows;
  for (double h : offsets) {
    const McResult mc = simulate(domain, xi0 - h * outward, cfg);
    const double p = static_cast<double>(mc.survivors) / mc.paths;
    rows.push_back({h, p, std::sqrt(std::max(p * (1.0 - p), 1e-300) / mc.paths)});
  }
  return rows;
}

}  // namespace fpt
