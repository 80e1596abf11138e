#include "fpt/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fpt/kernels.hpp"
#include "fpt/parallel.hpp"
#include "fpt/quadrature.hpp"

namespace fpt {

namespace {

constexpr double kCutoff = 80.0;    // exp(-r^2 / 2 sigma) below exp(-40) is dropped
constexpr double kNearFloor = 1e-7; // smallest sqrt(t - s) resolved by the dyadic panels

// Product weights for q(s) = sqrt(t - s) g(s) linear between knots[0] < ... < knots[L] <= t,
// with q(knots[0]) = 0. Entry i multiplies g(knots[i]); no tail beyond knots[L].
std::vector<double> open_product_weights(const std::vector<double>& knots, double t) {
  auto i0 = [](double a, double b) { return 2.0 * (std::sqrt(b) - std::sqrt(a)); };
  auto i1 = [](double a, double b) { return (2.0 / 3.0) * (b * std::sqrt(b) - a * std::sqrt(a)); };
  const int L = static_cast<int>(knots.size()) - 1;
  std::vector<double> w(knots.size(), 0.0);
  for (int l = 1; l <= L; ++l) {
    const double a = t - knots[l];
    const double b = t - knots[l - 1];
    double weight = (b * i0(a, b) - i1(a, b)) / (b - a);
    if (l < L) {
      const double lo = t - knots[l + 1];
      weight += (i1(lo, a) - lo * i0(lo, a)) / (a - lo);
    }
    w[l] = std::sqrt(a) * weight;
  }
  return w;
}

double smallest_singular_value(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(1);
}

// Coarse density at time s, linear between neighbouring slices.
Eigen::VectorXd density_at(const DensitySolution& sol, double s) {
  const int K = sol.steps();
  if (s <= 0.0) return Eigen::VectorXd::Zero(sol.coarse_nodes);
  int k = std::clamp(static_cast<int>(std::ceil(s / sol.dt() - 1e-12)), 1, K);
  while (k > 1 && sol.times[k - 1] > s) --k;
  while (k < K && sol.times[k] < s) ++k;
  const double a = std::clamp((s - sol.times[k - 1]) / (sol.times[k] - sol.times[k - 1]), 0.0, 1.0);
  return (1.0 - a) * sol.p.col(k - 1) + a * sol.p.col(k);
}

// Map reference -> Omega_s, one RK4 transfer from the nearest earlier slice.
AffineMap map_at(const DensitySolution& sol, double s) {
  int k = std::clamp(static_cast<int>(std::floor(s / sol.dt() + 1e-12)), 0, sol.steps());
  while (k > 0 && sol.times[k] > s) --k;
  if (s - sol.times[k] <= 1e-15) return sol.maps[k];
  return sol.domain.flow().affine(sol.times[k], s).after(sol.maps[k]);
}

}  // namespace

// ---------------------------------------------------------------------------
// LayerPotential

LayerPotential::LayerPotential(const DensitySolution& solution, double t, int near_steps)
    : sol_(solution), t_(t) {
  if (near_steps < 1) throw PreconditionError("layer potential needs near_steps >= 1");
  if (!(t > 0.0) || t > solution.times.back() + 1e-12)
    throw InvalidTimeOrder("layer potential time " + std::to_string(t) + " outside (0, T]");
  if (!sol_.sums) throw PreconditionError("density solution has no slice sums; call refresh()");
  const double dt = sol_.dt();
  const int K = sol_.steps();

  // far zone: slices 0..L with t - t_L >= near_steps dt
  int L = std::min(K, static_cast<int>(std::floor((t - near_steps * dt) / dt + 1e-9)));
  while (L > 0 && t - sol_.times[L] < near_steps * dt - 1e-12) --L;
  L = std::max(L, 0);
  if (L >= 1) {
    std::vector<double> knots(sol_.times.begin(), sol_.times.begin() + L + 1);
    const std::vector<double> w = open_product_weights(knots, t);
    for (int l = 1; l <= L; ++l) {
      if (!sol_.sums->active(l)) continue;
      far_slices_.push_back(l);
      far_weights_.push_back(w[l]);
      far_strides_.push_back(sol_.sums->stride(l, t - sol_.times[l]));
    }
  }

  // near zone: [t_L, t] split at the slice times; the panel touching t is split dyadically in
  // w = sqrt(t - s); Gauss-Legendre in w on every panel
  std::vector<std::pair<double, double>> panels;  // (w_lo, w_hi)
  const double s0 = L >= 1 ? sol_.times[L] : 0.0;
  int m = L;
  while (m + 1 <= K && sol_.times[m + 1] < t - 1e-12) ++m;
  const double s_last = std::max(s0, m >= 0 ? sol_.times[m] : 0.0);
  for (int l = L; l < m; ++l) panels.emplace_back(std::sqrt(t - sol_.times[l + 1]), std::sqrt(t - sol_.times[l]));
  double w_hi = std::sqrt(t - s_last);
  while (w_hi > kNearFloor) {
    panels.emplace_back(0.5 * w_hi, w_hi);
    w_hi *= 0.5;
  }
  const GaussRule rule = gauss_legendre(6);
  const double h = kTwoPi / sol_.coarse_nodes;
  const ReferenceBoundary& ref = sol_.domain.boundary();
  const int samples = 4 * sol_.coarse_nodes;
  Eigen::Matrix2Xd tangents(2, samples);
  for (int i = 0; i < samples; ++i) tangents.col(i) = ref.d1(kTwoPi * i / samples);
  for (const auto& [lo, hi] : panels) {
    for (int q = 0; q < rule.nodes.size(); ++q) {
      const double w = lo + 0.5 * (hi - lo) * (rule.nodes(q) + 1.0);
      NearNode node;
      node.s = t - w * w;
      node.weight = 0.5 * (hi - lo) * rule.weights(q) * 2.0 * w;
      node.map = map_at(sol_, node.s);
      node.inverse = node.map.inverse();
      node.p = density_at(sol_, node.s);
      node.moments = periodic_spline_moments(node.p, h);
      const Eigen::VectorXd speeds = (node.map.linear * tangents).colwise().norm();
      node.speed_min = 0.8 * speeds.minCoeff();
      node.speed_max = 1.2 * speeds.maxCoeff();
      node.singular_min = smallest_singular_value(node.map.linear);
      near_.push_back(std::move(node));
      panel_floor_.push_back(lo);
    }
  }
}

template <typename Acc>
void LayerPotential::near_zone(const Vec2& x, Acc&& accumulate) const {
  const ReferenceBoundary& ref = sol_.domain.boundary();
  const double h = kTwoPi / sol_.coarse_nodes;
  for (std::size_t q = 0; q < near_.size(); ++q) {
    const NearNode& node = near_[q];
    const double sigma = t_ - node.s;
    const Vec2 z = node.inverse(x);
    const double smin = node.singular_min;
    const double bound = sol_.domain.reference_distance_lower_bound(z) * smin;
    if (bound * bound > kCutoff * sigma) continue;
    const ReferenceProjection proj = sol_.domain.project_reference(z);
    const double d_phys = (x - node.map(ref.point(proj.u))).norm();
    if (std::pow(proj.distance * smin, 2) > kCutoff * sigma) continue;
    const double reach = 1.5 * (std::sqrt(kCutoff * sigma) + d_phys) / node.speed_min;
    const double spacing = 0.5 * std::sqrt(sigma) / node.speed_max;
    double u_lo, du;
    int count;
    bool periodic = reach >= kPi;
    if (periodic) {
      count = std::max(8, static_cast<int>(std::ceil(kTwoPi / spacing)));
      du = kTwoPi / count;
      u_lo = 0.0;
    } else {
      count = static_cast<int>(std::ceil(2.0 * reach / spacing)) + 1;
      du = 2.0 * reach / (count - 1);
      u_lo = proj.u - reach;
    }
    const double inv = 1.0 / (2.0 * sigma);
    const double norm = 1.0 / (kTwoPi * sigma);
    for (int i = 0; i < count; ++i) {
      const double u = u_lo + i * du;
      const Vec2 y = node.map(ref.point(u));
      const Vec2 diff = x - y;
      const double r2 = diff.squaredNorm();
      if (r2 * inv > 0.5 * kCutoff) continue;
      const double end = (!periodic && (i == 0 || i == count - 1)) ? 0.5 : 1.0;
      double uu = std::fmod(u, kTwoPi);
      if (uu < 0.0) uu += kTwoPi;
      const double pv = periodic_spline_eval(node.p, node.moments, h, uu);
      const double speed = (node.map.linear * ref.d1(u)).norm();
      accumulate(node.weight * end * du * speed * pv * norm * std::exp(-r2 * inv), diff, sigma);
    }
  }
}

double LayerPotential::value(const Vec2& x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < far_slices_.size(); ++i) {
    const int l = far_slices_[i];
    acc += far_weights_[i] * sol_.sums->gauss_sum(l, far_strides_[i], x, t_ - sol_.times[l]);
  }
  near_zone(x, [&](double g, const Vec2&, double) { acc += g; });
  return acc;
}

Vec2 LayerPotential::gradient(const Vec2& x) const {
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < far_slices_.size(); ++i) {
    const int l = far_slices_[i];
    acc += far_weights_[i] * sol_.sums->gauss_grad_sum(l, far_strides_[i], x, t_ - sol_.times[l]);
  }
  near_zone(x, [&](double g, const Vec2& diff, double sigma) { acc -= g * diff / sigma; });
  return acc;
}

// ---------------------------------------------------------------------------
// interior quadrature

InteriorGrid interior_grid(const MovingDomain& domain, double t, int radial, int angular) {
  if (radial < 1 || angular < 3) throw PreconditionError("interior grid needs radial >= 1 and angular >= 3");
  const ReferenceBoundary& ref = domain.boundary();
  const Vec2 m = domain.marker();
  const AffineMap map = domain.flow().affine(0.0, t);
  const double jac = map.linear.determinant();
  const GaussRule rule = gauss_legendre(radial, 0.0, 1.0);
  InteriorGrid grid;
  grid.nodes.resize(2, radial * angular);
  grid.weights.resize(radial * angular);
  int q = 0;
  for (int a = 0; a < angular; ++a) {
    const double u = kTwoPi * a / angular;
    const Vec2 edge = ref.point(u) - m;
    const Vec2 tangent = ref.d1(u);
    const double cross = edge(0) * tangent(1) - edge(1) * tangent(0);
    if (!(cross > 0.0)) throw DomainError("reference domain is not star-shaped about its marker");
    for (int i = 0; i < radial; ++i) {
      const double rho = rule.nodes(i);
      grid.nodes.col(q) = map(m + rho * edge);
      grid.weights(q) = jac * rho * cross * rule.weights(i) * kTwoPi / angular;
      ++q;
    }
  }
  return grid;
}

namespace {

struct FreeMassBoundary {
  Eigen::Matrix2Xd nodes, normals;
  Eigen::VectorXd weights;
};

FreeMassBoundary free_mass_boundary(const MovingDomain& domain, double t, double resolution) {
  const AffineMap map = domain.flow().affine(0.0, t);
  const BoundarySlice coarse = domain.slice_from_map(t, 64, map);
  const double length = coarse.length();
  const int M = std::clamp(static_cast<int>(std::ceil(length / resolution)), 64, 1 << 18);
  const BoundarySlice slice = domain.slice_from_map(t, M, map);
  return {slice.nodes, slice.normals, slice.weights};
}

double free_mass(const FreeMassBoundary& b, const Vec2& y, double sigma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b.weights.size(); ++i) {
    const Vec2 diff = b.nodes.col(i) - y;
    const double r2 = diff.squaredNorm();
    // (1 - exp(-r^2 / 2 sigma)) / r^2 tends to 1 / (2 sigma) at r = 0
    const double factor = r2 > 1e-300 ? -std::expm1(-r2 / (2.0 * sigma)) / r2 : 1.0 / (2.0 * sigma);
    acc += factor * diff.dot(b.normals.col(i)) * b.weights(i);
  }
  return acc / kTwoPi;
}

double free_mass_resolution(const MovingDomain& domain, const Vec2& y, double t, double sigma) {
  const AffineMap inv = domain.flow().affine(t, 0.0);
  const double d = domain.project_reference(inv(y), true).distance *
                   smallest_singular_value(domain.flow().affine(0.0, t).linear);
  return 0.125 * std::max(std::sqrt(sigma), d);
}

}  // namespace

double free_mass_inside(const MovingDomain& domain, const Vec2& y, double t, double sigma) {
  if (!(sigma > 0.0)) throw InvalidTimeOrder("free mass needs sigma > 0");
  return free_mass(free_mass_boundary(domain, t, free_mass_resolution(domain, y, t, sigma)), y, sigma);
}

// ---------------------------------------------------------------------------
// Green function and survival

namespace {

void require_point_source(const Vec2& r0, const DensitySolution& p) {
  if (!p.source.is_point()) throw PreconditionError("density was solved for a bump source, not a point");
  if ((p.source.as_point().position - r0).norm() > 1e-12)
    throw PreconditionError("density was solved for a different source point");
}

// int over Omega_t of the free evolution of the source
double free_part(const DensitySolution& p, double t) {
  if (p.source.is_point()) return free_mass_inside(p.domain, p.source.as_point().position, t, t);
  Eigen::Matrix2Xd nodes;
  Eigen::VectorXd weights;
  p.source.as_bump().quadrature(nodes, weights);
  double resolution = std::numeric_limits<double>::infinity();
  for (int q = 0; q < nodes.cols(); q += 97)
    resolution = std::min(resolution, free_mass_resolution(p.domain, nodes.col(q), t, t));
  resolution = std::min(resolution, 0.125 * std::sqrt(t));
  const FreeMassBoundary b = free_mass_boundary(p.domain, t, resolution);
  double acc = 0.0;
  for (int q = 0; q < nodes.cols(); ++q) acc += weights(q) * free_mass(b, nodes.col(q), t);
  return acc;
}

double layer_mass(const DensitySolution& p, double t, int radial, int angular) {
  const LayerPotential layer(p, t, LayerPotential::kValueNearSteps);
  const InteriorGrid grid = interior_grid(p.domain, t, radial, angular);
  Eigen::VectorXd values(grid.weights.size());
  parallel_for(static_cast<int>(values.size()), resolve_threads(p.config.threads), [&](int b, int e) {
    for (int i = b; i < e; ++i) values(i) = layer.value(grid.nodes.col(i));
  });
  return grid.weights.dot(values);
}

constexpr int kSurvivalRadial = 16;
constexpr int kSurvivalAngular = 96;

}  // namespace

double green_function(const Vec2& r0, const Vec2& x, double t, const DensitySolution& p) {
  require_point_source(r0, p);
  if (!(t > 0.0)) throw InvalidTimeOrder("green function needs t > 0");
  if (!p.domain.contains(x, t)) throw DomainError("green function evaluated outside the domain");
  const LayerPotential layer(p, t);
  return gauss(HeatKernelParams{2}, r0, 0.0, x, t) - layer.value(x);
}

SurvivalValue survival_prob(const Vec2& r0, double t, const DensitySolution& p) {
  if (p.source.is_point()) require_point_source(r0, p);
  if (!(t > 0.0) || t > p.times.back() + 1e-12) throw InvalidTimeOrder("survival time outside (0, T]");
  const double raw = free_part(p, t) - layer_mass(p, t, kSurvivalRadial, kSurvivalAngular);
  return {std::clamp(raw, 0.0, 1.0), raw};
}

double fpt_cdf(const Vec2& r0, double t, const DensitySolution& p) {
  if (p.source.is_point()) require_point_source(r0, p);
  if (t < 0.0 || t > p.times.back() + 1e-12) throw InvalidTimeOrder("cdf time outside [0, T]");
  double acc = 0.0;
  double prev = p.flux(0);
  for (int k = 1; k <= p.steps(); ++k) {
    const double next = p.flux(k);
    const double width = p.times[k] - p.times[k - 1];
    if (p.times[k] >= t) {
      const double a = (t - p.times[k - 1]) / width;
      const double at_t = (1.0 - a) * prev + a * next;
      return acc + 0.5 * (prev + at_t) * (t - p.times[k - 1]);
    }
    acc += 0.5 * (prev + next) * width;
    prev = next;
  }
  return acc;
}

FptCdfTable::FptCdfTable(const DensitySolution& p) : times_(p.times) {
  flux_.resize(times_.size());
  cumulative_.assign(times_.size(), 0.0);
  for (std::size_t k = 0; k < times_.size(); ++k) flux_[k] = p.flux(static_cast<int>(k));
  for (std::size_t k = 1; k < times_.size(); ++k)
    cumulative_[k] = cumulative_[k - 1] + 0.5 * (flux_[k - 1] + flux_[k]) * (times_[k] - times_[k - 1]);
}

double FptCdfTable::operator()(double t) const {
  if (t <= times_.front()) return 0.0;
  if (t >= times_.back()) return cumulative_.back();
  const std::size_t k = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
  const double a = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
  const double at_t = (1.0 - a) * flux_[k - 1] + a * flux_[k];
  return cumulative_[k - 1] + 0.5 * (flux_[k - 1] + at_t) * (t - times_[k - 1]);
}

SurvivalCurve survival_curve(const DensitySolution& p, int stride) {
  if (stride < 1) throw PreconditionError("survival curve stride must be >= 1");
  const Vec2 r0 = p.source.location();
  SurvivalCurve curve;
  const int K = p.steps();
  for (int k = stride; k <= K; k += stride) curve.times.push_back(p.times[k]);
  if (curve.times.empty() || curve.times.back() < p.times[K]) curve.times.push_back(p.times[K]);
  for (double t : curve.times) {
    const SurvivalValue s = survival_prob(r0, t, p);
    curve.values.push_back(s.value);
    curve.raw.push_back(s.raw);
    curve.cdf.push_back(fpt_cdf(r0, t, p));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// smooth initial data

UFieldContext prepare_u_field(const MovingDomain& domain, const BumpSource& bump, const SolverConfig& cfg, int radial,
                              int angular) {
  UFieldContext ctx;
  ctx.bump = bump;
  ctx.smooth = std::make_shared<const DensitySolution>(solve(domain, SourceSpec::bump(bump.center, bump.m), cfg));
  bump.quadrature(ctx.nodes, ctx.weights, radial, angular);
  ctx.weights /= ctx.weights.sum();
  for (int q = 0; q < ctx.nodes.cols(); ++q)
    ctx.nodal.push_back(std::make_shared<const DensitySolution>(solve(domain, SourceSpec::point(ctx.nodes.col(q)), cfg)));
  return ctx;
}

namespace {

double free_convolution(const BumpSource& bump, const Vec2& x, double t) {
  Eigen::Matrix2Xd nodes;
  Eigen::VectorXd weights;
  // resolve the narrower of the bump and the heat kernel
  const int radial = std::clamp(static_cast<int>(std::ceil(4.0 * bump.radius() / std::sqrt(t))), 32, 512);
  bump.quadrature(nodes, weights, radial, 2 * radial);
  double acc = 0.0;
  for (int q = 0; q < nodes.cols(); ++q) acc += weights(q) * gauss(HeatKernelParams{2}, nodes.col(q), 0.0, x, t);
  return acc;
}

}  // namespace

UFieldValue u_field(const Vec2& x, double t, const UFieldContext& ctx) {
  const DensitySolution& smooth = *ctx.smooth;
  if (!(t > 0.0)) throw InvalidTimeOrder("u field needs t > 0");
  if (!smooth.domain.contains(x, t)) throw DomainError("u field evaluated outside the domain");
  const double free = free_convolution(ctx.bump, x, t);
  double nodal = 0.0;
  for (std::size_t q = 0; q < ctx.nodal.size(); ++q) nodal += ctx.weights(q) * LayerPotential(*ctx.nodal[q], t, LayerPotential::kValueNearSteps).value(x);
  UFieldValue out;
  out.source_integral = free - nodal;
  out.layer_form = free - LayerPotential(smooth, t, LayerPotential::kValueNearSteps).value(x);
  // near the boundary both forms cancel to almost nothing; judge them against the free part
  const double scale = std::max({std::abs(out.source_integral), std::abs(out.layer_form), std::abs(free)});
  if (std::abs(out.source_integral - out.layer_form) > 0.05 * scale && scale > 1e-12)
    throw RepresentationMismatch("u field representations differ: " + std::to_string(out.source_integral) + " vs " +
                                 std::to_string(out.layer_form));
  return out;
}

double u_mass(double t, const UFieldContext& ctx) {
  const DensitySolution& smooth = *ctx.smooth;
  if (t <= 0.0) {
    Eigen::Matrix2Xd nodes;
    Eigen::VectorXd weights;
    ctx.bump.quadrature(nodes, weights);
    return weights.sum();
  }
  return free_part(smooth, t) - layer_mass(smooth, t, kSurvivalRadial, kSurvivalAngular);
}

MassBalance mass_balance(double t1, double t2, const UFieldContext& ctx) {
  const DensitySolution& smooth = *ctx.smooth;
  if (!(0.0 <= t1 && t1 < t2 && t2 <= smooth.times.back() + 1e-12))
    throw InvalidTimeOrder("mass balance needs 0 <= t1 < t2 <= T");
  MassBalance out;
  out.t1 = t1;
  out.t2 = t2;
  out.delta = u_mass(t1, ctx) - u_mass(t2, ctx);
  const Vec2 c = ctx.bump.center;
  out.flux = fpt_cdf(c, t2, smooth) - fpt_cdf(c, t1, smooth);
  for (std::size_t q = 0; q < ctx.nodal.size(); ++q) {
    const Vec2 r = ctx.nodes.col(static_cast<Eigen::Index>(q));
    out.dF += ctx.weights(static_cast<Eigen::Index>(q)) * (fpt_cdf(r, t2, *ctx.nodal[q]) - fpt_cdf(r, t1, *ctx.nodal[q]));
  }
  out.abs_error = std::max(std::abs(out.delta - out.flux), std::abs(out.flux - out.dF));
  return out;
}

}  // namespace fpt
