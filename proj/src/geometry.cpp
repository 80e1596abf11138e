#include "fpt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpt {

namespace {

Mat2 quarter_turn() {
  Mat2 j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

double cross(const Vec2& a, const Vec2& b) { return a(0) * b(1) - a(1) * b(0); }

double wrap_angle(double u) {
  double r = std::fmod(u, kTwoPi);
  return r < 0.0 ? r + kTwoPi : r;
}

void require_finite(const Vec2& x) {
  if (!std::isfinite(x(0)) || !std::isfinite(x(1))) throw IntegrationDiverged("flow integration produced a non-finite state");
}

}  // namespace

// ---------------------------------------------------------------------------
// VelocityField

VelocityField VelocityField::zero() { return {}; }

VelocityField VelocityField::translation(const Vec2& velocity) {
  VelocityField v;
  v.kind_ = Kind::translation;
  v.vector_ = velocity;
  return v;
}

VelocityField VelocityField::rotation(double omega, const Vec2& center) {
  VelocityField v;
  v.kind_ = Kind::rotation;
  v.omega_ = omega;
  v.center_ = center;
  return v;
}

VelocityField VelocityField::scaling(std::vector<double> coeffs, const Vec2& center) {
  VelocityField v;
  v.kind_ = Kind::scaling;
  v.coeffs_ = std::move(coeffs);
  v.center_ = center;
  return v;
}

VelocityField VelocityField::composite(std::vector<VelocityField> terms) {
  VelocityField v;
  v.kind_ = Kind::composite;
  v.terms_ = std::move(terms);
  return v;
}

namespace {

double poly_eval(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

}  // namespace

Mat2 VelocityField::linear(double t) const {
  switch (kind_) {
    case Kind::zero:
    case Kind::translation:
      return Mat2::Zero();
    case Kind::rotation:
      return omega_ * quarter_turn();
    case Kind::scaling:
      return poly_eval(coeffs_, t) * Mat2::Identity();
    case Kind::composite: {
      Mat2 a = Mat2::Zero();
      for (const auto& term : terms_) a += term.linear(t);
      return a;
    }
  }
  return Mat2::Zero();
}

Vec2 VelocityField::offset(double t) const {
  switch (kind_) {
    case Kind::zero:
      return Vec2::Zero();
    case Kind::translation:
      return vector_;
    case Kind::rotation:
      return -omega_ * (quarter_turn() * center_);
    case Kind::scaling:
      return -poly_eval(coeffs_, t) * center_;
    case Kind::composite: {
      Vec2 b = Vec2::Zero();
      for (const auto& term : terms_) b += term.offset(t);
      return b;
    }
  }
  return Vec2::Zero();
}

double VelocityField::lipschitz(double horizon) const {
  switch (kind_) {
    case Kind::zero:
    case Kind::translation:
      return 0.0;
    case Kind::rotation:
      return std::abs(omega_);
    case Kind::scaling: {
      double sup = 0.0;
      constexpr int kSamples = 4096;
      for (int i = 0; i <= kSamples; ++i) sup = std::max(sup, std::abs(poly_eval(coeffs_, horizon * i / kSamples)));
      return sup;
    }
    case Kind::composite: {
      double sum = 0.0;
      for (const auto& term : terms_) sum += term.lipschitz(horizon);
      return sum;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// FlowMap

FlowMap::FlowMap(VelocityField velocity, double step_dt) : velocity_(std::move(velocity)), step_dt_(step_dt) {
  if (!(step_dt > 0.0)) throw std::invalid_argument("FlowMap: step_dt must be positive");
}

Vec2 FlowMap::integrate(const Vec2& x0, double from, double to) const {
  if (from == to) return x0;
  const int n = static_cast<int>(std::ceil(std::abs(to - from) / step_dt_ - 1e-9));
  const double h = (to - from) / std::max(n, 1);
  Vec2 x = x0;
  for (int i = 0; i < std::max(n, 1); ++i) {
    const double t = from + i * h;
    const Vec2 k1 = velocity_(x, t);
    const Vec2 k2 = velocity_(x + 0.5 * h * k1, t + 0.5 * h);
    const Vec2 k3 = velocity_(x + 0.5 * h * k2, t + 0.5 * h);
    const Vec2 k4 = velocity_(x + h * k3, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  require_finite(x);
  return x;
}

Vec2 FlowMap::advance(const Vec2& x, double s, double t) const {
  if (s > t) throw InvalidTimeOrder("advance needs s <= t");
  return integrate(x, s, t);
}

Vec2 FlowMap::inverse(const Vec2& x, double t, double s) const {
  if (s > t) throw InvalidTimeOrder("inverse needs s <= t");
  return integrate(x, t, s);
}

Mat2 FlowMap::jacobian(const Vec2& x, double s, double t, double h) const {
  Mat2 jac;
  for (int i = 0; i < 2; ++i) {
    const Vec2 e = h * Vec2::Unit(i);
    jac.col(i) = (integrate(x + e, s, t) - integrate(x - e, s, t)) / (2.0 * h);
  }
  return jac;
}

AffineMap FlowMap::affine(double from, double to) const {
  using State = Eigen::Matrix<double, 2, 3>;
  State x = State::Zero();
  x.leftCols<2>() = Mat2::Identity();
  if (from != to) {
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(to - from) / step_dt_ - 1e-9)));
    const double h = (to - from) / n;
    auto rhs = [this](const State& y, double t) {
      State f = velocity_.linear(t) * y;
      f.col(2) += velocity_.offset(t);
      return f;
    };
    for (int i = 0; i < n; ++i) {
      const double t = from + i * h;
      const State k1 = rhs(x, t);
      const State k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h);
      const State k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h);
      const State k4 = rhs(x + h * k3, t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) throw IntegrationDiverged("flow integration produced a non-finite state");
  }
  return {x.leftCols<2>(), x.col(2)};
}

// ---------------------------------------------------------------------------
// ReferenceBoundary

ReferenceBoundary ReferenceBoundary::circle(double radius, const Vec2& center) {
  if (!(radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
  ReferenceBoundary b;
  b.family_ = Family::circle;
  b.a_ = b.b_ = radius;
  b.center_ = center;
  return b;
}

ReferenceBoundary ReferenceBoundary::ellipse(double a, double b, const Vec2& center) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("ellipse semi-axes must be positive");
  ReferenceBoundary r;
  r.family_ = Family::ellipse;
  r.a_ = a;
  r.b_ = b;
  r.center_ = center;
  return r;
}

ReferenceBoundary ReferenceBoundary::star(double radius, double eps, int k, const Vec2& center) {
  if (!(radius > 0.0) || !(std::abs(eps) < 1.0) || k < 1) throw std::invalid_argument("star needs radius > 0, |eps| < 1, k >= 1");
  ReferenceBoundary r;
  r.family_ = Family::star;
  r.a_ = r.b_ = radius;
  r.eps_ = eps;
  r.k_ = k;
  r.center_ = center;
  return r;
}

ReferenceBoundary ReferenceBoundary::superellipse(double a, double b, int n, const Vec2& center) {
  if (!(a > 0.0 && b > 0.0) || n < 2 || n % 2 != 0) throw std::invalid_argument("superellipse needs a, b > 0 and even n >= 2");
  ReferenceBoundary r;
  r.family_ = Family::superellipse;
  r.a_ = a;
  r.b_ = b;
  r.k_ = n;
  r.center_ = center;
  return r;
}

void ReferenceBoundary::polar(double u, double& r, double& dr, double& ddr) const {
  if (family_ == Family::star) {
    r = a_ * (1.0 + eps_ * std::cos(k_ * u));
    dr = -a_ * eps_ * k_ * std::sin(k_ * u);
    ddr = -a_ * eps_ * k_ * k_ * std::cos(k_ * u);
    return;
  }
  // superellipse: F = (c/a)^n + (s/b)^n, r = F^(-1/n)
  const double n = k_;
  const double c = std::cos(u), s = std::sin(u);
  const double p = c / a_, q = s / b_;
  const double pn2 = std::pow(p, k_ - 2), qn2 = std::pow(q, k_ - 2);
  const double f = pn2 * p * p + qn2 * q * q;
  const double df = n * (pn2 * p * (-s / a_) + qn2 * q * (c / b_));
  const double ddf = n * (n - 1.0) * (pn2 * (s / a_) * (s / a_) + qn2 * (c / b_) * (c / b_)) - n * (pn2 * p * p + qn2 * q * q);
  r = std::pow(f, -1.0 / n);
  dr = -(1.0 / n) * r / f * df;
  ddr = -(1.0 / n) * ((-1.0 / n - 1.0) * r / (f * f) * df * df + r / f * ddf);
}

Vec2 ReferenceBoundary::point(double u) const {
  const double c = std::cos(u), s = std::sin(u);
  if (family_ == Family::circle || family_ == Family::ellipse) return center_ + Vec2(a_ * c, b_ * s);
  double r, dr, ddr;
  polar(u, r, dr, ddr);
  return center_ + r * Vec2(c, s);
}

Vec2 ReferenceBoundary::d1(double u) const {
  const double c = std::cos(u), s = std::sin(u);
  if (family_ == Family::circle || family_ == Family::ellipse) return Vec2(-a_ * s, b_ * c);
  double r, dr, ddr;
  polar(u, r, dr, ddr);
  return dr * Vec2(c, s) + r * Vec2(-s, c);
}

Vec2 ReferenceBoundary::d2(double u) const {
  const double c = std::cos(u), s = std::sin(u);
  if (family_ == Family::circle || family_ == Family::ellipse) return Vec2(-a_ * c, -b_ * s);
  double r, dr, ddr;
  polar(u, r, dr, ddr);
  return (ddr - r) * Vec2(c, s) + 2.0 * dr * Vec2(-s, c);
}

double ReferenceBoundary::diameter() const {
  constexpr int n = 720;
  Eigen::Matrix2Xd pts(2, n);
  for (int i = 0; i < n; ++i) pts.col(i) = point(kTwoPi * i / n);
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) best = std::max(best, (pts.col(i) - pts.col(j)).squaredNorm());
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// BoundarySlice helpers

double BoundarySlice::diameter() const {
  double best = 0.0;
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j) best = std::max(best, (nodes.col(i) - nodes.col(j)).squaredNorm());
  return std::sqrt(best);
}

double max_spacing(const BoundarySlice& slice) { return slice.weights.maxCoeff(); }

int refinement_factor(double spacing, double sigma) {
  int f = 1;
  const double width = std::sqrt(sigma);
  while (spacing / f > width && f < (1 << 20)) f *= 2;
  return f;
}

// ---------------------------------------------------------------------------
// MovingDomain

MovingDomain::MovingDomain(ReferenceBoundary boundary, const Vec2& marker, FlowMap flow, double horizon,
                           int polygon_nodes)
    : boundary_(std::move(boundary)), marker_(marker), flow_(std::move(flow)), horizon_(horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("MovingDomain: horizon must be positive");
  if (polygon_nodes < 16) throw std::invalid_argument("MovingDomain: polygon needs at least 16 nodes");
  diameter_ = boundary_.diameter();

  const int n = polygon_nodes;
  poly_.resize(2, n);
  poly_u_.resize(n);
  for (int i = 0; i < n; ++i) {
    poly_u_(i) = kTwoPi * i / n;
    poly_.col(i) = boundary_.point(poly_u_(i));
    if (boundary_.d1(poly_u_(i)).norm() <= 0.0) throw GridDegenerate("reference parametrization is singular");
  }
  double area2 = 0.0;
  for (int i = 0; i < n; ++i) area2 += cross(poly_.col(i), poly_.col((i + 1) % n));
  orientation_ = area2 < 0.0 ? -1.0 : 1.0;
  if (area2 < 0.0) {
    poly_ = poly_.rowwise().reverse().eval();
    poly_u_ = poly_u_.reverse().eval();
  }
  // Segment intersection test on non-adjacent edges would be O(n^2); checking that the
  // polar angle about the marker is strictly increasing certifies a simple star polygon.
  poly_angle_.resize(n);
  star_shaped_ = true;
  double total = 0.0;
  poly_angle_[0] = std::atan2(poly_(1, 0) - marker_(1), poly_(0, 0) - marker_(0));
  for (int i = 1; i <= n; ++i) {
    const Vec2 a = poly_.col(i - 1) - marker_;
    const Vec2 b = poly_.col(i % n) - marker_;
    const double step = std::atan2(cross(a, b), a.dot(b));
    if (!(step > 0.0)) star_shaped_ = false;
    total += step;
    if (i < n) poly_angle_[i] = poly_angle_[0] + total;
  }
  if (std::abs(total - kTwoPi) > 1e-9) star_shaped_ = false;
  if (!winding_contains(marker_)) throw PreconditionError("marker point is not inside the reference domain");

  band_.resize(n);
  const double du = kTwoPi / n;
  auto bulge = [&](double u) {
    const Vec2 d1 = boundary_.d1(u), d2 = boundary_.d2(u);
    return std::abs(cross(d1, d2)) / d1.norm() * du * du / 8.0;
  };
  for (int i = 0; i < n; ++i) {
    const double u0 = poly_u_(i), u1 = poly_u_((i + 1) % n);
    band_(i) = 2.0 * std::max({bulge(u0), bulge(u1), bulge(0.5 * (u0 + u1 + (u1 < u0 ? kTwoPi : 0.0)))}) + 1e-12;
  }

  inner_radius_ = std::numeric_limits<double>::infinity();
  outer_radius_ = 0.0;
  curve_inner_radius_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    inner_radius_ = std::min(inner_radius_, edge_distance(i, marker_));
    outer_radius_ = std::max(outer_radius_, (poly_.col(i) - marker_).norm());
  }
  // the curve strays from each chord by at most the edge band
  inner_radius_ -= band_.maxCoeff();
  curve_inner_radius_ = inner_radius_;
}

double MovingDomain::edge_distance(int i, const Vec2& z) const {
  const int n = static_cast<int>(poly_.cols());
  const Vec2 a = poly_.col(i);
  const Vec2 b = poly_.col((i + 1) % n);
  const Vec2 ab = b - a;
  const double s = std::clamp((z - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + s * ab - z).norm();
}

bool MovingDomain::winding_contains(const Vec2& z) const {
  const int n = static_cast<int>(poly_.cols());
  int winding = 0;
  for (int i = 0; i < n; ++i) {
    const Vec2 a = poly_.col(i);
    const Vec2 b = poly_.col((i + 1) % n);
    if (edge_distance(i, z) <= 1e-12) return false;
    if (a(1) <= z(1)) {
      if (b(1) > z(1) && cross(b - a, z - a) > 0.0) ++winding;
    } else if (b(1) <= z(1) && cross(b - a, z - a) < 0.0) {
      --winding;
    }
  }
  return winding != 0;
}

bool MovingDomain::star_contains(const Vec2& z) const {
  const int n = static_cast<int>(poly_.cols());
  double phi = std::atan2(z(1) - marker_(1), z(0) - marker_(0));
  while (phi < poly_angle_[0]) phi += kTwoPi;
  while (phi >= poly_angle_[0] + kTwoPi) phi -= kTwoPi;
  const auto it = std::upper_bound(poly_angle_.begin(), poly_angle_.end(), phi);
  const int i = static_cast<int>(it - poly_angle_.begin()) - 1;
  const Vec2 a = poly_.col(i);
  const Vec2 b = poly_.col((i + 1) % n);
  const Vec2 ab = b - a;
  const double side = cross(ab, z - a) / ab.norm();
  if (side > band_(i)) return true;
  if (side < -band_(i)) return false;
  const ReferenceProjection proj = project_reference(z);
  const Vec2 tangent = boundary_.d1(proj.u);
  const Vec2 outward = orientation_ * Vec2(tangent(1), -tangent(0)) / tangent.norm();
  return (z - boundary_.point(proj.u)).dot(outward) < -1e-12;
}

bool MovingDomain::contains_reference(const Vec2& z) const {
  const double r2 = (z - marker_).squaredNorm();
  if (r2 < inner_radius_ * inner_radius_) return true;
  if (r2 > outer_radius_ * outer_radius_) return false;
  return star_shaped_ ? star_contains(z) : winding_contains(z);
}

bool MovingDomain::contains(const Vec2& x, double t) const {
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12)) throw std::invalid_argument("contains: time outside [0, T]");
  return contains_reference(flow_.inverse(x, t, 0.0));
}

double MovingDomain::reference_distance_lower_bound(const Vec2& z) const {
  return std::max(0.0, curve_inner_radius_ - (z - marker_).norm());
}

ReferenceProjection MovingDomain::project_reference(const Vec2& z, bool global) const {
  const int n = static_cast<int>(poly_.cols());
  int best = 0;
  if (star_shaped_ && !global) {
    double phi = std::atan2(z(1) - marker_(1), z(0) - marker_(0));
    while (phi < poly_angle_[0]) phi += kTwoPi;
    while (phi >= poly_angle_[0] + kTwoPi) phi -= kTwoPi;
    best = static_cast<int>(std::upper_bound(poly_angle_.begin(), poly_angle_.end(), phi) - poly_angle_.begin()) - 1;
    // walk to the locally nearest vertex
    double d = (poly_.col(best) - z).squaredNorm();
    for (int dir : {1, -1}) {
      for (;;) {
        const int next = (best + dir + n) % n;
        const double dn = (poly_.col(next) - z).squaredNorm();
        if (dn >= d) break;
        best = next;
        d = dn;
      }
    }
  } else {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double di = (poly_.col(i) - z).squaredNorm();
      if (di < d) {
        d = di;
        best = i;
      }
    }
  }
  const double du = kTwoPi / n;
  double u = poly_u_(best);
  for (int it = 0; it < 6; ++it) {
    const Vec2 r = boundary_.point(u) - z;
    const Vec2 t1 = boundary_.d1(u);
    const double f = r.dot(t1);
    const double df = t1.squaredNorm() + r.dot(boundary_.d2(u));
    if (!(df > 0.0)) break;
    const double step = std::clamp(f / df, -2.0 * du, 2.0 * du);
    u -= step;
    if (std::abs(step) < 1e-15) break;
  }
  u = wrap_angle(u);
  return {u, (boundary_.point(u) - z).norm()};
}

BoundarySlice MovingDomain::slice_from_map(double t, int M, const AffineMap& to_t) const {
  if (M < 8) throw std::invalid_argument("boundary slice needs M >= 8");
  BoundarySlice slice;
  slice.t = t;
  slice.u.resize(M);
  slice.nodes.resize(2, M);
  slice.normals.resize(2, M);
  slice.weights.resize(M);
  slice.curvature.resize(M);
  slice.normal_velocity.resize(M);
  const double orient = to_t.linear.determinant() > 0.0 ? 1.0 : -1.0;
  const Mat2 lin = to_t.linear;
  const Mat2 vel_lin = velocity().linear(t);
  const Vec2 vel_off = velocity().offset(t);
  for (int j = 0; j < M; ++j) {
    const double u = kTwoPi * j / M;
    const Vec2 y = to_t(boundary_.point(u));
    const Vec2 tan = lin * boundary_.d1(u);
    const Vec2 acc = lin * boundary_.d2(u);
    const double speed = tan.norm();
    if (speed < 1e-10) throw GridDegenerate("degenerate tangent on boundary slice");
    const Vec2 normal = orient * Vec2(tan(1), -tan(0)) / speed;
    slice.u(j) = u;
    slice.nodes.col(j) = y;
    slice.normals.col(j) = normal;
    slice.weights(j) = speed * kTwoPi / M;
    slice.curvature(j) = orient * cross(tan, acc) / (speed * speed * speed);
    slice.normal_velocity(j) = (vel_lin * y + vel_off).dot(normal);
  }
  return slice;
}

BoundarySlice MovingDomain::boundary_at(double t, int M) const {
  if (M < 8) throw std::invalid_argument("boundary_at needs M >= 8");
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12)) throw std::invalid_argument("boundary_at: time outside [0, T]");
  const double h_jac = 1e-5 * diameter_;
  const double du = 1e-3;
  BoundarySlice slice;
  slice.t = t;
  slice.u.resize(M);
  slice.nodes.resize(2, M);
  slice.normals.resize(2, M);
  slice.weights.resize(M);
  slice.curvature.resize(M);
  slice.normal_velocity.resize(M);
  Eigen::Matrix2Xd tangents(2, M), accel(2, M);
  for (int j = 0; j < M; ++j) {
    const double u = kTwoPi * j / M;
    const Vec2 ref = boundary_.point(u);
    const Vec2 y = flow_.advance(ref, 0.0, t);
    const Vec2 tan = flow_.jacobian(ref, 0.0, t, h_jac) * boundary_.d1(u);
    const double speed = tan.norm();
    if (speed < 1e-10) throw GridDegenerate("degenerate tangent on boundary slice");
    slice.u(j) = u;
    slice.nodes.col(j) = y;
    slice.normals.col(j) = Vec2(tan(1), -tan(0)) / speed;
    slice.weights(j) = speed * kTwoPi / M;
    tangents.col(j) = tan;
    accel.col(j) = (flow_.advance(boundary_.point(u + du), 0.0, t) - 2.0 * y +
                    flow_.advance(boundary_.point(u - du), 0.0, t)) / (du * du);
  }
  const Vec2 marker_t = flow_.advance(marker_, 0.0, t);
  int far = 0;
  for (int j = 1; j < M; ++j)
    if ((slice.nodes.col(j) - marker_t).squaredNorm() > (slice.nodes.col(far) - marker_t).squaredNorm()) far = j;
  const double orient = (marker_t - slice.nodes.col(far)).dot(slice.normals.col(far)) > 0.0 ? -1.0 : 1.0;
  slice.normals *= orient;
  for (int j = 0; j < M; ++j) {
    const Vec2 tan = tangents.col(j);
    const double speed = tan.norm();
    slice.curvature(j) = orient * cross(tan, accel.col(j)) / (speed * speed * speed);
    slice.normal_velocity(j) = velocity()(slice.nodes.col(j), t).dot(slice.normals.col(j));
  }
  return slice;
}

double MovingDomain::speed_bound(int time_samples, int M) const {
  double eta = 0.0;
  for (int i = 0; i < time_samples; ++i) {
    const double t = horizon_ * i / std::max(1, time_samples - 1);
    const BoundarySlice slice = slice_from_map(t, M, flow_.affine(0.0, t));
    for (int j = 0; j < M; ++j) eta = std::max(eta, velocity()(slice.nodes.col(j), t).norm());
  }
  return eta;
}

BoundaryGrid build_boundary_grid(const MovingDomain& domain, const std::vector<double>& times, int M) {
  BoundaryGrid grid;
  grid.times = times;
  grid.nodes_per_slice = M;
  grid.slices.reserve(times.size());
  AffineMap map;
  double prev = 0.0;
  for (double t : times) {
    map = domain.flow().affine(prev, t).after(map);
    prev = t;
    grid.slices.push_back(domain.slice_from_map(t, M, map));
  }
  return grid;
}

double lemma1_constant(const BoundarySlice& slice) {
  if (slice.size() < 32) throw std::invalid_argument("lemma1_constant needs M >= 32");
  const double limit = slice.diameter() / 4.0;
  double best = 0.0;
  for (int i = 0; i < slice.size(); ++i) {
    const Vec2 x = slice.nodes.col(i);
    const Vec2 n = slice.normals.col(i);
    for (int j = 0; j < slice.size(); ++j) {
      if (j == i) continue;
      const Vec2 d = slice.nodes.col(j) - x;
      const double r2 = d.squaredNorm();
      if (r2 > limit * limit || r2 == 0.0) continue;
      best = std::max(best, std::abs(d.dot(n)) / r2);
    }
  }
  return best;
}

double lemma2_integral(const MovingDomain& domain, const Vec2& x, double t, double s, int M) {
  if (!(s < t) || s < 0.0) throw InvalidTimeOrder("lemma2_integral needs 0 <= s < t");
  const double sigma = t - s;
  const AffineMap map = domain.flow().affine(0.0, s);
  if (M <= 0) {
    const BoundarySlice coarse = domain.slice_from_map(s, 64, map);
    M = 64 * refinement_factor(max_spacing(coarse), sigma);
  }
  const BoundarySlice slice = domain.slice_from_map(s, M, map);
  const Eigen::ArrayXd r2 = (slice.nodes.colwise() - x).colwise().squaredNorm().transpose().array();
  return ((-r2 / (2.0 * sigma)).exp() * slice.weights.array()).sum() / std::sqrt(kTwoPi * sigma);
}

}  // namespace fpt
