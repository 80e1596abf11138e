#ifndef FPT_GEOMETRY_HPP
#define FPT_GEOMETRY_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpt/common.hpp"

namespace fpt {

/// x -> linear * x + offset.
struct AffineMap {
  Mat2 linear = Mat2::Identity();
  Vec2 offset = Vec2::Zero();

  Vec2 operator()(const Vec2& x) const { return linear * x + offset; }
  /// (*this) o first
  AffineMap after(const AffineMap& first) const { return {linear * first.linear, linear * first.offset + offset}; }
  AffineMap inverse() const {
    const Mat2 inv = linear.inverse();
    return {inv, -inv * offset};
  }
};

/// Velocity fields of the form v(x, t) = A(t) x + b(t).
class VelocityField {
 public:
  enum class Kind { zero, translation, rotation, scaling, composite };

  static VelocityField zero();
  static VelocityField translation(const Vec2& velocity);
  /// v = omega J (x - center), J the quarter turn.
  static VelocityField rotation(double omega, const Vec2& center = Vec2::Zero());
  /// v = alpha(t) (x - center), alpha(t) = sum_i coeffs[i] t^i.
  static VelocityField scaling(std::vector<double> coeffs, const Vec2& center = Vec2::Zero());
  static VelocityField composite(std::vector<VelocityField> terms);

  Kind kind() const { return kind_; }
  const Vec2& vector() const { return vector_; }
  const Vec2& center() const { return center_; }
  double omega() const { return omega_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<VelocityField>& terms() const { return terms_; }

  Mat2 linear(double t) const;
  Vec2 offset(double t) const;
  Vec2 operator()(const Vec2& x, double t) const { return linear(t) * x + offset(t); }

  /// Spatial Lipschitz constant on [0, horizon]: 0 for translation, |omega| for rotation,
  /// sup |alpha| for scaling (sampled on a fine grid), sum of the parts for composites.
  double lipschitz(double horizon) const;

 private:
  Kind kind_ = Kind::zero;
  Vec2 vector_ = Vec2::Zero();
  Vec2 center_ = Vec2::Zero();
  double omega_ = 0.0;
  std::vector<double> coeffs_;
  std::vector<VelocityField> terms_;
};

/// Fixed-step RK4 flow of a velocity field.
class FlowMap {
 public:
  FlowMap(VelocityField velocity, double step_dt);

  const VelocityField& velocity() const { return velocity_; }
  double step_dt() const { return step_dt_; }

  /// theta_s^t x for s <= t, with ceil((t - s) / step_dt) equal steps.
  Vec2 advance(const Vec2& x, double s, double t) const;
  /// theta_t^s x for s <= t, integrating backward.
  Vec2 inverse(const Vec2& x, double t, double s) const;
  /// Spatial Jacobian of advance(., s, t) by central differences with offset h.
  Mat2 jacobian(const Vec2& x, double s, double t, double h) const;
  /// The affine map that the RK4 integrator applies between `from` and `to` (either order).
  /// Agrees with advance/inverse up to rounding because RK4 is linear for affine fields.
  AffineMap affine(double from, double to) const;

 private:
  Vec2 integrate(const Vec2& x, double from, double to) const;

  VelocityField velocity_;
  double step_dt_;
};

/// Closed reference curve psi: [0, 2 pi) -> R^2, counterclockwise.
class ReferenceBoundary {
 public:
  enum class Family { circle, ellipse, star, superellipse };

  static ReferenceBoundary circle(double radius, const Vec2& center = Vec2::Zero());
  static ReferenceBoundary ellipse(double a, double b, const Vec2& center = Vec2::Zero());
  /// r(u) = radius (1 + eps cos(k u)).
  static ReferenceBoundary star(double radius, double eps, int k, const Vec2& center = Vec2::Zero());
  /// r(u) = (|cos u / a|^n + |sin u / b|^n)^(-1/n), n even.
  static ReferenceBoundary superellipse(double a, double b, int n, const Vec2& center = Vec2::Zero());

  Family family() const { return family_; }
  const Vec2& center() const { return center_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double eps() const { return eps_; }
  int k() const { return k_; }

  Vec2 point(double u) const;
  Vec2 d1(double u) const;
  Vec2 d2(double u) const;

  /// Largest chord length, estimated from a dense node set.
  double diameter() const;

 private:
  // polar radius and its first two derivatives for the polar families
  void polar(double u, double& r, double& dr, double& ddr) const;

  Family family_ = Family::circle;
  Vec2 center_ = Vec2::Zero();
  double a_ = 1.0, b_ = 1.0, eps_ = 0.0;
  int k_ = 0;
};

/// One time slice of boundary quadrature data.
struct BoundarySlice {
  double t = 0.0;
  Eigen::VectorXd u;          // uniform curve parameters
  Eigen::Matrix2Xd nodes;     // y_j
  Eigen::Matrix2Xd normals;   // outward unit normals
  Eigen::VectorXd weights;    // |tangent| * 2 pi / M
  Eigen::VectorXd curvature;  // signed, positive where the domain is locally convex
  Eigen::VectorXd normal_velocity;

  int size() const { return static_cast<int>(u.size()); }
  double length() const { return weights.sum(); }
  double diameter() const;
};

struct BoundaryGrid {
  std::vector<double> times;
  std::vector<BoundarySlice> slices;
  int nodes_per_slice = 0;
};

struct ReferenceProjection {
  double u = 0.0;
  double distance = 0.0;
};

class MovingDomain {
 public:
  MovingDomain(ReferenceBoundary boundary, const Vec2& marker, FlowMap flow, double horizon,
               int polygon_nodes = 4096);

  const ReferenceBoundary& boundary() const { return boundary_; }
  const Vec2& marker() const { return marker_; }
  const FlowMap& flow() const { return flow_; }
  const VelocityField& velocity() const { return flow_.velocity(); }
  double horizon() const { return horizon_; }
  double diameter() const { return diameter_; }

  /// Slice by pointwise RK4 and finite-difference Jacobians.
  BoundarySlice boundary_at(double t, int M) const;
  /// Slice at time t from the RK4 transfer map `to_t` of the reference curve.
  BoundarySlice slice_from_map(double t, int M, const AffineMap& to_t) const;

  bool contains(const Vec2& x, double t) const;
  /// Polygon test in the reference frame; points within 1e-12 of an edge count as outside.
  /// Inside an edge's sagitta band the exact curve decides instead of the chord.
  bool contains_reference(const Vec2& z) const;
  /// Nearest point of the reference curve: node search, then Newton on the parametrization.
  /// The default search walks from the node in z's polar sector, which is reliable near the
  /// curve; `global` scans every node instead.
  ReferenceProjection project_reference(const Vec2& z, bool global = false) const;
  /// Lower bound on the reference-frame distance from z to the curve; 0 when not cheaply known.
  double reference_distance_lower_bound(const Vec2& z) const;

  /// eta: bound of |v| over the space-time cylinder, from boundary samples (|v| is convex in x).
  double speed_bound(int time_samples = 65, int M = 256) const;

 private:
  bool star_contains(const Vec2& z) const;
  bool winding_contains(const Vec2& z) const;
  double edge_distance(int i, const Vec2& z) const;

  ReferenceBoundary boundary_;
  Vec2 marker_;
  FlowMap flow_;
  double horizon_;
  double diameter_;

  Eigen::Matrix2Xd poly_;          // polygon vertices, counterclockwise
  Eigen::VectorXd poly_u_;         // their curve parameters
  std::vector<double> poly_angle_; // unwrapped polar angles about the marker
  Eigen::VectorXd band_;           // per-edge bound on the curve-to-chord gap
  bool star_shaped_ = false;
  double orientation_ = 1.0;       // +1 when psi runs counterclockwise
  double inner_radius_ = 0.0;      // polygon-safe disk about the marker
  double outer_radius_ = 0.0;
  double curve_inner_radius_ = 0.0;
};

BoundaryGrid build_boundary_grid(const MovingDomain& domain, const std::vector<double>& times, int M);

/// max over node pairs with |y - x| <= diameter / 4 of |<y - x, n_x>| / |y - x|^2.
double lemma1_constant(const BoundarySlice& slice);

/// Gaussian surface integral of the slice at time s seen from x at time t (d = 2).
/// M = 0 picks a node count resolving the Gaussian width.
double lemma2_integral(const MovingDomain& domain, const Vec2& x, double t, double s, int M = 0);

/// Smallest power of two F with spacing / F <= sqrt(sigma): the periodic trapezoid rule on a
/// Gaussian of width sqrt(sigma) then errs by about exp(-2 pi^2) relative.
int refinement_factor(double spacing, double sigma);

/// Largest node spacing |psi'| 2 pi / M of a slice.
double max_spacing(const BoundarySlice& slice);

}  // namespace fpt

#endif  // FPT_GEOMETRY_HPP
