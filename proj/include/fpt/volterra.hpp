#ifndef FPT_VOLTERRA_HPP
#define FPT_VOLTERRA_HPP

#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fpt/common.hpp"
#include "fpt/geometry.hpp"
#include "fpt/slice_sums.hpp"

namespace fpt {

enum class SolveMode { march, picard };

/// How the history integral over [0, t_k] is discretized in time.
///  - product: q(s) = sqrt(t - s) * (spatial sum) is taken piecewise linear between slices and
///    integrated exactly against (t - s)^(-1/2); the last panel holds q at the previous slice.
///  - rectangle: every past slice weighted by dt, last panel dropped.
enum class TimeQuadrature { product, rectangle };

enum class PicardSeed { march, zero, rhs };

struct SolverConfig {
  double dt = 1e-3;
  int nodes = 64;
  double gamma = 0.4;  // only enters diagnostic bounds
  double picard_tol = 1e-10;
  int picard_max_iters = 200;
  double window = 0.0;  // Picard window length; 0 chooses one by halving
  SolveMode mode = SolveMode::march;
  TimeQuadrature quadrature = TimeQuadrature::product;
  PicardSeed seed = PicardSeed::march;
  int threads = 1;

  /// Throws ConfigError when a field is out of range for this horizon.
  void validate(double horizon) const;
  int steps(double horizon) const;
};

/// Normalized C-infinity bump h_m(xi) = m^2 C exp(-1 / (1 - m^2 |xi - c|^2)) supported in B(c, 1/m).
struct BumpSource {
  Vec2 center = Vec2::Zero();
  double m = 8.0;

  double radius() const { return 1.0 / m; }
  double operator()(const Vec2& xi) const;
  /// Polar tensor rule over the support: Gauss-Legendre in the radius, trapezoid in the angle.
  void quadrature(Eigen::Matrix2Xd& nodes, Eigen::VectorXd& weights, int radial = 32, int angular = 32) const;
  /// 1 / (2 pi int_0^1 rho exp(-1 / (1 - rho^2)) d rho)
  static double normalisation();
};

struct PointSource {
  Vec2 position = Vec2::Zero();
};

class SourceSpec {
 public:
  SourceSpec() = default;
  static SourceSpec point(const Vec2& r0);
  static SourceSpec bump(const Vec2& center, double m);

  bool is_point() const { return std::holds_alternative<PointSource>(value_); }
  const PointSource& as_point() const { return std::get<PointSource>(value_); }
  const BumpSource& as_bump() const { return std::get<BumpSource>(value_); }
  Vec2 location() const;

  /// Point strictly inside, or bump support strictly inside, the initial domain.
  void validate(const MovingDomain& domain) const;

 private:
  std::variant<PointSource, BumpSource> value_;
};

/// Free term for a point source: -K(x, t; r0, 0); zero at t = 0.
double rhs_point(const Vec2& x, const Vec2& n, double t, const Vec2& r0);
/// Free term for a bump: -int u0(xi) K(x, t; xi, 0) d xi; zero at t = 0.
double rhs_smooth(const Vec2& x, const Vec2& n, double t, const BumpSource& u0);

/// Discrete density on the lateral boundary.
/// Coarse values p(j, k) live at parameter u_j = 2 pi j / M on slice k; the fine slices carry
/// fine_factor times as many nodes, with p spline-interpolated in u.
struct DensitySolution {
  MovingDomain domain;
  SourceSpec source;
  SolverConfig config;
  std::vector<double> times;
  std::vector<AffineMap> maps;       // reference -> slice k
  std::vector<BoundarySlice> slices; // fine slices
  int coarse_nodes = 0;
  int fine_factor = 1;
  Eigen::MatrixXd p;       // coarse, M x (K + 1)
  Eigen::MatrixXd p_fine;  // fine, (M F) x (K + 1)
  Eigen::MatrixXd moments; // periodic spline second derivatives of p, M x (K + 1)
  int picard_iterations = 0;
  double picard_window = 0.0;
  std::shared_ptr<const SliceSums> sums;  // fine slices with their densities, shared by copies

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double dt() const { return config.dt; }
  /// p(u, t): periodic cubic spline in u, linear in t; zero at t = 0.
  double interpolate(double u, double t) const;
  /// Position, normal and weight of coarse node j on slice k.
  Vec2 node(int k, int j) const { return slices[k].nodes.col(j * fine_factor); }
  Vec2 normal(int k, int j) const { return slices[k].normals.col(j * fine_factor); }
  /// Total flux sum_j w_j p_j on slice k.
  double flux(int k) const;
  /// Rebuild fine values, spline moments and slice sums after p changed.
  void refresh();
};

DensitySolution solve(const MovingDomain& domain, const SourceSpec& source, const SolverConfig& cfg);

enum class ResidualGrid { staggered, nodes };

/// sup |p - rhs - history| over the chosen grid; staggered uses midpoint times with
/// p averaged between neighbouring slices.
double residual(const DensitySolution& solution, ResidualGrid where = ResidualGrid::staggered);

struct DeltaGap {
  double m = 0.0;
  double gap = 0.0;       // sup |p_m - p|
  double relative = 0.0;  // gap / sup |p|
};

std::vector<DeltaGap> delta_convergence_study(const MovingDomain& domain, const Vec2& center,
                                              const std::vector<double>& ms, const SolverConfig& cfg);

struct JumpRelation {
  double kernel_integral = 0.0;  // int_0^t int K dH ds
  std::vector<double> offsets;
  std::vector<double> values;  // offset integrals
  std::vector<double> gaps;    // |value - (1 + kernel_integral)|
};

/// Offset single-layer normal derivative with unit density at boundary parameter u_x and
/// time t, by nested adaptive Gauss-Kronrod quadrature.
JumpRelation jump_relation(const MovingDomain& domain, double u_x, double t, const std::vector<double>& offsets,
                           double tol = 1e-10);

/// Product-integration weights on past slices l = 1..last for a target at time t
/// (times[0] is the initial slice and carries zero density).
std::vector<double> history_weights(const std::vector<double>& times, int last, double t, TimeQuadrature rule);

}  // namespace fpt

#endif  // FPT_VOLTERRA_HPP
