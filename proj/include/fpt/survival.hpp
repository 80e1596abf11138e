#ifndef FPT_SURVIVAL_HPP
#define FPT_SURVIVAL_HPP

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fpt/geometry.hpp"
#include "fpt/slice_sums.hpp"
#include "fpt/volterra.hpp"

namespace fpt {

/// Single-layer heat potential S[p](x, t) = int_0^t int G(x, t; y, s) p(y, s) dH(y) ds at a fixed
/// time t, for points x inside Omega_t.
///
/// Slices older than `near_steps` steps enter through product weights on the stored fine slices.
/// The recent past is integrated in w = sqrt(t - s) with Gauss-Legendre on dyadic panels; there the
/// curve is rebuilt from the reference parametrization and p is spline-interpolated, with a
/// local trapezoid rule of spacing sqrt(t - s) / 2 around the nearest boundary point.
class LayerPotential {
 public:
  /// Gradients near the boundary need the wider near zone; volume integrals of the value do not.
  static constexpr int kGradientNearSteps = 16;
  static constexpr int kValueNearSteps = 2;

  LayerPotential(const DensitySolution& solution, double t, int near_steps = kGradientNearSteps);

  double time() const { return t_; }
  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;

 private:
  struct NearNode {
    double s = 0.0;
    double weight = 0.0;  // quadrature weight in s
    AffineMap map;        // reference -> Omega_s
    AffineMap inverse;
    Eigen::VectorXd p;        // coarse density at time s
    Eigen::VectorXd moments;  // its spline moments
    double speed_min = 0.0, speed_max = 0.0;
    double singular_min = 0.0;  // smallest singular value of map.linear
  };

  template <typename Acc>
  void near_zone(const Vec2& x, Acc&& accumulate) const;

  const DensitySolution& sol_;
  double t_;
  std::shared_ptr<SliceSums> sums_;
  std::vector<int> far_slices_;
  std::vector<double> far_weights_;
  std::vector<int> far_strides_;
  std::vector<NearNode> near_;
  std::vector<double> panel_floor_;  // lower w of the dyadic panel each near node belongs to
};

/// Quadrature over Omega_t from a polar grid about the marker pushed through the flow.
struct InteriorGrid {
  Eigen::Matrix2Xd nodes;
  Eigen::VectorXd weights;

  double area() const { return weights.sum(); }
};

InteriorGrid interior_grid(const MovingDomain& domain, double t, int radial = 24, int angular = 128);

/// Probability that free Brownian motion started at y lies in Omega_t after time sigma, by the
/// divergence theorem on the boundary: (1/2 pi) oint (1 - exp(-r^2 / 2 sigma)) <x - y, n> / r^2 dH.
double free_mass_inside(const MovingDomain& domain, const Vec2& y, double t, double sigma);

/// G^Omega(r0, 0; x, t) = G(x, t; r0, 0) - S[p](x, t) for a point-source solution.
double green_function(const Vec2& r0, const Vec2& x, double t, const DensitySolution& p);

struct SurvivalValue {
  double value = 0.0;  // clamped to [0, 1]
  double raw = 0.0;
};

SurvivalValue survival_prob(const Vec2& r0, double t, const DensitySolution& p);

/// P[tau <= t] from the boundary flux, trapezoid in time.
double fpt_cdf(const Vec2& r0, double t, const DensitySolution& p);

/// fpt_cdf at arbitrary times from one pass over the slice fluxes.
class FptCdfTable {
 public:
  explicit FptCdfTable(const DensitySolution& p);
  double operator()(double t) const;

 private:
  std::vector<double> times_, flux_, cumulative_;
};

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> raw;
  std::vector<double> cdf;
};

/// Survival and CDF at every `stride`-th solver time (and at T).
SurvivalCurve survival_curve(const DensitySolution& p, int stride);

/// Everything needed to evaluate the smooth-data field u two ways.
struct UFieldContext {
  BumpSource bump;
  std::shared_ptr<const DensitySolution> smooth;             // solved with u0 = bump
  std::vector<std::shared_ptr<const DensitySolution>> nodal;  // point solves at the bump nodes
  Eigen::Matrix2Xd nodes;                                     // nodal points in the bump support
  Eigen::VectorXd weights;                                    // bump-weighted quadrature weights
};

UFieldContext prepare_u_field(const MovingDomain& domain, const BumpSource& bump, const SolverConfig& cfg,
                              int radial = 3, int angular = 6);

struct UFieldValue {
  double source_integral = 0.0;  // int u0(xi) G^Omega(xi, x) d xi
  double layer_form = 0.0;       // int u0 G + 1/2 int int G du/dn
};

/// Throws RepresentationMismatch when the two forms differ by more than 5% of the largest of
/// themselves and the free evolution int u0 G at x.
UFieldValue u_field(const Vec2& x, double t, const UFieldContext& ctx);

struct MassBalance {
  double t1 = 0.0, t2 = 0.0;
  double delta = 0.0;  // int u(., t1) - int u(., t2)
  double flux = 0.0;   // int_I int p_u0 dH ds
  double dF = 0.0;     // point-source CDF increments mixed over the bump nodes
  double abs_error = 0.0;
};

MassBalance mass_balance(double t1, double t2, const UFieldContext& ctx);

/// int_{Omega_t} u(x, t) dx from the layer form.
double u_mass(double t, const UFieldContext& ctx);

}  // namespace fpt

#endif  // FPT_SURVIVAL_HPP
