#include <doctest.h>

#include <cmath>
#include <random>

#include "fpt/geometry.hpp"
#include "fpt/kernels.hpp"
#include "fpt/quadrature.hpp"

using namespace fpt;

namespace {

MovingDomain unit_disk(VelocityField v = VelocityField::zero(), double horizon = 1.0) {
  return MovingDomain(ReferenceBoundary::circle(1.0), Vec2::Zero(), FlowMap(std::move(v), 1e-3), horizon);
}

std::vector<VelocityField> builtin_fields() {
  return {VelocityField::zero(),
          VelocityField::translation(Vec2(1.0, -0.5)),
          VelocityField::rotation(kPi / 2, Vec2(0.3, 0.1)),
          VelocityField::scaling({-0.5, 0.2}, Vec2(0.1, 0.0)),
          VelocityField::composite({VelocityField::rotation(1.0), VelocityField::translation(Vec2(0.5, 0.0)),
                                    VelocityField::scaling({-0.3})})};
}

Vec2 rotate(const Vec2& x, double angle) {
  return Vec2(std::cos(angle) * x(0) - std::sin(angle) * x(1), std::sin(angle) * x(0) + std::cos(angle) * x(1));
}

}  // namespace

TEST_CASE("advance and inverse closed cases") {
  const FlowMap shift(VelocityField::translation(Vec2(1.0, 0.0)), 1e-3);
  CHECK((shift.advance(Vec2(0, 0), 0.0, 1.0) - Vec2(1, 0)).norm() < 1e-14);
  CHECK((shift.inverse(Vec2(1, 0), 1.0, 0.0) - Vec2(0, 0)).norm() < 1e-14);

  const FlowMap still(VelocityField::zero(), 1e-3);
  CHECK(still.advance(Vec2(0.3, -2.0), 0.1, 0.9) == Vec2(0.3, -2.0));
  CHECK(still.inverse(Vec2(0.3, -2.0), 0.9, 0.1) == Vec2(0.3, -2.0));

  const FlowMap turn(VelocityField::rotation(kPi / 2), 1e-3);
  CHECK((turn.advance(Vec2(1, 0), 0.0, 1.0) - rotate(Vec2(1, 0), kPi / 2)).norm() < 1e-8);
  CHECK((turn.inverse(Vec2(0, 1), 1.0, 0.0) - rotate(Vec2(0, 1), -kPi / 2)).norm() < 1e-8);
  CHECK_THROWS_AS(turn.advance(Vec2(1, 0), 1.0, 0.5), InvalidTimeOrder);
}

TEST_CASE("flow identity, composition and inversion for every built-in field") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& field : builtin_fields()) {
    const FlowMap flow(field, 1e-3);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec2 x(u(rng), u(rng));
      double a = 0.5 * (u(rng) + 1.0), b = 0.5 * (u(rng) + 1.0);
      if (a > b) std::swap(a, b);
      const double mid = a + 0.37 * (b - a);
      CHECK(flow.advance(x, a, a) == x);
      CHECK((flow.advance(flow.advance(x, a, mid), mid, b) - flow.advance(x, a, b)).norm() <= 1e-8);
      CHECK((flow.inverse(flow.advance(x, a, b), b, a) - x).norm() <= 1e-8);
      CHECK((flow.advance(flow.inverse(x, b, a), a, b) - x).norm() <= 1e-8);
      CHECK((flow.affine(a, b)(x) - flow.advance(x, a, b)).norm() <= 1e-13);
      CHECK((flow.affine(b, a)(x) - flow.inverse(x, b, a)).norm() <= 1e-13);
    }
  }
}

TEST_CASE("radial scaling matches the exponential of the integrated rate") {
  const FlowMap flow(VelocityField::scaling({-0.5, 0.2}), 1e-3);
  const double t = 0.8;
  const double factor = std::exp(-0.5 * t + 0.1 * t * t);
  CHECK((flow.advance(Vec2(1.0, 0.5), 0.0, t) - factor * Vec2(1.0, 0.5)).norm() < 1e-12);
}

TEST_CASE("finite-difference Jacobian matches exact Jacobians") {
  const FlowMap shift(VelocityField::translation(Vec2(1.0, 2.0)), 1e-3);
  CHECK((shift.jacobian(Vec2(0.2, 0.3), 0.0, 1.0, 2e-5) - Mat2::Identity()).norm() < 1e-9);
  const double omega = 1.3;
  const FlowMap turn(VelocityField::rotation(omega), 1e-3);
  Mat2 exact;
  exact << std::cos(omega * 0.7), -std::sin(omega * 0.7), std::sin(omega * 0.7), std::cos(omega * 0.7);
  CHECK((turn.jacobian(Vec2(0.2, 0.3), 0.0, 0.7, 2e-5) - exact).norm() < 1e-9);
}

TEST_CASE("velocity field Lipschitz constants") {
  CHECK(VelocityField::translation(Vec2(3, 4)).lipschitz(1.0) == 0.0);
  CHECK(VelocityField::rotation(-2.5).lipschitz(1.0) == 2.5);
  CHECK(VelocityField::scaling({-0.5, 1.0}).lipschitz(1.0) == doctest::Approx(0.5));
  CHECK(VelocityField::scaling({-0.5, 1.0}).lipschitz(2.0) == doctest::Approx(1.5));
  const Vec2 x(0.4, -0.2);
  const VelocityField rot = VelocityField::rotation(2.0, Vec2(1.0, 0.0));
  CHECK((rot(x, 0.3) - 2.0 * Vec2(0.2, -0.6)).norm() < 1e-15);
}

TEST_CASE("reference parametrizations have consistent derivatives") {
  const std::vector<ReferenceBoundary> shapes{ReferenceBoundary::circle(1.5, Vec2(0.1, 0.2)),
                                              ReferenceBoundary::ellipse(2.0, 1.0),
                                              ReferenceBoundary::star(1.0, 0.2, 5),
                                              ReferenceBoundary::superellipse(10.0, 5.0, 8, Vec2(0.0, 5.0))};
  const double h = 1e-5;
  for (const auto& shape : shapes) {
    for (double u : {0.0, 0.3, 1.2, 2.9, 4.4, 6.0}) {
      const Vec2 fd1 = (shape.point(u + h) - shape.point(u - h)) / (2 * h);
      const Vec2 fd2 = (shape.d1(u + h) - shape.d1(u - h)) / (2 * h);
      CHECK((fd1 - shape.d1(u)).norm() < 1e-6 * (1.0 + shape.d1(u).norm()));
      CHECK((fd2 - shape.d2(u)).norm() < 1e-5 * (1.0 + shape.d2(u).norm()));
      CHECK(shape.d1(u).norm() > 0.0);
    }
    CHECK((shape.point(0.0) - shape.point(kTwoPi)).norm() < 1e-12);
  }
}

TEST_CASE("boundary_at on static and translated circles") {
  const MovingDomain still = unit_disk();
  const BoundarySlice s = still.boundary_at(0.4, 64);
  CHECK(s.length() == doctest::Approx(kTwoPi).epsilon(1e-10));

  const MovingDomain moving = unit_disk(VelocityField::translation(Vec2(1.0, 0.0)));
  const BoundarySlice m = moving.boundary_at(1.0, 64);
  for (int j = 0; j < m.size(); ++j) {
    const Vec2 radial = m.nodes.col(j) - Vec2(1.0, 0.0);
    CHECK(radial.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((m.normals.col(j) - radial).norm() < 1e-9);
    CHECK(m.normals.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS(still.boundary_at(0.5, 4));
}

TEST_CASE("ellipse perimeter matches an adaptive arc-length oracle") {
  const ReferenceBoundary ellipse = ReferenceBoundary::ellipse(2.0, 1.0);
  const AdaptiveResult oracle =
      integrate_adaptive([&](double u) { return ellipse.d1(u).norm(); }, 0.0, kTwoPi, 1e-14, 1e-14);
  CHECK(oracle.value == doctest::Approx(9.688448).epsilon(1e-7));
  const MovingDomain domain(ellipse, Vec2::Zero(), FlowMap(VelocityField::zero(), 1e-3), 1.0);
  CHECK(std::abs(domain.boundary_at(0.0, 128).length() - oracle.value) < 1e-6);

  // doubling M: error shrinks at least quadratically until rounding takes over
  double prev = std::abs(domain.boundary_at(0.0, 8).length() - oracle.value);
  for (int M : {16, 32}) {
    const double err = std::abs(domain.boundary_at(0.0, M).length() - oracle.value);
    CHECK((err < 1e-12 || std::log2(prev / err) >= 2.0));
    prev = err;
  }
}

TEST_CASE("pointwise and transfer-map slices agree") {
  for (const auto& field : builtin_fields()) {
    const MovingDomain domain(ReferenceBoundary::star(1.0, 0.15, 3), Vec2::Zero(), FlowMap(field, 1e-3), 1.0);
    const BoundarySlice a = domain.boundary_at(0.7, 48);
    const BoundarySlice b = domain.slice_from_map(0.7, 48, domain.flow().affine(0.0, 0.7));
    CHECK((a.nodes - b.nodes).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.normals - b.normals).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.curvature - b.curvature).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((a.normal_velocity - b.normal_velocity).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("incremental grid matches direct slices") {
  const MovingDomain domain(ReferenceBoundary::ellipse(1.5, 0.8), Vec2::Zero(),
                            FlowMap(VelocityField::rotation(2.0, Vec2(0.2, 0.0)), 1e-3), 1.0);
  std::vector<double> times;
  for (int k = 0; k <= 20; ++k) times.push_back(0.05 * k);
  const BoundaryGrid grid = build_boundary_grid(domain, times, 32);
  for (int k : {0, 7, 20}) {
    const BoundarySlice direct = domain.boundary_at(times[k], 32);
    CHECK((grid.slices[k].nodes - direct.nodes).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("contains closed cases") {
  const MovingDomain still = unit_disk();
  CHECK(still.contains(Vec2(0, 0), 0.3));
  CHECK_FALSE(still.contains(Vec2(2, 0), 0.3));
  const MovingDomain moving = unit_disk(VelocityField::translation(Vec2(1.0, 0.0)));
  CHECK(moving.contains(Vec2(1.5, 0.0), 1.0));
  CHECK_FALSE(moving.contains(Vec2(-0.5, 0.0), 1.0));
  // a polygon vertex is classified as outside
  CHECK_FALSE(still.contains_reference(Vec2(1.0, 0.0)));
}

TEST_CASE("every normal points outward") {
  const std::vector<MovingDomain> domains{
      unit_disk(),
      unit_disk(VelocityField::translation(Vec2(1.0, 0.0))),
      unit_disk(VelocityField::scaling({-0.5})),
      MovingDomain(ReferenceBoundary::ellipse(1.5, 0.75), Vec2::Zero(), FlowMap(VelocityField::rotation(kPi), 1e-3), 1.0),
      MovingDomain(ReferenceBoundary::star(1.0, 0.25, 5), Vec2::Zero(),
                   FlowMap(VelocityField::composite({VelocityField::rotation(1.0), VelocityField::translation(Vec2(0.3, 0.0))}), 1e-3),
                   1.0),
      MovingDomain(ReferenceBoundary::superellipse(10.0, 5.0, 8, Vec2(0.0, 5.0)), Vec2(0.0, 5.0),
                   FlowMap(VelocityField::zero(), 1e-3), 0.5)};
  for (const auto& domain : domains) {
    for (double t : {0.0, 0.25, 0.5}) {
      const BoundarySlice slice = domain.boundary_at(t, 96);
      for (int j = 0; j < slice.size(); ++j) {
        const Vec2 y = slice.nodes.col(j), n = slice.normals.col(j);
        CHECK_FALSE(domain.contains(y + 1e-6 * n, t));
        CHECK(domain.contains(y - 1e-6 * n, t));
      }
      CHECK(domain.contains(domain.flow().advance(domain.marker(), 0.0, t), t));
    }
  }
}

TEST_CASE("reference projection finds the nearest curve point") {
  const MovingDomain domain(ReferenceBoundary::ellipse(2.0, 1.0), Vec2::Zero(), FlowMap(VelocityField::zero(), 1e-3), 1.0);
  for (double u : {0.1, 1.0, 2.5, 4.0, 5.9}) {
    const Vec2 y = domain.boundary().point(u);
    const Vec2 t = domain.boundary().d1(u).normalized();
    const Vec2 n(t(1), -t(0));
    for (double d : {1e-3, 0.05, -0.02}) {
      const ReferenceProjection proj = domain.project_reference(y - d * n);
      CHECK(proj.u == doctest::Approx(u).epsilon(1e-10));
      CHECK(proj.distance == doctest::Approx(std::abs(d)).epsilon(1e-9));
    }
  }
  CHECK(domain.reference_distance_lower_bound(Vec2(0.2, 0.0)) <= 0.8);
  CHECK(domain.reference_distance_lower_bound(Vec2(0.2, 0.0)) > 0.79);
}

TEST_CASE("lemma1 constant equals the chord-normal ratio of a circle") {
  for (double R : {1.0, 2.0, 10.0}) {
    const MovingDomain domain(ReferenceBoundary::circle(R), Vec2::Zero(), FlowMap(VelocityField::zero(), 1e-3), 1.0);
    CHECK(lemma1_constant(domain.boundary_at(0.0, 128)) == doctest::Approx(0.5 / R).epsilon(0.02));
  }
  const MovingDomain ellipse(ReferenceBoundary::ellipse(2.0, 1.0), Vec2::Zero(), FlowMap(VelocityField::zero(), 1e-3), 1.0);
  const double c = lemma1_constant(ellipse.boundary_at(0.0, 256));
  CHECK(c <= 1.0 + 1e-9);  // half the maximal curvature a / b^2
  CHECK(c > 0.1);
}

TEST_CASE("lemma2 Gaussian surface integral tends to one") {
  const MovingDomain still = unit_disk();
  CHECK(lemma2_integral(still, Vec2(1.0, 0.0), 0.5, 0.5 - 1e-4) == doctest::Approx(1.0).epsilon(5e-3));
  CHECK(lemma2_integral(still, Vec2(1.0, 0.0), 8.0, 0.0) < 1.0);
  const MovingDomain moving = unit_disk(VelocityField::translation(Vec2(1.0, 0.0)));
  const Vec2 x = moving.boundary_at(0.5, 64).nodes.col(5);
  CHECK(lemma2_integral(moving, x, 0.5, 0.5 - 1e-4) == doctest::Approx(1.0).epsilon(5e-3));

  double prev = 1e300;
  for (double sigma : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double gap = std::abs(lemma2_integral(still, Vec2(0.0, 1.0), 0.5, 0.5 - sigma) - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("speed bound on moving domains") {
  CHECK(unit_disk().speed_bound() == 0.0);
  CHECK(unit_disk(VelocityField::translation(Vec2(3.0, 4.0))).speed_bound() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(unit_disk(VelocityField::rotation(2.0)).speed_bound() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("normal-kernel surface integral obeys the weakly singular bound") {
  // sqrt(sigma) * int |K| dH tends to kappa / (2 sqrt(2 pi)) on the unit circle, so the
  // surface integral scales like sigma^(-1/2) and sigma^(3/2 - 2 gamma) times it stays bounded.
  const MovingDomain still = unit_disk();
  const Vec2 x(1.0, 0.0), n(1.0, 0.0);
  const double gamma = 0.49;
  const double t = 1.0;
  double bounded_max = 0.0;
  for (double sigma : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const BoundarySlice coarse = still.boundary_at(t - sigma, 64);
    const int M = 64 * refinement_factor(max_spacing(coarse), sigma) * 2;
    const BoundarySlice slice = still.slice_from_map(t - sigma, M, AffineMap{});
    const double integral = (normal_kernel_row(x, t, n, slice.nodes, t - sigma).abs() * slice.weights.array()).sum();
    bounded_max = std::max(bounded_max, integral * std::pow(sigma, 1.5 - 2.0 * gamma));
    if (sigma <= 1e-3) CHECK(std::sqrt(sigma) * integral == doctest::Approx(0.5 / std::sqrt(kTwoPi)).epsilon(0.02));
  }
  CHECK(bounded_max < 1.0);
}
