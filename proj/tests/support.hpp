#ifndef FPT_TESTS_SUPPORT_HPP
#define FPT_TESTS_SUPPORT_HPP

#include "fpt/geometry.hpp"
#include "fpt/volterra.hpp"

namespace fpt::testing {

inline MovingDomain static_disk(double horizon, double radius = 1.0) {
  return MovingDomain(ReferenceBoundary::circle(radius), Vec2::Zero(), FlowMap(VelocityField::zero(), 1e-3), horizon);
}

inline MovingDomain shrinking_disk(double horizon, double alpha = -0.5) {
  return MovingDomain(ReferenceBoundary::circle(1.0), Vec2::Zero(), FlowMap(VelocityField::scaling({alpha}), 1e-3),
                      horizon);
}

inline MovingDomain rotating_ellipse(double horizon) {
  return MovingDomain(ReferenceBoundary::ellipse(1.5, 0.8), Vec2::Zero(), FlowMap(VelocityField::rotation(1.0), 1e-3),
                      horizon);
}

inline MovingDomain translating_disk(double horizon) {
  return MovingDomain(ReferenceBoundary::circle(1.0), Vec2::Zero(),
                      FlowMap(VelocityField::translation(Vec2(0.5, 0.0)), 1e-3), horizon);
}

/// Superellipse with a flat bottom edge on y = 0 standing in for the half-plane y > 0.
inline MovingDomain truncated_halfplane(double horizon) {
  return MovingDomain(ReferenceBoundary::superellipse(10.0, 5.0, 8, Vec2(0.0, 5.0)), Vec2(0.0, 5.0),
                      FlowMap(VelocityField::zero(), 1e-3), horizon);
}

inline SolverConfig config(double dt, int nodes = 64) {
  SolverConfig cfg;
  cfg.dt = dt;
  cfg.nodes = nodes;
  return cfg;
}

}  // namespace fpt::testing

#endif  // FPT_TESTS_SUPPORT_HPP
