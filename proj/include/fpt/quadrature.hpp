#ifndef FPT_QUADRATURE_HPP
#define FPT_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace fpt {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Nodes from the Jacobi matrix eigenproblem, polished by Newton steps on P_n.
GaussRule gauss_legendre(int n);

/// Same rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
  bool converged = false;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
/// Subdivides the interval with the largest error estimate until
/// error <= max(abs_tol, rel_tol * |value|) or max_intervals is reached.
/// Optional interior breakpoints are used as initial subdivision points.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, double rel_tol, int max_intervals = 4000,
                                  const std::vector<double>& breakpoints = {});

/// Interpolating cubic spline on a uniform periodic grid u_j = j * period / n.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  PeriodicSpline(const Eigen::VectorXd& values, double period);

  double operator()(double u) const;
  double derivative(double u) const;
  int size() const { return static_cast<int>(values_.size()); }

 private:
  Eigen::VectorXd values_;
  Eigen::VectorXd second_;  // second derivatives at the knots
  double period_ = 0.0;
  double h_ = 0.0;
};

/// Second derivatives of the periodic cubic spline through `values` with knot spacing h.
Eigen::VectorXd periodic_spline_moments(const Eigen::VectorXd& values, double h);

/// Evaluates the periodic spline with knot values and moments (n knots, spacing h) at u.
template <typename DerivedV, typename DerivedM>
double periodic_spline_eval(const Eigen::MatrixBase<DerivedV>& values, const Eigen::MatrixBase<DerivedM>& moments,
                            double h, double u) {
  const int n = static_cast<int>(values.size());
  const double period = h * n;
  double r = std::fmod(u, period);
  if (r < 0.0) r += period;
  const double pos = r / h;
  int j = static_cast<int>(pos);
  double a = pos - j;
  if (j >= n) {
    j = n - 1;
    a = 1.0;
  }
  const int k = (j + 1) % n;
  const double b = 1.0 - a;
  return b * values(j) + a * values(k) + ((b * b * b - b) * moments(j) + (a * a * a - a) * moments(k)) * h * h / 6.0;
}

}  // namespace fpt

#endif  // FPT_QUADRATURE_HPP
