#include "fpt/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fpt {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes(0) = 0.0;
    rule.weights(0) = 2.0;
    return rule;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  for (int i = 0; i < n; ++i) {
    double x = eig.eigenvalues()(i);
    double dp = 1.0;
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      x -= p1 / dp;
    }
    rule.nodes(i) = x;
    rule.weights(i) = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule rule = gauss_legendre(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  rule.nodes = (mid + half * rule.nodes.array()).matrix();
  rule.weights *= half;
  return rule;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment kronrod15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, double rel_tol, int max_intervals,
                                  const std::vector<double>& breakpoints) {
  std::vector<double> cuts{a};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::priority_queue<Segment> heap;
  double value = 0.0, error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    Segment s = kronrod15(f, cuts[i], cuts[i + 1]);
    value += s.value;
    error += s.error;
    heap.push(s);
  }
  AdaptiveResult result;
  while (!heap.empty() && static_cast<int>(heap.size()) < max_intervals) {
    if (error <= std::max(abs_tol, rel_tol * std::abs(value))) {
      result.converged = true;
      break;
    }
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {  // interval exhausted at machine precision
      heap.push(worst);
      break;
    }
    Segment left = kronrod15(f, worst.a, mid);
    Segment right = kronrod15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the running totals.
  value = 0.0;
  error = 0.0;
  result.intervals = static_cast<int>(heap.size());
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  result.value = value;
  result.error = error;
  result.converged = result.converged || error <= std::max(abs_tol, rel_tol * std::abs(value));
  return result;
}

Eigen::VectorXd periodic_spline_moments(const Eigen::VectorXd& values, double h) {
  // Cyclic tridiagonal system (1, 4, 1) M = 6/h^2 * second difference,
  // solved by Sherman-Morrison on top of the Thomas algorithm.
  const int n = static_cast<int>(values.size());
  Eigen::VectorXd rhs(n);
  for (int j = 0; j < n; ++j) {
    const double prev = values((j + n - 1) % n);
    const double next = values((j + 1) % n);
    rhs(j) = 6.0 * (next - 2.0 * values(j) + prev) / (h * h);
  }
  if (n < 3) return Eigen::VectorXd::Zero(n);

  const double gamma = -4.0;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 4.0);
  diag(0) -= gamma;
  diag(n - 1) -= 1.0 / gamma;

  auto thomas = [&](Eigen::VectorXd d) {
    Eigen::VectorXd c(n), x(n);
    c(0) = 1.0 / diag(0);
    d(0) /= diag(0);
    for (int i = 1; i < n; ++i) {
      const double m = diag(i) - c(i - 1);
      c(i) = 1.0 / m;
      d(i) = (d(i) - d(i - 1)) / m;
    }
    x(n - 1) = d(n - 1);
    for (int i = n - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
    return x;
  };
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  u(0) = gamma;
  u(n - 1) = 1.0;
  const Eigen::VectorXd y = thomas(rhs);
  const Eigen::VectorXd z = thomas(u);
  const double factor = (y(0) + y(n - 1) / gamma) / (1.0 + z(0) + z(n - 1) / gamma);
  return y - factor * z;
}

PeriodicSpline::PeriodicSpline(const Eigen::VectorXd& values, double period)
    : values_(values), period_(period), h_(period / static_cast<double>(values.size())) {
  second_ = periodic_spline_moments(values_, h_);
}

double PeriodicSpline::operator()(double u) const {
  const int n = size();
  double r = std::fmod(u, period_);
  if (r < 0.0) r += period_;
  const double pos = r / h_;
  int j = static_cast<int>(pos);
  double a = pos - j;  // local coordinate in [0, 1)
  if (j >= n) {
    j = n - 1;
    a = 1.0;
  }
  const int k = (j + 1) % n;
  const double b = 1.0 - a;
  return b * values_(j) + a * values_(k) +
         ((b * b * b - b) * second_(j) + (a * a * a - a) * second_(k)) * h_ * h_ / 6.0;
}

double PeriodicSpline::derivative(double u) const {
  const int n = size();
  double r = std::fmod(u, period_);
  if (r < 0.0) r += period_;
  const double pos = r / h_;
  int j = std::min(static_cast<int>(pos), n - 1);
  const double a = pos - j;
  const int k = (j + 1) % n;
  const double b = 1.0 - a;
  return (values_(k) - values_(j)) / h_ +
         ((1.0 - 3.0 * b * b) * second_(j) + (3.0 * a * a - 1.0) * second_(k)) * h_ / 6.0;
}

}  // namespace fpt
