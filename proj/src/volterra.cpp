#include "fpt/volterra.hpp"

#include <cmath>
#include <sstream>

#include "fpt/kernels.hpp"
#include "fpt/parallel.hpp"
#include "fpt/quadrature.hpp"
#include "fpt/slice_sums.hpp"

namespace fpt {

// ---------------------------------------------------------------------------
// configuration and sources

int SolverConfig::steps(double horizon) const { return static_cast<int>(std::llround(horizon / dt)); }

void SolverConfig::validate(double horizon) const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("solver." + field + ": " + why); };
  if (!(dt > 0.0)) fail("dt", "must be positive");
  const int k = steps(horizon);
  if (k < 1 || std::abs(k * dt - horizon) > 1e-12 * std::max(1.0, horizon)) fail("dt", "must divide the horizon");
  if (nodes < 8) fail("nodes", "must be at least 8");
  if (!(gamma > 0.25 && gamma < 0.5)) fail("gamma", "must lie in (1/4, 1/2)");
  if (!(picard_tol > 0.0)) fail("picard_tol", "must be positive");
  if (picard_max_iters < 1) fail("picard_max_iters", "must be at least 1");
  if (window < 0.0) fail("window", "must be non-negative");
  if (threads < 0) fail("threads", "must be non-negative");
}

double BumpSource::normalisation() {
  static const double c = [] {
    const AdaptiveResult r = integrate_adaptive(
        [](double rho) { return rho < 1.0 ? rho * std::exp(-1.0 / (1.0 - rho * rho)) : 0.0; }, 0.0, 1.0, 1e-17, 1e-15);
    return 1.0 / (kTwoPi * r.value);
  }();
  return c;
}

double BumpSource::operator()(const Vec2& xi) const {
  const double r2 = (m * (xi - center)).squaredNorm();
  if (r2 >= 1.0) return 0.0;
  return m * m * normalisation() * std::exp(-1.0 / (1.0 - r2));
}

void BumpSource::quadrature(Eigen::Matrix2Xd& nodes, Eigen::VectorXd& weights, int radial, int angular) const {
  const GaussRule rule = gauss_legendre(radial, 0.0, 1.0);
  const double c = normalisation();
  nodes.resize(2, radial * angular);
  weights.resize(radial * angular);
  int q = 0;
  for (int i = 0; i < radial; ++i) {
    const double rho = rule.nodes(i);
    const double w = c * std::exp(-1.0 / (1.0 - rho * rho)) * rho * rule.weights(i) * kTwoPi / angular;
    for (int a = 0; a < angular; ++a) {
      const double theta = kTwoPi * a / angular;
      nodes.col(q) = center + (rho / m) * Vec2(std::cos(theta), std::sin(theta));
      weights(q) = w;
      ++q;
    }
  }
}

SourceSpec SourceSpec::point(const Vec2& r0) {
  SourceSpec s;
  s.value_ = PointSource{r0};
  return s;
}

SourceSpec SourceSpec::bump(const Vec2& center, double m) {
  if (!(m > 0.0)) throw ConfigError("source.m: must be positive");
  SourceSpec s;
  s.value_ = BumpSource{center, m};
  return s;
}

Vec2 SourceSpec::location() const { return is_point() ? as_point().position : as_bump().center; }

void SourceSpec::validate(const MovingDomain& domain) const {
  const Vec2 c = location();
  if (!domain.contains(c, 0.0)) throw PreconditionError("source lies outside the initial domain");
  const double dist = domain.project_reference(domain.flow().inverse(c, 0.0, 0.0), true).distance;
  const double reach = is_point() ? 0.0 : as_bump().radius();
  if (!(dist > reach + 1e-9 * domain.diameter()))
    throw PreconditionError(is_point() ? "point source touches the boundary" : "bump support reaches the boundary");
}

// ---------------------------------------------------------------------------
// free terms

double rhs_point(const Vec2& x, const Vec2& n, double t, const Vec2& r0) {
  if (t <= 0.0) return 0.0;
  return -normal_kernel(HeatKernelParams{2}, x, t, n, r0, 0.0);
}

double rhs_smooth(const Vec2& x, const Vec2& n, double t, const BumpSource& u0) {
  if (t <= 0.0) return 0.0;
  Eigen::Matrix2Xd nodes;
  Eigen::VectorXd weights;
  u0.quadrature(nodes, weights);
  return -(normal_kernel_row(x, t, n, nodes, 0.0) * weights.array()).sum();
}

namespace {

class FreeTerm {
 public:
  explicit FreeTerm(const SourceSpec& source) : point_(source.is_point()) {
    if (point_) {
      r0_ = source.as_point().position;
    } else {
      source.as_bump().quadrature(nodes_, weights_);
    }
  }
  double operator()(const Vec2& x, const Vec2& n, double t) const {
    if (t <= 0.0) return 0.0;
    if (point_) return rhs_point(x, n, t, r0_);
    return -(normal_kernel_row(x, t, n, nodes_, 0.0) * weights_.array()).sum();
  }

 private:
  bool point_;
  Vec2 r0_ = Vec2::Zero();
  Eigen::Matrix2Xd nodes_;
  Eigen::VectorXd weights_;
};

Eigen::VectorXd fine_values(const Eigen::VectorXd& coarse, const Eigen::VectorXd& moments, int factor) {
  const int m = static_cast<int>(coarse.size());
  Eigen::VectorXd fine(m * factor);
  const double h = kTwoPi / m;
  for (int i = 0; i < m * factor; ++i) fine(i) = periodic_spline_eval(coarse, moments, h, h * i / factor);
  return fine;
}

}  // namespace

std::vector<double> history_weights(const std::vector<double>& times, int last, double t, TimeQuadrature rule) {
  std::vector<double> w(static_cast<std::size_t>(last) + 1, 0.0);
  if (rule == TimeQuadrature::rectangle) {
    for (int l = 1; l <= last; ++l) w[l] = times[l] - times[l - 1];
    return w;
  }
  // integrals of sigma^(-1/2) and sigma^(1/2) over [a, b]
  auto i0 = [](double a, double b) { return 2.0 * (std::sqrt(b) - std::sqrt(a)); };
  auto i1 = [](double a, double b) { return (2.0 / 3.0) * (b * std::sqrt(b) - a * std::sqrt(a)); };
  for (int l = 1; l <= last; ++l) {
    const double a = t - times[l];
    const double b = t - times[l - 1];
    double weight = (b * i0(a, b) - i1(a, b)) / (b - a);
    if (l < last) {
      const double lo = t - times[l + 1];
      weight += (i1(lo, a) - lo * i0(lo, a)) / (a - lo);
    } else {
      weight += 2.0 * std::sqrt(a);
    }
    w[l] = std::sqrt(a) * weight;
  }
  return w;
}

// ---------------------------------------------------------------------------
// DensitySolution

double DensitySolution::interpolate(double u, double t) const {
  if (t <= 0.0) return 0.0;
  const double h = kTwoPi / coarse_nodes;
  const int K = steps();
  if (t >= times[K]) return periodic_spline_eval(p.col(K), moments.col(K), h, u);
  int k = std::min(K, std::max(1, static_cast<int>(std::ceil(t / dt() - 1e-12))));
  while (k > 1 && times[k - 1] > t) --k;
  while (k < K && times[k] < t) ++k;
  const double a = (t - times[k - 1]) / (times[k] - times[k - 1]);
  const double lo = periodic_spline_eval(p.col(k - 1), moments.col(k - 1), h, u);
  const double hi = periodic_spline_eval(p.col(k), moments.col(k), h, u);
  return (1.0 - a) * lo + a * hi;
}

double DensitySolution::flux(int k) const {
  double sum = 0.0;
  for (int j = 0; j < coarse_nodes; ++j) sum += slices[k].weights(j * fine_factor) * fine_factor * p(j, k);
  return sum;
}

void DensitySolution::refresh() {
  const double h = kTwoPi / coarse_nodes;
  moments.resize(coarse_nodes, p.cols());
  p_fine.resize(coarse_nodes * fine_factor, p.cols());
  for (int k = 0; k < p.cols(); ++k) {
    moments.col(k) = periodic_spline_moments(p.col(k), h);
    p_fine.col(k) = fine_values(p.col(k), moments.col(k), fine_factor);
  }
  auto built = std::make_shared<SliceSums>(static_cast<int>(p.cols()), fine_factor);
  for (int k = 0; k < p.cols(); ++k) built->set(k, slices[k], p_fine.col(k));
  sums = std::move(built);
}

// ---------------------------------------------------------------------------
// solver

namespace {

class Marcher {
 public:
  Marcher(DensitySolution& sol, const Eigen::MatrixXd& rhs, int threads)
      : sol_(sol), rhs_(rhs), sums_(sol.steps() + 1, sol.fine_factor), threads_(threads) {
    for (int k = 0; k <= sol_.steps(); ++k) install(k);
  }

  void install(int k) {
    const double h = kTwoPi / sol_.coarse_nodes;
    sol_.moments.col(k) = periodic_spline_moments(sol_.p.col(k), h);
    sol_.p_fine.col(k) = fine_values(sol_.p.col(k), sol_.moments.col(k), sol_.fine_factor);
    sums_.set(k, sol_.slices[k], sol_.p_fine.col(k));
  }

  /// History integral at coarse node j of slice k from slices first..last.
  double history(int k, int j, int first, int last, const std::vector<double>& w, const std::vector<int>& stride) const {
    const Vec2 x = sol_.node(k, j);
    const Vec2 n = sol_.normal(k, j);
    double acc = 0.0;
    for (int l = first; l <= last; ++l)
      if (sums_.active(l)) acc += w[l] * sums_.normal_sum(l, stride[l], x, n, sol_.times[k] - sol_.times[l]);
    return acc;
  }

  std::vector<int> strides(int k, int last) const {
    std::vector<int> s(static_cast<std::size_t>(last) + 1, 1);
    for (int l = 1; l <= last; ++l) s[l] = sums_.stride(l, sol_.times[k] - sol_.times[l]);
    return s;
  }

  /// base + history of slice k restricted to slices first..last, with the weights of the full
  /// history 1..k-1 (so a frozen window prefix gets interior, not end-panel, weights).
  void apply(int k, int first, int last, const Eigen::VectorXd& base, Eigen::Ref<Eigen::VectorXd> out) const {
    const std::vector<double> w = history_weights(sol_.times, k - 1, sol_.times[k], sol_.config.quadrature);
    const std::vector<int> s = strides(k, k - 1);
    const int top = std::min(last, k - 1);
    parallel_for(sol_.coarse_nodes, threads_, [&](int b, int e) {
      for (int j = b; j < e; ++j) out(j) = base(j) + history(k, j, first, top, w, s);
    });
  }

  void march(int from, int to) {
    for (int k = from; k <= to; ++k) {
      Eigen::VectorXd col(sol_.coarse_nodes);
      apply(k, 1, k - 1, rhs_.col(k), col);
      if (!col.allFinite()) throw SolverDiverged("non-finite density at t = " + std::to_string(sol_.times[k]));
      sol_.p.col(k) = col;
      install(k);
    }
  }

  /// Picard iteration on slices a+1..b with the history before a+1 frozen.
  /// Returns the iteration count; throws WindowTooLong when the sup-change grows three times
  /// in a row or the iteration budget runs out.
  int picard_window(int a, int b, int max_iters, double tol, bool probe_only, std::vector<double>* changes) {
    const int n = b - a;
    Eigen::MatrixXd fixed(sol_.coarse_nodes, n);
    for (int k = a + 1; k <= b; ++k) apply(k, 1, a, rhs_.col(k), fixed.col(k - a - 1));
    double prev = std::numeric_limits<double>::infinity();
    int increases = 0;
    for (int it = 1; it <= max_iters; ++it) {
      Eigen::MatrixXd next(sol_.coarse_nodes, n);
      for (int k = a + 1; k <= b; ++k) {
        const std::vector<double> w = history_weights(sol_.times, k - 1, sol_.times[k], sol_.config.quadrature);
        const std::vector<int> s = strides(k, k - 1);
        parallel_for(sol_.coarse_nodes, threads_, [&](int lo, int hi) {
          for (int j = lo; j < hi; ++j) next(j, k - a - 1) = fixed(j, k - a - 1) + history(k, j, a + 1, k - 1, w, s);
        });
      }
      if (!next.allFinite()) throw SolverDiverged("non-finite density during Picard iteration");
      const double change = (next - sol_.p.middleCols(a + 1, n)).cwiseAbs().maxCoeff();
      sol_.p.middleCols(a + 1, n) = next;
      for (int k = a + 1; k <= b; ++k) install(k);
      if (changes) changes->push_back(change);
      if (change < tol) return it;
      if (probe_only && changes->size() >= 3) return it;
      increases = change > prev ? increases + 1 : 0;
      if (increases >= 3) {
        std::ostringstream msg;
        msg << "window-too-long: Picard sup-change grew three times in a row on [" << sol_.times[a] << ", "
            << sol_.times[b] << "]; reduce the window length";
        throw WindowTooLong(msg.str());
      }
      prev = change;
    }
    std::ostringstream msg;
    msg << "window-too-long: Picard iteration did not reach tolerance within " << max_iters << " iterations on ["
        << sol_.times[a] << ", " << sol_.times[b] << "]";
    throw WindowTooLong(msg.str());
  }

 private:
  DensitySolution& sol_;
  const Eigen::MatrixXd& rhs_;
  SliceSums sums_;
  int threads_;
};

DensitySolution prepare(const MovingDomain& domain, const SourceSpec& source, const SolverConfig& cfg) {
  DensitySolution sol{domain, source, cfg, {}, {}, {}, cfg.nodes, 1, {}, {}, {}, 0, 0.0, {}};
  const int K = cfg.steps(domain.horizon());
  sol.times.resize(K + 1);
  for (int k = 0; k <= K; ++k) sol.times[k] = k * cfg.dt;
  sol.maps.resize(K + 1);
  double spacing = 0.0;
  for (int k = 1; k <= K; ++k) sol.maps[k] = domain.flow().affine(sol.times[k - 1], sol.times[k]).after(sol.maps[k - 1]);
  for (int k = 0; k <= K; ++k)
    spacing = std::max(spacing, max_spacing(domain.slice_from_map(sol.times[k], cfg.nodes, sol.maps[k])));
  sol.fine_factor = refinement_factor(spacing, 0.5 * cfg.dt);
  sol.slices.resize(K + 1);
  parallel_for(K + 1, resolve_threads(cfg.threads), [&](int b, int e) {
    for (int k = b; k < e; ++k) sol.slices[k] = domain.slice_from_map(sol.times[k], cfg.nodes * sol.fine_factor, sol.maps[k]);
  });
  sol.p = Eigen::MatrixXd::Zero(cfg.nodes, K + 1);
  sol.p_fine = Eigen::MatrixXd::Zero(cfg.nodes * sol.fine_factor, K + 1);
  sol.moments = Eigen::MatrixXd::Zero(cfg.nodes, K + 1);
  return sol;
}

Eigen::MatrixXd free_terms(const DensitySolution& sol, int threads) {
  const FreeTerm term(sol.source);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sol.coarse_nodes, sol.steps() + 1);
  parallel_for(sol.steps(), threads, [&](int b, int e) {
    for (int k = b + 1; k <= e; ++k)
      for (int j = 0; j < sol.coarse_nodes; ++j) rhs(j, k) = term(sol.node(k, j), sol.normal(k, j), sol.times[k]);
  });
  return rhs;
}

}  // namespace

DensitySolution solve(const MovingDomain& domain, const SourceSpec& source, const SolverConfig& cfg) {
  cfg.validate(domain.horizon());
  source.validate(domain);
  const int threads = resolve_threads(cfg.threads);
  DensitySolution sol = prepare(domain, source, cfg);
  const Eigen::MatrixXd rhs = free_terms(sol, threads);
  const int K = sol.steps();

  if (cfg.mode == SolveMode::march) {
    Marcher marcher(sol, rhs, threads);
    marcher.march(1, K);
    sol.refresh();
    return sol;
  }

  auto seed = [&](DensitySolution& target) {
    target.p.setZero();
    if (cfg.seed == PicardSeed::rhs) target.p = rhs;
    Marcher m(target, rhs, threads);
    if (cfg.seed == PicardSeed::march) m.march(1, K);
    return m;
  };

  int window_steps = 0;
  if (cfg.window > 0.0) {
    window_steps = std::clamp(static_cast<int>(std::llround(cfg.window / cfg.dt)), 1, K);
  } else {
    // halve until the first window contracts from a zero start
    window_steps = K;
    for (;;) {
      DensitySolution probe = sol;
      probe.p.setZero();
      Marcher m(probe, rhs, threads);
      std::vector<double> changes;
      bool contracts = false;
      try {
        m.picard_window(0, window_steps, 3, cfg.picard_tol, true, &changes);
        const std::size_t c = changes.size();
        contracts = c < 3 || changes[c - 1] < 0.9 * changes[c - 2];
      } catch (const WindowTooLong&) {
        contracts = false;
      }
      if (contracts || window_steps == 1) break;
      window_steps = std::max(1, window_steps / 2);
    }
  }
  sol.picard_window = window_steps * cfg.dt;

  Marcher marcher = seed(sol);
  for (int a = 0; a < K; a += window_steps) {
    const int b = std::min(K, a + window_steps);
    sol.picard_iterations += marcher.picard_window(a, b, cfg.picard_max_iters, cfg.picard_tol, false, nullptr);
  }
  sol.refresh();
  return sol;
}

// ---------------------------------------------------------------------------
// residual

double residual(const DensitySolution& solution, ResidualGrid where) {
  const DensitySolution& sol = solution;
  const int threads = resolve_threads(sol.config.threads);
  const int K = sol.steps();
  const int M = sol.coarse_nodes;
  const FreeTerm term(sol.source);
  const SliceSums& sums = *sol.sums;

  Eigen::VectorXd worst = Eigen::VectorXd::Zero(K + 1);
  parallel_for(K, threads, [&](int b, int e) {
    for (int k = b + 1; k <= e; ++k) {
      const bool mid = where == ResidualGrid::staggered;
      const double t = mid ? sol.times[k - 1] + 0.5 * (sol.times[k] - sol.times[k - 1]) : sol.times[k];
      BoundarySlice target;
      if (mid) {
        const AffineMap map = sol.domain.flow().affine(sol.times[k - 1], t).after(sol.maps[k - 1]);
        target = sol.domain.slice_from_map(t, M, map);
      }
      const std::vector<double> w = history_weights(sol.times, k - 1, t, sol.config.quadrature);
      double local = 0.0;
      for (int j = 0; j < M; ++j) {
        const Vec2 x = mid ? Vec2(target.nodes.col(j)) : sol.node(k, j);
        const Vec2 n = mid ? Vec2(target.normals.col(j)) : sol.normal(k, j);
        double acc = term(x, n, t);
        for (int l = 1; l <= k - 1; ++l)
          if (sums.active(l)) acc += w[l] * sums.normal_sum(l, sums.stride(l, t - sol.times[l]), x, n, t - sol.times[l]);
        const double value = mid ? 0.5 * (sol.p(j, k - 1) + sol.p(j, k)) : sol.p(j, k);
        local = std::max(local, std::abs(value - acc));
      }
      worst(k) = local;
    }
  });
  return worst.maxCoeff();
}

// ---------------------------------------------------------------------------
// studies

std::vector<DeltaGap> delta_convergence_study(const MovingDomain& domain, const Vec2& center,
                                              const std::vector<double>& ms, const SolverConfig& cfg) {
  for (double m : ms) SourceSpec::bump(center, m).validate(domain);
  const DensitySolution point = solve(domain, SourceSpec::point(center), cfg);
  const double scale = point.p.cwiseAbs().maxCoeff();
  std::vector<DeltaGap> table;
  for (double m : ms) {
    const DensitySolution smooth = solve(domain, SourceSpec::bump(center, m), cfg);
    const double gap = (smooth.p - point.p).cwiseAbs().maxCoeff();
    table.push_back({m, gap, gap / scale});
  }
  return table;
}

JumpRelation jump_relation(const MovingDomain& domain, double u_x, double t, const std::vector<double>& offsets,
                           double tol) {
  const ReferenceBoundary& ref = domain.boundary();
  const AffineMap at_t = domain.flow().affine(0.0, t);
  const Vec2 x = at_t(ref.point(u_x));
  const Vec2 tan = at_t.linear * ref.d1(u_x);
  const double orient = at_t.linear.determinant() > 0.0 ? 1.0 : -1.0;
  const Vec2 n = orient * Vec2(tan(1), -tan(0)) / tan.norm();
  const HeatKernelParams params{2};

  auto layer = [&](double h) {
    auto outer = [&](double w) {
      const double s = t - w * w;
      // 2 w K stays bounded as w -> 0, so the sliver where s rounds to t contributes nothing
      if (w <= 0.0 || s >= t) return 0.0;
      const AffineMap at_s = domain.flow().affine(0.0, s);
      auto inner = [&](double u) {
        const Vec2 y = at_s(ref.point(u));
        const double speed = (at_s.linear * ref.d1(u)).norm();
        const double k = h > 0.0 ? offset_normal_kernel(params, x, t, n, h, y, s) : normal_kernel(params, x, t, n, y, s);
        return k * speed;
      };
      // the integrand concentrates within about max(w, h) of x; a Kronrod panel spanning the
      // whole curve would never sample that peak
      const double scale = std::max(w, h) / tan.norm();
      std::vector<double> breaks{u_x};
      for (double c : {1.0, 3.0, 10.0, 30.0, 100.0})
        if (c * scale < kPi) {
          breaks.push_back(u_x - c * scale);
          breaks.push_back(u_x + c * scale);
        }
      std::sort(breaks.begin(), breaks.end());
      // the layer integrals are O(1), so errors are measured against that scale; a purely
      // relative test never settles where the curve is flat and the inner integral nearly vanishes
      const AdaptiveResult r = integrate_adaptive(inner, u_x - kPi, u_x + kPi, 1e-2 * tol / w, tol, 4000, breaks);
      return 2.0 * w * r.value;
    };
    std::vector<double> breaks;
    for (double c : {1.0, 3.0, 10.0, 30.0})
      if (h > 0.0 && c * h < std::sqrt(t)) breaks.push_back(c * h);
    return integrate_adaptive(outer, 0.0, std::sqrt(t), 1e-2 * tol, tol, 4000, breaks).value;
  };

  JumpRelation result;
  result.kernel_integral = layer(0.0);
  for (double h : offsets) {
    const double value = layer(h);
    result.offsets.push_back(h);
    result.values.push_back(value);
    result.gaps.push_back(std::abs(value - (1.0 + result.kernel_integral)));
  }
  return result;
}

}  // namespace fpt
