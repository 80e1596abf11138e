#include "fpt/slice_sums.hpp"

#include <cmath>

namespace fpt {

namespace {

int log2_exact(int v) {
  int r = 0;
  while ((1 << r) < v) ++r;
  return r;
}

constexpr double kCutoff = 80.0;  // (distance^2 / sigma) beyond which a block is skipped

}  // namespace

SliceSums::SliceSums(int slices, int fine_factor)
    : fine_factor_(fine_factor), block_(4 * fine_factor), levels_(static_cast<std::size_t>(slices)) {}

void SliceSums::set(int l, const BoundarySlice& slice, const Eigen::VectorXd& p_fine) {
  Slice& s = levels_[l];
  const int n = slice.size();
  const int depth = log2_exact(fine_factor_) + 1;
  s.active = p_fine.cwiseAbs().maxCoeff() > 0.0;
  s.coarse_spacing = slice.weights.maxCoeff() * fine_factor_;
  s.levels.assign(depth, {});
  for (int d = 0; d < depth; ++d) {
    const int stride = 1 << d;
    const int m = n / stride;
    Level& lv = s.levels[d];
    lv.x.resize(m);
    lv.y.resize(m);
    lv.wp.resize(m);
    for (int i = 0; i < m; ++i) {
      lv.x(i) = slice.nodes(0, i * stride);
      lv.y(i) = slice.nodes(1, i * stride);
      lv.wp(i) = stride * slice.weights(i * stride) * p_fine(i * stride);
    }
  }
  const int blocks = (n + block_ - 1) / block_;
  s.block_center.resize(2, blocks);
  s.block_radius.resize(blocks);
  for (int b = 0; b < blocks; ++b) {
    const int lo = b * block_, hi = std::min(n, lo + block_);
    const Vec2 c = slice.nodes.middleCols(lo, hi - lo).rowwise().mean();
    double r = 0.0;
    for (int i = lo; i < hi; ++i) r = std::max(r, (slice.nodes.col(i) - c).norm());
    s.block_center.col(b) = c;
    s.block_radius(b) = r;
  }
}

int SliceSums::stride(int l, double sigma) const {
  const int f = refinement_factor(levels_[l].coarse_spacing, sigma);
  return f >= fine_factor_ ? 1 : fine_factor_ / f;
}

template <typename Fn>
void SliceSums::for_blocks(int l, int stride, const Vec2& x, double sigma, Fn&& fn) const {
  // Consecutive surviving blocks are merged into one contiguous run per call.
  const Slice& s = levels_[l];
  const Level& lv = s.levels[log2_exact(stride)];
  const int per_block = block_ / stride;
  const int m = static_cast<int>(lv.x.size());
  const double reach2 = kCutoff * sigma;
  const int blocks = static_cast<int>(s.block_radius.size());
  int run_start = -1;
  for (int b = 0; b <= blocks; ++b) {
    bool keep = false;
    if (b < blocks) {
      const double gap = (s.block_center.col(b) - x).norm() - s.block_radius(b);
      keep = !(gap > 0.0 && gap * gap > reach2);
    }
    if (keep && run_start < 0) run_start = b;
    if (!keep && run_start >= 0) {
      const int lo = run_start * per_block;
      const int len = std::min(m, b * per_block) - lo;
      fn(lv.x.segment(lo, len), lv.y.segment(lo, len), lv.wp.segment(lo, len));
      run_start = -1;
    }
  }
}

double SliceSums::normal_sum(int l, int stride, const Vec2& x, const Vec2& n, double sigma) const {
  if (!levels_[l].active) return 0.0;
  const double inv = 1.0 / (2.0 * sigma);
  double acc = 0.0;
  for_blocks(l, stride, x, sigma, [&](const auto& ys, const auto& yy, const auto& wp) {
    acc += ((n(0) * (x(0) - ys) + n(1) * (x(1) - yy)) *
            (-((x(0) - ys).square() + (x(1) - yy).square()) * inv).exp() * wp)
               .sum();
  });
  return -acc / (kTwoPi * sigma * sigma);
}

double SliceSums::gauss_sum(int l, int stride, const Vec2& x, double sigma) const {
  if (!levels_[l].active) return 0.0;
  const double inv = 1.0 / (2.0 * sigma);
  double acc = 0.0;
  for_blocks(l, stride, x, sigma, [&](const auto& ys, const auto& yy, const auto& wp) {
    acc += ((-((x(0) - ys).square() + (x(1) - yy).square()) * inv).exp() * wp).sum();
  });
  return acc / (kTwoPi * sigma);
}

Vec2 SliceSums::gauss_grad_sum(int l, int stride, const Vec2& x, double sigma) const {
  if (!levels_[l].active) return Vec2::Zero();
  const double inv = 1.0 / (2.0 * sigma);
  Vec2 acc = Vec2::Zero();
  for_blocks(l, stride, x, sigma, [&](const auto& ys, const auto& yy, const auto& wp) {
    acc(0) += ((x(0) - ys) * (-((x(0) - ys).square() + (x(1) - yy).square()) * inv).exp() * wp).sum();
    acc(1) += ((x(1) - yy) * (-((x(0) - ys).square() + (x(1) - yy).square()) * inv).exp() * wp).sum();
  });
  return -acc / (kTwoPi * sigma * sigma);
}

}  // namespace fpt
