#ifndef FPT_SLICE_SUMS_HPP
#define FPT_SLICE_SUMS_HPP

#include <vector>

#include <Eigen/Dense>

#include "fpt/geometry.hpp"

namespace fpt {

/// Spatial quadrature of density-weighted heat kernels over stored boundary slices.
///
/// Each slice keeps its fine nodes at every power-of-two stride as contiguous arrays, so a
/// sum at stride s touches only every s-th fine node (weights scaled by s). Nodes are grouped
/// in blocks with bounding circles; a block whose nearest point is more than sqrt(80 sigma)
/// from the target is skipped, which drops terms below exp(-40) relative.
class SliceSums {
 public:
  SliceSums(int slices, int fine_factor);

  int fine_factor() const { return fine_factor_; }
  /// Install slice l with fine density values (one per fine node of `slice`).
  void set(int l, const BoundarySlice& slice, const Eigen::VectorXd& p_fine);
  bool active(int l) const { return levels_[l].active; }
  /// Stride giving spacing <= sqrt(sigma) on slice l, capped by the fine factor.
  int stride(int l, double sigma) const;

  /// sum_i s w_i p_i K(x, t; y_i, t - sigma)
  double normal_sum(int l, int stride, const Vec2& x, const Vec2& n, double sigma) const;
  /// sum_i s w_i p_i G(x, t; y_i, t - sigma)
  double gauss_sum(int l, int stride, const Vec2& x, double sigma) const;
  /// sum_i s w_i p_i grad_x G(x, t; y_i, t - sigma)
  Vec2 gauss_grad_sum(int l, int stride, const Vec2& x, double sigma) const;

 private:
  struct Level {
    Eigen::ArrayXd x, y, wp;
  };
  struct Slice {
    bool active = false;
    double coarse_spacing = 0.0;
    std::vector<Level> levels;  // index = log2(stride)
    Eigen::Matrix2Xd block_center;
    Eigen::ArrayXd block_radius;
  };

  template <typename Fn>
  void for_blocks(int l, int stride, const Vec2& x, double sigma, Fn&& fn) const;

  int fine_factor_;
  int block_;
  std::vector<Slice> levels_;
};

}  // namespace fpt

#endif  // FPT_SLICE_SUMS_HPP
