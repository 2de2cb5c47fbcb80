#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"

#include <span>
#include <vector>

namespace mvs {

/// D fronto-parallel depth planes, uniformly spaced in [d_min, d_max].
class DepthHypotheses {
 public:
  DepthHypotheses(double d_min, double d_max, int count);

  double min() const { return values_.front(); }
  double max() const { return values_.back(); }
  int count() const { return static_cast<int>(values_.size()); }
  double spacing() const { return (max() - min()) / (count() - 1); }
  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }
  DepthRange range() const { return {min(), max()}; }

 private:
  std::vector<double> values_;
};

struct SweepConfig {
  /// Cost assigned where fewer than two views observe the voxel.
  double invalid_cost = 1e3;
};

/// Variance of {reference, warped sources} per voxel, averaged over channels.
/// cams[0] is the reference camera, cams[i + 1] belongs to src_feats[i]; the
/// intrinsics must already be at feature resolution.
CostVolume build_cost_volume(const ImageGrid& ref_feat, std::span<const ImageGrid> src_feats,
                             std::span<const CameraModel> cams, const DepthHypotheses& hyp,
                             const SweepConfig& cfg = {});

/// Separable truncated box filter along H, W and D, repeated `passes` times.
CostVolume regularize_volume(const CostVolume& cost, int radius, int passes);

/// Per-pixel softmax of -cost / temperature over the hypothesis axis.
ProbabilityVolume softmax_probability(const CostVolume& cost, double temperature);

/// Probability-weighted mean of the hypothesis depths.
DepthMap soft_argmin(const ProbabilityVolume& prob, const DepthHypotheses& hyp);

/// d(depth(y, x)) / d(cost(d, y, x)) for the composition
/// soft_argmin(softmax_probability(cost, temperature)). Returned as a D x H x W
/// volume; pixels do not couple.
CostVolume soft_argmin_cost_gradient(const CostVolume& cost, const DepthHypotheses& hyp,
                                     double temperature);

/// Sum of probability over the `window` hypotheses nearest to the regressed
/// depth, clamped at the ends of the hypothesis range.
ProbabilityMap probability_map(const ProbabilityVolume& prob, const DepthMap& depth,
                               const DepthHypotheses& hyp, int window);

}  // namespace mvs
